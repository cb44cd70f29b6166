#pragma once

// Line-delimited JSON logs for events and selection decisions.
//
// Every line is one object:
//   {"schema_version":1,"run_id":"r","type":"event","ts":0,"kind":"impression",
//    "cost_micros":2000,"arm":"A"}
//   {"schema_version":1,"run_id":"r","type":"decision","ts":0,"chosen":"A",
//    "epsilon":0.3,"probabilities":[{"arm":"A","p":0.85},{"arm":"B","p":0.15}]}
// "arm" is null for unattributed events. Timestamps are integer seconds and
// spend is integer micro-units.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ams/bandit.hpp"
#include "ams/kpi_monitor.hpp"
#include "ams/report.hpp"
#include "ams/types.hpp"

namespace ams {

inline constexpr int kSchemaVersion = 1;

struct LogRecord {
  std::variant<Event, SelectionDecision> payload;
  int schema_version = kSchemaVersion;
  std::string run_id;

  Timestamp timestamp() const;
  bool is_event() const { return std::holds_alternative<Event>(payload); }
};

std::string encode_record(const LogRecord& record);
/// Throws std::invalid_argument on malformed input or an unsupported schema.
LogRecord decode_record(std::string_view line);

/// Appending to a log with a timestamp older than the last record of the
/// same type.
class OrderingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct LoadedLogs {
  std::vector<Event> events;
  std::vector<SelectionDecision> decisions;
};

/// A log file failed to parse. `partial` holds every record before `line`.
class LoadError : public std::runtime_error {
public:
  LoadError(const std::string& path, std::size_t line, const std::string& reason,
            LoadedLogs partial);
  std::size_t line() const noexcept { return line_; }
  const LoadedLogs& partial() const noexcept { return partial_; }

private:
  std::size_t line_;
  LoadedLogs partial_;
};

/// Single-writer append-only log file.
class LogWriter {
public:
  /// Opens `path` for appending. Existing records seed the ordering check.
  explicit LogWriter(std::filesystem::path path);

  void append(const LogRecord& record);
  void flush();
  const std::filesystem::path& path() const noexcept { return path_; }
  std::size_t appended() const noexcept { return appended_; }

private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::optional<Timestamp> last_event_;
  std::optional<Timestamp> last_decision_;
  std::size_t appended_ = 0;
};

/// Reads every record of `path`. A missing file is an error; an empty file
/// yields empty logs.
LoadedLogs load(const std::filesystem::path& path);

struct RunPaths {
  std::filesystem::path events;
  std::filesystem::path decisions;
};

RunPaths run_paths(const std::filesystem::path& dir, const std::string& run_id);

/// Writes a whole run as fresh files, replacing any previous content.
void write_run(const std::filesystem::path& dir, const std::string& run_id,
               std::span<const Event> events, std::span<const SelectionDecision> decisions);

/// Loads both files of a run and merges them.
LoadedLogs load_run(const std::filesystem::path& dir, const std::string& run_id);

/// Recomputes the per-day report purely from logs: ledger attribution of the
/// events, trailing-window CTR with `kpi.lookback_days`, and the decision
/// probabilities. Throws InvalidLedger if the logs disagree with each other.
std::vector<DailyRow> replay(std::span<const Event> events,
                             std::span<const SelectionDecision> decisions, const KpiSpec& kpi);

}  // namespace ams
