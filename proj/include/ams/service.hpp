#pragma once

// Live service: one campaign per process. HTTP handlers ingest events and
// read published selector snapshots; only pump() advances the selector.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include <json.hpp>

#include "ams/config.hpp"
#include "ams/event_store.hpp"
#include "ams/kpi_monitor.hpp"
#include "ams/selector_loop.hpp"

namespace httplib {
class Server;
}

namespace ams {

/// Maps to HTTP 400. The message names the offending field.
class BadRequest : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Maps to HTTP 409.
class RunConflict : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Maps to HTTP 404.
class NoSuchRun : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Service {
public:
  Service(std::shared_ptr<const Clock> clock, std::filesystem::path out_dir);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Starts a live run at the current clock time and makes the initial
  /// selection. Throws RunConflict while another run is still active.
  std::string start_run(RunConfig config);

  /// Rebuilds a run from `<run_id>.run.json` and its logs in the output
  /// directory, as after a process restart.
  void resume_run(const std::string& run_id);

  /// Ticks the selector at the clock's current time.
  void pump();

  /// Accepts {"events": [...]} or a bare array of event objects. The batch is
  /// validated as a whole; returns the number of accepted events.
  std::size_t ingest(const nlohmann::json& body);

  nlohmann::json selection() const;
  nlohmann::json stats() const;
  nlohmann::json run_status(const std::string& run_id) const;

  void register_routes(httplib::Server& server);

  /// Calls pump() every `period` on a background thread until stop_ticker().
  void start_ticker(std::chrono::milliseconds period);
  void stop_ticker();

private:
  struct Run;
  struct Published;

  void publish_locked();
  std::shared_ptr<const Published> published() const;

  std::shared_ptr<const Clock> clock_;
  std::filesystem::path out_dir_;

  std::mutex timeline_mutex_;  // serializes ticking, ingestion and run changes
  std::unique_ptr<Run> run_;

  mutable std::mutex publish_mutex_;
  std::shared_ptr<const Published> published_;

  std::atomic<bool> ticking_{false};
  std::thread ticker_;
};

}  // namespace ams
