#pragma once

// Performance monitor: attributes traffic to the arm that was active when it
// was bought and computes trailing-window KPIs per arm.

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ams/bandit.hpp"
#include "ams/types.hpp"

namespace ams {

enum class KpiKind { CTR, CPC, CPA };

std::string_view to_string(KpiKind kind);
KpiKind kpi_kind_from_string(std::string_view text);

struct KpiSpec {
  KpiKind kind = KpiKind::CTR;
  double lookback_days = 30.0;
  std::int64_t min_samples = 100;

  Direction direction() const {
    return kind == KpiKind::CTR ? Direction::Maximize : Direction::Minimize;
  }
  Duration lookback_seconds() const;
  void validate() const;
};

struct ArmKpiSnapshot {
  ArmId arm;
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::int64_t conversions = 0;
  std::int64_t spend_micros = 0;
  std::optional<double> kpi_value;  // empty when the denominator is zero

  friend bool operator==(const ArmKpiSnapshot&, const ArmKpiSnapshot&) = default;
};

/// Raised for unsorted or overlapping attribution intervals.
class InvalidLedger : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct LedgerInterval {
  Timestamp start = 0;
  Timestamp end = 0;  // exclusive
  ArmId arm;
};

/// Half-open activation intervals [start, end), sorted and non-overlapping.
class AttributionLedger {
public:
  AttributionLedger() = default;
  explicit AttributionLedger(std::vector<LedgerInterval> intervals);

  /// Builds the ledger induced by a decision log: decision i owns
  /// [t_i, t_{i+1}); the last decision owns [t_last, open_end).
  static AttributionLedger from_decisions(std::span<const SelectionDecision> decisions,
                                          Timestamp open_end = kOpenEnd);

  static constexpr Timestamp kOpenEnd = INT64_MAX;

  const std::vector<LedgerInterval>& intervals() const noexcept { return intervals_; }

  /// Arm active at `ts`, if any interval contains it.
  const ArmId* lookup(Timestamp ts) const;

private:
  std::vector<LedgerInterval> intervals_;
};

/// Copies `events` with each arm set from the ledger. Events outside every
/// interval come back unattributed.
std::vector<Event> attribute_events(std::span<const Event> events, const AttributionLedger& ledger);

/// Counts events of `arm` with timestamp in [now - lookback, now).
ArmKpiSnapshot windowed_kpi(std::span<const Event> events, const ArmId& arm, const KpiSpec& spec,
                            Timestamp now);

/// Windowed snapshot for every registered arm from already-attributed events.
/// Throws std::invalid_argument if an event carries an unregistered arm.
std::vector<ArmKpiSnapshot> snapshot_arms(std::span<const Event> attributed,
                                          std::span<const ArmId> arms, const KpiSpec& spec,
                                          Timestamp now);

/// Converts snapshots to selector scores. An arm is qualified when its window
/// holds at least min_samples impressions and its KPI is defined.
std::vector<ArmScore> to_scores(std::span<const ArmKpiSnapshot> snapshots, const KpiSpec& spec);

/// Attribution followed by windowed scoring of every registered arm.
std::vector<ArmScore> snapshot_all(std::span<const Event> events, const AttributionLedger& ledger,
                                   const KpiSpec& spec, std::span<const ArmId> arms, Timestamp now);

/// Append-only in-memory event sequence with one writer and any number of
/// readers. Readers see a consistent prefix.
class EventBuffer {
public:
  void append(Event event);
  void append(std::span<const Event> events);
  std::size_t size() const;

  /// Runs `reader` on the current contents while holding a shared lock.
  void read(const std::function<void(std::span<const Event>)>& reader) const;

  std::vector<Event> copy() const;

private:
  mutable std::shared_mutex mutex_;
  std::vector<Event> events_;
};

}  // namespace ams
