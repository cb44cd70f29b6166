#pragma once

// Model selector: swaps the active arm on a fixed cadence, refreshes KPI
// scores on a slower cadence, and logs every decision.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ams/bandit.hpp"
#include "ams/kpi_monitor.hpp"
#include "ams/report.hpp"
#include "ams/rng.hpp"
#include "ams/types.hpp"

namespace ams {

struct ScheduleConfig {
  Duration swap_interval = 15 * 60;
  Duration kpi_refresh_interval = kSecondsPerDay;
  Duration run_duration = kSecondsPerDay;

  void validate() const;
};

/// Thrown when time moves backwards. The loop cannot continue after this.
class ClockRegression : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Clock {
public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

/// Time that only moves when told to. Used for simulation and tests.
class ManualClock final : public Clock {
public:
  explicit ManualClock(Timestamp start) : now_(start) {}
  Timestamp now() const override { return now_; }
  void set(Timestamp t);
  void advance(Duration d) { set(now_ + d); }

private:
  Timestamp now_;
};

class WallClock final : public Clock {
public:
  Timestamp now() const override;
};

struct LoopState {
  Timestamp start_time = 0;
  Timestamp now = 0;
  double elapsed_days = 0.0;
  std::optional<ArmId> current_arm;
  std::vector<ArmScore> current_scores;
  std::vector<ArmKpiSnapshot> current_snapshots;
  std::vector<SelectionDecision> decision_log;

  Timestamp next_swap = 0;
  Timestamp next_refresh = 0;
  std::optional<Timestamp> last_refresh;
  std::int64_t refresh_count = 0;
  std::map<ArmId, std::int64_t> activations;
};

/// Owns the selection state for one campaign. Not thread-safe; a single
/// thread drives tick() and publishes copies of state() to readers.
class SelectorLoop {
public:
  SelectorLoop(std::vector<ArmId> arms, PolicyConfig policy, ScheduleConfig schedule, KpiSpec kpi,
               std::uint64_t seed, Timestamp start_time);

  /// Advances to `now`. At a swap boundary the KPI refresh (if due) runs
  /// first, then a new arm is selected and logged. `events` must be the
  /// attributed event log sorted by timestamp.
  std::optional<SelectionDecision> tick(Timestamp now, std::span<const Event> events);

  /// Convenience overload reading time from `clock`.
  std::optional<SelectionDecision> tick(const Clock& clock, std::span<const Event> events) {
    return tick(clock.now(), events);
  }

  const LoopState& state() const noexcept { return state_; }
  const std::vector<ArmId>& arms() const noexcept { return arms_; }
  const PolicyConfig& policy() const noexcept { return policy_; }
  const ScheduleConfig& schedule() const noexcept { return schedule_; }
  const KpiSpec& kpi() const noexcept { return kpi_; }

  /// Arm owning timestamp `ts` according to the decisions so far.
  std::optional<ArmId> arm_at(Timestamp ts) const;

  /// Recomputes scores at `now` from `events` without selecting. Used when a
  /// loop is rebuilt from persisted logs.
  void refresh_scores(Timestamp now, std::span<const Event> events);

  /// Restores decision history (e.g. after a restart). Decisions must be
  /// strictly increasing and later than the loop start.
  void restore(std::vector<SelectionDecision> decisions, std::optional<Timestamp> last_refresh,
               std::int64_t refresh_count, std::span<const Event> events);

private:
  ProbabilityVector build_probabilities(double epsilon) const;
  SelectionDecision decide(Timestamp now);
  Timestamp next_boundary(Timestamp now, Duration interval) const;

  std::vector<ArmId> arms_;
  PolicyConfig policy_;
  ScheduleConfig schedule_;
  KpiSpec kpi_;
  std::uint64_t seed_;
  Rng rng_;
  LoopState state_;
};

/// Produces the traffic for one activation interval [start, end).
class EventSource {
public:
  virtual ~EventSource() = default;
  virtual std::vector<Event> generate(const ArmId& active, Timestamp start, Timestamp end) = 0;
};

struct RunOutput {
  std::vector<SelectionDecision> decisions;
  std::vector<Event> events;  // attributed at ingestion
  LoopState final_state;
  std::vector<DailyRow> daily;
};

/// Drives a loop on a simulated clock for schedule.run_duration, pulling each
/// interval's traffic from `source`. Deterministic for a deterministic source.
RunOutput run(std::vector<ArmId> arms, EventSource& source, const PolicyConfig& policy,
              const ScheduleConfig& schedule, const KpiSpec& kpi, std::uint64_t seed,
              Timestamp start_time = 0);

}  // namespace ams
