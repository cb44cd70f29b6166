#pragma once

// Synthetic RTB campaign. Each arm is a click process whose true CTR follows
// a piecewise-linear curve over campaign days.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ams/bandit.hpp"
#include "ams/kpi_monitor.hpp"
#include "ams/report.hpp"
#include "ams/rng.hpp"
#include "ams/selector_loop.hpp"
#include "ams/types.hpp"

namespace ams {

/// Piecewise-linear function day -> CTR, held constant outside its breakpoints.
class CtrCurve {
public:
  using Point = std::pair<double, double>;  // (day, ctr)

  CtrCurve() = default;
  explicit CtrCurve(std::vector<Point> points);
  static CtrCurve constant(double ctr) { return CtrCurve({{0.0, ctr}}); }

  double at(double day) const;
  const std::vector<Point>& points() const noexcept { return points_; }

private:
  std::vector<Point> points_;
};

enum class VolumeModel { Fixed, Poisson };

struct SimArm {
  ArmId id;
  CtrCurve curve;
};

struct SimScenario {
  std::string name = "custom";
  std::vector<SimArm> arms;
  double impressions_per_interval = 100.0;  // exact count or Poisson mean
  VolumeModel volume = VolumeModel::Fixed;
  std::int64_t cost_per_impression_micros = 2'000;
  double duration_days = 30.0;
  double conversion_rate_per_click = 0.0;
  Timestamp start_time = 0;

  void validate() const;
  std::vector<ArmId> arm_ids() const;
  const CtrCurve& curve(const ArmId& arm) const;
  Duration duration_seconds() const;
  double day_of(double ts) const;
};

/// Traffic for one activation interval [start, end): impression count, then a
/// Bernoulli click per impression at the mid-interval CTR, then a Bernoulli
/// conversion per click. Timestamps are spread evenly across the interval.
std::vector<Event> step(const SimScenario& scenario, const ArmId& active, Timestamp start,
                        Timestamp end, Rng& rng);

/// EventSource adapter over step() with its own random stream.
class SimulatedCampaign final : public EventSource {
public:
  SimulatedCampaign(const SimScenario& scenario, std::uint64_t seed);
  std::vector<Event> generate(const ArmId& active, Timestamp start, Timestamp end) override;

private:
  const SimScenario& scenario_;
  Rng rng_;
};

struct SimResult {
  std::vector<ArmId> arms;
  Timestamp start_time = 0;
  Duration run_duration = 0;
  std::vector<Event> events;
  std::vector<SelectionDecision> decisions;
  std::vector<DailyRow> daily;
  LoopState final_state;
  std::int64_t total_clicks = 0;
  double regret = 0.0;
};

SimResult run_scenario(const SimScenario& scenario, const PolicyConfig& policy,
                       ScheduleConfig schedule, const KpiSpec& kpi, std::uint64_t seed);

/// Deterministic round-robin over arms, one interval each: the equal-split
/// A/B test.
SimResult ab_baseline(const SimScenario& scenario, const ScheduleConfig& schedule,
                      const KpiSpec& kpi, std::uint64_t seed);

/// Expected clicks forgone against the pointwise-best arm, summed over
/// activation intervals using the curves' mid-interval CTR and the scenario's
/// expected volume.
double regret(const SimResult& result, const SimScenario& scenario);

/// Named built-in scenarios: "lookback" and "features".
SimScenario preset_scenario(std::string_view name);
bool is_preset(std::string_view name);

/// Parses the key/value scenario format (see README). Errors carry the line.
SimScenario parse_scenario(std::string_view text);
SimScenario load_scenario(const std::filesystem::path& path);
std::string format_scenario(const SimScenario& scenario);

}  // namespace ams
