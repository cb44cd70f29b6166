#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ams/campaign_sim.hpp"

using namespace ams;

namespace {

SimScenario constant_pair(double a, double b, double days) {
  SimScenario s;
  s.arms = {{ArmId("A"), CtrCurve::constant(a)}, {ArmId("B"), CtrCurve::constant(b)}};
  s.duration_days = days;
  return s;
}

std::int64_t count(const std::vector<Event>& events, EventKind kind) {
  return std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.kind == kind; });
}

}  // namespace

TEST_CASE("CtrCurve interpolates and clamps") {
  const CtrCurve c({{0.0, 0.01}, {10.0, 0.03}});
  CHECK(c.at(-5) == 0.01);
  CHECK(c.at(5) == doctest::Approx(0.02));
  CHECK(c.at(50) == 0.03);
  CHECK_THROWS_AS(CtrCurve(std::vector<CtrCurve::Point>{}), std::invalid_argument);
  CHECK_THROWS_AS(CtrCurve({{1.0, 0.1}, {1.0, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(CtrCurve({{0.0, 1.5}}), std::invalid_argument);
}

TEST_CASE("step at the CTR extremes") {
  Rng rng(1);
  auto s = constant_pair(0.0, 1.0, 1);
  const auto none = step(s, ArmId("A"), 0, 900, rng);
  CHECK(count(none, EventKind::Impression) == 100);
  CHECK(count(none, EventKind::Click) == 0);
  const auto all = step(s, ArmId("B"), 0, 900, rng);
  CHECK(count(all, EventKind::Click) == 100);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i].timestamp >= all[i - 1].timestamp);
  CHECK(all.front().timestamp == 0);
  CHECK(all.back().timestamp < 900);
  CHECK(all.front().cost_micros == 2000);
}

TEST_CASE("clicks concentrate around the binomial mean") {
  SimScenario s = constant_pair(0.02, 0.02, 1);
  s.impressions_per_interval = 1'000'000;
  Rng rng(12);
  const auto events = step(s, ArmId("A"), 0, 900, rng);
  const double clicks = static_cast<double>(count(events, EventKind::Click));
  const double sd = std::sqrt(1e6 * 0.02 * 0.98);
  CHECK(std::abs(clicks - 20'000) < 5 * sd);
}

TEST_CASE("poisson volume averages to the mean") {
  SimScenario s = constant_pair(0.02, 0.02, 1);
  s.volume = VolumeModel::Poisson;
  Rng rng(3);
  std::int64_t total = 0;
  for (int i = 0; i < 96; ++i) total += count(step(s, ArmId("A"), i * 900, (i + 1) * 900, rng), EventKind::Impression);
  CHECK(std::abs(static_cast<double>(total) / 96 - 100.0) < 5.0);
}

TEST_CASE("symmetric arms share traffic under uniform selection") {
  PolicyConfig uniform;
  uniform.kind = PolicyKind::UniformRandom;
  const auto r = run_scenario(constant_pair(0.02, 0.02, 10), uniform, ScheduleConfig{}, KpiSpec{}, 6);
  std::int64_t a = 0;
  for (const auto& e : r.events) a += e.kind == EventKind::Impression && e.arm == ArmId("A");
  const double share = static_cast<double>(a) / static_cast<double>(count(r.events, EventKind::Impression));
  CHECK(std::abs(share - 0.5) < 0.05);
}

TEST_CASE("round robin baseline: 48 activations per arm per day") {
  const auto s = constant_pair(0.02, 0.01, 1);
  const auto r = ab_baseline(s, ScheduleConfig{}, KpiSpec{}, 1);
  std::map<ArmId, int> n;
  for (const auto& d : r.decisions) {
    if (d.timestamp < kSecondsPerDay) ++n[d.chosen];
  }
  CHECK(n[ArmId("A")] == 48);
  CHECK(n[ArmId("B")] == 48);
  // Half of 96 intervals on the worse arm, 0.01 CTR short, 100 impressions each.
  CHECK(r.regret == doctest::Approx(0.5 * 100 * 96 * 0.01).epsilon(1e-12));
}

TEST_CASE("regret is zero for the oracle and checks scenario identity") {
  const auto s = constant_pair(0.02, 0.01, 2);
  SimResult r;
  r.arms = s.arm_ids();
  r.run_duration = s.duration_seconds();
  for (Timestamp t = 0; t <= r.run_duration; t += 900) r.decisions.push_back({t, {}, ArmId("A"), 0.0});
  CHECK(regret(r, s) == 0.0);
  r.decisions[3].chosen = ArmId("B");
  CHECK(regret(r, s) == doctest::Approx(1.0));
  const auto other = constant_pair(0.02, 0.01, 3);
  CHECK_THROWS_AS(regret(r, other), std::invalid_argument);
}

TEST_CASE("every event is attributed and impressions are conserved") {
  const auto r = run_scenario(preset_scenario("lookback"), PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 2);
  CHECK(count(r.events, EventKind::Impression) == 30 * 96 * 100);
  for (const auto& e : r.events) CHECK(e.arm.has_value());
  std::int64_t final_total = 0;
  for (const auto& row : r.daily) {
    if (row.day == 30) final_total += row.cumulative_impressions;
  }
  CHECK(final_total == 30 * 96 * 100);
  CHECK(r.daily.size() == 31 * 2);
  CHECK(r.total_clicks == count(r.events, EventKind::Click));
}

TEST_CASE("step rejects intervals outside the scenario") {
  Rng rng(1);
  const auto s = constant_pair(0.1, 0.1, 1);
  CHECK_THROWS_AS(step(s, ArmId("A"), -900, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(step(s, ArmId("A"), kSecondsPerDay, kSecondsPerDay + 900, rng), std::invalid_argument);
  CHECK_THROWS_AS(step(s, ArmId("Z"), 0, 900, rng), std::invalid_argument);
}

TEST_CASE("presets") {
  CHECK(is_preset("lookback"));
  CHECK_FALSE(is_preset("other"));
  const auto lb = preset_scenario("lookback");
  CHECK(lb.curve(ArmId("B")).at(5) < lb.curve(ArmId("A")).at(5));
  CHECK(lb.curve(ArmId("B")).at(7.5) > lb.curve(ArmId("A")).at(7.5));
  const auto ft = preset_scenario("features");
  for (double d = 0; d <= 30; d += 0.5) CHECK(ft.curve(ArmId("A")).at(d) > ft.curve(ArmId("B")).at(d));
  CHECK_THROWS_AS(preset_scenario("nope"), std::invalid_argument);
}

TEST_CASE("scenario text format") {
  const char* text =
      "# two arms\n"
      "name = demo\n"
      "duration_days = 3\n"
      "impressions_per_interval = 50   # per swap\n"
      "volume_model = poisson\n"
      "arm.A = 0:0.01 2:0.03\n"
      "arm.B = 0:0.02\n";
  const auto s = parse_scenario(text);
  CHECK(s.name == "demo");
  CHECK(s.duration_days == 3);
  CHECK(s.volume == VolumeModel::Poisson);
  CHECK(s.curve(ArmId("A")).at(1) == doctest::Approx(0.02));
  CHECK(parse_scenario(format_scenario(s)).arm_ids() == s.arm_ids());
  CHECK(format_scenario(parse_scenario(format_scenario(s))) == format_scenario(s));

  auto fails_on_line = [](const char* bad, const char* line) {
    try {
      parse_scenario(bad);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what()).find(line) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_on_line("arm.A = 0:0.1\nbogus = 1\n", "line 2"));
  CHECK(fails_on_line("arm.A = 0:x\n", "line 1"));
  CHECK(fails_on_line("arm.A = 0:0.1\nno equals sign\n", "line 2"));
  CHECK(fails_on_line("arm.A = 1:0.1 0:0.2\n", "line 1"));
  CHECK_THROWS_AS(parse_scenario("name = empty\n"), std::invalid_argument);

  const auto path = std::filesystem::temp_directory_path() / "ams_missing_scenario.txt";
  std::filesystem::remove(path);
  CHECK_THROWS_WITH_AS(load_scenario(path), doctest::Contains(path.string().c_str()), std::runtime_error);
}
