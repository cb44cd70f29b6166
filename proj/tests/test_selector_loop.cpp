#include <doctest.h>

#include <set>

#include "ams/campaign_sim.hpp"
#include "ams/selector_loop.hpp"

using namespace ams;

namespace {

SimScenario two_arms(double ctr_a, double ctr_b, double days) {
  SimScenario s;
  s.arms = {{ArmId("A"), CtrCurve::constant(ctr_a)}, {ArmId("B"), CtrCurve::constant(ctr_b)}};
  s.duration_days = days;
  return s;
}

// Emits nothing; lets cadence be tested without traffic.
class Silent final : public EventSource {
public:
  std::vector<Event> generate(const ArmId&, Timestamp, Timestamp) override { return {}; }
};

// Emits an event at the interval end, then one at its start.
class OutOfOrder final : public EventSource {
public:
  std::vector<Event> generate(const ArmId&, Timestamp start, Timestamp end) override {
    return {Event{end, EventKind::Impression, 0, {}}, Event{start, EventKind::Impression, 0, {}}};
  }
};

ScheduleConfig days(double d) {
  ScheduleConfig s;
  s.run_duration = static_cast<Duration>(d * kSecondsPerDay);
  return s;
}

}  // namespace

TEST_CASE("cadence: 96 decisions per day plus the initial one") {
  Silent source;
  const std::vector<ArmId> arms{ArmId("A"), ArmId("B")};
  const auto out = run(arms, source, PolicyConfig{}, days(2), KpiSpec{}, 1, 0);
  CHECK(out.decisions.size() == 193);
  CHECK(out.final_state.refresh_count == 2);
  CHECK(out.final_state.last_refresh == 2 * kSecondsPerDay);
  CHECK(out.decisions.front().timestamp == 0);
  CHECK(out.decisions.back().timestamp == 2 * kSecondsPerDay);
  for (std::size_t i = 1; i < out.decisions.size(); ++i) {
    CHECK(out.decisions[i].timestamp - out.decisions[i - 1].timestamp == 900);
  }
  std::int64_t activations = 0;
  for (const auto& [arm, n] : out.final_state.activations) activations += n;
  CHECK(activations == 193);
}

TEST_CASE("epsilon in the decision log decays to zero") {
  Silent source;
  PolicyConfig policy;
  policy.alpha_days = 1.0;
  const auto out = run({ArmId("A"), ArmId("B")}, source, policy, days(2), KpiSpec{}, 9, 500);
  for (std::size_t i = 1; i < out.decisions.size(); ++i) {
    CHECK(out.decisions[i].epsilon_used <= out.decisions[i - 1].epsilon_used);
  }
  CHECK(out.decisions.front().epsilon_used == 0.3);
  for (const auto& d : out.decisions) {
    if (d.timestamp - 500 >= kSecondsPerDay) CHECK(d.epsilon_used == 0.0);
  }
}

TEST_CASE("a single arm is always chosen with probability 1") {
  Silent source;
  const auto out = run({ArmId("only")}, source, PolicyConfig{}, days(1), KpiSpec{}, 4, 0);
  for (const auto& d : out.decisions) {
    CHECK(d.chosen == ArmId("only"));
    CHECK(d.probabilities.at(ArmId("only")) == 1.0);
  }
}

TEST_CASE("runs are deterministic for a fixed seed") {
  const auto scenario = two_arms(0.02, 0.01, 3);
  const auto a = run_scenario(scenario, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 17);
  const auto b = run_scenario(scenario, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 17);
  CHECK(a.decisions == b.decisions);
  CHECK(a.events == b.events);
  CHECK(a.daily == b.daily);
  const auto c = run_scenario(scenario, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 18);
  CHECK_FALSE(a.events == c.events);
}

TEST_CASE("greedy fixed point once epsilon reaches zero") {
  PolicyConfig policy;
  policy.alpha_days = 1.0;
  const auto r = run_scenario(two_arms(0.05, 0.01, 4), policy, ScheduleConfig{}, KpiSpec{}, 2);
  for (const auto& d : r.decisions) {
    if (d.timestamp >= 2 * kSecondsPerDay) {
      CHECK(d.chosen == ArmId("A"));
      CHECK(d.probabilities.at(ArmId("A")) == 1.0);
    }
  }
}

TEST_CASE("scores refresh only on the refresh cadence") {
  SelectorLoop loop({ArmId("A"), ArmId("B")}, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 1, 0);
  std::vector<Event> events;
  for (int i = 0; i < 200; ++i) events.push_back({i, EventKind::Impression, 10, ArmId("A")});
  for (int i = 0; i < 10; ++i) events.push_back({300 + i, EventKind::Click, 0, ArmId("A")});

  REQUIRE(loop.tick(0, events));
  CHECK(loop.state().refresh_count == 0);
  CHECK_FALSE(loop.tick(899, events));  // between swaps
  REQUIRE(loop.tick(900, events));
  CHECK(loop.state().refresh_count == 0);
  CHECK_FALSE(loop.state().current_scores[0].qualified);

  REQUIRE(loop.tick(kSecondsPerDay, events));
  CHECK(loop.state().refresh_count == 1);
  CHECK(loop.state().current_scores[0].qualified);
  CHECK(loop.state().current_scores[0].kpi_value == doctest::Approx(0.05));
  CHECK(loop.state().current_snapshots[0].impressions == 200);
  const auto& d = loop.state().decision_log.back();
  CHECK(d.probabilities.at(ArmId("A")) == doctest::Approx(1.0 - d.epsilon_used / 2));
}

TEST_CASE("late ticks land on the swap grid") {
  SelectorLoop loop({ArmId("A")}, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 1, 100);
  REQUIRE(loop.tick(100, {}));
  REQUIRE(loop.tick(100 + 900 * 3 + 17, {}));
  CHECK(loop.state().next_swap == 100 + 900 * 4);
  CHECK(loop.state().decision_log.size() == 2);
}

TEST_CASE("clock regression is fatal") {
  SelectorLoop loop({ArmId("A")}, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 1, 0);
  loop.tick(1000, {});
  CHECK_THROWS_AS(loop.tick(999, {}), ClockRegression);

  ManualClock clock(50);
  clock.advance(10);
  CHECK(clock.now() == 60);
  CHECK_THROWS_AS(clock.set(59), ClockRegression);
}

TEST_CASE("decision log induces a valid ledger") {
  const auto r = run_scenario(two_arms(0.02, 0.015, 2), PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 5);
  const auto ledger = AttributionLedger::from_decisions(r.decisions);
  CHECK(ledger.intervals().size() == r.decisions.size());
  for (const auto& e : r.events) CHECK(*ledger.lookup(e.timestamp) == *e.arm);
}

TEST_CASE("arm_at follows the decision log") {
  SelectorLoop loop({ArmId("A"), ArmId("B")}, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 3, 0);
  CHECK_FALSE(loop.arm_at(0).has_value());
  loop.tick(0, {});
  loop.tick(900, {});
  CHECK(loop.arm_at(0) == loop.state().decision_log[0].chosen);
  CHECK(loop.arm_at(899) == loop.state().decision_log[0].chosen);
  CHECK(loop.arm_at(900) == loop.state().decision_log[1].chosen);
  CHECK(loop.arm_at(-1) == std::nullopt);
}

TEST_CASE("restore continues the same sequence") {
  const std::vector<ArmId> arms{ArmId("A"), ArmId("B"), ArmId("C")};
  SelectorLoop original(arms, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 8, 0);
  for (int i = 0; i < 10; ++i) original.tick(i * 900, {});
  SelectorLoop copy(arms, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 8, 0);
  copy.restore(original.state().decision_log, std::nullopt, 0, {});
  CHECK(copy.state().next_swap == original.state().next_swap);
  CHECK(copy.state().activations == original.state().activations);
  CHECK(copy.arm_at(5000) == original.arm_at(5000));

  auto bad = original.state().decision_log;
  std::swap(bad[0], bad[1]);
  SelectorLoop other(arms, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 8, 0);
  CHECK_THROWS_AS(other.restore(bad, std::nullopt, 0, {}), std::invalid_argument);
}

TEST_CASE("comparator policies inside the loop") {
  const auto scenario = two_arms(0.03, 0.01, 3);
  SUBCASE("UCB tries every arm first and records one-hot vectors") {
    PolicyConfig p;
    p.kind = PolicyKind::UCB;
    const auto r = run_scenario(scenario, p, ScheduleConfig{}, KpiSpec{}, 1);
    CHECK(r.decisions[0].chosen != r.decisions[1].chosen);
    for (const auto& d : r.decisions) CHECK(d.probabilities.at(d.chosen) == 1.0);
  }
  SUBCASE("softmax is uniform until every arm qualifies") {
    PolicyConfig p;
    p.kind = PolicyKind::Softmax;
    const auto r = run_scenario(scenario, p, ScheduleConfig{}, KpiSpec{}, 1);
    CHECK(r.decisions[0].probabilities.at(ArmId("A")) == 0.5);
    // With a CTR gap near 0.02 and T = 0.01 the favourite sits near e^2 / (1 + e^2).
    const auto expected = softmax_probabilities(r.final_state.current_scores, 0.01);
    CHECK(r.decisions.back().probabilities == expected);
    CHECK(expected.at(ArmId("A")) > 0.8);
  }
  SUBCASE("Thompson exploits the better arm after the first refresh") {
    PolicyConfig p;
    p.kind = PolicyKind::ThompsonBetaBernoulli;
    const auto r = run_scenario(scenario, p, ScheduleConfig{}, KpiSpec{}, 1);
    int a = 0, total = 0;
    for (const auto& d : r.decisions) {
      if (d.timestamp < 2 * kSecondsPerDay) continue;
      ++total;
      a += d.chosen == ArmId("A");
    }
    CHECK(a > total * 9 / 10);
  }
  SUBCASE("round robin alternates") {
    PolicyConfig p;
    p.kind = PolicyKind::RoundRobin;
    const auto r = run_scenario(scenario, p, ScheduleConfig{}, KpiSpec{}, 1);
    for (std::size_t i = 0; i < r.decisions.size(); ++i) {
      CHECK(r.decisions[i].chosen == (i % 2 == 0 ? ArmId("A") : ArmId("B")));
    }
  }
}

TEST_CASE("invalid loop construction") {
  Silent source;
  CHECK_THROWS_AS(run({}, source, PolicyConfig{}, days(1), KpiSpec{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(SelectorLoop({ArmId("A"), ArmId("A")}, PolicyConfig{}, ScheduleConfig{}, KpiSpec{}, 1, 0),
                  std::invalid_argument);
  ScheduleConfig bad;
  bad.swap_interval = 2 * kSecondsPerDay;
  CHECK_THROWS_AS(SelectorLoop({ArmId("A")}, PolicyConfig{}, bad, KpiSpec{}, 1, 0), std::invalid_argument);

  OutOfOrder broken;
  CHECK_THROWS_AS(run({ArmId("A")}, broken, PolicyConfig{}, days(1), KpiSpec{}, 1), std::logic_error);
}
