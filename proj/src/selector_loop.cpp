#include "ams/selector_loop.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <string>

namespace ams {

namespace {

constexpr std::uint64_t kSelectorStream = 1;

std::span<const Event> window_of(std::span<const Event> events, Timestamp from, Timestamp to) {
  auto lo = std::lower_bound(events.begin(), events.end(), from,
                             [](const Event& e, Timestamp t) { return e.timestamp < t; });
  auto hi = std::lower_bound(lo, events.end(), to,
                             [](const Event& e, Timestamp t) { return e.timestamp < t; });
  return {lo, hi};
}

}  // namespace

void ScheduleConfig::validate() const {
  if (swap_interval <= 0 || kpi_refresh_interval <= 0 || run_duration <= 0) {
    throw std::invalid_argument("schedule durations must be positive");
  }
  if (swap_interval > kpi_refresh_interval) {
    throw std::invalid_argument("swap interval must not exceed the KPI refresh interval");
  }
}

void ManualClock::set(Timestamp t) {
  if (t < now_) throw ClockRegression("manual clock moved backwards");
  now_ = t;
}

Timestamp WallClock::now() const {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

SelectorLoop::SelectorLoop(std::vector<ArmId> arms, PolicyConfig policy, ScheduleConfig schedule,
                           KpiSpec kpi, std::uint64_t seed, Timestamp start_time)
    : arms_(std::move(arms)),
      policy_(policy),
      schedule_(schedule),
      kpi_(kpi),
      seed_(seed),
      rng_(seed, kSelectorStream) {
  if (arms_.empty()) throw std::invalid_argument("at least one arm must be registered");
  if (std::set<ArmId>(arms_.begin(), arms_.end()).size() != arms_.size()) {
    throw std::invalid_argument("arm ids must be unique");
  }
  policy_.validate();
  schedule_.validate();
  kpi_.validate();

  state_.start_time = start_time;
  state_.now = start_time;
  state_.next_swap = start_time;
  state_.next_refresh = start_time + schedule_.kpi_refresh_interval;
  for (const auto& arm : arms_) {
    state_.activations[arm] = 0;
    ArmKpiSnapshot snap;
    snap.arm = arm;
    snap.window_start = start_time - kpi_.lookback_seconds();
    snap.window_end = start_time;
    state_.current_snapshots.push_back(std::move(snap));
  }
  state_.current_scores = to_scores(state_.current_snapshots, kpi_);
}

Timestamp SelectorLoop::next_boundary(Timestamp now, Duration interval) const {
  const Duration elapsed = now - state_.start_time;
  return state_.start_time + (elapsed / interval + 1) * interval;
}

void SelectorLoop::refresh_scores(Timestamp now, std::span<const Event> events) {
  const auto window = window_of(events, now - kpi_.lookback_seconds(), now);
  state_.current_snapshots = snapshot_arms(window, arms_, kpi_, now);
  state_.current_scores = to_scores(state_.current_snapshots, kpi_);
  state_.last_refresh = now;
}

std::optional<SelectionDecision> SelectorLoop::tick(Timestamp now, std::span<const Event> events) {
  if (now < state_.now) {
    throw ClockRegression("clock moved from " + std::to_string(state_.now) + " back to " +
                          std::to_string(now));
  }
  state_.now = now;
  state_.elapsed_days =
      static_cast<double>(now - state_.start_time) / static_cast<double>(kSecondsPerDay);
  if (now < state_.next_swap) return std::nullopt;

  if (now >= state_.next_refresh) {
    refresh_scores(now, events);
    ++state_.refresh_count;
    state_.next_refresh = next_boundary(now, schedule_.kpi_refresh_interval);
  }

  auto decision = decide(now);
  state_.decision_log.push_back(decision);
  state_.current_arm = decision.chosen;
  ++state_.activations[decision.chosen];
  state_.next_swap = next_boundary(now, schedule_.swap_interval);
  return decision;
}

ProbabilityVector SelectorLoop::build_probabilities(double epsilon) const {
  const auto& scores = state_.current_scores;
  switch (policy_.kind) {
    case PolicyKind::DecayEpsilonGreedy:
      return activation_probabilities(scores, epsilon);
    case PolicyKind::Softmax: {
      const bool all_qualified =
          std::all_of(scores.begin(), scores.end(), [](const ArmScore& s) { return s.qualified; });
      if (!all_qualified) return ProbabilityVector::uniform(arms_);
      return softmax_probabilities(scores, policy_.temperature);
    }
    case PolicyKind::UniformRandom:
    case PolicyKind::RoundRobin:
      return ProbabilityVector::uniform(arms_);
    case PolicyKind::UCB:
    case PolicyKind::ThompsonBetaBernoulli:
      break;
  }
  throw std::logic_error("policy does not produce a probability vector");
}

SelectionDecision SelectorLoop::decide(Timestamp now) {
  const double elapsed = state_.elapsed_days;
  switch (policy_.kind) {
    case PolicyKind::DecayEpsilonGreedy: {
      const double eps = epsilon_at(elapsed, policy_.epsilon0, policy_.alpha_days);
      return select_arm(build_probabilities(eps), rng_, now, eps);
    }
    case PolicyKind::Softmax:
      return select_arm(build_probabilities(0.0), rng_, now, 0.0);
    case PolicyKind::UniformRandom:
      return select_arm(build_probabilities(1.0), rng_, now, 1.0);
    case PolicyKind::RoundRobin: {
      const auto n = state_.decision_log.size();
      const ArmId& chosen = arms_[n % arms_.size()];
      return SelectionDecision{now, ProbabilityVector::uniform(arms_), chosen, 1.0};
    }
    case PolicyKind::UCB: {
      // Unqualified arms borrow the best qualified mean so that only the
      // pull count separates them.
      std::optional<double> top;
      for (const auto& s : state_.current_scores) {
        if (!s.qualified) continue;
        const double v = s.direction == Direction::Minimize ? -s.kpi_value : s.kpi_value;
        top = top ? std::max(*top, v) : v;
      }
      std::vector<UcbArm> candidates;
      for (const auto& s : state_.current_scores) {
        const double v = s.direction == Direction::Minimize ? -s.kpi_value : s.kpi_value;
        candidates.push_back({s.arm, s.qualified ? v : top.value_or(0.0), state_.activations[s.arm]});
      }
      const ArmId chosen = ucb_select(candidates, policy_.ucb_c);
      return SelectionDecision{now, ProbabilityVector::one_hot(arms_, chosen), chosen, 0.0};
    }
    case PolicyKind::ThompsonBetaBernoulli: {
      std::vector<BetaPosterior> posteriors;
      for (const auto& snap : state_.current_snapshots) {
        posteriors.push_back(beta_posterior(snap.arm, policy_.prior_a, policy_.prior_b, snap.clicks,
                                            snap.impressions));
      }
      const ArmId chosen = thompson_draw(posteriors, rng_);
      return SelectionDecision{now, ProbabilityVector::one_hot(arms_, chosen), chosen, 0.0};
    }
  }
  throw std::logic_error("unhandled policy kind");
}

std::optional<ArmId> SelectorLoop::arm_at(Timestamp ts) const {
  const auto& log = state_.decision_log;
  auto it = std::upper_bound(log.begin(), log.end(), ts, [](Timestamp t, const SelectionDecision& d) {
    return t < d.timestamp;
  });
  if (it == log.begin()) return std::nullopt;
  return std::prev(it)->chosen;
}

void SelectorLoop::restore(std::vector<SelectionDecision> decisions,
                           std::optional<Timestamp> last_refresh, std::int64_t refresh_count,
                           std::span<const Event> events) {
  Timestamp prev = state_.start_time - 1;
  for (const auto& d : decisions) {
    if (d.timestamp <= prev) throw std::invalid_argument("restored decisions must be increasing");
    if (std::find(arms_.begin(), arms_.end(), d.chosen) == arms_.end()) {
      throw std::invalid_argument("restored decision references unknown arm '" + d.chosen.str() + "'");
    }
    prev = d.timestamp;
  }
  for (auto& [arm, count] : state_.activations) count = 0;
  for (const auto& d : decisions) ++state_.activations[d.chosen];
  state_.decision_log = std::move(decisions);
  if (!state_.decision_log.empty()) {
    const auto& last = state_.decision_log.back();
    state_.current_arm = last.chosen;
    state_.now = last.timestamp;
    state_.next_swap = next_boundary(last.timestamp, schedule_.swap_interval);
  }
  state_.refresh_count = refresh_count;
  if (last_refresh) {
    refresh_scores(*last_refresh, events);
    state_.next_refresh = next_boundary(*last_refresh, schedule_.kpi_refresh_interval);
    state_.now = std::max(state_.now, *last_refresh);
  }
  state_.elapsed_days = static_cast<double>(state_.now - state_.start_time) /
                        static_cast<double>(kSecondsPerDay);
  rng_ = Rng(seed_, kSelectorStream + state_.decision_log.size());
}

RunOutput run(std::vector<ArmId> arms, EventSource& source, const PolicyConfig& policy,
              const ScheduleConfig& schedule, const KpiSpec& kpi, std::uint64_t seed,
              Timestamp start_time) {
  if (arms.empty()) throw std::invalid_argument("at least one arm must be registered");
  SelectorLoop loop(arms, policy, schedule, kpi, seed, start_time);
  const auto& registered = loop.arms();

  RunOutput out;
  std::map<ArmId, std::int64_t> cumulative;
  for (const auto& arm : registered) cumulative[arm] = 0;
  const KpiSpec ctr_spec{KpiKind::CTR, kpi.lookback_days, kpi.min_samples};

  const Timestamp end = start_time + schedule.run_duration;
  std::int64_t next_day = 0;
  for (Timestamp t = start_time; t <= end; t += schedule.swap_interval) {
    auto decision = loop.tick(t, out.events);

    // Rows for every day boundary this decision is the first to reach.
    while (decision && start_time + next_day * kSecondsPerDay <= t) {
      const auto window = window_of(out.events, t - ctr_spec.lookback_seconds(), t);
      const auto snaps = snapshot_arms(window, registered, ctr_spec, t);
      for (std::size_t i = 0; i < registered.size(); ++i) {
        out.daily.push_back(DailyRow{next_day, registered[i],
                                     decision->probabilities.at(registered[i]),
                                     cumulative[registered[i]], snaps[i].kpi_value});
      }
      ++next_day;
    }

    if (t >= end) break;
    const Timestamp interval_end = std::min(t + schedule.swap_interval, end);
    const ArmId active = *loop.state().current_arm;
    auto batch = source.generate(active, t, interval_end);
    Timestamp previous = t;
    for (auto& e : batch) {
      if (e.timestamp < previous || e.timestamp >= interval_end) {
        throw std::logic_error("event source emitted an unordered or out-of-interval event");
      }
      previous = e.timestamp;
      e.arm = active;
      if (e.kind == EventKind::Impression) ++cumulative[active];
    }
    out.events.insert(out.events.end(), std::make_move_iterator(batch.begin()),
                      std::make_move_iterator(batch.end()));
  }

  out.decisions = loop.state().decision_log;
  out.final_state = loop.state();
  return out;
}

}  // namespace ams
