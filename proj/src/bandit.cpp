#include "ams/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace ams {

namespace {

constexpr double kSumTolerance = 1e-12;

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

std::vector<ArmId> arm_ids(std::span<const ArmScore> scores) {
  std::vector<ArmId> ids;
  ids.reserve(scores.size());
  for (const auto& s : scores) ids.push_back(s.arm);
  return ids;
}

}  // namespace

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::DecayEpsilonGreedy:
      return "egreedy";
    case PolicyKind::Softmax:
      return "softmax";
    case PolicyKind::UCB:
      return "ucb";
    case PolicyKind::ThompsonBetaBernoulli:
      return "thompson";
    case PolicyKind::UniformRandom:
      return "uniform";
    case PolicyKind::RoundRobin:
      return "ab";
  }
  return "unknown";
}

PolicyKind policy_kind_from_string(std::string_view text) {
  for (auto kind : {PolicyKind::DecayEpsilonGreedy, PolicyKind::Softmax, PolicyKind::UCB,
                    PolicyKind::ThompsonBetaBernoulli, PolicyKind::UniformRandom,
                    PolicyKind::RoundRobin}) {
    if (text == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown policy '" + std::string(text) +
                              "' (expected egreedy, softmax, ucb, thompson, uniform or ab)");
}

void PolicyConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(epsilon0) && epsilon0 >= 0.0 && epsilon0 <= 1.0, "epsilon0 must lie in [0, 1]");
  require(finite(alpha_days) && alpha_days > 0.0, "alpha_days must be positive");
  require(finite(temperature) && temperature > 0.0, "temperature must be positive");
  require(finite(ucb_c) && ucb_c > 0.0, "ucb_c must be positive");
  require(finite(prior_a) && prior_a > 0.0, "prior_a must be positive");
  require(finite(prior_b) && prior_b > 0.0, "prior_b must be positive");
}

ProbabilityVector::ProbabilityVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
  require(!entries_.empty(), "probability vector must have at least one entry");
  std::set<ArmId> seen;
  double total = 0.0;
  for (const auto& [arm, p] : entries_) {
    require(seen.insert(arm).second, "duplicate arm in probability vector");
    require(std::isfinite(p) && p >= 0.0 && p <= 1.0, "probability outside [0, 1]");
    total += p;
  }
  require(std::abs(total - 1.0) <= kSumTolerance, "probabilities must sum to 1");
}

ProbabilityVector ProbabilityVector::uniform(std::span<const ArmId> arms) {
  require(!arms.empty(), "arm list must be non-empty");
  const double p = 1.0 / static_cast<double>(arms.size());
  std::vector<Entry> entries;
  entries.reserve(arms.size());
  for (const auto& arm : arms) entries.emplace_back(arm, p);
  return ProbabilityVector(std::move(entries));
}

ProbabilityVector ProbabilityVector::one_hot(std::span<const ArmId> arms, const ArmId& chosen) {
  std::vector<Entry> entries;
  entries.reserve(arms.size());
  bool found = false;
  for (const auto& arm : arms) {
    entries.emplace_back(arm, arm == chosen ? 1.0 : 0.0);
    found = found || arm == chosen;
  }
  require(found, "chosen arm is not in the arm list");
  return ProbabilityVector(std::move(entries));
}

double ProbabilityVector::at(const ArmId& arm) const {
  for (const auto& [id, p] : entries_) {
    if (id == arm) return p;
  }
  return 0.0;
}

double epsilon_at(double t_days, double epsilon0, double alpha_days) {
  require(std::isfinite(t_days) && std::isfinite(epsilon0) && std::isfinite(alpha_days),
          "epsilon_at inputs must be finite");
  require(t_days >= 0.0, "elapsed time must be non-negative");
  require(alpha_days > 0.0, "alpha_days must be positive");
  require(epsilon0 >= 0.0 && epsilon0 <= 1.0, "epsilon0 must lie in [0, 1]");
  return epsilon0 * std::max(0.0, 1.0 - t_days / alpha_days);
}

std::optional<ArmId> best_arm(std::span<const ArmScore> scores, TieRule) {
  require(!scores.empty(), "score list must be non-empty");
  const Direction direction = scores.front().direction;
  for (const auto& s : scores) {
    require(s.direction == direction, "scores mix Maximize and Minimize directions");
  }
  const ArmScore* best = nullptr;
  for (const auto& s : scores) {
    if (!s.qualified) continue;
    require(std::isfinite(s.kpi_value), "qualified score must be finite");
    if (best == nullptr) {
      best = &s;
      continue;
    }
    const bool better = direction == Direction::Maximize ? s.kpi_value > best->kpi_value
                                                         : s.kpi_value < best->kpi_value;
    if (better || (s.kpi_value == best->kpi_value && s.arm < best->arm)) best = &s;
  }
  if (best == nullptr) return std::nullopt;
  return best->arm;
}

ProbabilityVector activation_probabilities(std::span<const ArmScore> scores, double epsilon,
                                           TieRule tie_rule) {
  require(!scores.empty(), "arm list must be non-empty");
  require(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  const auto ids = arm_ids(scores);
  const auto best = best_arm(scores, tie_rule);
  if (!best) return ProbabilityVector::uniform(ids);

  const double m = static_cast<double>(scores.size());
  const double p_other = epsilon / m;
  const double p_best = (1.0 - epsilon) + epsilon / m;
  std::vector<ProbabilityVector::Entry> entries;
  entries.reserve(ids.size());
  for (const auto& id : ids) entries.emplace_back(id, id == *best ? p_best : p_other);
  return ProbabilityVector(std::move(entries));
}

SelectionDecision select_arm(const ProbabilityVector& probabilities, Rng& rng,
                             Timestamp timestamp, double epsilon_used) {
  const auto& entries = probabilities.entries();
  require(!entries.empty(), "cannot select from an empty probability vector");
  const double u = rng.uniform();
  double cumulative = 0.0;
  const ArmId* chosen = nullptr;
  for (const auto& [arm, p] : entries) {
    cumulative += p;
    if (u < cumulative) {
      chosen = &arm;
      break;
    }
  }
  if (chosen == nullptr) {
    // Rounding left u above the final cumulative sum: take the last live entry.
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
      if (it->second > 0.0) {
        chosen = &it->first;
        break;
      }
    }
  }
  return SelectionDecision{timestamp, probabilities, *chosen, epsilon_used};
}

ProbabilityVector softmax_probabilities(std::span<const ArmScore> scores, double temperature) {
  require(!scores.empty(), "score list must be non-empty");
  require(std::isfinite(temperature) && temperature > 0.0, "temperature must be positive");
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) {
    require(s.qualified, "softmax requires qualified scores");
    require(std::isfinite(s.kpi_value), "softmax requires finite scores");
    values.push_back(s.direction == Direction::Minimize ? -s.kpi_value : s.kpi_value);
  }
  const double top = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (auto& v : values) {
    v = std::exp((v - top) / temperature);
    total += v;
  }
  std::vector<ProbabilityVector::Entry> entries;
  entries.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    entries.emplace_back(scores[i].arm, values[i] / total);
  }
  return ProbabilityVector(std::move(entries));
}

double ucb_index(double mean, std::int64_t pulls, std::int64_t total_pulls, double c) {
  require(total_pulls > 0, "total_pulls must be positive");
  require(pulls >= 0 && pulls <= total_pulls, "pulls must lie in [0, total_pulls]");
  require(std::isfinite(c) && c > 0.0, "ucb constant must be positive");
  if (pulls == 0) return std::numeric_limits<double>::infinity();
  return mean + std::sqrt(c * std::log(static_cast<double>(total_pulls)) /
                          static_cast<double>(pulls));
}

ArmId ucb_select(std::span<const UcbArm> arms, double c) {
  require(!arms.empty(), "arm list must be non-empty");
  std::int64_t total = 0;
  for (const auto& a : arms) total += a.pulls;

  const UcbArm* best = nullptr;
  double best_index = -std::numeric_limits<double>::infinity();
  for (const auto& a : arms) {
    const double index = a.pulls == 0 ? std::numeric_limits<double>::infinity()
                                      : ucb_index(a.mean, a.pulls, total, c);
    if (best == nullptr || index > best_index || (index == best_index && a.arm < best->arm)) {
      best = &a;
      best_index = index;
    }
  }
  return best->arm;
}

BetaPosterior beta_posterior(ArmId arm, double prior_a, double prior_b, std::int64_t clicks,
                             std::int64_t impressions) {
  require(prior_a > 0.0 && prior_b > 0.0, "Beta prior parameters must be positive");
  require(clicks >= 0 && impressions >= 0, "counts must be non-negative");
  const auto failures = std::max<std::int64_t>(0, impressions - clicks);
  return BetaPosterior{std::move(arm), prior_a + static_cast<double>(clicks),
                       prior_b + static_cast<double>(failures)};
}

ArmId thompson_draw(std::span<const BetaPosterior> posteriors, Rng& rng) {
  require(!posteriors.empty(), "posterior list must be non-empty");
  const BetaPosterior* best = nullptr;
  double best_sample = -1.0;
  for (const auto& p : posteriors) {
    require(p.a > 0.0 && p.b > 0.0, "Beta parameters must be positive");
    const double sample = rng.beta(p.a, p.b);
    if (best == nullptr || sample > best_sample) {
      best = &p;
      best_sample = sample;
    }
  }
  return best->arm;
}

}  // namespace ams
