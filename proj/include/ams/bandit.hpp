#pragma once

// Bandit policy mathematics. Everything here is a pure function of its
// arguments plus an explicit Rng; there is no hidden state.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ams/rng.hpp"
#include "ams/types.hpp"

namespace ams {

enum class PolicyKind {
  DecayEpsilonGreedy,
  Softmax,
  UCB,
  ThompsonBetaBernoulli,
  UniformRandom,
  RoundRobin,  // deterministic equal split; the A/B-test baseline
};

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view text);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::DecayEpsilonGreedy;
  double epsilon0 = 0.3;
  double alpha_days = 30.0;
  double temperature = 0.01;
  double ucb_c = 2.0;
  double prior_a = 1.0;
  double prior_b = 1.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class Direction { Maximize, Minimize };

enum class TieRule { LexicographicId };

struct ArmScore {
  ArmId arm;
  double kpi_value = 0.0;
  Direction direction = Direction::Maximize;
  std::int64_t samples = 0;
  bool qualified = false;
};

/// Activation probabilities over an ordered arm set. Construction checks that
/// every entry lies in [0, 1], ids are unique and the total is 1 within 1e-12.
class ProbabilityVector {
public:
  using Entry = std::pair<ArmId, double>;

  ProbabilityVector() = default;
  explicit ProbabilityVector(std::vector<Entry> entries);

  static ProbabilityVector uniform(std::span<const ArmId> arms);
  static ProbabilityVector one_hot(std::span<const ArmId> arms, const ArmId& chosen);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  /// Probability of `arm`, or 0 when the arm is absent.
  double at(const ArmId& arm) const;

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

private:
  std::vector<Entry> entries_;
};

struct SelectionDecision {
  Timestamp timestamp = 0;
  ProbabilityVector probabilities;
  ArmId chosen;
  double epsilon_used = 0.0;

  friend bool operator==(const SelectionDecision&, const SelectionDecision&) = default;
};

/// Linear decay schedule: epsilon0 * max(0, 1 - t/alpha), t and alpha in days.
double epsilon_at(double t_days, double epsilon0, double alpha_days);

/// Qualified arm with the best KPI (argmax or argmin by direction); ties go
/// to the lexicographically smallest id. Empty when nothing is qualified.
std::optional<ArmId> best_arm(std::span<const ArmScore> scores,
                              TieRule tie_rule = TieRule::LexicographicId);

/// Epsilon-greedy allocation: the best arm gets (1 - eps) + eps/M, every other
/// arm eps/M. Uniform when no arm is qualified.
ProbabilityVector activation_probabilities(std::span<const ArmScore> scores, double epsilon,
                                           TieRule tie_rule = TieRule::LexicographicId);

/// One uniform draw walked against the cumulative distribution in entry order.
SelectionDecision select_arm(const ProbabilityVector& probabilities, Rng& rng,
                             Timestamp timestamp = 0, double epsilon_used = 0.0);

/// Boltzmann weights exp(v / temperature) with max-subtraction. Minimize-KPI
/// values are negated first. Every score must be qualified.
ProbabilityVector softmax_probabilities(std::span<const ArmScore> scores, double temperature);

/// UCB1 index mean + sqrt(c * ln(total) / pulls); +infinity for an unpulled arm.
double ucb_index(double mean, std::int64_t pulls, std::int64_t total_pulls, double c);

struct UcbArm {
  ArmId arm;
  double mean = 0.0;  // already oriented so that larger is better
  std::int64_t pulls = 0;
};

/// Arm with the largest UCB index, lexicographic tie-break.
ArmId ucb_select(std::span<const UcbArm> arms, double c);

struct BetaPosterior {
  ArmId arm;
  double a = 1.0;
  double b = 1.0;

  double mean() const { return a / (a + b); }
};

/// Conjugate Beta-Bernoulli update of prior (a0, b0) with `clicks` successes in
/// `impressions` trials. Clicks in excess of impressions count as successes
/// without lowering b below b0.
BetaPosterior beta_posterior(ArmId arm, double prior_a, double prior_b, std::int64_t clicks,
                             std::int64_t impressions);

/// Draws one Beta sample per arm, in list order, and returns the argmax.
ArmId thompson_draw(std::span<const BetaPosterior> posteriors, Rng& rng);

}  // namespace ams
