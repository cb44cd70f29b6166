#pragma once

#include <cstdint>
#include <random>

namespace ams {

/// Seedable deterministic random stream. Independent streams for the same
/// seed are obtained by passing distinct stream ids.
class Rng {
public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform double in [0, 1) built from the top 53 bits of one engine output.
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

  /// Sample from Beta(a, b) via two gamma draws.
  double beta(double a, double b);

  std::int64_t poisson(double mean);

private:
  std::mt19937_64 engine_;
};

}  // namespace ams
