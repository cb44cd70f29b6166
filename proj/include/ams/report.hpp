#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ams/bandit.hpp"
#include "ams/types.hpp"

namespace ams {

/// One row of the per-day report: the state of one arm at the first swap at
/// or after the start of day `day`.
struct DailyRow {
  std::int64_t day = 0;
  ArmId arm;
  double activation_probability = 0.0;
  std::int64_t cumulative_impressions = 0;
  std::optional<double> windowed_ctr;

  friend bool operator==(const DailyRow&, const DailyRow&) = default;
};

inline constexpr const char* kReportHeader =
    "day,arm,activation_probability,cumulative_impressions,windowed_cumCTR";

/// Renders rows as CSV with a header line. Doubles use the shortest
/// round-trip representation; an undefined CTR is an empty field.
std::string to_csv(std::span<const DailyRow> rows);

/// Shortest round-trip decimal text for a double.
std::string format_double(double value);

/// Index of the decision that anchors row `day`, i.e. the first decision whose
/// timestamp is at or after start + day * 86400. Empty when none exists.
std::optional<std::size_t> anchor_decision(std::span<const SelectionDecision> decisions,
                                           Timestamp start, std::int64_t day);

}  // namespace ams
