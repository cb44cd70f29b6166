#include "ams/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <stdexcept>

namespace ams {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("failed to format double");
  return std::string(buf.data(), ptr);
}

std::string to_csv(std::span<const DailyRow> rows) {
  std::string out = kReportHeader;
  out += '\n';
  for (const auto& row : rows) {
    out += std::to_string(row.day);
    out += ',';
    out += row.arm.str();
    out += ',';
    out += format_double(row.activation_probability);
    out += ',';
    out += std::to_string(row.cumulative_impressions);
    out += ',';
    if (row.windowed_ctr) out += format_double(*row.windowed_ctr);
    out += '\n';
  }
  return out;
}

std::optional<std::size_t> anchor_decision(std::span<const SelectionDecision> decisions,
                                           Timestamp start, std::int64_t day) {
  const Timestamp boundary = start + day * kSecondsPerDay;
  auto it = std::lower_bound(
      decisions.begin(), decisions.end(), boundary,
      [](const SelectionDecision& d, Timestamp t) { return d.timestamp < t; });
  if (it == decisions.end()) return std::nullopt;
  return static_cast<std::size_t>(it - decisions.begin());
}

}  // namespace ams
