#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ams {

/// Seconds since the Unix epoch. All log timestamps are integral seconds.
using Timestamp = std::int64_t;
/// A span of time in seconds.
using Duration = std::int64_t;

inline constexpr Duration kSecondsPerDay = 86'400;

/// Opaque identifier of one candidate model ("arm"). Ordering is lexicographic
/// and is the tie-break order everywhere a tie can occur.
class ArmId {
public:
  ArmId() = default;
  explicit ArmId(std::string value);

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const ArmId&, const ArmId&) = default;
  friend bool operator==(const ArmId&, const ArmId&) = default;

private:
  std::string value_;
};

enum class EventKind { Impression, Click, Conversion };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

/// One traffic outcome. Cost attaches to impressions only.
struct Event {
  Timestamp timestamp = 0;
  EventKind kind = EventKind::Impression;
  std::int64_t cost_micros = 0;
  std::optional<ArmId> arm;  // empty while unattributed

  friend bool operator==(const Event&, const Event&) = default;
};

/// Validates the per-event invariants; throws std::invalid_argument.
void validate_event(const Event& event);

}  // namespace ams

template <>
struct std::hash<ams::ArmId> {
  std::size_t operator()(const ams::ArmId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
