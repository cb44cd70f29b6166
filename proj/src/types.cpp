#include "ams/types.hpp"

#include <utility>

namespace ams {

ArmId::ArmId(std::string value) : value_(std::move(value)) {
  if (value_.empty()) {
    throw std::invalid_argument("arm id must be non-empty");
  }
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Impression:
      return "impression";
    case EventKind::Click:
      return "click";
    case EventKind::Conversion:
      return "conversion";
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view text) {
  if (text == "impression") return EventKind::Impression;
  if (text == "click") return EventKind::Click;
  if (text == "conversion") return EventKind::Conversion;
  throw std::invalid_argument("unknown event kind '" + std::string(text) + "'");
}

void validate_event(const Event& event) {
  if (event.cost_micros < 0) {
    throw std::invalid_argument("cost_micros must be non-negative");
  }
  if (event.kind != EventKind::Impression && event.cost_micros != 0) {
    throw std::invalid_argument("cost_micros must be 0 for click/conversion events");
  }
}

}  // namespace ams
