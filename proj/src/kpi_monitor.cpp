#include "ams/kpi_monitor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace ams {

std::string_view to_string(KpiKind kind) {
  switch (kind) {
    case KpiKind::CTR:
      return "ctr";
    case KpiKind::CPC:
      return "cpc";
    case KpiKind::CPA:
      return "cpa";
  }
  return "unknown";
}

KpiKind kpi_kind_from_string(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ctr") return KpiKind::CTR;
  if (lower == "cpc") return KpiKind::CPC;
  if (lower == "cpa") return KpiKind::CPA;
  throw std::invalid_argument("unknown kpi '" + std::string(text) + "' (expected ctr, cpc or cpa)");
}

Duration KpiSpec::lookback_seconds() const {
  return static_cast<Duration>(std::llround(lookback_days * static_cast<double>(kSecondsPerDay)));
}

void KpiSpec::validate() const {
  if (!std::isfinite(lookback_days) || lookback_days <= 0.0) {
    throw std::invalid_argument("lookback_days must be positive");
  }
  if (min_samples <= 0) throw std::invalid_argument("min_samples must be positive");
}

AttributionLedger::AttributionLedger(std::vector<LedgerInterval> intervals)
    : intervals_(std::move(intervals)) {
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const auto& cur = intervals_[i];
    if (cur.start >= cur.end) {
      throw InvalidLedger("ledger interval " + std::to_string(i) + " is empty or inverted");
    }
    if (i > 0 && cur.start < intervals_[i - 1].end) {
      throw InvalidLedger("ledger interval " + std::to_string(i) +
                          " is out of order or overlaps its predecessor");
    }
  }
}

AttributionLedger AttributionLedger::from_decisions(std::span<const SelectionDecision> decisions,
                                                    Timestamp open_end) {
  std::vector<LedgerInterval> intervals;
  intervals.reserve(decisions.size());
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const Timestamp start = decisions[i].timestamp;
    const Timestamp end = i + 1 < decisions.size() ? decisions[i + 1].timestamp : open_end;
    if (i + 1 == decisions.size() && start == end) break;  // zero-length tail
    intervals.push_back({start, end, decisions[i].chosen});
  }
  return AttributionLedger(std::move(intervals));
}

const ArmId* AttributionLedger::lookup(Timestamp ts) const {
  auto it = std::upper_bound(intervals_.begin(), intervals_.end(), ts,
                             [](Timestamp t, const LedgerInterval& iv) { return t < iv.start; });
  if (it == intervals_.begin()) return nullptr;
  --it;
  return ts < it->end ? &it->arm : nullptr;
}

std::vector<Event> attribute_events(std::span<const Event> events, const AttributionLedger& ledger) {
  std::vector<Event> out(events.begin(), events.end());
  for (auto& e : out) {
    const ArmId* arm = ledger.lookup(e.timestamp);
    e.arm = arm ? std::optional<ArmId>(*arm) : std::nullopt;
  }
  return out;
}

namespace {

void accumulate(ArmKpiSnapshot& snap, const Event& e) {
  switch (e.kind) {
    case EventKind::Impression:
      ++snap.impressions;
      snap.spend_micros += e.cost_micros;
      break;
    case EventKind::Click:
      ++snap.clicks;
      break;
    case EventKind::Conversion:
      ++snap.conversions;
      break;
  }
}

void finalize(ArmKpiSnapshot& snap, KpiKind kind) {
  switch (kind) {
    case KpiKind::CTR:
      if (snap.impressions > 0) {
        snap.kpi_value = static_cast<double>(snap.clicks) / static_cast<double>(snap.impressions);
      }
      break;
    case KpiKind::CPC:
      if (snap.clicks > 0) {
        snap.kpi_value = static_cast<double>(snap.spend_micros) / static_cast<double>(snap.clicks);
      }
      break;
    case KpiKind::CPA:
      if (snap.conversions > 0) {
        snap.kpi_value =
            static_cast<double>(snap.spend_micros) / static_cast<double>(snap.conversions);
      }
      break;
  }
}

}  // namespace

ArmKpiSnapshot windowed_kpi(std::span<const Event> events, const ArmId& arm, const KpiSpec& spec,
                            Timestamp now) {
  ArmKpiSnapshot snap;
  snap.arm = arm;
  snap.window_start = now - spec.lookback_seconds();
  snap.window_end = now;
  for (const auto& e : events) {
    if (!e.arm || *e.arm != arm) continue;
    if (e.timestamp < snap.window_start || e.timestamp >= now) continue;
    accumulate(snap, e);
  }
  finalize(snap, spec.kind);
  return snap;
}

std::vector<ArmKpiSnapshot> snapshot_arms(std::span<const Event> attributed,
                                          std::span<const ArmId> arms, const KpiSpec& spec,
                                          Timestamp now) {
  std::map<ArmId, ArmKpiSnapshot> by_arm;
  for (const auto& arm : arms) {
    ArmKpiSnapshot snap;
    snap.arm = arm;
    snap.window_start = now - spec.lookback_seconds();
    snap.window_end = now;
    by_arm.emplace(arm, std::move(snap));
  }
  const Timestamp window_start = now - spec.lookback_seconds();
  for (const auto& e : attributed) {
    if (!e.arm) continue;
    auto it = by_arm.find(*e.arm);
    if (it == by_arm.end()) {
      throw std::invalid_argument("event attributed to unregistered arm '" + e.arm->str() + "'");
    }
    if (e.timestamp < window_start || e.timestamp >= now) continue;
    accumulate(it->second, e);
  }
  std::vector<ArmKpiSnapshot> out;
  out.reserve(arms.size());
  for (const auto& arm : arms) {
    auto& snap = by_arm.at(arm);
    finalize(snap, spec.kind);
    out.push_back(snap);
  }
  return out;
}

std::vector<ArmScore> to_scores(std::span<const ArmKpiSnapshot> snapshots, const KpiSpec& spec) {
  std::vector<ArmScore> scores;
  scores.reserve(snapshots.size());
  for (const auto& snap : snapshots) {
    ArmScore s;
    s.arm = snap.arm;
    s.direction = spec.direction();
    s.samples = snap.impressions;
    s.qualified = snap.impressions >= spec.min_samples && snap.kpi_value.has_value();
    s.kpi_value = snap.kpi_value.value_or(0.0);
    scores.push_back(std::move(s));
  }
  return scores;
}

std::vector<ArmScore> snapshot_all(std::span<const Event> events, const AttributionLedger& ledger,
                                   const KpiSpec& spec, std::span<const ArmId> arms, Timestamp now) {
  for (const auto& iv : ledger.intervals()) {
    if (std::find(arms.begin(), arms.end(), iv.arm) == arms.end()) {
      throw std::invalid_argument("ledger references unknown arm '" + iv.arm.str() + "'");
    }
  }
  const auto attributed = attribute_events(events, ledger);
  const auto snaps = snapshot_arms(attributed, arms, spec, now);
  return to_scores(snaps, spec);
}

void EventBuffer::append(Event event) {
  std::unique_lock lock(mutex_);
  events_.push_back(std::move(event));
}

void EventBuffer::append(std::span<const Event> events) {
  std::unique_lock lock(mutex_);
  events_.insert(events_.end(), events.begin(), events.end());
}

std::size_t EventBuffer::size() const {
  std::shared_lock lock(mutex_);
  return events_.size();
}

void EventBuffer::read(const std::function<void(std::span<const Event>)>& reader) const {
  std::shared_lock lock(mutex_);
  reader(events_);
}

std::vector<Event> EventBuffer::copy() const {
  std::shared_lock lock(mutex_);
  return events_;
}

}  // namespace ams
