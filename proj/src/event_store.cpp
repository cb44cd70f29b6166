#include "ams/event_store.hpp"

#include <algorithm>
#include <map>
#include <json.hpp>

namespace ams {

using nlohmann::json;

namespace {

json encode_payload(const Event& e) {
  json j;
  j["type"] = "event";
  j["ts"] = e.timestamp;
  j["kind"] = std::string(to_string(e.kind));
  j["cost_micros"] = e.cost_micros;
  j["arm"] = e.arm ? json(e.arm->str()) : json(nullptr);
  return j;
}

json encode_payload(const SelectionDecision& d) {
  json j;
  j["type"] = "decision";
  j["ts"] = d.timestamp;
  j["chosen"] = d.chosen.str();
  j["epsilon"] = d.epsilon_used;
  json probs = json::array();
  for (const auto& [arm, p] : d.probabilities.entries()) probs.push_back({{"arm", arm.str()}, {"p", p}});
  j["probabilities"] = std::move(probs);
  return j;
}

template <typename T>
T field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

Timestamp LogRecord::timestamp() const {
  return std::visit([](const auto& p) { return p.timestamp; }, payload);
}

std::string encode_record(const LogRecord& record) {
  json j = std::visit([](const auto& p) { return encode_payload(p); }, record.payload);
  j["schema_version"] = record.schema_version;
  j["run_id"] = record.run_id;
  return j.dump();
}

LogRecord decode_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");

  LogRecord record;
  record.schema_version = field<int>(j, "schema_version");
  if (record.schema_version != kSchemaVersion) {
    throw std::invalid_argument("unsupported schema_version " +
                                std::to_string(record.schema_version));
  }
  record.run_id = field<std::string>(j, "run_id");
  const auto type = field<std::string>(j, "type");
  if (type == "event") {
    Event e;
    e.timestamp = field<Timestamp>(j, "ts");
    e.kind = event_kind_from_string(field<std::string>(j, "kind"));
    e.cost_micros = field<std::int64_t>(j, "cost_micros");
    const auto& arm = j.contains("arm") ? j.at("arm") : json(nullptr);
    if (!arm.is_null()) {
      if (!arm.is_string()) throw std::invalid_argument("field 'arm' has the wrong type");
      e.arm = ArmId(arm.get<std::string>());
    }
    validate_event(e);
    record.payload = std::move(e);
  } else if (type == "decision") {
    SelectionDecision d;
    d.timestamp = field<Timestamp>(j, "ts");
    d.chosen = ArmId(field<std::string>(j, "chosen"));
    d.epsilon_used = field<double>(j, "epsilon");
    const auto probs = field<json>(j, "probabilities");
    if (!probs.is_array()) throw std::invalid_argument("field 'probabilities' must be an array");
    std::vector<ProbabilityVector::Entry> entries;
    for (const auto& p : probs) {
      entries.emplace_back(ArmId(field<std::string>(p, "arm")), field<double>(p, "p"));
    }
    d.probabilities = ProbabilityVector(std::move(entries));
    if (d.probabilities.at(d.chosen) <= 0.0) {
      throw std::invalid_argument("chosen arm has zero probability");
    }
    record.payload = std::move(d);
  } else {
    throw std::invalid_argument("unknown record type '" + type + "'");
  }
  return record;
}

LoadError::LoadError(const std::string& path, std::size_t line, const std::string& reason,
                     LoadedLogs partial)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + reason),
      line_(line),
      partial_(std::move(partial)) {}

LogWriter::LogWriter(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    const auto existing = load(path_);
    if (!existing.events.empty()) last_event_ = existing.events.back().timestamp;
    if (!existing.decisions.empty()) last_decision_ = existing.decisions.back().timestamp;
  }
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw std::runtime_error("cannot open log '" + path_.string() + "' for appending");
}

void LogWriter::append(const LogRecord& record) {
  auto& last = record.is_event() ? last_event_ : last_decision_;
  const Timestamp ts = record.timestamp();
  if (last && ts < *last) {
    throw OrderingError("record at " + std::to_string(ts) + " precedes the last " +
                        (record.is_event() ? "event" : "decision") + " at " +
                        std::to_string(*last));
  }
  out_ << encode_record(record) << '\n';
  if (!out_) throw std::runtime_error("write to '" + path_.string() + "' failed");
  last = ts;
  ++appended_;
}

void LogWriter::flush() { out_.flush(); }

LoadedLogs load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open log '" + path.string() + "'");
  LoadedLogs logs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      auto record = decode_record(line);
      if (auto* e = std::get_if<Event>(&record.payload)) {
        logs.events.push_back(std::move(*e));
      } else {
        logs.decisions.push_back(std::get<SelectionDecision>(std::move(record.payload)));
      }
    } catch (const std::invalid_argument& e) {
      throw LoadError(path.string(), number, e.what(), std::move(logs));
    }
  }
  return logs;
}

RunPaths run_paths(const std::filesystem::path& dir, const std::string& run_id) {
  return {dir / (run_id + ".events.log"), dir / (run_id + ".decisions.log")};
}

void write_run(const std::filesystem::path& dir, const std::string& run_id,
               std::span<const Event> events, std::span<const SelectionDecision> decisions) {
  std::filesystem::create_directories(dir);
  const auto paths = run_paths(dir, run_id);
  std::filesystem::remove(paths.events);
  std::filesystem::remove(paths.decisions);
  {
    LogWriter writer(paths.events);
    for (const auto& e : events) writer.append(LogRecord{e, kSchemaVersion, run_id});
    writer.flush();
  }
  LogWriter writer(paths.decisions);
  for (const auto& d : decisions) writer.append(LogRecord{d, kSchemaVersion, run_id});
  writer.flush();
}

LoadedLogs load_run(const std::filesystem::path& dir, const std::string& run_id) {
  const auto paths = run_paths(dir, run_id);
  auto events = load(paths.events);
  auto decisions = load(paths.decisions);
  LoadedLogs merged;
  merged.events = std::move(events.events);
  merged.events.insert(merged.events.end(), decisions.events.begin(), decisions.events.end());
  merged.decisions = std::move(decisions.decisions);
  merged.decisions.insert(merged.decisions.end(), events.decisions.begin(), events.decisions.end());
  return merged;
}

std::vector<DailyRow> replay(std::span<const Event> events,
                             std::span<const SelectionDecision> decisions, const KpiSpec& kpi) {
  if (decisions.empty()) return {};
  std::vector<ArmId> arms;
  for (const auto& [arm, p] : decisions.front().probabilities.entries()) arms.push_back(arm);
  for (const auto& d : decisions) {
    if (d.probabilities.size() != arms.size()) {
      throw InvalidLedger("decision at " + std::to_string(d.timestamp) + " has a different arm set");
    }
    for (std::size_t i = 0; i < arms.size(); ++i) {
      if (d.probabilities.entries()[i].first != arms[i]) {
        throw InvalidLedger("decision at " + std::to_string(d.timestamp) +
                            " has a different arm set");
      }
    }
  }

  const auto ledger = AttributionLedger::from_decisions(decisions);
  auto attributed = attribute_events(events, ledger);
  for (std::size_t i = 0; i < attributed.size(); ++i) {
    if (i > 0 && attributed[i].timestamp < attributed[i - 1].timestamp) {
      throw InvalidLedger("event log is not in timestamp order");
    }
    const auto& stored = events[i].arm;
    if (stored && stored != attributed[i].arm) {
      throw InvalidLedger("event at " + std::to_string(events[i].timestamp) + " is logged for arm '" +
                          stored->str() + "' but the decisions place it elsewhere");
    }
  }

  const KpiSpec ctr_spec{KpiKind::CTR, kpi.lookback_days, kpi.min_samples};
  const Timestamp start = decisions.front().timestamp;
  std::map<ArmId, std::int64_t> cumulative;
  for (const auto& arm : arms) cumulative[arm] = 0;
  std::size_t cursor = 0;

  std::vector<DailyRow> rows;
  for (std::int64_t day = 0;; ++day) {
    const auto anchor = anchor_decision(decisions, start, day);
    if (!anchor) break;
    const auto& decision = decisions[*anchor];
    const Timestamp t = decision.timestamp;
    for (; cursor < attributed.size() && attributed[cursor].timestamp < t; ++cursor) {
      const auto& e = attributed[cursor];
      if (e.kind == EventKind::Impression && e.arm) ++cumulative[*e.arm];
    }
    const auto snaps = snapshot_arms(attributed, arms, ctr_spec, t);
    for (std::size_t i = 0; i < arms.size(); ++i) {
      rows.push_back(DailyRow{day, arms[i], decision.probabilities.at(arms[i]), cumulative[arms[i]],
                              snaps[i].kpi_value});
    }
  }
  return rows;
}

}  // namespace ams
