#include "ams/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace ams {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw std::invalid_argument("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& target, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config key '" + where + key + "' has the wrong type");
  }
}

Duration round_seconds(double value, const char* what) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw std::invalid_argument(std::string(what) + " must be positive");
  }
  return static_cast<Duration>(std::llround(value));
}

}  // namespace

Duration minutes_to_seconds(double minutes) { return round_seconds(minutes * 60.0, "minutes"); }

Duration days_to_seconds(double days) {
  return round_seconds(days * static_cast<double>(kSecondsPerDay), "days");
}

void RunConfig::validate() const {
  policy.validate();
  schedule.validate();
  kpi.validate();
  if (run_id.empty() || run_id.find_first_of("/\\") != std::string::npos) {
    throw std::invalid_argument("run_id must be a non-empty file name component");
  }
  if (live) {
    if (arms.empty()) throw std::invalid_argument("live mode needs at least one arm");
    if (std::set<ArmId>(arms.begin(), arms.end()).size() != arms.size()) {
      throw std::invalid_argument("arm ids must be unique");
    }
  } else if (scenario.empty()) {
    throw std::invalid_argument("a scenario (preset name or file) is required");
  }
}

RunConfig config_from_json(const json& j, RunConfig base) {
  reject_unknown(j, {"policy", "schedule", "kpi", "seed", "scenario", "live", "arms", "out", "run_id"}, "");
  if (auto it = j.find("policy"); it != j.end()) {
    reject_unknown(*it, {"kind", "epsilon0", "alpha_days", "temperature", "ucb_c", "prior_a", "prior_b"},
                   "policy.");
    std::string kind;
    read(*it, "kind", kind, "policy.");
    if (!kind.empty()) base.policy.kind = policy_kind_from_string(kind);
    read(*it, "epsilon0", base.policy.epsilon0, "policy.");
    read(*it, "alpha_days", base.policy.alpha_days, "policy.");
    read(*it, "temperature", base.policy.temperature, "policy.");
    read(*it, "ucb_c", base.policy.ucb_c, "policy.");
    read(*it, "prior_a", base.policy.prior_a, "policy.");
    read(*it, "prior_b", base.policy.prior_b, "policy.");
  }
  if (auto it = j.find("schedule"); it != j.end()) {
    reject_unknown(*it, {"swap_minutes", "kpi_refresh_hours", "run_days"}, "schedule.");
    double value = 0.0;
    if (it->contains("swap_minutes")) {
      read(*it, "swap_minutes", value, "schedule.");
      base.schedule.swap_interval = minutes_to_seconds(value);
    }
    if (it->contains("kpi_refresh_hours")) {
      read(*it, "kpi_refresh_hours", value, "schedule.");
      base.schedule.kpi_refresh_interval = minutes_to_seconds(value * 60.0);
    }
    if (it->contains("run_days")) {
      read(*it, "run_days", value, "schedule.");
      base.schedule.run_duration = days_to_seconds(value);
    }
  }
  if (auto it = j.find("kpi"); it != j.end()) {
    reject_unknown(*it, {"kind", "lookback_days", "min_samples"}, "kpi.");
    std::string kind;
    read(*it, "kind", kind, "kpi.");
    if (!kind.empty()) base.kpi.kind = kpi_kind_from_string(kind);
    read(*it, "lookback_days", base.kpi.lookback_days, "kpi.");
    read(*it, "min_samples", base.kpi.min_samples, "kpi.");
  }
  read(j, "seed", base.seed, "");
  read(j, "scenario", base.scenario, "");
  read(j, "live", base.live, "");
  if (auto it = j.find("arms"); it != j.end()) {
    std::vector<std::string> ids;
    read(j, "arms", ids, "");
    base.arms.clear();
    for (auto& id : ids) base.arms.emplace_back(std::move(id));
  }
  std::string out;
  read(j, "out", out, "");
  if (!out.empty()) base.out = out;
  read(j, "run_id", base.run_id, "");
  return base;
}

json config_to_json(const RunConfig& c) {
  json arms = json::array();
  for (const auto& a : c.arms) arms.push_back(a.str());
  return json{
      {"policy",
       {{"kind", std::string(to_string(c.policy.kind))},
        {"epsilon0", c.policy.epsilon0},
        {"alpha_days", c.policy.alpha_days},
        {"temperature", c.policy.temperature},
        {"ucb_c", c.policy.ucb_c},
        {"prior_a", c.policy.prior_a},
        {"prior_b", c.policy.prior_b}}},
      {"schedule",
       {{"swap_minutes", static_cast<double>(c.schedule.swap_interval) / 60.0},
        {"kpi_refresh_hours", static_cast<double>(c.schedule.kpi_refresh_interval) / 3600.0},
        {"run_days", static_cast<double>(c.schedule.run_duration) / static_cast<double>(kSecondsPerDay)}}},
      {"kpi",
       {{"kind", std::string(to_string(c.kpi.kind))},
        {"lookback_days", c.kpi.lookback_days},
        {"min_samples", c.kpi.min_samples}}},
      {"seed", c.seed},
      {"scenario", c.scenario},
      {"live", c.live},
      {"arms", arms},
      {"out", c.out.string()},
      {"run_id", c.run_id}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace ams
