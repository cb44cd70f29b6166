#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ams/bandit.hpp"
#include "ams/kpi_monitor.hpp"
#include "ams/selector_loop.hpp"

namespace ams {

/// Everything a simulate or serve invocation needs. Built from a JSON config
/// file, then overridden by command-line flags.
struct RunConfig {
  PolicyConfig policy;
  ScheduleConfig schedule;
  KpiSpec kpi;
  std::uint64_t seed = 1;
  std::string scenario;          // preset name or scenario file path
  bool live = false;             // serve mode: traffic arrives over HTTP
  std::vector<ArmId> arms;       // live mode arm set
  std::filesystem::path out = "out";
  std::string run_id = "run";

  /// Throws std::invalid_argument; called before any side effect.
  void validate() const;
};

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
///
///   {"policy":   {"kind": "egreedy", "epsilon0": 0.3, "alpha_days": 30,
///                 "temperature": 0.01, "ucb_c": 2, "prior_a": 1, "prior_b": 1},
///    "schedule": {"swap_minutes": 15, "kpi_refresh_hours": 24, "run_days": 30},
///    "kpi":      {"kind": "ctr", "lookback_days": 30, "min_samples": 100},
///    "seed": 1, "scenario": "lookback", "live": false, "arms": ["A", "B"],
///    "out": "out", "run_id": "run"}
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Minutes/hours/days given as reals, rounded to whole seconds.
Duration minutes_to_seconds(double minutes);
Duration days_to_seconds(double days);

}  // namespace ams
