// ams: simulate, replay, report and serve for the online model selector.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "ams/campaign_sim.hpp"
#include "ams/config.hpp"
#include "ams/event_store.hpp"
#include "ams/report.hpp"
#include "ams/service.hpp"

namespace {

using namespace ams;

struct RunFlags {
  std::optional<std::string> config;
  std::optional<std::string> scenario;
  std::optional<std::string> policy;
  std::optional<double> epsilon0;
  std::optional<double> alpha_days;
  std::optional<double> temperature;
  std::optional<double> ucb_c;
  std::optional<double> swap_minutes;
  std::optional<double> refresh_hours;
  std::optional<std::string> kpi;
  std::optional<double> lookback_days;
  std::optional<std::int64_t> min_samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> run_id;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration; flags override it");
    app->add_option("--scenario", scenario, "preset name (lookback, features) or scenario file");
    app->add_option("--policy", policy, "egreedy, softmax, ucb, thompson, uniform or ab");
    app->add_option("--epsilon0", epsilon0, "initial exploration rate");
    app->add_option("--alpha-days", alpha_days, "days until exploration reaches zero");
    app->add_option("--temperature", temperature, "softmax temperature");
    app->add_option("--ucb-c", ucb_c, "UCB exploration constant");
    app->add_option("--swap-minutes", swap_minutes, "minutes between arm swaps");
    app->add_option("--refresh-hours", refresh_hours, "hours between KPI refreshes");
    app->add_option("--kpi", kpi, "selection KPI: ctr, cpc or cpa");
    app->add_option("--lookback-days", lookback_days, "KPI lookback window in days");
    app->add_option("--min-samples", min_samples, "impressions needed before an arm qualifies");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--run-id", run_id, "run identifier used in file names");
  }

  RunConfig resolve() const {
    RunConfig c = config ? load_config(*config) : RunConfig{};
    if (scenario) c.scenario = *scenario;
    if (policy) c.policy.kind = policy_kind_from_string(*policy);
    if (epsilon0) c.policy.epsilon0 = *epsilon0;
    if (alpha_days) c.policy.alpha_days = *alpha_days;
    if (temperature) c.policy.temperature = *temperature;
    if (ucb_c) c.policy.ucb_c = *ucb_c;
    if (swap_minutes) c.schedule.swap_interval = minutes_to_seconds(*swap_minutes);
    if (refresh_hours) c.schedule.kpi_refresh_interval = minutes_to_seconds(*refresh_hours * 60.0);
    if (kpi) c.kpi.kind = kpi_kind_from_string(*kpi);
    if (lookback_days) c.kpi.lookback_days = *lookback_days;
    if (min_samples) c.kpi.min_samples = *min_samples;
    if (seed) c.seed = *seed;
    if (out) c.out = *out;
    if (run_id) c.run_id = *run_id;
    return c;
  }
};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

SimScenario resolve_scenario(const std::string& name) {
  if (is_preset(name)) return preset_scenario(name);
  if (!std::filesystem::exists(name)) {
    throw std::runtime_error("scenario file '" + name + "' does not exist");
  }
  return load_scenario(name);
}

int cmd_simulate(const RunFlags& flags) {
  RunConfig config = flags.resolve();
  config.live = false;
  config.validate();
  const SimScenario scenario = resolve_scenario(config.scenario);

  const auto result = run_scenario(scenario, config.policy, config.schedule, config.kpi, config.seed);
  std::filesystem::create_directories(config.out);
  write_run(config.out, config.run_id, result.events, result.decisions);
  write_file(config.out / (config.run_id + ".report.csv"), to_csv(result.daily));

  std::map<ArmId, std::int64_t> impressions;
  std::int64_t total = 0;
  for (const auto& e : result.events) {
    if (e.kind == EventKind::Impression && e.arm) {
      ++impressions[*e.arm];
      ++total;
    }
  }
  std::cout << "scenario " << scenario.name << ", policy " << to_string(config.policy.kind) << ", seed "
            << config.seed << '\n';
  std::cout << "decisions " << result.decisions.size() << ", impressions " << total << ", clicks "
            << result.total_clicks << ", expected-click regret " << format_double(result.regret) << '\n';
  for (const auto& arm : result.arms) {
    const double share = total > 0 ? static_cast<double>(impressions[arm]) / static_cast<double>(total) : 0.0;
    std::cout << "  " << arm.str() << ": impression share " << std::fixed << std::setprecision(4) << share
              << ", final probability " << result.decisions.back().probabilities.at(arm) << '\n';
    std::cout.unsetf(std::ios::floatfield);
  }
  std::cout << "wrote " << (config.out / (config.run_id + ".report.csv")).string() << '\n';
  return 0;
}

int cmd_replay(const std::string& logs, const std::string& run_id, double lookback_days,
               const std::optional<std::string>& out) {
  KpiSpec kpi;
  kpi.lookback_days = lookback_days;
  kpi.validate();
  const auto loaded = load_run(logs, run_id);
  const auto rows = replay(loaded.events, loaded.decisions, kpi);
  const std::filesystem::path dir = out ? std::filesystem::path(*out) : std::filesystem::path(logs);
  std::filesystem::create_directories(dir);
  const auto path = dir / (run_id + ".replay.csv");
  write_file(path, to_csv(rows));
  std::cout << "replayed " << loaded.events.size() << " events and " << loaded.decisions.size()
            << " decisions into " << path.string() << '\n';
  return 0;
}

int cmd_report(const std::string& logs, const std::string& run_id) {
  const auto loaded = load_run(logs, run_id);
  if (loaded.decisions.empty()) {
    std::cout << "run " << run_id << " has no decisions\n";
    return 0;
  }
  const auto ledger = AttributionLedger::from_decisions(loaded.decisions);
  const auto attributed = attribute_events(loaded.events, ledger);
  std::vector<ArmId> arms;
  for (const auto& [arm, p] : loaded.decisions.front().probabilities.entries()) arms.push_back(arm);

  struct Totals {
    std::int64_t intervals = 0, impressions = 0, clicks = 0, conversions = 0, spend = 0;
  };
  std::map<ArmId, Totals> totals;
  for (const auto& d : loaded.decisions) ++totals[d.chosen].intervals;
  std::int64_t all_impressions = 0;
  for (const auto& e : attributed) {
    if (!e.arm) continue;
    auto& t = totals[*e.arm];
    switch (e.kind) {
      case EventKind::Impression:
        ++t.impressions;
        ++all_impressions;
        t.spend += e.cost_micros;
        break;
      case EventKind::Click:
        ++t.clicks;
        break;
      case EventKind::Conversion:
        ++t.conversions;
        break;
    }
  }

  const auto& last = loaded.decisions.back();
  std::cout << "run " << run_id << ": " << loaded.decisions.size() << " decisions, " << all_impressions
            << " attributed impressions, final epsilon " << format_double(last.epsilon_used) << "\n";
  std::cout << std::left << std::setw(12) << "arm" << std::right << std::setw(10) << "intervals"
            << std::setw(13) << "impressions" << std::setw(9) << "share" << std::setw(9) << "clicks"
            << std::setw(10) << "CTR" << std::setw(14) << "CPC(micros)" << std::setw(11) << "final_p"
            << '\n';
  for (const auto& arm : arms) {
    const auto& t = totals[arm];
    const double share =
        all_impressions > 0 ? static_cast<double>(t.impressions) / static_cast<double>(all_impressions) : 0.0;
    std::ostringstream ctr, cpc;
    ctr << std::fixed << std::setprecision(5);
    cpc << std::fixed << std::setprecision(1);
    if (t.impressions > 0) ctr << static_cast<double>(t.clicks) / static_cast<double>(t.impressions); else ctr << "-";
    if (t.clicks > 0) cpc << static_cast<double>(t.spend) / static_cast<double>(t.clicks); else cpc << "-";
    std::cout << std::left << std::setw(12) << arm.str() << std::right << std::setw(10) << t.intervals
              << std::setw(13) << t.impressions << std::setw(9) << std::fixed << std::setprecision(4)
              << share << std::setw(9) << t.clicks << std::setw(10) << ctr.str() << std::setw(14)
              << cpc.str() << std::setw(11) << last.probabilities.at(arm) << '\n';
    std::cout.unsetf(std::ios::floatfield);
  }
  return 0;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const RunFlags& flags, const std::string& host, int port,
              const std::vector<std::string>& arm_ids, const std::optional<std::string>& resume) {
  RunConfig config = flags.resolve();
  if (!arm_ids.empty()) {
    config.arms.clear();
    for (const auto& id : arm_ids) config.arms.emplace_back(id);
  }
  config.live = true;
  if (!config.arms.empty()) config.validate();

  auto clock = std::make_shared<WallClock>();
  Service service(clock, config.out);
  if (resume) {
    service.resume_run(*resume);
  } else if (!config.arms.empty()) {
    service.start_run(config);
  }
  httplib::Server server;
  service.register_routes(server);
  service.start_ticker(std::chrono::milliseconds(250));

  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving on http://" << host << ':' << port << "/v1" << std::endl;
  const bool ok = server.listen(host, port);
  service.stop_ticker();
  g_server = nullptr;
  if (!ok) {
    std::cerr << "error: could not listen on " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online model selection with decaying epsilon-greedy bandits"};
  app.require_subcommand(1);

  RunFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "run a simulated campaign and write logs and report");
  sim_flags.attach(simulate);

  std::string logs;
  std::string run_id = "run";
  double lookback_days = 30.0;
  std::optional<std::string> replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "rebuild the per-day report from stored logs");
  replay_cmd->add_option("--logs", logs, "directory holding <run_id>.events.log and .decisions.log")
      ->required();
  replay_cmd->add_option("--run-id", run_id, "run identifier");
  replay_cmd->add_option("--lookback-days", lookback_days, "CTR lookback window in days");
  replay_cmd->add_option("--out", replay_out, "output directory (default: the logs directory)");

  auto* report_cmd = app.add_subcommand("report", "print per-arm totals for a stored run");
  report_cmd->add_option("--logs", logs, "log directory")->required();
  report_cmd->add_option("--run-id", run_id, "run identifier");

  RunFlags serve_flags;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> arms;
  std::optional<std::string> resume;
  auto* serve = app.add_subcommand("serve", "run the HTTP selection and ingestion service");
  serve_flags.attach(serve);
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port");
  serve->add_option("--arms", arms, "arm ids for a run started at launch")->delimiter(',');
  serve->add_option("--resume", resume, "resume a persisted run from --out");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return cmd_simulate(sim_flags);
    if (*replay_cmd) return cmd_replay(logs, run_id, lookback_days, replay_out);
    if (*report_cmd) return cmd_report(logs, run_id);
    if (*serve) return cmd_serve(serve_flags, host, port, arms, resume);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
