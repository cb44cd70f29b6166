#include "ams/service.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <httplib.h>

namespace ams {

using nlohmann::json;

struct Service::Run {
  RunConfig config;
  Timestamp start_time = 0;
  std::unique_ptr<SelectorLoop> loop;
  EventBuffer buffer;
  std::unique_ptr<LogWriter> events_log;
  std::unique_ptr<LogWriter> decisions_log;
  std::optional<Timestamp> last_event;
  bool finished = false;

  Timestamp end_time() const { return start_time + config.schedule.run_duration; }
};

struct Service::Published {
  std::string run_id;
  Timestamp start_time = 0;
  bool finished = false;
  std::size_t event_count = 0;
  LoopState state;
};

namespace {

std::filesystem::path run_file(const std::filesystem::path& dir, const std::string& run_id) {
  return dir / (run_id + ".run.json");
}

json probabilities_json(const ProbabilityVector& pv) {
  json out = json::array();
  for (const auto& [arm, p] : pv.entries()) out.push_back({{"arm", arm.str()}, {"p", p}});
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

Event parse_event(const json& j, std::size_t index) {
  const std::string where = "events[" + std::to_string(index) + "]";
  if (!j.is_object()) throw BadRequest(where + ": must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "ts" && key != "kind" && key != "cost_micros" && key != "arm") {
      throw BadRequest(where + "." + key + ": unknown field");
    }
  }
  Event e;
  auto ts = j.find("ts");
  if (ts == j.end() || !ts->is_number_integer()) {
    throw BadRequest(where + ".ts: required integer seconds");
  }
  e.timestamp = ts->get<Timestamp>();
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string()) throw BadRequest(where + ".kind: required string");
  try {
    e.kind = event_kind_from_string(kind->get<std::string>());
  } catch (const std::invalid_argument& err) {
    throw BadRequest(where + ".kind: " + err.what());
  }
  if (auto cost = j.find("cost_micros"); cost != j.end()) {
    if (!cost->is_number_integer()) throw BadRequest(where + ".cost_micros: must be an integer");
    e.cost_micros = cost->get<std::int64_t>();
  }
  try {
    validate_event(e);
  } catch (const std::invalid_argument& err) {
    throw BadRequest(where + ".cost_micros: " + err.what());
  }
  if (auto arm = j.find("arm"); arm != j.end() && !arm->is_null()) {
    if (!arm->is_string() || arm->get<std::string>().empty()) {
      throw BadRequest(where + ".arm: must be a non-empty string");
    }
    e.arm = ArmId(arm->get<std::string>());
  }
  return e;
}

}  // namespace

Service::Service(std::shared_ptr<const Clock> clock, std::filesystem::path out_dir)
    : clock_(std::move(clock)), out_dir_(std::move(out_dir)) {
  publish_locked();
}

Service::~Service() { stop_ticker(); }

std::string Service::start_run(RunConfig config) {
  config.live = true;
  config.validate();
  std::lock_guard lock(timeline_mutex_);
  if (run_ && !run_->finished) {
    throw RunConflict("run '" + run_->config.run_id + "' is still active");
  }
  std::filesystem::create_directories(out_dir_);
  const auto paths = run_paths(out_dir_, config.run_id);
  if (std::filesystem::exists(run_file(out_dir_, config.run_id))) {
    throw RunConflict("run '" + config.run_id + "' already exists in " + out_dir_.string());
  }

  auto run = std::make_unique<Run>();
  run->config = config;
  run->start_time = clock_->now();
  run->loop = std::make_unique<SelectorLoop>(config.arms, config.policy, config.schedule, config.kpi,
                                             config.seed, run->start_time);
  {
    std::ofstream meta(run_file(out_dir_, config.run_id));
    meta << json{{"config", config_to_json(config)}, {"start_time", run->start_time}}.dump(2) << '\n';
  }
  run->events_log = std::make_unique<LogWriter>(paths.events);
  run->decisions_log = std::make_unique<LogWriter>(paths.decisions);
  run_ = std::move(run);

  auto decision = run_->loop->tick(run_->start_time, {});
  if (decision) {
    run_->decisions_log->append(LogRecord{*decision, kSchemaVersion, config.run_id});
    run_->decisions_log->flush();
  }
  publish_locked();
  return config.run_id;
}

void Service::resume_run(const std::string& run_id) {
  std::ifstream meta_in(run_file(out_dir_, run_id));
  if (!meta_in) throw NoSuchRun("no run '" + run_id + "' in " + out_dir_.string());
  const json meta = json::parse(meta_in);
  RunConfig config = config_from_json(meta.at("config"));
  config.live = true;
  config.validate();
  const Timestamp start = meta.at("start_time").get<Timestamp>();

  auto logs = load_run(out_dir_, run_id);

  // The refresh history follows from the decision timestamps: a refresh ran
  // at the first decision at or after each refresh boundary.
  std::optional<Timestamp> last_refresh;
  std::int64_t refresh_count = 0;
  Timestamp next_refresh = start + config.schedule.kpi_refresh_interval;
  for (const auto& d : logs.decisions) {
    if (d.timestamp >= next_refresh) {
      last_refresh = d.timestamp;
      ++refresh_count;
      const Duration elapsed = d.timestamp - start;
      next_refresh = start + (elapsed / config.schedule.kpi_refresh_interval + 1) *
                                 config.schedule.kpi_refresh_interval;
    }
  }

  auto run = std::make_unique<Run>();
  run->config = config;
  run->start_time = start;
  run->loop = std::make_unique<SelectorLoop>(config.arms, config.policy, config.schedule, config.kpi,
                                             config.seed, start);
  const auto ledger = AttributionLedger::from_decisions(logs.decisions);
  auto attributed = attribute_events(logs.events, ledger);
  run->loop->restore(logs.decisions, last_refresh, refresh_count, attributed);
  if (!attributed.empty()) run->last_event = attributed.back().timestamp;
  run->buffer.append(attributed);
  const auto paths = run_paths(out_dir_, run_id);
  run->events_log = std::make_unique<LogWriter>(paths.events);
  run->decisions_log = std::make_unique<LogWriter>(paths.decisions);
  run->finished = !logs.decisions.empty() && logs.decisions.back().timestamp >= run->end_time();

  std::lock_guard lock(timeline_mutex_);
  if (run_ && !run_->finished) throw RunConflict("run '" + run_->config.run_id + "' is still active");
  run_ = std::move(run);
  publish_locked();
}

void Service::pump() {
  std::lock_guard lock(timeline_mutex_);
  if (!run_ || run_->finished) return;
  const Timestamp now = clock_->now();
  std::optional<SelectionDecision> decision;
  run_->buffer.read([&](std::span<const Event> events) { decision = run_->loop->tick(now, events); });
  if (decision) {
    run_->decisions_log->append(LogRecord{*decision, kSchemaVersion, run_->config.run_id});
    run_->decisions_log->flush();
  }
  if (now >= run_->end_time()) run_->finished = true;
  publish_locked();
}

std::size_t Service::ingest(const json& body) {
  const json* list = &body;
  if (body.is_object()) {
    auto it = body.find("events");
    if (it == body.end()) throw BadRequest("events: required array");
    list = &*it;
  }
  if (!list->is_array()) throw BadRequest("events: must be an array");

  std::vector<Event> batch;
  batch.reserve(list->size());
  for (std::size_t i = 0; i < list->size(); ++i) batch.push_back(parse_event((*list)[i], i));

  std::lock_guard lock(timeline_mutex_);
  if (!run_) throw NoSuchRun("no active run");
  if (run_->finished) throw RunConflict("run '" + run_->config.run_id + "' has finished");

  const Timestamp now = clock_->now();
  const auto& loop = *run_->loop;
  std::optional<Timestamp> previous = run_->last_event;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& e = batch[i];
    const std::string where = "events[" + std::to_string(i) + "].ts";
    if (e.timestamp >= now) throw BadRequest(where + ": must be earlier than the service clock");
    if (previous && e.timestamp < *previous) throw BadRequest(where + ": timestamps must not decrease");
    if (loop.state().last_refresh && e.timestamp < *loop.state().last_refresh) {
      throw BadRequest(where + ": precedes the last KPI refresh");
    }
    previous = e.timestamp;
    const auto owner = loop.arm_at(e.timestamp);
    if (e.arm && e.arm != owner) {
      throw BadRequest("events[" + std::to_string(i) + "].arm: '" + e.arm->str() +
                       "' was not active at that time");
    }
    e.arm = owner;
  }

  for (const auto& e : batch) {
    run_->events_log->append(LogRecord{e, kSchemaVersion, run_->config.run_id});
  }
  run_->events_log->flush();
  run_->buffer.append(batch);
  run_->last_event = previous;
  publish_locked();
  return batch.size();
}

void Service::publish_locked() {
  auto snapshot = std::make_shared<Published>();
  if (run_) {
    snapshot->run_id = run_->config.run_id;
    snapshot->start_time = run_->start_time;
    snapshot->finished = run_->finished;
    snapshot->event_count = run_->buffer.size();
    snapshot->state = run_->loop->state();
  }
  std::lock_guard lock(publish_mutex_);
  published_ = std::move(snapshot);
}

std::shared_ptr<const Service::Published> Service::published() const {
  std::lock_guard lock(publish_mutex_);
  return published_;
}

json Service::selection() const {
  const auto snap = published();
  if (snap->run_id.empty()) throw NoSuchRun("no active run");
  const auto& log = snap->state.decision_log;
  if (log.empty()) throw NoSuchRun("run has no selection yet");
  const auto& last = log.back();
  return json{{"run_id", snap->run_id},
              {"timestamp", last.timestamp},
              {"active_arm", last.chosen.str()},
              {"epsilon", last.epsilon_used},
              {"probabilities", probabilities_json(last.probabilities)}};
}

json Service::stats() const {
  const auto snap = published();
  if (snap->run_id.empty()) throw NoSuchRun("no active run");
  const auto& state = snap->state;
  json arms = json::array();
  for (std::size_t i = 0; i < state.current_snapshots.size(); ++i) {
    const auto& s = state.current_snapshots[i];
    arms.push_back({{"arm", s.arm.str()},
                    {"window_start", s.window_start},
                    {"window_end", s.window_end},
                    {"impressions", s.impressions},
                    {"clicks", s.clicks},
                    {"conversions", s.conversions},
                    {"spend_micros", s.spend_micros},
                    {"kpi", optional_json(s.kpi_value)},
                    {"qualified", state.current_scores[i].qualified}});
  }
  json epsilon = state.decision_log.empty() ? json(nullptr) : json(state.decision_log.back().epsilon_used);
  json last_refresh = state.last_refresh ? json(*state.last_refresh) : json(nullptr);
  return json{{"run_id", snap->run_id},
              {"epsilon", epsilon},
              {"refresh_count", state.refresh_count},
              {"last_refresh", last_refresh},
              {"arms", arms}};
}

json Service::run_status(const std::string& run_id) const {
  const auto snap = published();
  if (snap->run_id.empty() || snap->run_id != run_id) throw NoSuchRun("unknown run '" + run_id + "'");
  return json{{"run_id", snap->run_id},
              {"status", snap->finished ? "finished" : "running"},
              {"start_time", snap->start_time},
              {"decisions", snap->state.decision_log.size()},
              {"events", snap->event_count}};
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& handler) {
  try {
    handler();
  } catch (const BadRequest& e) {
    reply(res, 400, {{"error", e.what()}});
  } catch (const RunConflict& e) {
    reply(res, 409, {{"error", e.what()}});
  } catch (const NoSuchRun& e) {
    reply(res, 404, {{"error", e.what()}});
  } catch (const std::invalid_argument& e) {
    reply(res, 400, {{"error", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", e.what()}});
  }
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw BadRequest(std::string("body: malformed JSON: ") + e.what());
  }
}

}  // namespace

void Service::register_routes(httplib::Server& server) {
  server.Get("/v1/selection", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, selection()); });
  });
  server.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, stats()); });
  });
  server.Post("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto accepted = ingest(parse_body(req));
      reply(res, 200, {{"accepted", accepted}});
    });
  });
  server.Post("/v1/runs", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      RunConfig base;
      base.live = true;
      const auto id = start_run(config_from_json(parse_body(req), base));
      reply(res, 201, {{"run_id", id}});
    });
  });
  server.Get(R"(/v1/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, run_status(req.matches[1].str())); });
  });
}

void Service::start_ticker(std::chrono::milliseconds period) {
  stop_ticker();
  ticking_ = true;
  ticker_ = std::thread([this, period] {
    while (ticking_) {
      try {
        pump();
      } catch (const std::exception& e) {
        // A clock regression or I/O failure stops the selector for good.
        std::cerr << "fatal: selector loop stopped: " << e.what() << '\n';
        std::abort();
      }
      std::this_thread::sleep_for(period);
    }
  });
}

void Service::stop_ticker() {
  ticking_ = false;
  if (ticker_.joinable()) ticker_.join();
}

}  // namespace ams
