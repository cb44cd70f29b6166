#include <doctest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>

#include "ams/service.hpp"

using namespace ams;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr Timestamp kStart = 1'700'000'000;

struct Fixture {
  fs::path dir;
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(kStart);

  explicit Fixture(const std::string& name) : dir(fs::temp_directory_path() / ("ams_service_" + name)) {
    fs::remove_all(dir);
  }
  ~Fixture() { fs::remove_all(dir); }

  RunConfig config(const std::string& id = "live") const {
    RunConfig c;
    c.live = true;
    c.arms = {ArmId("A"), ArmId("B")};
    c.run_id = id;
    c.schedule.run_duration = 5 * kSecondsPerDay;
    return c;
  }
};

json impressions(Timestamp from, int n, int clicks_every) {
  json body = json::array();
  for (int i = 0; i < n; ++i) {
    body.push_back({{"ts", from + i}, {"kind", "impression"}, {"cost_micros", 2000}});
    if (clicks_every > 0 && i % clicks_every == 0) body.push_back({{"ts", from + i}, {"kind", "click"}});
  }
  return body;
}

// Serves `service` on an ephemeral port for the lifetime of the object.
struct Server {
  httplib::Server http;
  std::thread thread;
  int port = 0;

  explicit Server(Service& service) {
    service.register_routes(http);
    port = http.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { http.listen_after_bind(); });
    http.wait_until_ready();
  }
  ~Server() {
    http.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("cold start selection is uniform") {
  Fixture f("cold");
  Service service(f.clock, f.dir);
  CHECK_THROWS_AS(service.selection(), NoSuchRun);
  service.start_run(f.config());
  const auto sel = service.selection();
  CHECK(sel.at("timestamp") == kStart);
  CHECK(sel.at("epsilon") == 0.3);
  for (const auto& p : sel.at("probabilities")) CHECK(p.at("p") == 0.5);
  CHECK(fs::exists(f.dir / "live.run.json"));
  CHECK(fs::exists(f.dir / "live.decisions.log"));
}

TEST_CASE("events drive the next refresh") {
  Fixture f("refresh");
  Service service(f.clock, f.dir);
  service.start_run(f.config());
  const ArmId first(service.selection().at("active_arm").get<std::string>());

  f.clock->set(kStart + 600);
  CHECK(service.ingest(json{{"events", impressions(kStart, 500, 50)}}) == 510);
  service.pump();  // before the swap boundary: nothing changes
  CHECK(service.selection().at("timestamp") == kStart);

  f.clock->set(kStart + kSecondsPerDay);
  service.pump();
  const auto stats = service.stats();
  CHECK(stats.at("refresh_count") == 1);
  CHECK(stats.at("last_refresh") == kStart + kSecondsPerDay);
  for (const auto& arm : stats.at("arms")) {
    if (arm.at("arm") == first.str()) {
      CHECK(arm.at("impressions") == 500);
      CHECK(arm.at("clicks") == 10);
      CHECK(arm.at("spend_micros") == 1'000'000);
      CHECK(arm.at("kpi").get<double>() == doctest::Approx(0.02));
      CHECK(arm.at("qualified") == true);
    } else {
      CHECK(arm.at("impressions") == 0);
      CHECK(arm.at("kpi").is_null());
      CHECK(arm.at("qualified") == false);
    }
  }
  const auto sel = service.selection();
  const double eps = sel.at("epsilon").get<double>();
  CHECK(eps == doctest::Approx(0.3 * (1.0 - 1.0 / 30.0)));
  for (const auto& p : sel.at("probabilities")) {
    const double want = p.at("arm") == first.str() ? 1.0 - eps / 2 : eps / 2;
    CHECK(p.at("p").get<double>() == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("ingest validation") {
  Fixture f("ingest");
  Service service(f.clock, f.dir);
  CHECK_THROWS_AS(service.ingest(json::array()), NoSuchRun);
  service.start_run(f.config());
  f.clock->set(kStart + 100);
  auto rejects = [&](const json& body, const std::string& fragment) {
    try {
      service.ingest(body);
    } catch (const BadRequest& e) {
      return std::string(e.what()).find(fragment) != std::string::npos;
    }
    return false;
  };
  CHECK(rejects(json{{"evts", json::array()}}, "events"));
  CHECK(rejects(json::array({{{"kind", "click"}}}), "events[0].ts"));
  CHECK(rejects(json::array({{{"ts", kStart}, {"kind", "purchase"}}}), "events[0].kind"));
  CHECK(rejects(json::array({{{"ts", kStart}, {"kind", "impression"}, {"cost_micros", -1}}}), "cost_micros"));
  CHECK(rejects(json::array({{{"ts", kStart}, {"kind", "click"}, {"extra", 1}}}), "events[0].extra"));
  CHECK(rejects(json::array({{{"ts", kStart + 100}, {"kind", "click"}}}), "service clock"));
  CHECK(rejects(json::array({{{"ts", kStart + 5}, {"kind", "click"}}, {{"ts", kStart + 4}, {"kind", "click"}}}),
                "events[1].ts"));
  const std::string active = service.selection().at("active_arm");
  const std::string other = active == "A" ? "B" : "A";
  CHECK(rejects(json::array({{{"ts", kStart + 1}, {"kind", "click"}, {"arm", other}}}), "events[0].arm"));
  // A rejected batch leaves no trace.
  CHECK(service.run_status("live").at("events") == 0);
  CHECK(service.ingest(json::array({{{"ts", kStart + 1}, {"kind", "click"}, {"arm", active}}})) == 1);
  CHECK(rejects(json::array({{{"ts", kStart}, {"kind", "click"}}}), "must not decrease"));
}

TEST_CASE("HTTP surface") {
  Fixture f("http");
  Service service(f.clock, f.dir);
  Server server(service);
  httplib::Client client("127.0.0.1", server.port);

  CHECK(client.Get("/v1/selection")->status == 404);
  auto created = client.Post("/v1/runs", R"({"arms": ["A", "B"], "run_id": "web"})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(json::parse(created->body).at("run_id") == "web");
  CHECK(client.Post("/v1/runs", R"({"arms": ["A"], "run_id": "other"})", "application/json")->status == 409);

  auto sel = client.Get("/v1/selection");
  CHECK(sel->status == 200);
  CHECK(json::parse(sel->body).at("run_id") == "web");

  f.clock->set(kStart + 60);
  auto posted = client.Post("/v1/events", impressions(kStart, 10, 0).dump(), "application/json");
  CHECK(posted->status == 200);
  CHECK(json::parse(posted->body).at("accepted") == 10);

  auto bad = client.Post("/v1/events", "{not json", "application/json");
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).at("error").get<std::string>().find("body") != std::string::npos);
  CHECK(client.Post("/v1/events", R"([{"ts": "x", "kind": "click"}])", "application/json")->status == 400);

  auto status = client.Get("/v1/runs/web");
  CHECK(status->status == 200);
  CHECK(json::parse(status->body).at("events") == 10);
  CHECK(client.Get("/v1/runs/missing")->status == 404);
  CHECK(client.Get("/v1/stats")->status == 200);
}

TEST_CASE("restart and resume reproduce stats") {
  Fixture f("restart");
  json stats_before, selection_before;
  {
    Service service(f.clock, f.dir);
    service.start_run(f.config());
    for (int i = 0; i < 150; ++i) {
      const Timestamp t = f.clock->now();
      f.clock->set(t + 900);
      service.ingest(impressions(t, 60, 7 + i % 3));
      service.pump();
    }
    stats_before = service.stats();
    selection_before = service.selection();
    CHECK(stats_before.at("refresh_count") == 1);
  }
  Service restarted(f.clock, f.dir);
  CHECK_THROWS_AS(restarted.resume_run("nope"), NoSuchRun);
  restarted.resume_run("live");
  CHECK(restarted.stats() == stats_before);
  CHECK(restarted.selection() == selection_before);

  // The resumed run keeps going on the same grid.
  f.clock->set(f.clock->now() + 900);
  restarted.pump();
  CHECK(restarted.selection().at("timestamp") == selection_before.at("timestamp").get<Timestamp>() + 900);
  CHECK_THROWS_AS(restarted.start_run(f.config("second")), RunConflict);
}

TEST_CASE("a finished run frees the service") {
  Fixture f("finish");
  Service service(f.clock, f.dir);
  auto c = f.config();
  c.schedule.run_duration = kSecondsPerDay;
  service.start_run(c);
  f.clock->set(kStart + kSecondsPerDay);
  service.pump();
  CHECK(service.run_status("live").at("status") == "finished");
  CHECK_THROWS_AS(service.ingest(json::array()), RunConflict);
  CHECK_THROWS_AS(service.start_run(f.config()), RunConflict);  // id already used
  CHECK_NOTHROW(service.start_run(f.config("next")));
}

TEST_CASE("ticker pumps in the background") {
  Fixture f("ticker");
  Service service(f.clock, f.dir);
  service.start_run(f.config());
  service.start_ticker(std::chrono::milliseconds(5));
  f.clock->set(kStart + 900);
  for (int i = 0; i < 200 && service.run_status("live").at("decisions") == 1; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  service.stop_ticker();
  CHECK(service.run_status("live").at("decisions") == 2);
}
