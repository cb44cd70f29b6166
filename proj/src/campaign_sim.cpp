#include "ams/campaign_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ams {

namespace {

constexpr std::uint64_t kTrafficStream = 2;

}  // namespace

CtrCurve::CtrCurve(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("CTR curve needs at least one breakpoint");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto [day, ctr] = points_[i];
    if (!std::isfinite(day) || !std::isfinite(ctr)) {
      throw std::invalid_argument("CTR curve breakpoints must be finite");
    }
    if (ctr < 0.0 || ctr > 1.0) throw std::invalid_argument("CTR curve values must lie in [0, 1]");
    if (i > 0 && day <= points_[i - 1].first) {
      throw std::invalid_argument("CTR curve days must be strictly increasing");
    }
  }
}

double CtrCurve::at(double day) const {
  if (day <= points_.front().first) return points_.front().second;
  if (day >= points_.back().first) return points_.back().second;
  auto hi = std::upper_bound(points_.begin(), points_.end(), day,
                             [](double d, const Point& p) { return d < p.first; });
  auto lo = std::prev(hi);
  const double w = (day - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

void SimScenario::validate() const {
  if (arms.empty()) throw std::invalid_argument("scenario has no arms");
  std::set<ArmId> ids;
  for (const auto& a : arms) {
    if (!ids.insert(a.id).second) throw std::invalid_argument("duplicate arm '" + a.id.str() + "'");
    if (a.curve.points().empty()) throw std::invalid_argument("arm '" + a.id.str() + "' has no curve");
  }
  if (!std::isfinite(impressions_per_interval) || impressions_per_interval < 0.0) {
    throw std::invalid_argument("impressions_per_interval must be non-negative");
  }
  if (volume == VolumeModel::Fixed && impressions_per_interval != std::floor(impressions_per_interval)) {
    throw std::invalid_argument("fixed impressions_per_interval must be an integer");
  }
  if (cost_per_impression_micros < 0) {
    throw std::invalid_argument("cost_per_impression_micros must be non-negative");
  }
  if (!std::isfinite(duration_days) || duration_days <= 0.0) {
    throw std::invalid_argument("duration_days must be positive");
  }
  if (!(conversion_rate_per_click >= 0.0 && conversion_rate_per_click <= 1.0)) {
    throw std::invalid_argument("conversion_rate_per_click must lie in [0, 1]");
  }
}

std::vector<ArmId> SimScenario::arm_ids() const {
  std::vector<ArmId> ids;
  for (const auto& a : arms) ids.push_back(a.id);
  return ids;
}

const CtrCurve& SimScenario::curve(const ArmId& arm) const {
  for (const auto& a : arms) {
    if (a.id == arm) return a.curve;
  }
  throw std::invalid_argument("unknown arm '" + arm.str() + "'");
}

Duration SimScenario::duration_seconds() const {
  return static_cast<Duration>(std::llround(duration_days * static_cast<double>(kSecondsPerDay)));
}

double SimScenario::day_of(double ts) const {
  return (ts - static_cast<double>(start_time)) / static_cast<double>(kSecondsPerDay);
}

std::vector<Event> step(const SimScenario& scenario, const ArmId& active, Timestamp start,
                        Timestamp end, Rng& rng) {
  const CtrCurve& curve = scenario.curve(active);
  if (start < scenario.start_time || end > scenario.start_time + scenario.duration_seconds() ||
      start >= end) {
    throw std::invalid_argument("interval lies outside the scenario duration");
  }
  const std::int64_t count =
      scenario.volume == VolumeModel::Fixed
          ? static_cast<std::int64_t>(scenario.impressions_per_interval)
          : rng.poisson(scenario.impressions_per_interval);
  const double ctr = curve.at(scenario.day_of((static_cast<double>(start) + static_cast<double>(end)) / 2.0));
  const double cvr = scenario.conversion_rate_per_click;

  std::vector<Event> events;
  events.reserve(static_cast<std::size_t>(count) + static_cast<std::size_t>(count * ctr * 2) + 4);
  const Duration span = end - start;
  for (std::int64_t i = 0; i < count; ++i) {
    const Timestamp ts = start + (i * span) / count;
    events.push_back(Event{ts, EventKind::Impression, scenario.cost_per_impression_micros, {}});
    if (!rng.bernoulli(ctr)) continue;
    events.push_back(Event{ts, EventKind::Click, 0, {}});
    if (cvr > 0.0 && rng.bernoulli(cvr)) {
      events.push_back(Event{ts, EventKind::Conversion, 0, {}});
    }
  }
  return events;
}

SimulatedCampaign::SimulatedCampaign(const SimScenario& scenario, std::uint64_t seed)
    : scenario_(scenario), rng_(seed, kTrafficStream) {}

std::vector<Event> SimulatedCampaign::generate(const ArmId& active, Timestamp start, Timestamp end) {
  return step(scenario_, active, start, end, rng_);
}

SimResult run_scenario(const SimScenario& scenario, const PolicyConfig& policy,
                       ScheduleConfig schedule, const KpiSpec& kpi, std::uint64_t seed) {
  scenario.validate();
  schedule.run_duration = scenario.duration_seconds();
  SimulatedCampaign source(scenario, seed);
  auto out = run(scenario.arm_ids(), source, policy, schedule, kpi, seed, scenario.start_time);

  SimResult result;
  result.arms = scenario.arm_ids();
  result.start_time = scenario.start_time;
  result.run_duration = schedule.run_duration;
  result.events = std::move(out.events);
  result.decisions = std::move(out.decisions);
  result.daily = std::move(out.daily);
  result.final_state = std::move(out.final_state);
  result.total_clicks = std::count_if(result.events.begin(), result.events.end(),
                                      [](const Event& e) { return e.kind == EventKind::Click; });
  result.regret = regret(result, scenario);
  return result;
}

SimResult ab_baseline(const SimScenario& scenario, const ScheduleConfig& schedule,
                      const KpiSpec& kpi, std::uint64_t seed) {
  PolicyConfig policy;
  policy.kind = PolicyKind::RoundRobin;
  return run_scenario(scenario, policy, schedule, kpi, seed);
}

double regret(const SimResult& result, const SimScenario& scenario) {
  if (result.arms != scenario.arm_ids() || result.start_time != scenario.start_time ||
      result.run_duration != scenario.duration_seconds()) {
    throw std::invalid_argument("simulation result does not belong to this scenario");
  }
  const Timestamp end = result.start_time + result.run_duration;
  const auto& log = result.decisions;
  double total = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const Timestamp from = log[i].timestamp;
    const Timestamp to = i + 1 < log.size() ? std::min(log[i + 1].timestamp, end) : end;
    if (from >= to) continue;
    const double day = scenario.day_of((static_cast<double>(from) + static_cast<double>(to)) / 2.0);
    double best = 0.0;
    for (const auto& a : scenario.arms) best = std::max(best, a.curve.at(day));
    total += scenario.impressions_per_interval * (best - scenario.curve(log[i].chosen).at(day));
  }
  return total;
}

bool is_preset(std::string_view name) { return name == "lookback" || name == "features"; }

SimScenario preset_scenario(std::string_view name) {
  SimScenario s;
  s.impressions_per_interval = 100;
  s.cost_per_impression_micros = 2'000;
  s.conversion_rate_per_click = 0.05;
  s.duration_days = 30.0;
  if (name == "lookback") {
    // B (long training window) overtakes A at day 7.
    s.name = "lookback";
    s.arms.push_back({ArmId("A"), CtrCurve::constant(0.016)});
    s.arms.push_back(
        {ArmId("B"), CtrCurve({{0.0, 0.010}, {6.0, 0.010}, {7.0, 0.016}, {8.0, 0.030}})});
    return s;
  }
  if (name == "features") {
    // A is better online for the whole campaign.
    s.name = "features";
    s.arms.push_back({ArmId("A"), CtrCurve::constant(0.020)});
    s.arms.push_back({ArmId("B"), CtrCurve::constant(0.013)});
    return s;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("line " + std::to_string(line) + ": invalid number '" +
                                std::string(text) + "'");
  }
  return value;
}

CtrCurve parse_curve(std::string_view text, std::size_t line) {
  std::vector<CtrCurve::Point> points;
  std::string cleaned(text);
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::istringstream in(cleaned);
  std::string token;
  while (in >> token) {
    const auto colon = token.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line) + ": breakpoint '" + token +
                                  "' must be day:ctr");
    }
    const auto day = parse_number<double>(std::string_view(token).substr(0, colon), line);
    const auto ctr = parse_number<double>(std::string_view(token).substr(colon + 1), line);
    points.emplace_back(day, ctr);
  }
  try {
    return CtrCurve(std::move(points));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("line " + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace

SimScenario parse_scenario(std::string_view text) {
  SimScenario s;
  s.arms.clear();
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string content = trim(raw);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key.rfind("arm.", 0) == 0) {
      const std::string id = key.substr(4);
      if (id.empty()) throw std::invalid_argument("line " + std::to_string(line) + ": empty arm id");
      s.arms.push_back({ArmId(id), parse_curve(value, line)});
    } else if (key == "name") {
      s.name = value;
    } else if (key == "duration_days") {
      s.duration_days = parse_number<double>(value, line);
    } else if (key == "start_time") {
      s.start_time = parse_number<Timestamp>(value, line);
    } else if (key == "impressions_per_interval") {
      s.impressions_per_interval = parse_number<double>(value, line);
    } else if (key == "volume_model") {
      if (value == "fixed") {
        s.volume = VolumeModel::Fixed;
      } else if (value == "poisson") {
        s.volume = VolumeModel::Poisson;
      } else {
        throw std::invalid_argument("line " + std::to_string(line) +
                                    ": volume_model must be fixed or poisson");
      }
    } else if (key == "cost_per_impression_micros") {
      s.cost_per_impression_micros = parse_number<std::int64_t>(value, line);
    } else if (key == "conversion_rate_per_click") {
      s.conversion_rate_per_click = parse_number<double>(value, line);
    } else {
      throw std::invalid_argument("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

SimScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string format_scenario(const SimScenario& s) {
  std::ostringstream out;
  out << "name = " << s.name << '\n';
  out << "duration_days = " << format_double(s.duration_days) << '\n';
  out << "start_time = " << s.start_time << '\n';
  out << "impressions_per_interval = " << format_double(s.impressions_per_interval) << '\n';
  out << "volume_model = " << (s.volume == VolumeModel::Fixed ? "fixed" : "poisson") << '\n';
  out << "cost_per_impression_micros = " << s.cost_per_impression_micros << '\n';
  out << "conversion_rate_per_click = " << format_double(s.conversion_rate_per_click) << '\n';
  for (const auto& a : s.arms) {
    out << "arm." << a.id.str() << " =";
    for (const auto& [day, ctr] : a.curve.points()) {
      out << ' ' << format_double(day) << ':' << format_double(ctr);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ams
