#include "acceval/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "acceval/error.hpp"

namespace acceval {

using nlohmann::json;

namespace {

// Reads keys of one object and rejects any key nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw std::invalid_argument("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T value{};
    get(key, value);
    out = value;
  }

  Section child(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    const auto it = doc_.find(key);
    return Section(it == doc_.end() ? kEmpty : *it, name_.empty() ? key : name_ + "." + key);
  }

  void finish() const {
    for (const auto& item : doc_.items()) {
      if (!seen_.count(item.key())) {
        throw std::invalid_argument("unknown config key '" +
                                    (name_.empty() ? item.key() : name_ + "." + item.key()) + "'");
      }
    }
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_hv(Section s, HvModelParams& p) {
  s.get("h0", p.h0);
  s.get("h1", p.h1);
  s.get("h2", p.h2);
  s.get("sigma_u", p.sigma_u);
  s.get("u_min", p.u_min);
  s.get("u_max", p.u_max);
  s.get("a_min", p.a_min);
  s.get("a_max", p.a_max);
  s.get("v_min", p.v_min);
  s.get("v_max", p.v_max);
  s.finish();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config out of range: " + what);
}

}  // namespace

json hv_params_to_json(const HvModelParams& p) {
  return json{{"h0", p.h0},       {"h1", p.h1},       {"h2", p.h2},       {"sigma_u", p.sigma_u},
              {"u_min", p.u_min}, {"u_max", p.u_max}, {"a_min", p.a_min}, {"a_max", p.a_max},
              {"v_min", p.v_min}, {"v_max", p.v_max}};
}

HvModelParams hv_params_from_json(const json& j) {
  HvModelParams p;
  read_hv(Section(j, "hv"), p);
  p.validate();
  return p;
}

HvModelParams load_hv_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open driver-model file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("driver-model file " + path + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("hv")) throw DataError("driver-model file " + path + " has no 'hv' section");
  return hv_params_from_json(doc.at("hv"));
}

void ExperimentConfig::validate() const {
  hv.validate();
  plant.validate();
  controller.validate();
  scenario.validate();
  campaign.validate();
  stopping.validate();

  require(std::abs(hv.h1) < 1.0, "hv.h1 must satisfy |h1| < 1");
  require(hv.sigma_u <= 10.0, "hv.sigma_u <= 10 m/s^2");
  require(hv.u_min >= -50.0 && hv.u_max <= 50.0, "hv input bounds within +-50 m/s^2");
  require(plant.mass <= 1e5, "plant.mass <= 1e5 kg");
  require(plant.frontal_area <= 100.0, "plant.frontal_area <= 100 m^2");
  require(plant.drag_coeff <= 5.0, "plant.drag_coeff <= 5");
  require(plant.air_density <= 5.0, "plant.air_density <= 5 kg/m^3");
  require(plant.rolling_resist >= 0.0 && plant.rolling_resist < 1.0, "plant.rolling_resist in [0, 1)");
  require(std::abs(plant.road_grade) < 0.5, "plant.road_grade within +-0.5 rad");
  require(std::abs(plant.wind_speed) <= 50.0, "plant.wind_speed within +-50 m/s");
  require(scenario.v0 <= 100.0, "scenario.v0 <= 100 m/s");
  require(scenario.ts <= 10.0, "scenario.ts <= 10 s");
  require(scenario.horizon <= 100000, "scenario.horizon <= 100000 steps");
  require(controller.desired_headway <= 60.0, "controller.desired_headway <= 60 s");
  campaign.event.validate(scenario.v0 * controller.desired_headway);
  require(solver.tolerance > 0.0, "solver.tolerance > 0");
  require(solver.max_iterations >= 0, "solver.max_iterations >= 0");
}

EstimateOptions ExperimentConfig::estimate_options() const {
  EstimateOptions o;
  o.metric = metric;
  o.stopping = stopping;
  o.batch_size = campaign.batch_size;
  o.injury = injury;
  return o;
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  Section root(doc, "");

  read_hv(root.child("hv"), cfg.hv);

  {
    Section s = root.child("plant");
    auto& p = cfg.plant;
    s.get("mass", p.mass);
    s.get("frontal_area", p.frontal_area);
    s.get("drag_coeff", p.drag_coeff);
    s.get("air_density", p.air_density);
    s.get("rolling_resist", p.rolling_resist);
    s.get("road_grade", p.road_grade);
    s.get("wind_speed", p.wind_speed);
    s.get("force_min", p.force_min);
    s.get("force_max", p.force_max);
    s.finish();
  }
  {
    Section s = root.child("controller");
    auto& g = cfg.controller;
    s.get("kp", g.kp);
    s.get("ki", g.ki);
    s.get("kd", g.kd);
    s.get("desired_headway", g.desired_headway);
    s.finish();
  }
  {
    Section s = root.child("scenario");
    auto& sc = cfg.scenario;
    s.get("v0", sc.v0);
    s.get("ts", sc.ts);
    s.get("horizon", sc.horizon);
    s.get("av_speed_min", sc.av_speed_min);
    s.get("av_speed_max", sc.av_speed_max);
    s.get("range_min", sc.range_min);
    s.get("range_max", sc.range_max);
    s.get("following_time", sc.following_time);
    s.finish();
  }
  {
    Section s = root.child("event");
    std::string kind = "crash";
    s.get("kind", kind);
    cfg.campaign.event.kind = parse_event_kind(kind);
    std::optional<double> range;
    s.get_optional("range_m", range);
    if (range) {
      cfg.campaign.event.event_range = *range;
    } else if (cfg.campaign.event.kind == EventKind::custom) {
      throw std::invalid_argument("custom event needs event.range_m");
    } else {
      cfg.campaign.event.event_range =
          cfg.campaign.event.kind == EventKind::crash ? 0.0 : kConflictRange;
    }
    s.finish();
  }
  {
    Section s = root.child("campaign");
    auto& c = cfg.campaign;
    std::string regime = to_string(c.regime);
    std::string metric =
        to_string(cfg.campaign.event.kind == EventKind::conflict ? Metric::conflict : Metric::crash);
    s.get("regime", regime);
    s.get("metric", metric);
    c.regime = parse_regime(regime);
    cfg.metric = parse_metric(metric);
    s.get("batch_size", c.batch_size);
    s.get("max_runs", c.max_runs);
    s.get("base_seed", c.base_seed);
    s.get_optional("uniform_width", c.uniform_width);
    std::string weighting = to_string(c.weighting);
    s.get("weighting", weighting);
    c.weighting = parse_weighting(weighting);
    s.finish();
  }
  {
    Section s = root.child("stopping");
    s.get("confidence", cfg.stopping.confidence);
    s.get("beta", cfg.stopping.beta);
    s.get("event_floor", cfg.stopping.event_floor);
    s.finish();
  }
  {
    Section s = root.child("injury");
    s.get("beta0", cfg.injury.beta0);
    s.get("beta1", cfg.injury.beta1);
    s.get("beta2", cfg.injury.beta2);
    s.finish();
  }
  {
    Section s = root.child("solver");
    s.get("tolerance", cfg.solver.tolerance);
    s.get("max_iterations", cfg.solver.max_iterations);
    s.finish();
  }
  {
    Section s = root.child("paths");
    auto& p = cfg.paths;
    s.get("hv_params", p.hv_params);
    s.get("shift_table", p.shift_table);
    s.get("records", p.records);
    s.get("report", p.report);
    s.get("trace", p.trace);
    s.finish();
  }
  root.finish();

  if (!cfg.paths.hv_params.empty()) cfg.hv = load_hv_params_file(cfg.paths.hv_params);
  if (cfg.metric == Metric::injury && cfg.campaign.event.kind != EventKind::crash) {
    throw std::invalid_argument("injury metric needs a crash event");
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& p = cfg.plant;
  const auto& g = cfg.controller;
  const auto& sc = cfg.scenario;
  const auto& c = cfg.campaign;
  json doc;
  doc["hv"] = hv_params_to_json(cfg.hv);
  doc["plant"] = {{"mass", p.mass},
                  {"frontal_area", p.frontal_area},
                  {"drag_coeff", p.drag_coeff},
                  {"air_density", p.air_density},
                  {"rolling_resist", p.rolling_resist},
                  {"road_grade", p.road_grade},
                  {"wind_speed", p.wind_speed},
                  {"force_min", p.force_min},
                  {"force_max", p.force_max}};
  doc["controller"] = {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}, {"desired_headway", g.desired_headway}};
  doc["scenario"] = {{"v0", sc.v0},
                     {"ts", sc.ts},
                     {"horizon", sc.horizon},
                     {"av_speed_min", sc.av_speed_min},
                     {"av_speed_max", sc.av_speed_max},
                     {"range_min", sc.range_min},
                     {"range_max", sc.range_max},
                     {"following_time", sc.following_time}};
  doc["event"] = {{"kind", to_string(c.event.kind)}, {"range_m", c.event.event_range}};
  doc["campaign"] = {{"regime", to_string(c.regime)},
                     {"metric", to_string(cfg.metric)},
                     {"batch_size", c.batch_size},
                     {"max_runs", c.max_runs},
                     {"base_seed", c.base_seed},
                     {"uniform_width", c.uniform_width ? json(*c.uniform_width) : json(nullptr)},
                     {"weighting", to_string(c.weighting)}};
  doc["stopping"] = {{"confidence", cfg.stopping.confidence},
                     {"beta", cfg.stopping.beta},
                     {"event_floor", cfg.stopping.event_floor}};
  doc["injury"] = {{"beta0", cfg.injury.beta0}, {"beta1", cfg.injury.beta1}, {"beta2", cfg.injury.beta2}};
  doc["solver"] = {{"tolerance", cfg.solver.tolerance}, {"max_iterations", cfg.solver.max_iterations}};
  doc["paths"] = {{"hv_params", cfg.paths.hv_params},
                  {"shift_table", cfg.paths.shift_table},
                  {"records", cfg.paths.records},
                  {"report", cfg.paths.report},
                  {"trace", cfg.paths.trace}};
  return doc;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << config_to_json(cfg).dump(2) << '\n';
}

ClosedLoopModel build_model(const ExperimentConfig& cfg) {
  return assemble_state_space(cfg.plant, cfg.controller, cfg.hv, cfg.scenario,
                              cfg.campaign.event.event_range);
}

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

}  // namespace acceval
