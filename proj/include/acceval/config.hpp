#pragma once

#include <string>

#include <json.hpp>

#include "acceval/estimator.hpp"
#include "acceval/hv_model.hpp"
#include "acceval/plant_controller.hpp"
#include "acceval/qp_solver.hpp"
#include "acceval/sim_engine.hpp"

namespace acceval {

struct ConfigPaths {
  std::string hv_params;
  std::string shift_table;
  std::string records;
  std::string report;
  std::string trace;

  bool operator==(const ConfigPaths&) const = default;
};

/// Everything needed to reproduce a planning or simulation run. SI units
/// throughout; the conflict range of 30 ft is stored as 9.144 m.
struct ExperimentConfig {
  HvModelParams hv;
  PlantParams plant;
  ControllerGains controller;
  ScenarioParams scenario;
  CampaignConfig campaign;
  Metric metric = Metric::crash;
  StoppingRule stopping;
  InjuryModelParams injury;
  QpOptions solver;
  ConfigPaths paths;

  /// Range checks on every physical parameter; throws std::invalid_argument.
  void validate() const;

  EstimateOptions estimate_options() const;
};

/// Parses a config document. Missing keys take their defaults; unknown keys
/// are rejected. The hv section is replaced by paths.hv_params when set.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);

ClosedLoopModel build_model(const ExperimentConfig& cfg);

nlohmann::json hv_params_to_json(const HvModelParams& p);
HvModelParams hv_params_from_json(const nlohmann::json& j);

/// Fitted-parameter file: {"hv": {...}, "fit": {...}, "source": ...}.
HvModelParams load_hv_params_file(const std::string& path);

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace acceval
