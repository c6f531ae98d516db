#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnkf/simkit.hpp"

namespace bnkf::config {

// One config drives the whole pipeline. Every field has a default; the
// fully defaulted config is echoed verbatim into the run manifest so a
// manifest can replay the run byte-for-byte.
struct RunConfig {
  std::uint64_t master_seed = 20250809;
  std::vector<std::string> tiers = {"low", "medium", "high"};
  std::vector<double> rates = {1.0, 0.75, 0.5};
  int n_trajectories = 500;
  double duration_s = 60.0;
  double dt0_s = 0.1;
  std::array<double, 3> sensor_position = {0.0, 0.0, 0.0};
  int folds = 5;

  simkit::GeneratorParams generator;

  // filter settings
  double kappa = 0.0;
  bool q_auto = true;  // grid-searched per tier when true
  double q_value = 1.0;
  std::vector<double> q_grid = {0.01, 0.1, 1.0, 10.0, 100.0};

  // network settings
  int epochs = 30;
  double learning_rate = 1e-3;
  int batch_size = 64;
  double beta = 1.0;
  double axis_beta = 1.0;  // KL weight for the per-axis ensemble networks
  double prior_sigma = 0.1;
  int mc_samples = 100;

  int timing_reps = 7;
  int threads = 0;  // 0 = hardware concurrency

  SensorPose sensor() const {
    SensorPose s;
    s.position = Vector3(sensor_position[0], sensor_position[1],
                         sensor_position[2]);
    return s;
  }
};

nlohmann::json to_json(const RunConfig& config);

// Strict parse: unknown keys are rejected by name; missing keys take
// defaults. Accepts either a bare config object or a run manifest (any
// object with a "config" member).
RunConfig from_json(const nlohmann::json& j);

// Empty path -> all defaults.
RunConfig load(const std::string& path);

void validate(const RunConfig& config);

}  // namespace bnkf::config
