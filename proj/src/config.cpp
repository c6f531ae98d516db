#include "bnkf/config.hpp"

#include <fstream>
#include <set>

namespace bnkf::config {

namespace {

using nlohmann::json;

json vec3_to_json(const Vector3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vector3 vec3_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw EstimateError(std::string("config: ") + what +
                        " must be a 3-element array");
  return Vector3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw EstimateError("config: unknown key '" + scope + it.key() + "'");
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["master_seed"] = c.master_seed;
  j["tiers"] = c.tiers;
  j["rates"] = c.rates;
  j["n_trajectories"] = c.n_trajectories;
  j["duration_s"] = c.duration_s;
  j["dt0_s"] = c.dt0_s;
  j["sensor_position"] =
      json::array({c.sensor_position[0], c.sensor_position[1],
                   c.sensor_position[2]});
  j["folds"] = c.folds;

  json g;
  g["center"] = vec3_to_json(c.generator.center);
  g["center_half_extent"] = vec3_to_json(c.generator.center_half_extent);
  g["amplitude_budget"] = vec3_to_json(c.generator.amplitude_budget);
  g["n_sinusoids"] = c.generator.n_sinusoids;
  g["omega_min"] = c.generator.omega_min;
  g["omega_max"] = c.generator.omega_max;
  g["v_max"] = c.generator.v_max;
  g["a_max"] = c.generator.a_max;
  g["drift_velocity"] = vec3_to_json(c.generator.drift_velocity);
  g["amplitude_scale"] = c.generator.amplitude_scale;
  j["generator"] = std::move(g);

  json f;
  f["kappa"] = c.kappa;
  if (c.q_auto)
    f["process_noise_q"] = "auto";
  else
    f["process_noise_q"] = c.q_value;
  f["q_grid"] = c.q_grid;
  j["filter"] = std::move(f);

  json b;
  b["epochs"] = c.epochs;
  b["learning_rate"] = c.learning_rate;
  b["batch_size"] = c.batch_size;
  b["beta"] = c.beta;
  b["axis_beta"] = c.axis_beta;
  b["prior_sigma"] = c.prior_sigma;
  b["mc_samples"] = c.mc_samples;
  j["bnn"] = std::move(b);

  j["timing_reps"] = c.timing_reps;
  j["threads"] = c.threads;
  return j;
}

RunConfig from_json(const json& in) {
  const json& j = in.contains("config") ? in.at("config") : in;
  if (!j.is_object()) throw EstimateError("config: expected a JSON object");

  reject_unknown(j,
                 {"master_seed", "tiers", "rates", "n_trajectories",
                  "duration_s", "dt0_s", "sensor_position", "folds",
                  "generator", "filter", "bnn", "timing_reps", "threads"},
                 "");

  RunConfig c;
  if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("tiers")) c.tiers = j["tiers"].get<std::vector<std::string>>();
  if (j.contains("rates")) c.rates = j["rates"].get<std::vector<double>>();
  if (j.contains("n_trajectories")) c.n_trajectories = j["n_trajectories"].get<int>();
  if (j.contains("duration_s")) c.duration_s = j["duration_s"].get<double>();
  if (j.contains("dt0_s")) c.dt0_s = j["dt0_s"].get<double>();
  if (j.contains("sensor_position")) {
    const Vector3 v = vec3_from_json(j["sensor_position"], "sensor_position");
    c.sensor_position = {v.x(), v.y(), v.z()};
  }
  if (j.contains("folds")) c.folds = j["folds"].get<int>();

  if (j.contains("generator")) {
    const json& g = j["generator"];
    reject_unknown(g,
                   {"center", "center_half_extent", "amplitude_budget",
                    "n_sinusoids", "omega_min", "omega_max", "v_max", "a_max",
                    "drift_velocity", "amplitude_scale"},
                   "generator.");
    if (g.contains("center")) c.generator.center = vec3_from_json(g["center"], "generator.center");
    if (g.contains("center_half_extent"))
      c.generator.center_half_extent =
          vec3_from_json(g["center_half_extent"], "generator.center_half_extent");
    if (g.contains("amplitude_budget"))
      c.generator.amplitude_budget =
          vec3_from_json(g["amplitude_budget"], "generator.amplitude_budget");
    if (g.contains("n_sinusoids")) c.generator.n_sinusoids = g["n_sinusoids"].get<int>();
    if (g.contains("omega_min")) c.generator.omega_min = g["omega_min"].get<double>();
    if (g.contains("omega_max")) c.generator.omega_max = g["omega_max"].get<double>();
    if (g.contains("v_max")) c.generator.v_max = g["v_max"].get<double>();
    if (g.contains("a_max")) c.generator.a_max = g["a_max"].get<double>();
    if (g.contains("drift_velocity"))
      c.generator.drift_velocity =
          vec3_from_json(g["drift_velocity"], "generator.drift_velocity");
    if (g.contains("amplitude_scale"))
      c.generator.amplitude_scale = g["amplitude_scale"].get<double>();
  }

  if (j.contains("filter")) {
    const json& f = j["filter"];
    reject_unknown(f, {"kappa", "process_noise_q", "q_grid"}, "filter.");
    if (f.contains("kappa")) c.kappa = f["kappa"].get<double>();
    if (f.contains("process_noise_q")) {
      const json& q = f["process_noise_q"];
      if (q.is_string()) {
        if (q.get<std::string>() != "auto")
          throw EstimateError("config: filter.process_noise_q must be a "
                              "number or \"auto\"");
        c.q_auto = true;
      } else {
        c.q_auto = false;
        c.q_value = q.get<double>();
      }
    }
    if (f.contains("q_grid")) c.q_grid = f["q_grid"].get<std::vector<double>>();
  }

  if (j.contains("bnn")) {
    const json& b = j["bnn"];
    reject_unknown(b,
                   {"epochs", "learning_rate", "batch_size", "beta",
                    "axis_beta", "prior_sigma", "mc_samples"},
                   "bnn.");
    if (b.contains("epochs")) c.epochs = b["epochs"].get<int>();
    if (b.contains("learning_rate")) c.learning_rate = b["learning_rate"].get<double>();
    if (b.contains("batch_size")) c.batch_size = b["batch_size"].get<int>();
    if (b.contains("beta")) c.beta = b["beta"].get<double>();
    if (b.contains("axis_beta")) c.axis_beta = b["axis_beta"].get<double>();
    if (b.contains("prior_sigma")) c.prior_sigma = b["prior_sigma"].get<double>();
    if (b.contains("mc_samples")) c.mc_samples = b["mc_samples"].get<int>();
  }

  if (j.contains("timing_reps")) c.timing_reps = j["timing_reps"].get<int>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();

  validate(c);
  return c;
}

RunConfig load(const std::string& path) {
  if (path.empty()) {
    RunConfig c;
    validate(c);
    return c;
  }
  std::ifstream in(path);
  if (!in) throw EstimateError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw EstimateError("config: parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

void validate(const RunConfig& c) {
  if (c.tiers.empty()) throw EstimateError("config: tiers must be nonempty");
  for (const auto& t : c.tiers) simkit::tier_from_name(t);
  if (c.rates.empty()) throw EstimateError("config: rates must be nonempty");
  for (double r : c.rates)
    if (!(r > 0.0) || r > 1.0)
      throw EstimateError("config: rates must lie in (0, 1]");
  if (c.folds < 2) throw EstimateError("config: folds must be >= 2");
  if (c.n_trajectories < c.folds)
    throw EstimateError("config: need at least as many trajectories as folds");
  if (!(c.duration_s > 0.0) || !(c.dt0_s > 0.0))
    throw EstimateError("config: duration_s and dt0_s must be positive");
  if (c.epochs < 1 || c.batch_size < 1)
    throw EstimateError("config: epochs and batch_size must be positive");
  if (!(c.learning_rate > 0.0))
    throw EstimateError("config: learning_rate must be positive");
  if (c.beta < 0.0 || c.axis_beta < 0.0)
    throw EstimateError("config: beta must be nonnegative");
  if (!(c.prior_sigma > 0.0))
    throw EstimateError("config: prior_sigma must be positive");
  if (c.mc_samples < 2) throw EstimateError("config: mc_samples must be >= 2");
  if (c.timing_reps < 5) throw EstimateError("config: timing_reps must be >= 5");
  if (!c.q_auto && !(c.q_value > 0.0))
    throw EstimateError("config: process_noise_q must be positive");
  for (double q : c.q_grid)
    if (!(q > 0.0)) throw EstimateError("config: q_grid entries must be positive");
}

}  // namespace bnkf::config
