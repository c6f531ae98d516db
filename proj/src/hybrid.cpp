#include "bnkf/hybrid.hpp"

#include <chrono>

#include "bnkf/filters.hpp"
#include "bnkf/geom.hpp"
#include "bnkf/rng.hpp"

namespace bnkf::hybrid {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

GaussianEstimate bnn_prior(const bnn::BnnModel& model, const FeatureVector& z,
                           int n_samples, std::uint64_t seed) {
  const bnn::PredictiveMoments pm = bnn::mc_predict(model, z, n_samples, seed);
  if (pm.mean.size() != 3)
    throw EstimateError("bnn_prior: joint model must output 3-D positions");
  GaussianEstimate out;
  out.mean = pm.mean;
  out.covariance = pm.covariance;
  return out;
}

GaussianEstimate ensemble_prior(const EnsembleModel& ensemble,
                                const FeatureVector& z, int n_samples,
                                std::uint64_t seed) {
  const bnn::BnnModel* axes[3] = {&ensemble.x, &ensemble.y, &ensemble.z};
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int a = 0; a < 3; ++a) {
    if (axes[a]->output_dim() != 1)
      throw EstimateError("ensemble_prior: axis models must be 1-D");
    const bnn::PredictiveMoments pm = bnn::mc_predict(
        *axes[a], z, n_samples,
        rng::derive_seed(seed, "axis_mc", static_cast<std::uint64_t>(a)));
    mean[a] = pm.mean[0];
    cov(a, a) = pm.covariance(0, 0);  // off-diagonals stay exactly zero
  }
  GaussianEstimate out;
  out.mean = mean;
  out.covariance = cov;
  return out;
}

GaussianEstimate feature_pseudo_measurement(const FeatureVector& z,
                                            const NoiseSigmas& sigmas,
                                            const SensorPose& sensor) {
  SphericalMeasurement next;
  next.range = z[4];
  next.bearing = z[5];
  next.elevation = z[6];
  next.range_rate = z[7];
  return geom::converted_position_measurement(next, sigmas, sensor);
}

EstimatorOutput bnn_estimate(const bnn::BnnModel& model, const FeatureVector& z,
                             int n_samples, std::uint64_t seed) {
  const auto start = Clock::now();
  EstimatorOutput out;
  out.position = bnn_prior(model, z, n_samples, seed);
  out.method = "BNN";
  out.wall_seconds = seconds_since(start);
  return out;
}

EstimatorOutput bnkf_estimate(const bnn::BnnModel& model,
                              const FeatureVector& z, const NoiseSigmas& sigmas,
                              const SensorPose& sensor, int n_samples,
                              std::uint64_t seed) {
  const auto start = Clock::now();
  const GaussianEstimate prior = bnn_prior(model, z, n_samples, seed);
  const GaussianEstimate z_star = feature_pseudo_measurement(z, sigmas, sensor);
  EstimatorOutput out;
  out.position = filters::position_correct(prior, z_star);
  out.method = "BNKF";
  out.wall_seconds = seconds_since(start);
  return out;
}

EstimatorOutput bnkfe_estimate(const EnsembleModel& ensemble,
                               const FeatureVector& z,
                               const NoiseSigmas& sigmas,
                               const SensorPose& sensor, int n_samples,
                               std::uint64_t seed) {
  const auto start = Clock::now();
  const GaussianEstimate prior = ensemble_prior(ensemble, z, n_samples, seed);
  const GaussianEstimate z_star = feature_pseudo_measurement(z, sigmas, sensor);
  EstimatorOutput out;
  out.position = filters::position_correct(prior, z_star);
  out.method = "BNKFe";
  out.wall_seconds = seconds_since(start);
  return out;
}

EnsembleModel train_ensemble(const std::vector<bnn::TrainExample>& data,
                             const bnn::TrainConfig& config,
                             std::vector<bnn::LossTraceRow>* trace_x,
                             std::vector<bnn::LossTraceRow>* trace_y,
                             std::vector<bnn::LossTraceRow>* trace_z) {
  for (const auto& ex : data)
    if (ex.y.size() != 3)
      throw EstimateError("train_ensemble: expects 3-D joint targets");

  const char* names[3] = {"axis_x", "axis_y", "axis_z"};
  std::vector<bnn::LossTraceRow>* traces[3] = {trace_x, trace_y, trace_z};

  EnsembleModel out;
  bnn::BnnModel* axes[3] = {&out.x, &out.y, &out.z};
  for (int a = 0; a < 3; ++a) {
    std::vector<bnn::TrainExample> axis_data(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      axis_data[i].x = data[i].x;
      axis_data[i].y = {data[i].y[static_cast<std::size_t>(a)]};
    }
    bnn::TrainConfig axis_cfg = config;
    axis_cfg.seed = rng::derive_seed(config.seed, names[a]);
    *axes[a] = bnn::train(axis_data, axis_cfg, traces[a]);
    axes[a]->fingerprint.role = names[a];
  }
  return out;
}

}  // namespace bnkf::hybrid
