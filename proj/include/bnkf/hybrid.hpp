#pragma once

#include <string>

#include "bnkf/bnn.hpp"
#include "bnkf/types.hpp"

namespace bnkf::hybrid {

// The three learned estimators. Each consumes one feature vector (a
// consecutive measurement pair plus sigmas) and emits a 3-D position
// estimate with covariance for the t+1 time. Estimators are stateless
// given immutable models and deterministic given the seed.

struct EstimatorOutput {
  GaussianEstimate position;  // 3-D mean, 3x3 covariance
  std::string method;
  double wall_seconds = 0.0;
};

// Independent per-axis networks (output dim 1 each) sharing the input schema.
struct EnsembleModel {
  bnn::BnnModel x, y, z;
};

// Monte Carlo predictive moments of the joint network.
GaussianEstimate bnn_prior(const bnn::BnnModel& model, const FeatureVector& z,
                           int n_samples, std::uint64_t seed);

// Per-axis moments assembled into a strictly diagonal covariance.
GaussianEstimate ensemble_prior(const EnsembleModel& ensemble,
                                const FeatureVector& z, int n_samples,
                                std::uint64_t seed);

// Cartesian pseudo-measurement (z*, R) from the t+1 entries of the feature
// vector, shared by both corrected estimators.
GaussianEstimate feature_pseudo_measurement(const FeatureVector& z,
                                            const NoiseSigmas& sigmas,
                                            const SensorPose& sensor);

// Standalone network: mc_predict verbatim, no correction.
EstimatorOutput bnn_estimate(const bnn::BnnModel& model, const FeatureVector& z,
                             int n_samples, std::uint64_t seed);

// Network prior fused with the converted measurement via position_correct.
EstimatorOutput bnkf_estimate(const bnn::BnnModel& model,
                              const FeatureVector& z, const NoiseSigmas& sigmas,
                              const SensorPose& sensor, int n_samples,
                              std::uint64_t seed);

// Ensemble variant: diagonal prior, same correction.
EstimatorOutput bnkfe_estimate(const EnsembleModel& ensemble,
                               const FeatureVector& z,
                               const NoiseSigmas& sigmas,
                               const SensorPose& sensor, int n_samples,
                               std::uint64_t seed);

// Trains the per-axis networks on coordinate projections of the joint
// targets, with distinct seeds derived from config.seed.
EnsembleModel train_ensemble(const std::vector<bnn::TrainExample>& data,
                             const bnn::TrainConfig& config,
                             std::vector<bnn::LossTraceRow>* trace_x = nullptr,
                             std::vector<bnn::LossTraceRow>* trace_y = nullptr,
                             std::vector<bnn::LossTraceRow>* trace_z = nullptr);

}  // namespace bnkf::hybrid
