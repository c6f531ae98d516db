#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bnkf/types.hpp"

namespace bnkf::bnn {

// Variational Bayesian MLP, fixed architecture 12 -> 64 x5 -> output with
// SiLU hidden activations. Every weight and bias carries an independent
// Gaussian posterior N(mu, softplus(rho)^2) against a zero-mean Gaussian
// prior of standard deviation prior_sigma. Forward passes draw parameters
// with the reparameterization w = mu + sigma .* eps, so everything is
// deterministic given a noise seed.

inline constexpr std::size_t kInputDim = 12;
inline constexpr std::size_t kHiddenWidth = 64;
inline constexpr std::size_t kHiddenLayers = 5;

struct BayesLinearLayer {
  std::size_t in = 0, out = 0;
  std::vector<double> weight_mu, weight_rho;  // row-major out x in
  std::vector<double> bias_mu, bias_rho;
  // Cached sigma = softplus(rho); refreshed whenever rho changes.
  std::vector<double> weight_sigma, bias_sigma;

  std::size_t n_weights() const { return in * out; }
  void refresh_sigma();
};

// Per-feature standardization fitted on the training split.
struct Scaler {
  std::vector<double> mean, std;
  bool fitted() const { return !mean.empty(); }
  void fit(std::span<const double> flat, std::size_t dim);
};

struct TrainConfig {
  int epochs = 40;
  double learning_rate = 1e-3;
  int batch_size = 64;
  double beta = 1.0;        // KL weight; objective adds beta * KL / n_train
  double prior_sigma = 0.1;
  std::uint64_t seed = 1;
};

// Enough to reproduce the training run bit-for-bit on the same platform.
struct Fingerprint {
  std::uint64_t seed = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  int batch_size = 0;
  double beta = 1.0;
  double prior_sigma = 0.1;
  std::string activation = "silu";
  std::string role;  // "joint", "axis_x", ...
  int fold = -1;
  std::uint64_t n_train = 0;
};

struct BnnModel {
  std::vector<BayesLinearLayer> layers;
  double prior_sigma = 0.1;
  Scaler input_scaler, target_scaler;
  Fingerprint fingerprint;

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
  void refresh_sigma();
};

// Fresh untrained model: mu ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), rho = -3.
BnnModel make_model(std::size_t output_dim, std::uint64_t seed,
                    double prior_sigma);

struct TrainExample {
  FeatureVector x{};
  std::vector<double> y;
};

// Single stochastic forward pass in raw units. Throws if scalers are not
// fitted. Draw order: per layer, weight eps row-major then bias eps.
std::vector<double> forward_sample(const BnnModel& model,
                                   const FeatureVector& x,
                                   std::uint64_t noise_seed);

// Sum of closed-form Gaussian KL divergences over every weight and bias.
double kl_divergence(const BnnModel& model);

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;        // mean over examples and components, standardized
  double kl = 0.0;         // raw KL sum
  double kl_scaled = 0.0;  // beta * kl / n
};

// Monte Carlo objective over one weight draw per example. The batch is
// treated as the training set for the KL scale (n = batch size).
LossBreakdown loss(const BnnModel& model, std::span<const TrainExample> batch,
                   double beta, std::uint64_t noise_seed);

// Analytic reverse-mode gradients of loss() under the identical draws.
// Layout mirrors the layer tensors.
struct Gradients {
  std::vector<std::vector<double>> weight_mu, weight_rho, bias_mu, bias_rho;
  void resize_like(const BnnModel& model);
  void zero();
};
LossBreakdown loss_gradients(const BnnModel& model,
                             std::span<const TrainExample> batch, double beta,
                             std::uint64_t noise_seed, Gradients& out);

struct LossTraceRow {
  int epoch = 0;
  double mse = 0.0;
  double kl_scaled = 0.0;
  double total = 0.0;
};

// Adam training with per-step fresh draws; bit-reproducible for a fixed
// config on one platform. Throws EstimateError on divergence (non-finite
// loss) with an epoch/step diagnostic.
BnnModel train(const std::vector<TrainExample>& data, const TrainConfig& config,
               std::vector<LossTraceRow>* trace = nullptr);

struct PredictiveMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  int n_samples = 0;
};

// n forward samples; unbiased sample covariance with eigenvalues floored
// at 1e-6. Sample i uses the sub-seed derive(seed, "mc", i).
PredictiveMoments mc_predict(const BnnModel& model, const FeatureVector& x,
                             int n, std::uint64_t seed);

// Versioned JSON artifact; numeric fields round-trip bit-exactly.
void save_model(const BnnModel& model, const std::string& path);
BnnModel load_model(const std::string& path);

// Numerically stable softplus / logistic helpers shared with tests.
double softplus(double x);
double logistic(double x);

}  // namespace bnkf::bnn
