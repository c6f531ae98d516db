#include "bnkf/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bnkf/kernels.hpp"
#include "bnkf/rng.hpp"

namespace bnkf::bnn {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void BayesLinearLayer::refresh_sigma() {
  weight_sigma.resize(weight_mu.size());
  bias_sigma.resize(bias_mu.size());
  for (std::size_t i = 0; i < weight_rho.size(); ++i)
    weight_sigma[i] = softplus(weight_rho[i]);
  for (std::size_t i = 0; i < bias_rho.size(); ++i)
    bias_sigma[i] = softplus(bias_rho[i]);
}

void BnnModel::refresh_sigma() {
  for (auto& l : layers) l.refresh_sigma();
}

void Scaler::fit(std::span<const double> flat, std::size_t dim) {
  const std::size_t n = flat.size() / dim;
  if (n == 0) throw EstimateError("scaler: empty fit data");
  mean.assign(dim, 0.0);
  std.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += flat[i * dim + j];
  for (std::size_t j = 0; j < dim; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = flat[i * dim + j] - mean[j];
      std[j] += d * d;
    }
  for (std::size_t j = 0; j < dim; ++j) {
    std[j] = std::sqrt(std[j] / static_cast<double>(n));
    // Constant columns (the per-tier sigma features) standardize to zero.
    if (!(std[j] > 1e-12 * std::max(1.0, std::abs(mean[j])))) std[j] = 1.0;
  }
}

BnnModel make_model(std::size_t output_dim, std::uint64_t seed,
                    double prior_sigma) {
  if (output_dim == 0) throw EstimateError("make_model: zero output dim");
  BnnModel m;
  m.prior_sigma = prior_sigma;

  std::vector<std::size_t> dims;
  dims.push_back(kInputDim);
  for (std::size_t i = 0; i < kHiddenLayers; ++i) dims.push_back(kHiddenWidth);
  dims.push_back(output_dim);

  std::mt19937_64 eng(rng::derive_seed(seed, "init"));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    BayesLinearLayer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    const bool last = l + 2 == dims.size();
    const double bound = (last ? 1.0 : std::sqrt(6.0)) /
                         std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    layer.weight_mu.resize(layer.n_weights());
    for (auto& v : layer.weight_mu) v = u(eng);
    layer.bias_mu.resize(layer.out);
    for (auto& v : layer.bias_mu) v = u(eng);
    layer.weight_rho.assign(layer.n_weights(), -3.0);
    layer.bias_rho.assign(layer.out, -3.0);
    layer.refresh_sigma();
    m.layers.push_back(std::move(layer));
  }
  return m;
}

namespace {

struct Workspace {
  // One slot per linear map: sampled parameters, their eps draws, and the
  // pre-activation. act[l] is the input of layer l; act[L] the raw output.
  std::vector<std::vector<double>> w, b, ew, eb, z, act;
  std::vector<double> delta, tmp;

  void resize(const BnnModel& m) {
    const std::size_t L = m.layers.size();
    w.resize(L);
    b.resize(L);
    ew.resize(L);
    eb.resize(L);
    z.resize(L);
    act.resize(L + 1);
    act[0].resize(m.layers.front().in);
    std::size_t widest = 0;
    for (std::size_t l = 0; l < L; ++l) {
      const auto& layer = m.layers[l];
      w[l].resize(layer.n_weights());
      ew[l].resize(layer.n_weights());
      b[l].resize(layer.out);
      eb[l].resize(layer.out);
      z[l].resize(layer.out);
      act[l + 1].resize(layer.out);
      widest = std::max(widest, std::max(layer.in, layer.out));
    }
    delta.resize(widest);
    tmp.resize(widest);
  }
};

// Draws fresh parameters and runs the network on a standardized input.
void forward_core(const BnnModel& m, Workspace& ws, rng::NormalStream& noise) {
  const std::size_t L = m.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = m.layers[l];
    noise.fill(ws.ew[l].data(), layer.n_weights());
    kernels::madd(layer.n_weights(), layer.weight_mu.data(),
                  layer.weight_sigma.data(), ws.ew[l].data(), ws.w[l].data());
    noise.fill(ws.eb[l].data(), layer.out);
    kernels::madd(layer.out, layer.bias_mu.data(), layer.bias_sigma.data(),
                  ws.eb[l].data(), ws.b[l].data());
    kernels::matvec(ws.w[l].data(), layer.out, layer.in, ws.act[l].data(),
                    ws.b[l].data(), ws.z[l].data());
    if (l + 1 < L) {
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double z = ws.z[l][i];
        ws.act[l + 1][i] = z * logistic(z);  // silu
      }
    } else {
      ws.act[L] = ws.z[l];
    }
  }
}

void standardize_input(const BnnModel& m, const FeatureVector& x,
                       std::vector<double>& out) {
  if (!m.input_scaler.fitted() || !m.target_scaler.fitted())
    throw EstimateError("bnn: scalers not fitted");
  for (std::size_t j = 0; j < kInputDim; ++j)
    out[j] = (x[j] - m.input_scaler.mean[j]) / m.input_scaler.std[j];
}

double entry_kl(double mu, double sigma, double prior_sigma) {
  const double ratio2 = (sigma * sigma + mu * mu) / (prior_sigma * prior_sigma);
  return std::log(prior_sigma / sigma) + 0.5 * ratio2 - 0.5;
}

}  // namespace

std::vector<double> forward_sample(const BnnModel& model,
                                   const FeatureVector& x,
                                   std::uint64_t noise_seed) {
  Workspace ws;
  ws.resize(model);
  standardize_input(model, x, ws.act[0]);
  rng::NormalStream noise(noise_seed);
  forward_core(model, ws, noise);

  const std::size_t d = model.output_dim();
  std::vector<double> y(d);
  for (std::size_t j = 0; j < d; ++j)
    y[j] = ws.act.back()[j] * model.target_scaler.std[j] +
           model.target_scaler.mean[j];
  return y;
}

double kl_divergence(const BnnModel& model) {
  double kl = 0.0;
  for (const auto& layer : model.layers) {
    for (std::size_t i = 0; i < layer.n_weights(); ++i)
      kl += entry_kl(layer.weight_mu[i], layer.weight_sigma[i],
                     model.prior_sigma);
    for (std::size_t i = 0; i < layer.out; ++i)
      kl += entry_kl(layer.bias_mu[i], layer.bias_sigma[i], model.prior_sigma);
  }
  return kl;
}

void Gradients::resize_like(const BnnModel& model) {
  const std::size_t L = model.layers.size();
  weight_mu.resize(L);
  weight_rho.resize(L);
  bias_mu.resize(L);
  bias_rho.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    weight_mu[l].assign(model.layers[l].n_weights(), 0.0);
    weight_rho[l].assign(model.layers[l].n_weights(), 0.0);
    bias_mu[l].assign(model.layers[l].out, 0.0);
    bias_rho[l].assign(model.layers[l].out, 0.0);
  }
}

void Gradients::zero() {
  for (auto* group : {&weight_mu, &weight_rho, &bias_mu, &bias_rho})
    for (auto& t : *group) std::fill(t.begin(), t.end(), 0.0);
}

namespace {

// Shared batch evaluation: forward (and optionally backward) over one weight
// draw per example, plus the KL term scaled by beta / kl_denom.
LossBreakdown run_batch(const BnnModel& model,
                        std::span<const TrainExample> batch, double beta,
                        double kl_denom, std::uint64_t noise_seed,
                        Gradients* grads, Workspace& ws) {
  if (batch.empty()) throw EstimateError("bnn loss: empty batch");
  const std::size_t L = model.layers.size();
  const std::size_t d = model.output_dim();
  const double inv_nd = 1.0 / (static_cast<double>(batch.size()) * d);

  // sigmoid(rho) is constant across the batch.
  std::vector<std::vector<double>> srho_w(L), srho_b(L);
  if (grads) {
    for (std::size_t l = 0; l < L; ++l) {
      const auto& layer = model.layers[l];
      srho_w[l].resize(layer.n_weights());
      for (std::size_t i = 0; i < layer.n_weights(); ++i)
        srho_w[l][i] = logistic(layer.weight_rho[i]);
      srho_b[l].resize(layer.out);
      for (std::size_t i = 0; i < layer.out; ++i)
        srho_b[l][i] = logistic(layer.bias_rho[i]);
    }
  }

  rng::NormalStream noise(noise_seed);
  std::vector<double> ys(d);
  double sse = 0.0;

  for (const auto& ex : batch) {
    standardize_input(model, ex.x, ws.act[0]);
    forward_core(model, ws, noise);

    if (ex.y.size() != d)
      throw EstimateError("bnn loss: target dimension mismatch");
    for (std::size_t j = 0; j < d; ++j)
      ys[j] = (ex.y[j] - model.target_scaler.mean[j]) /
              model.target_scaler.std[j];

    for (std::size_t j = 0; j < d; ++j) {
      const double r = ws.act[L][j] - ys[j];
      sse += r * r;
    }

    if (!grads) continue;

    // delta at the (identity) output layer.
    for (std::size_t j = 0; j < d; ++j)
      ws.delta[j] = 2.0 * inv_nd * (ws.act[L][j] - ys[j]);

    for (std::size_t l = L; l-- > 0;) {
      const auto& layer = model.layers[l];
      double* gw_mu = grads->weight_mu[l].data();
      double* gw_rho = grads->weight_rho[l].data();  // pre-sigmoid factor
      for (std::size_t r = 0; r < layer.out; ++r) {
        const double dr = ws.delta[r];
        grads->bias_mu[l][r] += dr;
        grads->bias_rho[l][r] += dr * ws.eb[l][r];
        kernels::axpy(layer.in, dr, ws.act[l].data(), gw_mu + r * layer.in);
        kernels::axpy_mul(layer.in, dr, ws.act[l].data(),
                          ws.ew[l].data() + r * layer.in,
                          gw_rho + r * layer.in);
      }
      if (l > 0) {
        kernels::matvec_t(ws.w[l].data(), layer.out, layer.in,
                          ws.delta.data(), ws.tmp.data());
        for (std::size_t c = 0; c < layer.in; ++c) {
          const double z = ws.z[l - 1][c];
          const double sg = logistic(z);
          ws.delta[c] = ws.tmp[c] * sg * (1.0 + z * (1.0 - sg));
        }
      }
    }
  }

  LossBreakdown out;
  out.mse = sse * inv_nd;
  out.kl = kl_divergence(model);
  out.kl_scaled = kl_denom > 0.0 ? beta * out.kl / kl_denom : 0.0;
  out.total = out.mse + out.kl_scaled;
  if (!std::isfinite(out.total))
    throw EstimateError("bnn loss: non-finite loss");

  if (grads) {
    const double s = kl_denom > 0.0 ? beta / kl_denom : 0.0;
    const double p2 = model.prior_sigma * model.prior_sigma;
    for (std::size_t l = 0; l < L; ++l) {
      const auto& layer = model.layers[l];
      for (std::size_t i = 0; i < layer.n_weights(); ++i) {
        grads->weight_rho[l][i] *= srho_w[l][i];
        grads->weight_rho[l][i] +=
            s * (layer.weight_sigma[i] / p2 - 1.0 / layer.weight_sigma[i]) *
            srho_w[l][i];
        grads->weight_mu[l][i] += s * layer.weight_mu[i] / p2;
      }
      for (std::size_t i = 0; i < layer.out; ++i) {
        grads->bias_rho[l][i] *= srho_b[l][i];
        grads->bias_rho[l][i] +=
            s * (layer.bias_sigma[i] / p2 - 1.0 / layer.bias_sigma[i]) *
            srho_b[l][i];
        grads->bias_mu[l][i] += s * layer.bias_mu[i] / p2;
      }
    }
  }
  return out;
}

}  // namespace

LossBreakdown loss(const BnnModel& model, std::span<const TrainExample> batch,
                   double beta, std::uint64_t noise_seed) {
  Workspace ws;
  ws.resize(model);
  return run_batch(model, batch, beta, static_cast<double>(batch.size()),
                   noise_seed, nullptr, ws);
}

LossBreakdown loss_gradients(const BnnModel& model,
                             std::span<const TrainExample> batch, double beta,
                             std::uint64_t noise_seed, Gradients& out) {
  Workspace ws;
  ws.resize(model);
  out.resize_like(model);
  out.zero();
  return run_batch(model, batch, beta, static_cast<double>(batch.size()),
                   noise_seed, &out, ws);
}

namespace {

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t t = 0;

  void resize_like(const Gradients& g) {
    auto shape = [](const std::vector<std::vector<double>>& src,
                    std::vector<std::vector<double>>& dst) {
      dst.resize(src.size());
      for (std::size_t i = 0; i < src.size(); ++i)
        dst[i].assign(src[i].size(), 0.0);
    };
    m.clear();
    v.clear();
    // Flattened group order: w_mu, w_rho, b_mu, b_rho per layer.
    std::vector<const std::vector<std::vector<double>>*> groups = {
        &g.weight_mu, &g.weight_rho, &g.bias_mu, &g.bias_rho};
    for (auto* grp : groups) {
      std::vector<std::vector<double>> mm, vv;
      shape(*grp, mm);
      shape(*grp, vv);
      for (auto& x : mm) m.push_back(std::move(x));
      for (auto& x : vv) v.push_back(std::move(x));
    }
  }
};

void adam_step(std::vector<double*>& params,
               const std::vector<const double*>& grads,
               const std::vector<std::size_t>& sizes, AdamState& st,
               double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  st.t += 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k];
    const double* g = grads[k];
    double* m = st.m[k].data();
    double* v = st.v[k].data();
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

}  // namespace

BnnModel train(const std::vector<TrainExample>& data, const TrainConfig& config,
               std::vector<LossTraceRow>* trace) {
  if (data.size() < 2)
    throw EstimateError("bnn train: need at least 2 examples");
  const std::size_t d = data.front().y.size();
  for (const auto& ex : data) {
    if (ex.y.size() != d)
      throw EstimateError("bnn train: inconsistent target dimension");
    for (double v : ex.y)
      if (!std::isfinite(v))
        throw EstimateError("bnn train: non-finite target");
  }

  BnnModel model = make_model(d, config.seed, config.prior_sigma);

  // Scalers come from the training split only.
  std::vector<double> flat_x(data.size() * kInputDim);
  std::vector<double> flat_y(data.size() * d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < kInputDim; ++j)
      flat_x[i * kInputDim + j] = data[i].x[j];
    for (std::size_t j = 0; j < d; ++j) flat_y[i * d + j] = data[i].y[j];
  }
  model.input_scaler.fit(flat_x, kInputDim);
  model.target_scaler.fit(flat_y, d);

  Workspace ws;
  ws.resize(model);
  Gradients grads;
  grads.resize_like(model);
  AdamState adam;
  adam.resize_like(grads);

  // Parameter/gradient views in a fixed group order.
  std::vector<double*> params;
  std::vector<const double*> gviews;
  std::vector<std::size_t> sizes;
  for (int grp = 0; grp < 4; ++grp) {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      auto& layer = model.layers[l];
      switch (grp) {
        case 0:
          params.push_back(layer.weight_mu.data());
          gviews.push_back(grads.weight_mu[l].data());
          sizes.push_back(layer.n_weights());
          break;
        case 1:
          params.push_back(layer.weight_rho.data());
          gviews.push_back(grads.weight_rho[l].data());
          sizes.push_back(layer.n_weights());
          break;
        case 2:
          params.push_back(layer.bias_mu.data());
          gviews.push_back(grads.bias_mu[l].data());
          sizes.push_back(layer.out);
          break;
        case 3:
          params.push_back(layer.bias_rho.data());
          gviews.push_back(grads.bias_rho[l].data());
          sizes.push_back(layer.out);
          break;
      }
    }
  }

  const std::size_t n = data.size();
  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<TrainExample> scratch(batch);
  std::uint64_t global_step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffler(
        rng::derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffler);

    double epoch_sse_nd = 0.0;  // sum of per-batch mse * batch_count
    std::size_t seen = 0;

    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      for (std::size_t i = 0; i < count; ++i) scratch[i] = data[order[start + i]];

      grads.zero();
      LossBreakdown lb;
      try {
        lb = run_batch(model, std::span<const TrainExample>(scratch.data(), count),
                       config.beta, static_cast<double>(n),
                       rng::derive_seed(config.seed, "noise", global_step),
                       &grads, ws);
      } catch (const EstimateError& e) {
        std::ostringstream msg;
        msg << "bnn train: diverged at epoch " << epoch << " step "
            << global_step << ": " << e.what();
        throw EstimateError(msg.str());
      }

      adam_step(params, gviews, sizes, adam, config.learning_rate);
      model.refresh_sigma();

      epoch_sse_nd += lb.mse * static_cast<double>(count);
      seen += count;
      ++global_step;
    }

    if (trace) {
      LossTraceRow row;
      row.epoch = epoch;
      row.mse = epoch_sse_nd / static_cast<double>(seen);
      row.kl_scaled = config.beta * kl_divergence(model) / static_cast<double>(n);
      row.total = row.mse + row.kl_scaled;
      trace->push_back(row);
    }
  }

  model.fingerprint.seed = config.seed;
  model.fingerprint.epochs = config.epochs;
  model.fingerprint.learning_rate = config.learning_rate;
  model.fingerprint.batch_size = config.batch_size;
  model.fingerprint.beta = config.beta;
  model.fingerprint.prior_sigma = config.prior_sigma;
  model.fingerprint.activation = "silu";
  model.fingerprint.n_train = n;
  return model;
}

PredictiveMoments mc_predict(const BnnModel& model, const FeatureVector& x,
                             int n, std::uint64_t seed) {
  if (n < 2) throw EstimateError("mc_predict: need n >= 2 samples");
  const std::size_t d = model.output_dim();

  Workspace ws;
  ws.resize(model);

  Eigen::MatrixXd samples(n, static_cast<Eigen::Index>(d));
  for (int i = 0; i < n; ++i) {
    standardize_input(model, x, ws.act[0]);
    rng::NormalStream noise(
        rng::derive_seed(seed, "mc", static_cast<std::uint64_t>(i)));
    forward_core(model, ws, noise);
    for (std::size_t j = 0; j < d; ++j)
      samples(i, static_cast<Eigen::Index>(j)) =
          ws.act.back()[j] * model.target_scaler.std[j] +
          model.target_scaler.mean[j];
  }

  PredictiveMoments out;
  out.n_samples = n;
  out.mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose()).eval();

  // Epistemic floor so a collapsed posterior still yields a usable estimate.
  constexpr double kVarianceFloor = 1e-6;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd evals = es.eigenvalues().cwiseMax(kVarianceFloor);
  out.covariance = es.eigenvectors() * evals.asDiagonal() *
                   es.eigenvectors().transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

// --- artifact I/O ---

namespace {
constexpr const char* kFormat = "bnkf-model";
constexpr int kVersion = 1;
}  // namespace

void save_model(const BnnModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["activation"] = model.fingerprint.activation;
  j["prior_sigma"] = model.prior_sigma;

  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers) {
    nlohmann::json jl;
    jl["in"] = l.in;
    jl["out"] = l.out;
    jl["weight_mu"] = l.weight_mu;
    jl["weight_rho"] = l.weight_rho;
    jl["bias_mu"] = l.bias_mu;
    jl["bias_rho"] = l.bias_rho;
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);

  j["input_scaler"] = {{"mean", model.input_scaler.mean},
                       {"std", model.input_scaler.std}};
  j["target_scaler"] = {{"mean", model.target_scaler.mean},
                        {"std", model.target_scaler.std}};

  const auto& f = model.fingerprint;
  j["fingerprint"] = {{"seed", f.seed},
                      {"epochs", f.epochs},
                      {"learning_rate", f.learning_rate},
                      {"batch_size", f.batch_size},
                      {"beta", f.beta},
                      {"prior_sigma", f.prior_sigma},
                      {"activation", f.activation},
                      {"role", f.role},
                      {"fold", f.fold},
                      {"n_train", f.n_train}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw EstimateError("save_model: cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw EstimateError("save_model: write failure " + path);
}

BnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EstimateError("load_model: cannot open " + path);
  nlohmann::json j;
  in >> j;

  if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion)
    throw EstimateError("load_model: unsupported artifact format in " + path);

  BnnModel m;
  m.prior_sigma = j.at("prior_sigma").get<double>();
  for (const auto& jl : j.at("layers")) {
    BayesLinearLayer l;
    l.in = jl.at("in").get<std::size_t>();
    l.out = jl.at("out").get<std::size_t>();
    l.weight_mu = jl.at("weight_mu").get<std::vector<double>>();
    l.weight_rho = jl.at("weight_rho").get<std::vector<double>>();
    l.bias_mu = jl.at("bias_mu").get<std::vector<double>>();
    l.bias_rho = jl.at("bias_rho").get<std::vector<double>>();
    if (l.weight_mu.size() != l.in * l.out || l.bias_mu.size() != l.out ||
        l.weight_rho.size() != l.weight_mu.size() ||
        l.bias_rho.size() != l.bias_mu.size())
      throw EstimateError("load_model: tensor shape mismatch in " + path);
    m.layers.push_back(std::move(l));
  }

  // Architecture contract: 12 -> 64 x5 -> output.
  if (m.layers.size() != kHiddenLayers + 1 ||
      m.layers.front().in != kInputDim)
    throw EstimateError("load_model: unexpected architecture in " + path);
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l)
    if (m.layers[l].out != kHiddenWidth ||
        m.layers[l + 1].in != kHiddenWidth)
      throw EstimateError("load_model: unexpected architecture in " + path);

  m.input_scaler.mean = j.at("input_scaler").at("mean").get<std::vector<double>>();
  m.input_scaler.std = j.at("input_scaler").at("std").get<std::vector<double>>();
  m.target_scaler.mean = j.at("target_scaler").at("mean").get<std::vector<double>>();
  m.target_scaler.std = j.at("target_scaler").at("std").get<std::vector<double>>();
  for (double s : m.input_scaler.std)
    if (!(s > 0.0)) throw EstimateError("load_model: non-positive scaler std");
  for (double s : m.target_scaler.std)
    if (!(s > 0.0)) throw EstimateError("load_model: non-positive scaler std");

  const auto& jf = j.at("fingerprint");
  m.fingerprint.seed = jf.at("seed").get<std::uint64_t>();
  m.fingerprint.epochs = jf.at("epochs").get<int>();
  m.fingerprint.learning_rate = jf.at("learning_rate").get<double>();
  m.fingerprint.batch_size = jf.at("batch_size").get<int>();
  m.fingerprint.beta = jf.at("beta").get<double>();
  m.fingerprint.prior_sigma = jf.at("prior_sigma").get<double>();
  m.fingerprint.activation = jf.at("activation").get<std::string>();
  m.fingerprint.role = jf.at("role").get<std::string>();
  m.fingerprint.fold = jf.at("fold").get<int>();
  m.fingerprint.n_train = jf.at("n_train").get<std::uint64_t>();

  m.refresh_sigma();
  return m;
}

}  // namespace bnkf::bnn
