#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bnkf/geom.hpp"
#include "bnkf/hybrid.hpp"
#include "bnkf/rng.hpp"
#include "support.hpp"

using namespace bnkf;
using bnn::TrainExample;

namespace {

// Small supervised set shaped like the real pipeline: targets near the
// t+1 measurement's Cartesian position.
std::vector<TrainExample> pipeline_like_task(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::uniform_real_distribution<double> ur(300.0, 500.0);
  std::uniform_real_distribution<double> ub(-0.5, 0.5);
  std::uniform_real_distribution<double> ue(0.1, 0.4);

  NoiseSigmas s;
  s.range = 5.0;
  s.range_rate = 0.5;
  s.bearing = 2e-3;
  s.elevation = 2e-3;

  const SensorPose sensor;
  std::vector<TrainExample> out(n);
  for (auto& ex : out) {
    SphericalMeasurement a, b;
    a.range = ur(eng);
    a.bearing = ub(eng);
    a.elevation = ue(eng);
    a.range_rate = 10.0 * d(eng);
    b = a;
    b.range += 2.0 * d(eng);
    b.bearing += 0.01 * d(eng);
    b.range_rate = a.range_rate + d(eng);

    SphericalMeasurement an = a, bn = b;
    an.range += s.range * d(eng);
    bn.range += s.range * d(eng);
    an.bearing += s.bearing * d(eng);
    bn.bearing += s.bearing * d(eng);

    ex.x = make_feature(an, bn, s);
    const Vector3 truth = geom::spherical_to_cart(b, sensor);
    ex.y = {truth.x(), truth.y(), truth.z()};
  }
  return out;
}

NoiseSigmas task_sigmas() {
  NoiseSigmas s;
  s.range = 5.0;
  s.range_rate = 0.5;
  s.bearing = 2e-3;
  s.elevation = 2e-3;
  return s;
}

const bnn::BnnModel& trained_joint() {
  static const bnn::BnnModel model = [] {
    bnn::TrainConfig cfg;
    cfg.epochs = 6;
    cfg.learning_rate = 3e-3;
    cfg.beta = 0.5;
    cfg.seed = 91;
    return bnn::train(pipeline_like_task(600, 5), cfg);
  }();
  return model;
}

}  // namespace

TEST_CASE("bnn_estimate is mc_predict verbatim") {
  const auto& model = trained_joint();
  FeatureVector x = pipeline_like_task(1, 77)[0].x;

  const auto est = hybrid::bnn_estimate(model, x, 100, 42);
  const auto pm = bnn::mc_predict(model, x, 100, 42);
  CHECK(est.method == "BNN");
  CHECK(Eigen::VectorXd(est.position.mean) == pm.mean);
  CHECK(Eigen::MatrixXd(est.position.covariance) == pm.covariance);
  CHECK(est.wall_seconds > 0.0);

  // Deterministic given (model, input, seed).
  const auto again = hybrid::bnn_estimate(model, x, 100, 42);
  CHECK(Eigen::VectorXd(est.position.mean) ==
        Eigen::VectorXd(again.position.mean));
}

TEST_CASE("pseudo-measurement comes from the t+1 feature entries") {
  const SensorPose sensor;
  const NoiseSigmas s = task_sigmas();
  FeatureVector x = pipeline_like_task(1, 78)[0].x;

  const GaussianEstimate z = hybrid::feature_pseudo_measurement(x, s, sensor);
  SphericalMeasurement next;
  next.range = x[4];
  next.bearing = x[5];
  next.elevation = x[6];
  next.range_rate = x[7];
  const GaussianEstimate ref =
      geom::converted_position_measurement(next, s, sensor);
  CHECK(Eigen::VectorXd(z.mean) == Eigen::VectorXd(ref.mean));
  CHECK(Eigen::MatrixXd(z.covariance) == Eigen::MatrixXd(ref.covariance));
}

TEST_CASE("bnkf reduces to the standalone network as R grows") {
  const auto& model = trained_joint();
  const SensorPose sensor;
  FeatureVector x = pipeline_like_task(1, 79)[0].x;

  NoiseSigmas huge = task_sigmas();
  huge.range *= 1e6;
  huge.bearing *= 1e6;
  huge.elevation *= 1e6;
  huge.range_rate *= 1e6;

  const auto bnn_out = hybrid::bnn_estimate(model, x, 100, 11);
  const auto bnkf_out = hybrid::bnkf_estimate(model, x, huge, sensor, 100, 11);
  const double scale = Eigen::VectorXd(bnn_out.position.mean).norm();
  CHECK((Eigen::VectorXd(bnkf_out.position.mean) -
         Eigen::VectorXd(bnn_out.position.mean))
            .norm() < 1e-3 * scale);
  CHECK(bnkf_out.method == "BNKF");
}

TEST_CASE("collapsed posterior pins the bnkf mean to the network output") {
  bnn::BnnModel model = trained_joint();
  for (auto& l : model.layers) {
    std::fill(l.weight_rho.begin(), l.weight_rho.end(), -40.0);
    std::fill(l.bias_rho.begin(), l.bias_rho.end(), -40.0);
  }
  model.refresh_sigma();

  const SensorPose sensor;
  const NoiseSigmas s = task_sigmas();
  FeatureVector x = pipeline_like_task(1, 80)[0].x;

  const auto prior = hybrid::bnn_prior(model, x, 100, 3);
  const auto out = hybrid::bnkf_estimate(model, x, s, sensor, 100, 3);
  // Prior covariance is the 1e-6 floor; the gain toward z* is ~1e-7.
  CHECK((Eigen::VectorXd(out.position.mean) - Eigen::VectorXd(prior.mean))
            .norm() < 1e-3);
}

TEST_CASE("correction never inflates the position volume") {
  const auto& model = trained_joint();
  const SensorPose sensor;
  const NoiseSigmas s = task_sigmas();

  const auto task = pipeline_like_task(40, 81);
  for (const auto& ex : task) {
    const auto prior = hybrid::bnn_prior(model, ex.x, 100, 21);
    const auto post = hybrid::bnkf_estimate(model, ex.x, s, sensor, 100, 21);
    CHECK(post.position.covariance.determinant() <=
          prior.covariance.determinant() * (1.0 + 1e-12));
  }
}

TEST_CASE("ensemble: diagonal structure and axis symmetry") {
  bnn::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 3e-3;
  cfg.seed = 17;
  const auto data = pipeline_like_task(400, 6);
  const hybrid::EnsembleModel ens = hybrid::train_ensemble(data, cfg);

  // Distinct derived seeds and roles per axis.
  CHECK(ens.x.fingerprint.role == "axis_x");
  CHECK(ens.y.fingerprint.role == "axis_y");
  CHECK(ens.z.fingerprint.role == "axis_z");
  CHECK(ens.x.fingerprint.seed != ens.y.fingerprint.seed);
  CHECK(ens.y.fingerprint.seed != ens.z.fingerprint.seed);
  CHECK(ens.x.output_dim() == 1);

  // Axis targets are coordinate projections: scalers match per axis.
  CHECK(ens.x.target_scaler.mean[0] ==
        doctest::Approx(ens.x.target_scaler.mean[0]));

  FeatureVector x = data[0].x;
  const auto prior = hybrid::ensemble_prior(ens, x, 100, 9);
  CHECK(prior.covariance(0, 1) == 0.0);
  CHECK(prior.covariance(0, 2) == 0.0);
  CHECK(prior.covariance(1, 2) == 0.0);
  CHECK(prior.covariance(1, 0) == 0.0);

  // Identical per-axis models: diagonal entries agree to MC error.
  hybrid::EnsembleModel same;
  same.x = ens.x;
  same.y = ens.x;
  same.z = ens.x;
  const auto p2 = hybrid::ensemble_prior(same, x, 100, 10);
  const double v0 = p2.covariance(0, 0), v1 = p2.covariance(1, 1),
               v2 = p2.covariance(2, 2);
  const double vmax = std::max({v0, v1, v2}), vmin = std::min({v0, v1, v2});
  // Sample variances from n=100 carry ~14% relative noise each.
  CHECK((vmax - vmin) / vmax <= 0.5);

  const SensorPose sensor;
  const auto out =
      hybrid::bnkfe_estimate(ens, x, task_sigmas(), sensor, 100, 12);
  CHECK(out.method == "BNKFe");
  CHECK(out.position.covariance.determinant() <=
        prior.covariance.determinant() * (1.0 + 1e-12));

  // Deterministic under a fixed seed.
  const auto out2 =
      hybrid::bnkfe_estimate(ens, x, task_sigmas(), sensor, 100, 12);
  CHECK(Eigen::VectorXd(out.position.mean) ==
        Eigen::VectorXd(out2.position.mean));
}
