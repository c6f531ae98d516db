#pragma once

// Test-side oracles and simulation helpers. Everything here is independent
// of the library paths it checks: the reference Kalman update uses explicit
// inverses, and the matched-truth simulator drives the filters from outside.

#include <cmath>
#include <random>

#include "bnkf/filters.hpp"
#include "bnkf/geom.hpp"
#include "bnkf/rng.hpp"
#include "bnkf/types.hpp"

namespace support {

using namespace bnkf;

// Random PSD with a bounded condition number so oracle comparisons are not
// limited by the conditioning of the test inputs themselves.
inline Eigen::MatrixXd random_psd(std::mt19937_64& eng, int n,
                                  double scale = 1.0) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = d(eng);
  Eigen::MatrixXd P = scale * (A * A.transpose() / n +
                               0.25 * Eigen::MatrixXd::Identity(n, n));
  return 0.5 * (P + P.transpose());
}

// Textbook Kalman update with explicit inverses; the oracle for every
// linear-measurement comparison.
inline GaussianEstimate reference_kf_update(const GaussianEstimate& prior,
                                            const Eigen::VectorXd& z,
                                            const Eigen::MatrixXd& H,
                                            const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd& P = prior.covariance;
  const Eigen::MatrixXd S = H * P * H.transpose() + R;
  const Eigen::MatrixXd K = P * H.transpose() * S.inverse();
  GaussianEstimate out;
  out.mean = prior.mean + K * (z - H * prior.mean);
  out.covariance =
      (Eigen::MatrixXd::Identity(P.rows(), P.cols()) - K * H) * P;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

// Linear position observation (x, y, z) of the interleaved 6-D state.
struct LinearPositionModel final : filters::MeasurementModel {
  Eigen::VectorXd observe(const Vector6& state) const override {
    return Vector3(state[0], state[2], state[4]);
  }
  Eigen::MatrixXd jacobian(const Vector6&) const override {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 6);
    H(0, 0) = H(1, 2) = H(2, 4) = 1.0;
    return H;
  }
  std::vector<bool> angular_channels() const override {
    return {false, false, false};
  }
};

// Matched linear-Gaussian CV truth observed through the spherical radar map
// at far range / low noise, so the filters' consistency can be read off the
// NEES and position Mahalanobis means.
struct CalibrationResult {
  double nees_mean = 0.0;
  double d2_mean = 0.0;
  std::size_t steps = 0;
};

inline CalibrationResult run_matched_cv_calibration(bool unscented,
                                                    std::uint64_t seed,
                                                    int n_tracks, int n_steps,
                                                    double kappa = 0.0) {
  const double dt = 0.5;
  const double q = 0.5;
  const filters::ProcessModel model{q};
  const SensorPose sensor;
  NoiseSigmas sigmas;
  sigmas.range = 5.0;
  sigmas.range_rate = 0.5;
  sigmas.bearing = 8.7e-4;
  sigmas.elevation = 8.7e-4;

  const Matrix6 Q = model.noise(dt);
  const Eigen::LLT<Matrix6> qllt(Q);
  const Matrix6 Lq = qllt.matrixL();

  Matrix6 P0 = Matrix6::Zero();
  for (int a = 0; a < 3; ++a) {
    P0(2 * a, 2 * a) = 100.0;
    P0(2 * a + 1, 2 * a + 1) = 4.0;
  }
  const Eigen::LLT<Matrix6> p0llt(P0);
  const Matrix6 L0 = p0llt.matrixL();

  rng::NormalStream noise(seed);
  auto draw6 = [&]() {
    Vector6 v;
    for (int i = 0; i < 6; ++i) v[i] = noise();
    return v;
  };

  CalibrationResult res;
  double nees_sum = 0.0, d2_sum = 0.0;

  for (int track = 0; track < n_tracks; ++track) {
    Vector6 truth;
    truth << 3000.0 + 500.0 * noise(), 20.0 * noise(), 1500.0 + 500.0 * noise(),
        20.0 * noise(), 900.0 + 200.0 * noise(), 5.0 * noise();

    TrackState est;
    est.estimate.mean = truth + L0 * draw6();
    est.estimate.covariance = P0;
    est.timestamp = 0.0;

    for (int step = 0; step < n_steps; ++step) {
      truth = model.transition(dt) * truth + Lq * draw6();

      KinematicState ks;
      ks.position = Vector3(truth[0], truth[2], truth[4]);
      ks.velocity = Vector3(truth[1], truth[3], truth[5]);
      SphericalMeasurement m = geom::cart_to_spherical(ks, sensor);
      m.range += sigmas.range * noise();
      m.bearing = geom::wrap_angle(m.bearing + sigmas.bearing * noise());
      m.elevation += sigmas.elevation * noise();
      m.range_rate += sigmas.range_rate * noise();

      if (unscented) {
        est = filters::ukf_predict(est, dt, model, kappa);
        est = filters::ukf_update(est, m, sigmas, sensor, kappa);
      } else {
        est = filters::cv_predict(est, dt, model);
        est = filters::ekf_update(est, m, sigmas, sensor);
      }

      const Vector6 err = est.estimate.mean - truth;
      const Eigen::LLT<Eigen::MatrixXd> llt(est.estimate.covariance);
      nees_sum += err.dot(llt.solve(err));

      const Vector3 perr(err[0], err[2], err[4]);
      const Matrix3 Ppos = filters::position_cov(est);
      const Eigen::LLT<Matrix3> lltp(Ppos);
      d2_sum += perr.dot(lltp.solve(perr));
      res.steps += 1;
    }
  }
  res.nees_mean = nees_sum / static_cast<double>(res.steps);
  res.d2_mean = d2_sum / static_cast<double>(res.steps);
  return res;
}

}  // namespace support
