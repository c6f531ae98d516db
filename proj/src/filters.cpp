#include "bnkf/filters.hpp"

#include <cmath>
#include <sstream>

namespace bnkf::filters {

namespace {

void symmetrize(Eigen::MatrixXd& P) {
  P = (0.5 * (P + P.transpose())).eval();
}

// One-shot jitter repair: add eps*I (eps = 1e-9 * trace) if the first
// factorization fails, then give up with a condition estimate.
Eigen::LLT<Eigen::MatrixXd> factorize(Eigen::MatrixXd& P, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() == Eigen::Success) return llt;
  P += 1e-9 * P.trace() * Eigen::MatrixXd::Identity(P.rows(), P.cols());
  llt.compute(P);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  std::ostringstream msg;
  msg << what << ": matrix not positive definite after jitter repair"
      << " (eigenvalue range [" << es.eigenvalues().minCoeff() << ", "
      << es.eigenvalues().maxCoeff() << "])";
  throw EstimateError(msg.str());
}

}  // namespace

Matrix6 ProcessModel::transition(double dt) const {
  Matrix6 F = Matrix6::Identity();
  for (int a = 0; a < 3; ++a) F(2 * a, 2 * a + 1) = dt;
  return F;
}

Matrix6 ProcessModel::noise(double dt) const {
  const double q = accel_intensity;
  const double dt2 = dt * dt, dt3 = dt2 * dt;
  Matrix6 Q = Matrix6::Zero();
  for (int a = 0; a < 3; ++a) {
    Q(2 * a, 2 * a) = q * dt3 / 3.0;
    Q(2 * a, 2 * a + 1) = q * dt2 / 2.0;
    Q(2 * a + 1, 2 * a) = q * dt2 / 2.0;
    Q(2 * a + 1, 2 * a + 1) = q * dt;
  }
  return Q;
}

Eigen::VectorXd SphericalModel::observe(const Vector6& state) const {
  KinematicState ks;
  ks.position = Vector3(state[0], state[2], state[4]);
  ks.velocity = Vector3(state[1], state[3], state[5]);
  const SphericalMeasurement m = geom::cart_to_spherical(ks, sensor);
  return Vector4(m.range, m.bearing, m.elevation, m.range_rate);
}

Eigen::MatrixXd SphericalModel::jacobian(const Vector6& state) const {
  return geom::measurement_jacobian(state, sensor);
}

TrackState cv_predict(const TrackState& track, double dt,
                      const ProcessModel& model) {
  if (!(dt > 0.0)) throw EstimateError("cv_predict: dt must be positive");
  const Matrix6 F = model.transition(dt);
  TrackState out;
  out.timestamp = track.timestamp + dt;
  out.estimate.mean = F * track.estimate.mean;
  Eigen::MatrixXd P =
      F * track.estimate.covariance * F.transpose() + model.noise(dt);
  symmetrize(P);
  out.estimate.covariance = std::move(P);
  return out;
}

namespace {

// Lower-triangular square-root columns; LDLT fallback covers semidefinite
// inputs (a zero prior collapses every sigma point onto the mean).
Eigen::MatrixXd cov_sqrt_columns(Eigen::MatrixXd P) {
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  P += 1e-9 * P.trace() * Eigen::MatrixXd::Identity(P.rows(), P.cols());
  llt.compute(P);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(P);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd d = ldlt.vectorD();
    const double tol =
        1e-9 * std::max(1e-300, d.cwiseAbs().maxCoeff());
    if (d.minCoeff() >= -tol) {
      d = d.cwiseMax(0.0);
      Eigen::MatrixXd L = ldlt.matrixL();
      return ldlt.transpositionsP().transpose() *
             Eigen::MatrixXd(L * d.cwiseSqrt().asDiagonal());
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  std::ostringstream msg;
  msg << "make_sigma_points: covariance not positive semidefinite after "
         "jitter repair (eigenvalue range ["
      << es.eigenvalues().minCoeff() << ", " << es.eigenvalues().maxCoeff()
      << "])";
  throw EstimateError(msg.str());
}

}  // namespace

SigmaPointSet make_sigma_points(const GaussianEstimate& estimate,
                                double kappa) {
  const auto n = estimate.mean.size();
  if (!(n + kappa > 0.0))
    throw EstimateError("make_sigma_points: n + kappa must be positive");

  const Eigen::MatrixXd L = cov_sqrt_columns(estimate.covariance);
  const double scale = std::sqrt(n + kappa);

  SigmaPointSet set;
  set.kappa = kappa;
  set.points.reserve(2 * n + 1);
  set.points.push_back(estimate.mean);
  set.mean_weights.assign(2 * n + 1, 1.0 / (2.0 * (n + kappa)));
  set.mean_weights[0] = kappa / (n + kappa);
  for (Eigen::Index i = 0; i < n; ++i) {
    set.points.push_back(estimate.mean + scale * L.col(i));
    set.points.push_back(estimate.mean - scale * L.col(i));
  }
  set.cov_weights = set.mean_weights;
  return set;
}

TrackState ukf_predict(const TrackState& track, double dt,
                       const ProcessModel& model, double kappa) {
  if (!(dt > 0.0)) throw EstimateError("ukf_predict: dt must be positive");
  const SigmaPointSet set = make_sigma_points(track.estimate, kappa);
  const Matrix6 F = model.transition(dt);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
  std::vector<Eigen::VectorXd> propagated;
  propagated.reserve(set.points.size());
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    propagated.push_back(F * set.points[i]);
    mean += set.mean_weights[i] * propagated.back();
  }
  Eigen::MatrixXd P = model.noise(dt);
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const Eigen::VectorXd e = propagated[i] - mean;
    P += set.cov_weights[i] * e * e.transpose();
  }
  symmetrize(P);

  TrackState out;
  out.timestamp = track.timestamp + dt;
  out.estimate.mean = std::move(mean);
  out.estimate.covariance = std::move(P);
  return out;
}

TrackState linearized_update(const TrackState& predicted,
                             const Eigen::VectorXd& z,
                             const Eigen::MatrixXd& noise_cov,
                             const MeasurementModel& model) {
  const Vector6 x = predicted.estimate.mean;
  const Eigen::MatrixXd& P = predicted.estimate.covariance;
  const Eigen::MatrixXd H = model.jacobian(x);
  const std::vector<bool> angular = model.angular_channels();

  Eigen::VectorXd innovation = z - model.observe(x);
  for (Eigen::Index i = 0; i < innovation.size(); ++i)
    if (angular[static_cast<std::size_t>(i)])
      innovation[i] = geom::wrap_angle(innovation[i]);

  Eigen::MatrixXd S = H * P * H.transpose() + noise_cov;
  symmetrize(S);
  const auto llt = factorize(S, "ekf_update: singular innovation covariance");
  const Eigen::MatrixXd K = llt.solve(H * P).transpose();

  TrackState out;
  out.timestamp = predicted.timestamp;
  out.estimate.mean = x + K * innovation;
  Eigen::MatrixXd Pout =
      (Eigen::MatrixXd::Identity(6, 6) - K * H) * P;
  symmetrize(Pout);
  out.estimate.covariance = std::move(Pout);
  return out;
}

TrackState unscented_update(const TrackState& predicted,
                            const Eigen::VectorXd& z,
                            const Eigen::MatrixXd& noise_cov,
                            const MeasurementModel& model, double kappa) {
  const SigmaPointSet set = make_sigma_points(predicted.estimate, kappa);
  const std::vector<bool> angular = model.angular_channels();
  const auto m = z.size();

  std::vector<Eigen::VectorXd> mapped;
  mapped.reserve(set.points.size());
  for (const auto& p : set.points) mapped.push_back(model.observe(p));

  // Predicted measurement mean; angular channels averaged on the circle.
  Eigen::VectorXd z_mean = Eigen::VectorXd::Zero(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    if (angular[static_cast<std::size_t>(c)]) {
      double s = 0.0, co = 0.0;
      for (std::size_t i = 0; i < mapped.size(); ++i) {
        s += set.mean_weights[i] * std::sin(mapped[i][c]);
        co += set.mean_weights[i] * std::cos(mapped[i][c]);
      }
      z_mean[c] = std::atan2(s, co);
    } else {
      for (std::size_t i = 0; i < mapped.size(); ++i)
        z_mean[c] += set.mean_weights[i] * mapped[i][c];
    }
  }

  auto wrapped_residual = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r = v - z_mean;
    for (Eigen::Index c = 0; c < m; ++c)
      if (angular[static_cast<std::size_t>(c)]) r[c] = geom::wrap_angle(r[c]);
    return r;
  };

  Eigen::MatrixXd P_zz = noise_cov;
  Eigen::MatrixXd P_xz = Eigen::MatrixXd::Zero(6, m);
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const Eigen::VectorXd rz = wrapped_residual(mapped[i]);
    const Eigen::VectorXd rx = set.points[i] - predicted.estimate.mean;
    P_zz += set.cov_weights[i] * rz * rz.transpose();
    P_xz += set.cov_weights[i] * rx * rz.transpose();
  }
  symmetrize(P_zz);

  const auto llt = factorize(P_zz, "ukf_update: singular innovation covariance");
  const Eigen::MatrixXd K = llt.solve(P_xz.transpose()).transpose();

  Eigen::VectorXd innovation = z - z_mean;
  for (Eigen::Index c = 0; c < m; ++c)
    if (angular[static_cast<std::size_t>(c)])
      innovation[c] = geom::wrap_angle(innovation[c]);

  TrackState out;
  out.timestamp = predicted.timestamp;
  out.estimate.mean = predicted.estimate.mean + K * innovation;
  Eigen::MatrixXd Pout =
      predicted.estimate.covariance - K * P_zz * K.transpose();
  symmetrize(Pout);
  out.estimate.covariance = std::move(Pout);
  return out;
}

Matrix4 spherical_noise_cov(const NoiseSigmas& sigmas) {
  Matrix4 R = Matrix4::Zero();
  R(0, 0) = sigmas.range * sigmas.range;
  R(1, 1) = sigmas.bearing * sigmas.bearing;
  R(2, 2) = sigmas.elevation * sigmas.elevation;
  R(3, 3) = sigmas.range_rate * sigmas.range_rate;
  return R;
}

Vector4 spherical_vector(const SphericalMeasurement& meas) {
  return Vector4(meas.range, meas.bearing, meas.elevation, meas.range_rate);
}

TrackState ekf_update(const TrackState& predicted,
                      const SphericalMeasurement& meas,
                      const NoiseSigmas& sigmas, const SensorPose& sensor) {
  return linearized_update(predicted, spherical_vector(meas),
                           spherical_noise_cov(sigmas),
                           SphericalModel(sensor));
}

TrackState ukf_update(const TrackState& predicted,
                      const SphericalMeasurement& meas,
                      const NoiseSigmas& sigmas, const SensorPose& sensor,
                      double kappa) {
  return unscented_update(predicted, spherical_vector(meas),
                          spherical_noise_cov(sigmas),
                          SphericalModel(sensor), kappa);
}

GaussianEstimate position_correct(const GaussianEstimate& prior,
                                  const GaussianEstimate& z_star) {
  if (prior.mean.size() != 3 || z_star.mean.size() != 3)
    throw EstimateError("position_correct: expects 3-D estimates");

  Eigen::MatrixXd S = prior.covariance + z_star.covariance;
  symmetrize(S);
  const auto llt =
      factorize(S, "position_correct: singular innovation covariance");
  const Eigen::MatrixXd K = llt.solve(prior.covariance).transpose();

  GaussianEstimate out;
  out.mean = prior.mean + K * (z_star.mean - prior.mean);
  Eigen::MatrixXd P =
      (Eigen::MatrixXd::Identity(3, 3) - K) * prior.covariance;
  symmetrize(P);
  out.covariance = std::move(P);
  return out;
}

TrackState initialize_track(const SphericalMeasurement& m1,
                            const SphericalMeasurement& m2,
                            const NoiseSigmas& sigmas,
                            const SensorPose& sensor) {
  const double dt = m2.timestamp - m1.timestamp;
  if (!(dt > 0.0))
    throw EstimateError("initialize_track: measurements must be time-ordered");

  const GaussianEstimate c1 =
      geom::converted_position_measurement(m1, sigmas, sensor);
  const GaussianEstimate c2 =
      geom::converted_position_measurement(m2, sigmas, sensor);

  const Vector3 pos = c2.mean;
  const Vector3 vel = (Vector3(c2.mean) - Vector3(c1.mean)) / dt;
  const Matrix3 Rp = c2.covariance;
  const Matrix3 Rv = (Matrix3(c1.covariance) + Matrix3(c2.covariance)) / (dt * dt);

  TrackState out;
  out.timestamp = m2.timestamp;
  out.estimate.mean = interleave(pos, vel);
  Matrix6 P = Matrix6::Zero();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      P(2 * a, 2 * b) = Rp(a, b);
      P(2 * a + 1, 2 * b + 1) = Rv(a, b);
    }
  out.estimate.covariance = P;
  return out;
}

Vector3 position_of(const TrackState& track) {
  const auto& x = track.estimate.mean;
  return Vector3(x[0], x[2], x[4]);
}

Matrix3 position_cov(const TrackState& track) {
  const auto& P = track.estimate.covariance;
  Matrix3 out;
  const int idx[3] = {0, 2, 4};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) out(a, b) = P(idx[a], idx[b]);
  return out;
}

Vector6 interleave(const Vector3& position, const Vector3& velocity) {
  Vector6 x;
  x << position.x(), velocity.x(), position.y(), velocity.y(), position.z(),
      velocity.z();
  return x;
}

}  // namespace bnkf::filters
