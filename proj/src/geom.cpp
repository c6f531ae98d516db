#include "bnkf/geom.hpp"

#include <cmath>

namespace bnkf::geom {

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w = kPi;
  return w;
}

SphericalMeasurement cart_to_spherical(const KinematicState& state,
                                       const SensorPose& sensor) {
  const Vector3 d = state.position - sensor.position;
  const double range = d.norm();
  if (range == 0.0)
    throw EstimateError("cart_to_spherical: target coincides with sensor; "
                        "direction undefined");
  const double rxy = std::hypot(d.x(), d.y());
  SphericalMeasurement m;
  m.range = range;
  m.bearing = rxy == 0.0 ? 0.0 : std::atan2(d.y(), d.x());
  m.elevation = rxy == 0.0 ? std::copysign(kPi / 2.0, d.z())
                           : std::atan2(d.z(), rxy);
  m.range_rate = d.dot(state.velocity) / range;
  m.timestamp = state.timestamp;
  return m;
}

Vector3 spherical_to_cart(double range, double bearing, double elevation,
                          const SensorPose& sensor) {
  const double ce = std::cos(elevation);
  return sensor.position + Vector3(range * ce * std::cos(bearing),
                                   range * ce * std::sin(bearing),
                                   range * std::sin(elevation));
}

Vector3 spherical_to_cart(const SphericalMeasurement& meas,
                          const SensorPose& sensor) {
  return spherical_to_cart(meas.range, meas.bearing, meas.elevation, sensor);
}

Eigen::Matrix<double, 4, 6> measurement_jacobian(const Vector6& state_mean,
                                                 const SensorPose& sensor) {
  const Vector3 p(state_mean[0], state_mean[2], state_mean[4]);
  const Vector3 v(state_mean[1], state_mean[3], state_mean[5]);
  const Vector3 d = p - sensor.position;
  const double r2 = d.squaredNorm();
  const double r = std::sqrt(r2);
  const double rxy2 = d.x() * d.x() + d.y() * d.y();
  const double rxy = std::sqrt(rxy2);
  if (r == 0.0)
    throw EstimateError("measurement_jacobian: target coincides with sensor");
  if (rxy == 0.0)
    throw EstimateError("measurement_jacobian: zenith geometry; bearing "
                        "derivative undefined");

  const double rdot = d.dot(v) / r;

  Eigen::Matrix<double, 4, 6> H = Eigen::Matrix<double, 4, 6>::Zero();
  // Position columns are 0, 2, 4; velocity columns 1, 3, 5.
  for (int a = 0; a < 3; ++a) {
    H(0, 2 * a) = d[a] / r;                                   // d rho / d p
    H(3, 2 * a) = (v[a] - d[a] * rdot / r) / r;               // d rhodot / d p
    H(3, 2 * a + 1) = d[a] / r;                               // d rhodot / d v
  }
  H(1, 0) = -d.y() / rxy2;  // d theta / d x
  H(1, 2) = d.x() / rxy2;   // d theta / d y
  H(2, 0) = -d.x() * d.z() / (r2 * rxy);
  H(2, 2) = -d.y() * d.z() / (r2 * rxy);
  H(2, 4) = rxy / r2;
  return H;
}

GaussianEstimate converted_position_measurement(const SphericalMeasurement& meas,
                                                const NoiseSigmas& sigmas,
                                                const SensorPose& sensor) {
  // Unscented transform over (rho, theta, phi) with kappa = 0: the central
  // point carries zero weight, the six offset points 1/6 each. Sigma-point
  // evaluation uses the raw formula so that a large range sigma may probe
  // negative ranges without tripping type invariants.
  constexpr int n = 3;
  constexpr double kappa = 0.0;
  const double scale = std::sqrt(n + kappa);
  const double w0 = kappa / (n + kappa);
  const double wi = 1.0 / (2.0 * (n + kappa));

  const double mean_sph[n] = {meas.range, meas.bearing, meas.elevation};
  const double dev[n] = {sigmas.range, sigmas.bearing, sigmas.elevation};

  Vector3 pts[2 * n + 1];
  double w[2 * n + 1];
  pts[0] = spherical_to_cart(mean_sph[0], mean_sph[1], mean_sph[2], sensor);
  w[0] = w0;
  for (int a = 0; a < n; ++a) {
    double plus[n] = {mean_sph[0], mean_sph[1], mean_sph[2]};
    double minus[n] = {mean_sph[0], mean_sph[1], mean_sph[2]};
    plus[a] += scale * dev[a];
    minus[a] -= scale * dev[a];
    pts[1 + 2 * a] = spherical_to_cart(plus[0], plus[1], plus[2], sensor);
    pts[2 + 2 * a] = spherical_to_cart(minus[0], minus[1], minus[2], sensor);
    w[1 + 2 * a] = wi;
    w[2 + 2 * a] = wi;
  }

  Vector3 mean = Vector3::Zero();
  for (int i = 0; i < 2 * n + 1; ++i) mean += w[i] * pts[i];
  Matrix3 cov = Matrix3::Zero();
  for (int i = 0; i < 2 * n + 1; ++i) {
    const Vector3 e = pts[i] - mean;
    cov += w[i] * e * e.transpose();
  }
  cov = 0.5 * (cov + cov.transpose()).eval();

  Eigen::LLT<Matrix3> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov += 1e-9 * cov.trace() * Matrix3::Identity();
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw EstimateError("converted_position_measurement: covariance not PSD "
                          "after jitter repair");
  }

  GaussianEstimate out;
  out.mean = mean;
  out.covariance = cov;
  return out;
}

}  // namespace bnkf::geom
