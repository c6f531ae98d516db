#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

namespace bnkf {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

// Radar sensor is fixed for a whole scenario.
struct SensorPose {
  Vector3 position = Vector3::Zero();
};

// Angle conventions used throughout:
//   bearing   theta: from +x toward +y, atan2(dy, dx), in (-pi, pi]
//   elevation phi:   from the horizontal plane, atan2(dz, r_xy), in [-pi/2, pi/2]
// At the zenith (r_xy = 0) bearing is defined as 0 and elevation is +-pi/2.
struct SphericalMeasurement {
  double range = 0.0;       // m, > 0
  double bearing = 0.0;     // rad, (-pi, pi]
  double elevation = 0.0;   // rad, [-pi/2, pi/2]
  double range_rate = 0.0;  // m/s
  double timestamp = 0.0;   // s
};

// One-sigma measurement noise per channel. Angles are stored in radians;
// config files carry degrees and are converted once at load.
struct NoiseSigmas {
  double range = 1.0;       // m
  double range_rate = 0.1;  // m/s
  double bearing = 1e-3;    // rad
  double elevation = 1e-3;  // rad
};

// Mean + covariance, the universal estimator output. Dimension is 3
// (position) or 6 (position+velocity) depending on context.
struct GaussianEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

// True kinematic sample of the target.
struct KinematicState {
  double timestamp = 0.0;
  Vector3 position = Vector3::Zero();
  Vector3 velocity = Vector3::Zero();
};

// 6-D track state ordered (x, vx, y, vy, z, vz).
struct TrackState {
  GaussianEstimate estimate;
  double timestamp = 0.0;
};

// The 12-entry network input: both measurements of a consecutive pair plus
// the channel sigmas, ordered
//   (rho_t, theta_t, phi_t, rhodot_t,
//    rho_t1, theta_t1, phi_t1, rhodot_t1,
//    sigma_rho, sigma_theta, sigma_phi, sigma_rhodot).
using FeatureVector = std::array<double, 12>;

inline FeatureVector make_feature(const SphericalMeasurement& a,
                                  const SphericalMeasurement& b,
                                  const NoiseSigmas& s) {
  return {a.range,     a.bearing,   a.elevation, a.range_rate,
          b.range,     b.bearing,   b.elevation, b.range_rate,
          s.range,     s.bearing,   s.elevation, s.range_rate};
}

struct EstimateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bnkf
