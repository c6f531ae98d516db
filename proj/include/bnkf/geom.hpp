#pragma once

#include "bnkf/types.hpp"

namespace bnkf::geom {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Wraps to (-pi, pi]; -pi maps to +pi.
double wrap_angle(double a);

// Noise-free spherical observation of a kinematic state. Throws
// EstimateError when the target coincides with the sensor.
SphericalMeasurement cart_to_spherical(const KinematicState& state,
                                       const SensorPose& sensor);

// Position part of the inverse measurement map.
Vector3 spherical_to_cart(const SphericalMeasurement& meas,
                          const SensorPose& sensor);
Vector3 spherical_to_cart(double range, double bearing, double elevation,
                          const SensorPose& sensor);

// Analytic Jacobian of (rho, theta, phi, rhodot) with respect to the
// track state (x, vx, y, vy, z, vz). Throws on the zenith/coincident
// degeneracies where the bearing derivative is undefined.
Eigen::Matrix<double, 4, 6> measurement_jacobian(const Vector6& state_mean,
                                                 const SensorPose& sensor);

// Converts a spherical measurement plus its channel sigmas into a Cartesian
// position pseudo-measurement (z*, R): the diagonal (rho, theta, phi) noise
// covariance is pushed through spherical_to_cart with an unscented
// transform (7 sigma points, kappa = 0). The result is symmetrized and, if
// needed, repaired once with eps*I jitter (eps = 1e-9 * trace).
GaussianEstimate converted_position_measurement(const SphericalMeasurement& meas,
                                                const NoiseSigmas& sigmas,
                                                const SensorPose& sensor);

}  // namespace bnkf::geom
