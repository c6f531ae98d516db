#pragma once

#include <vector>

#include "bnkf/geom.hpp"
#include "bnkf/types.hpp"

namespace bnkf::filters {

// Constant-velocity model with per-axis white-noise acceleration of
// intensity q ((m/s^2)^2 per axis). State ordering (x, vx, y, vy, z, vz).
struct ProcessModel {
  double accel_intensity = 1.0;

  Matrix6 transition(double dt) const;
  Matrix6 noise(double dt) const;
};

struct SigmaPointSet {
  std::vector<Eigen::VectorXd> points;  // 2n+1 entries
  std::vector<double> mean_weights;
  std::vector<double> cov_weights;  // equal to mean_weights (Julier form)
  double kappa = 0.0;
};

// Measurement function interface for the Kalman updates. The production
// model is the spherical radar map; tests plug in linear models.
struct MeasurementModel {
  virtual ~MeasurementModel() = default;
  virtual Eigen::VectorXd observe(const Vector6& state) const = 0;
  virtual Eigen::MatrixXd jacobian(const Vector6& state) const = 0;
  virtual std::vector<bool> angular_channels() const = 0;
};

// (rho, theta, phi, rhodot) radar observation from a fixed sensor.
struct SphericalModel final : MeasurementModel {
  SensorPose sensor;

  explicit SphericalModel(const SensorPose& s) : sensor(s) {}
  Eigen::VectorXd observe(const Vector6& state) const override;
  Eigen::MatrixXd jacobian(const Vector6& state) const override;
  std::vector<bool> angular_channels() const override {
    return {false, true, true, false};
  }
};

// --- prediction ---

TrackState cv_predict(const TrackState& track, double dt,
                      const ProcessModel& model);

SigmaPointSet make_sigma_points(const GaussianEstimate& estimate, double kappa);

TrackState ukf_predict(const TrackState& track, double dt,
                       const ProcessModel& model, double kappa);

// --- correction ---

// Linearized (EKF) update for a generic measurement model.
TrackState linearized_update(const TrackState& predicted,
                             const Eigen::VectorXd& z,
                             const Eigen::MatrixXd& noise_cov,
                             const MeasurementModel& model);

// Unscented update for a generic measurement model.
TrackState unscented_update(const TrackState& predicted,
                            const Eigen::VectorXd& z,
                            const Eigen::MatrixXd& noise_cov,
                            const MeasurementModel& model, double kappa);

TrackState ekf_update(const TrackState& predicted,
                      const SphericalMeasurement& meas,
                      const NoiseSigmas& sigmas, const SensorPose& sensor);

TrackState ukf_update(const TrackState& predicted,
                      const SphericalMeasurement& meas,
                      const NoiseSigmas& sigmas, const SensorPose& sensor,
                      double kappa);

// Linear position correction shared by the hybrid estimators: H = I3,
// K = P (P + R)^-1, mean and covariance in standard Kalman form.
GaussianEstimate position_correct(const GaussianEstimate& prior,
                                  const GaussianEstimate& z_star);

// Two-point track initialization from the first two measurements.
TrackState initialize_track(const SphericalMeasurement& m1,
                            const SphericalMeasurement& m2,
                            const NoiseSigmas& sigmas,
                            const SensorPose& sensor);

// --- helpers ---

Vector3 position_of(const TrackState& track);
Matrix3 position_cov(const TrackState& track);
Vector6 interleave(const Vector3& position, const Vector3& velocity);

// Diagonal (rho, theta, phi, rhodot) noise covariance.
Matrix4 spherical_noise_cov(const NoiseSigmas& sigmas);
Vector4 spherical_vector(const SphericalMeasurement& meas);

}  // namespace bnkf::filters
