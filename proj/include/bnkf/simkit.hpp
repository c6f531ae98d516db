#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bnkf/types.hpp"

namespace bnkf::simkit {

enum class Tier { low, medium, high };

// Per-channel 1-sigma noise (range m, range-rate m/s, angles deg in the
// table, stored in radians).
NoiseSigmas tier_sigmas(Tier tier);
const char* tier_name(Tier tier);
Tier tier_from_name(const std::string& name);

// Smooth bounded flight paths: per axis a base point plus a sum of random
// sinusoids, amplitude-budgeted so that speed stays below v_max and
// acceleration below a_max. amplitude_scale = 0 with a nonzero
// drift_velocity degenerates to an exact constant-velocity path.
struct GeneratorParams {
  Vector3 center{200.0, 0.0, 70.0};
  Vector3 center_half_extent{12.0, 12.0, 8.0};
  Vector3 amplitude_budget{28.0, 28.0, 16.0};
  int n_sinusoids = 4;
  double omega_min = 0.15;  // rad/s
  double omega_max = 1.1;   // rad/s
  double v_max = 22.0;      // m/s
  double a_max = 9.0;       // m/s^2
  Vector3 drift_velocity{0.0, 0.0, 0.0};
  double amplitude_scale = 1.0;
};

struct Trajectory {
  std::int64_t id = 0;
  std::uint64_t seed = 0;
  double dt0 = 0.1;
  std::vector<KinematicState> samples;
};

struct MeasurementSequence {
  std::int64_t trajectory_id = 0;
  Tier tier = Tier::low;
  double rate = 1.0;
  std::uint64_t seed = 0;
  NoiseSigmas sigmas;  // constant across the sequence
  std::vector<SphericalMeasurement> items;
};

// One retained measurement joined with the true position at its timestamp.
// The supervised pair rows (feature vector of consecutive measurements,
// target = truth at the later time) are reconstructed deterministically
// from consecutive rows of the same (trajectory, rate) group.
struct DatasetRow {
  std::int64_t traj_id = 0;
  double t = 0.0;
  SphericalMeasurement meas;
  NoiseSigmas sigmas;
  Tier tier = Tier::low;
  double rate = 1.0;
  Vector3 target = Vector3::Zero();
  int fold = -1;
};

struct PairRow {
  FeatureVector x{};
  Vector3 target = Vector3::Zero();
  std::int64_t traj_id = 0;
  double t0 = 0.0, t1 = 0.0;
  Tier tier = Tier::low;
  double rate = 1.0;
  int fold = -1;
  std::size_t step_index = 0;  // index of the t+1 measurement in its sequence
};

struct SequenceView {
  std::int64_t traj_id = 0;
  Tier tier = Tier::low;
  double rate = 1.0;
  int fold = -1;
  std::size_t begin = 0, end = 0;  // row index range [begin, end)
};

struct SupervisedDataset {
  std::vector<DatasetRow> rows;  // ordered by (trajectory, rate, t)
  int n_folds = 0;

  std::vector<SequenceView> sequences() const;
  std::vector<PairRow> pairs() const;
};

// --- generation pipeline ---

Trajectory generate_trajectory(std::uint64_t seed, double duration, double dt0,
                               const GeneratorParams& params);

// Noisy spherical observations of every trajectory sample. noise_scale
// multiplies the drawn noise (0 = exact measurements for pipeline checks);
// the recorded sigmas always describe the tier.
MeasurementSequence simulate_measurements(const Trajectory& traj,
                                          const SensorPose& sensor, Tier tier,
                                          std::uint64_t seed,
                                          double noise_scale = 1.0);

// Uniform random retention to round(rate * n) measurements, keeping the
// first two as the initialization anchor; order preserved.
MeasurementSequence downsample(const MeasurementSequence& seq, double rate,
                               std::uint64_t seed);

// True position at an arbitrary time: exact sample when aligned, cubic
// Hermite between bracketing samples otherwise.
Vector3 interpolate_position(const Trajectory& traj, double t);

// Dataset rows for one measurement sequence (targets interpolated at each
// retained timestamp).
std::vector<DatasetRow> build_supervised(const MeasurementSequence& seq,
                                         const Trajectory& traj);

// Trajectory-level k-fold partition; fold sizes differ by at most one.
void assign_folds(SupervisedDataset& dataset, int k, std::uint64_t seed);

// --- file formats ---

void write_trajectories(const std::vector<Trajectory>& trajs,
                        const std::string& path);
std::vector<Trajectory> read_trajectories(const std::string& path);

void write_measurements(const std::vector<MeasurementSequence>& seqs,
                        const std::string& path);

void write_dataset(const SupervisedDataset& dataset, const std::string& path);
SupervisedDataset read_dataset(const std::string& path);

}  // namespace bnkf::simkit
