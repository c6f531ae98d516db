#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bnkf/hybrid.hpp"
#include "bnkf/simkit.hpp"
#include "bnkf/types.hpp"

namespace bnkf::evalkit {

// --- per-step metrics ---

double euclidean_error(const Vector3& estimate, const Vector3& truth);

// det(P) for a symmetric PSD 3x3; throws on a clearly non-PSD input.
double cov_volume(const Matrix3& P);

// Squared Mahalanobis distance of the truth point under the estimate,
// via a Cholesky solve. Throws with a condition estimate when singular.
double mahalanobis_sq(const Vector3& truth, const GaussianEstimate& estimate);

// --- benchmark execution ---

inline const std::vector<std::string> kAllMethods = {"EKF", "UKF", "BNN",
                                                     "BNKF", "BNKFe"};

struct StepRecord {
  std::int64_t traj_id = 0;
  double t = 0.0;
  std::string method;
  simkit::Tier tier = simkit::Tier::low;
  double rate = 1.0;
  int fold = -1;
  double euclidean_error = 0.0;
  double mahalanobis_sq = 0.0;
  double cov_det = 0.0;
  double step_seconds = 0.0;  // wall time; kept out of the replayable CSVs
};

struct AggregateRecord {
  std::string method;
  simkit::Tier tier = simkit::Tier::low;
  std::vector<double> fold_ed, fold_md, fold_det;  // empty for EKF/UKF
  double ed_mean = 0.0, ed_std = 0.0;
  double md_mean = 0.0, md_std = 0.0;
  double det_mean = 0.0, det_std = 0.0;
  double sec_per_traj = 0.0;
};

// Models for the learned methods, indexed by fold: models[f] was trained
// with fold f held out and is only evaluated on fold-f rows.
struct FoldModels {
  std::vector<bnn::BnnModel> joint;
  std::vector<hybrid::EnsembleModel> ensemble;
};

struct BenchmarkConfig {
  double process_noise_q = 1.0;
  double kappa = 0.0;
  int mc_samples = 100;
  std::uint64_t seed = 1;
  std::vector<std::string> methods = kAllMethods;
  int threads = 0;  // 0 = hardware concurrency
};

struct BenchmarkResult {
  std::vector<StepRecord> steps;
  std::vector<AggregateRecord> aggregates;
};

// Runs every requested method over the dataset. EKF/UKF run recursively per
// measurement sequence (two-point initialization, predict over the actual
// gap, update); learned methods run per feature pair. The first two steps
// of every sequence are excluded from metrics for all methods alike.
// models may be null when only EKF/UKF are requested.
BenchmarkResult run_benchmark(const simkit::SupervisedDataset& dataset,
                              const SensorPose& sensor,
                              const FoldModels* models,
                              const BenchmarkConfig& config);

// Fold-aware aggregation (mean of fold means +- sample std across folds for
// the learned methods; grand mean with std 0 for EKF/UKF). Deterministic in
// the record order.
std::vector<AggregateRecord> aggregate(const std::vector<StepRecord>& steps,
                                       int n_folds);

// Coarse grid search for the process-noise intensity: EKF mean ED over the
// fold-0 validation slice, smallest q wins ties.
struct NoiseTuning {
  double selected_q = 1.0;
  std::vector<std::pair<double, double>> grid_ed;  // (q, mean ED)
};
NoiseTuning tune_process_noise(const simkit::SupervisedDataset& dataset,
                               const SensorPose& sensor, double kappa,
                               const std::vector<double>& grid);

// --- timing ---

struct TimingRow {
  std::string method;
  std::size_t n_steps = 0;
  int reps = 0;
  double min_s = 0.0, median_s = 0.0, max_s = 0.0;
};

// Full-sequence inference wall time: one discarded warm-up, then the median
// of reps repetitions, single execution thread, identical inputs per method.
std::vector<TimingRow> time_methods(const simkit::SupervisedDataset& dataset,
                                    const simkit::SequenceView& sequence,
                                    const SensorPose& sensor,
                                    const FoldModels* models,
                                    const BenchmarkConfig& config, int reps);

// --- reports ---

// Writes summary.csv, per_step.csv, noise_sweep.csv and timing.csv under
// dir. The metric files are deterministic replays of the inputs; timing.csv
// carries the only wall-clock content.
void emit_report(const BenchmarkResult& result, const std::string& dir);

void write_timing_csv(const std::vector<TimingRow>& rows,
                      const std::string& path);

// Re-aggregates per_step.csv independently and compares against summary.csv
// (1e-12 relative). Returns an empty string on success, else a diagnostic.
std::string verify_report_consistency(const std::string& dir);

}  // namespace bnkf::evalkit
