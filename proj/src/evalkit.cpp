#include "bnkf/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "bnkf/csv.hpp"
#include "bnkf/filters.hpp"
#include "bnkf/geom.hpp"
#include "bnkf/rng.hpp"

namespace bnkf::evalkit {

namespace {

using Clock = std::chrono::steady_clock;
using simkit::SequenceView;
using simkit::SupervisedDataset;
using simkit::Tier;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

double euclidean_error(const Vector3& estimate, const Vector3& truth) {
  return (estimate - truth).norm();
}

double cov_volume(const Matrix3& P) {
  if ((P - P.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, P.cwiseAbs().maxCoeff()))
    throw EstimateError("cov_volume: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix3> es(P);
  if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1e-300, P.trace()))
    throw EstimateError("cov_volume: matrix not PSD");
  return P.determinant();
}

double mahalanobis_sq(const Vector3& truth, const GaussianEstimate& estimate) {
  if (estimate.mean.size() != 3)
    throw EstimateError("mahalanobis_sq: expects a 3-D estimate");
  const Eigen::MatrixXd& P = estimate.covariance;
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    std::ostringstream msg;
    msg << "mahalanobis_sq: singular covariance (eigenvalue range ["
        << es.eigenvalues().minCoeff() << ", " << es.eigenvalues().maxCoeff()
        << "])";
    throw EstimateError(msg.str());
  }
  const Eigen::VectorXd r = truth - Eigen::Vector3d(estimate.mean);
  return r.dot(llt.solve(r));
}

namespace {

struct SequenceRows {
  const SupervisedDataset* dataset;
  const SequenceView* view;
  const simkit::DatasetRow& row(std::size_t i) const {
    return dataset->rows[view->begin + i];
  }
  std::size_t size() const { return view->end - view->begin; }
};

StepRecord make_record(const std::string& method, const SequenceRows& seq,
                       std::size_t i, const GaussianEstimate& est,
                       double secs) {
  const auto& row = seq.row(i);
  StepRecord rec;
  rec.traj_id = row.traj_id;
  rec.t = row.t;
  rec.method = method;
  rec.tier = row.tier;
  rec.rate = row.rate;
  rec.fold = row.fold;
  rec.euclidean_error =
      euclidean_error(Vector3(est.mean), row.target);
  rec.mahalanobis_sq = mahalanobis_sq(row.target, est);
  Matrix3 P = est.covariance;
  rec.cov_det = cov_volume(P);
  rec.step_seconds = secs;
  return rec;
}

std::vector<StepRecord> run_filter_sequence(const SequenceRows& seq,
                                            const SensorPose& sensor,
                                            const std::string& method,
                                            double q, double kappa) {
  std::vector<StepRecord> out;
  if (seq.size() < 3) return out;
  const bool unscented = method == "UKF";
  const NoiseSigmas& sigmas = seq.row(0).sigmas;
  const filters::ProcessModel model{q};

  TrackState track = filters::initialize_track(seq.row(0).meas,
                                                seq.row(1).meas, sigmas, sensor);

  for (std::size_t i = 2; i < seq.size(); ++i) {
    const double dt = seq.row(i).t - seq.row(i - 1).t;
    const auto start = Clock::now();
    if (unscented) {
      track = filters::ukf_predict(track, dt, model, kappa);
      track = filters::ukf_update(track, seq.row(i).meas, sigmas, sensor, kappa);
    } else {
      track = filters::cv_predict(track, dt, model);
      track = filters::ekf_update(track, seq.row(i).meas, sigmas, sensor);
    }
    const double secs = seconds_since(start);

    GaussianEstimate pos;
    pos.mean = filters::position_of(track);
    pos.covariance = filters::position_cov(track);
    out.push_back(make_record(method, seq, i, pos, secs));
  }
  return out;
}

std::vector<StepRecord> run_learned_sequence(const SequenceRows& seq,
                                             const SensorPose& sensor,
                                             const std::string& method,
                                             const FoldModels& models,
                                             int mc_samples,
                                             std::uint64_t run_seed) {
  std::vector<StepRecord> out;
  if (seq.size() < 3) return out;
  const int fold = seq.view->fold;
  if (fold < 0) throw EstimateError("run_benchmark: dataset has no folds");

  const std::string label = method + "/" + std::to_string(seq.view->traj_id) +
                            "/" + csv::format_double(seq.view->rate);

  for (std::size_t i = 2; i < seq.size(); ++i) {
    const auto& prev = seq.row(i - 1);
    const auto& cur = seq.row(i);
    const FeatureVector x = make_feature(prev.meas, cur.meas, cur.sigmas);
    const std::uint64_t seed = rng::derive_seed(run_seed, label, i);

    hybrid::EstimatorOutput est;
    if (method == "BNN") {
      est = hybrid::bnn_estimate(models.joint.at(fold), x, mc_samples, seed);
    } else if (method == "BNKF") {
      est = hybrid::bnkf_estimate(models.joint.at(fold), x, cur.sigmas, sensor,
                                  mc_samples, seed);
    } else {
      est = hybrid::bnkfe_estimate(models.ensemble.at(fold), x, cur.sigmas,
                                   sensor, mc_samples, seed);
    }
    out.push_back(make_record(method, seq, i, est.position, est.wall_seconds));
  }
  return out;
}

bool is_filter_method(const std::string& m) { return m == "EKF" || m == "UKF"; }

}  // namespace

BenchmarkResult run_benchmark(const SupervisedDataset& dataset,
                              const SensorPose& sensor,
                              const FoldModels* models,
                              const BenchmarkConfig& config) {
  const auto views = dataset.sequences();
  BenchmarkResult result;

  for (const auto& method : config.methods) {
    if (std::find(kAllMethods.begin(), kAllMethods.end(), method) ==
        kAllMethods.end())
      throw EstimateError("run_benchmark: unknown method '" + method + "'");
    if (!is_filter_method(method)) {
      if (models == nullptr)
        throw EstimateError("run_benchmark: method " + method +
                            " requires trained models");
      const std::size_t need =
          static_cast<std::size_t>(std::max(dataset.n_folds, 1));
      if (method == "BNKFe" ? models->ensemble.size() < need
                            : models->joint.size() < need)
        throw EstimateError("run_benchmark: missing fold models for " + method);
    }

    std::vector<std::vector<StepRecord>> per_seq(views.size());
    parallel_for(views.size(), config.threads, [&](std::size_t i) {
      SequenceRows seq{&dataset, &views[i]};
      per_seq[i] =
          is_filter_method(method)
              ? run_filter_sequence(seq, sensor, method, config.process_noise_q,
                                    config.kappa)
              : run_learned_sequence(seq, sensor, method, *models,
                                     config.mc_samples, config.seed);
    });
    for (auto& chunk : per_seq)
      result.steps.insert(result.steps.end(), chunk.begin(), chunk.end());
  }

  result.aggregates = aggregate(result.steps, dataset.n_folds);
  return result;
}

std::vector<AggregateRecord> aggregate(const std::vector<StepRecord>& steps,
                                       int n_folds) {
  struct Accum {
    std::vector<double> ed_sum, md_sum, det_sum;
    std::vector<std::size_t> count;
    double ed_all = 0.0, md_all = 0.0, det_all = 0.0;
    std::size_t n_all = 0;
    double secs = 0.0;
    std::map<std::pair<std::int64_t, double>, bool> sequences;
  };

  const int k = std::max(1, n_folds);
  std::map<std::pair<std::string, int>, Accum> table;  // (method, tier)
  std::vector<std::pair<std::string, int>> order;

  for (const auto& s : steps) {
    const auto key = std::make_pair(s.method, static_cast<int>(s.tier));
    auto it = table.find(key);
    if (it == table.end()) {
      it = table.emplace(key, Accum{}).first;
      it->second.ed_sum.assign(static_cast<std::size_t>(k), 0.0);
      it->second.md_sum.assign(static_cast<std::size_t>(k), 0.0);
      it->second.det_sum.assign(static_cast<std::size_t>(k), 0.0);
      it->second.count.assign(static_cast<std::size_t>(k), 0);
      order.push_back(key);
    }
    Accum& a = it->second;
    const auto f = static_cast<std::size_t>(std::max(0, s.fold));
    a.ed_sum[f] += s.euclidean_error;
    a.md_sum[f] += s.mahalanobis_sq;
    a.det_sum[f] += s.cov_det;
    a.count[f] += 1;
    a.ed_all += s.euclidean_error;
    a.md_all += s.mahalanobis_sq;
    a.det_all += s.cov_det;
    a.n_all += 1;
    a.secs += s.step_seconds;
    a.sequences[{s.traj_id, s.rate}] = true;
  }

  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    sd = 0.0;
    if (v.size() > 1) {
      for (double x : v) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
    }
  };

  std::vector<AggregateRecord> out;
  for (const auto& key : order) {
    const Accum& a = table.at(key);
    AggregateRecord rec;
    rec.method = key.first;
    rec.tier = static_cast<Tier>(key.second);
    rec.sec_per_traj =
        a.sequences.empty() ? 0.0
                            : a.secs / static_cast<double>(a.sequences.size());

    if (is_filter_method(rec.method)) {
      // Single deterministic model: one grand mean, fold std pinned to 0.
      rec.ed_mean = a.ed_all / static_cast<double>(a.n_all);
      rec.md_mean = a.md_all / static_cast<double>(a.n_all);
      rec.det_mean = a.det_all / static_cast<double>(a.n_all);
      rec.ed_std = rec.md_std = rec.det_std = 0.0;
    } else {
      for (std::size_t f = 0; f < a.count.size(); ++f) {
        if (a.count[f] == 0) continue;
        const auto n = static_cast<double>(a.count[f]);
        rec.fold_ed.push_back(a.ed_sum[f] / n);
        rec.fold_md.push_back(a.md_sum[f] / n);
        rec.fold_det.push_back(a.det_sum[f] / n);
      }
      if (rec.fold_ed.empty())
        throw EstimateError("aggregate: no populated folds for " + rec.method);
      mean_std(rec.fold_ed, rec.ed_mean, rec.ed_std);
      mean_std(rec.fold_md, rec.md_mean, rec.md_std);
      mean_std(rec.fold_det, rec.det_mean, rec.det_std);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

NoiseTuning tune_process_noise(const SupervisedDataset& dataset,
                               const SensorPose& sensor, double kappa,
                               const std::vector<double>& grid) {
  if (grid.empty())
    throw EstimateError("tune_process_noise: empty candidate grid");

  // Validation slice: fold-0 trajectories (or everything when unfolded).
  const auto views = dataset.sequences();
  std::vector<const SequenceView*> validation;
  for (const auto& v : views)
    if (v.fold <= 0) validation.push_back(&v);
  if (validation.empty())
    throw EstimateError("tune_process_noise: empty validation slice");

  NoiseTuning tuning;
  double best = std::numeric_limits<double>::infinity();
  for (double q : grid) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* v : validation) {
      SequenceRows seq{&dataset, v};
      for (const auto& rec :
           run_filter_sequence(seq, sensor, "EKF", q, kappa)) {
        sum += rec.euclidean_error;
        ++n;
      }
    }
    const double ed = n ? sum / static_cast<double>(n)
                        : std::numeric_limits<double>::infinity();
    tuning.grid_ed.emplace_back(q, ed);
    if (ed < best) {
      best = ed;
      tuning.selected_q = q;
    }
  }
  return tuning;
}

std::vector<TimingRow> time_methods(const SupervisedDataset& dataset,
                                    const SequenceView& sequence,
                                    const SensorPose& sensor,
                                    const FoldModels* models,
                                    const BenchmarkConfig& config, int reps) {
  reps = std::max(reps, 5);
  SequenceRows seq{&dataset, &sequence};

  std::vector<TimingRow> out;
  for (const auto& method : config.methods) {
    auto run_once = [&]() -> std::size_t {
      std::vector<StepRecord> recs =
          is_filter_method(method)
              ? run_filter_sequence(seq, sensor, method, config.process_noise_q,
                                    config.kappa)
              : run_learned_sequence(seq, sensor, method, *models,
                                     config.mc_samples, config.seed);
      return recs.size();
    };

    std::size_t n_steps = run_once();  // warm-up, discarded
    std::vector<double> times(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
      const auto start = Clock::now();
      n_steps = run_once();
      times[static_cast<std::size_t>(r)] = seconds_since(start);
    }
    std::sort(times.begin(), times.end());

    TimingRow row;
    row.method = method;
    row.n_steps = n_steps;
    row.reps = reps;
    row.min_s = times.front();
    row.median_s = times[times.size() / 2];
    row.max_s = times.back();
    out.push_back(row);
  }
  return out;
}

// --- reports ---

namespace {

const std::vector<std::string> kPerStepHeader = {
    "traj_id", "t", "method", "tier", "rate", "fold",
    "euclidean_error", "mahalanobis_sq", "cov_det"};
const std::vector<std::string> kSummaryHeader = {
    "method", "tier", "ed_mean", "ed_std", "md_mean",
    "md_std", "det_mean", "det_std"};
const std::vector<std::string> kSweepHeader = {"method", "tier", "metric",
                                               "mean", "std"};
const std::vector<std::string> kEvalTimingHeader = {"method", "tier",
                                                    "sec_per_traj"};

using csv::format_double;

}  // namespace

void emit_report(const BenchmarkResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    csv::Writer w(dir + "/per_step.csv", kPerStepHeader);
    for (const auto& s : result.steps)
      w.row({std::to_string(s.traj_id), format_double(s.t), s.method,
             simkit::tier_name(s.tier), format_double(s.rate),
             std::to_string(s.fold), format_double(s.euclidean_error),
             format_double(s.mahalanobis_sq), format_double(s.cov_det)});
    w.close();
  }
  {
    csv::Writer w(dir + "/summary.csv", kSummaryHeader);
    for (const auto& a : result.aggregates)
      w.row({a.method, simkit::tier_name(a.tier), format_double(a.ed_mean),
             format_double(a.ed_std), format_double(a.md_mean),
             format_double(a.md_std), format_double(a.det_mean),
             format_double(a.det_std)});
    w.close();
  }
  {
    csv::Writer w(dir + "/noise_sweep.csv", kSweepHeader);
    for (const auto& a : result.aggregates) {
      w.row({a.method, simkit::tier_name(a.tier), "ed",
             format_double(a.ed_mean), format_double(a.ed_std)});
      w.row({a.method, simkit::tier_name(a.tier), "md",
             format_double(a.md_mean), format_double(a.md_std)});
      w.row({a.method, simkit::tier_name(a.tier), "det",
             format_double(a.det_mean), format_double(a.det_std)});
    }
    w.close();
  }
  {
    csv::Writer w(dir + "/timing.csv", kEvalTimingHeader);
    for (const auto& a : result.aggregates)
      w.row({a.method, simkit::tier_name(a.tier),
             format_double(a.sec_per_traj)});
    w.close();
  }
}

void write_timing_csv(const std::vector<TimingRow>& rows,
                      const std::string& path) {
  csv::Writer w(path, {"method", "n_steps", "reps", "min_s", "median_s",
                       "max_s"});
  for (const auto& r : rows)
    w.row({r.method, std::to_string(r.n_steps), std::to_string(r.reps),
           format_double(r.min_s), format_double(r.median_s),
           format_double(r.max_s)});
  w.close();
}

std::string verify_report_consistency(const std::string& dir) {
  const csv::Table per_step = csv::read_file(dir + "/per_step.csv",
                                             kPerStepHeader);
  const csv::Table summary = csv::read_file(dir + "/summary.csv",
                                            kSummaryHeader);

  std::vector<StepRecord> steps;
  steps.reserve(per_step.rows.size());
  int max_fold = 0;
  const std::size_t c_id = per_step.column("traj_id"),
                    c_t = per_step.column("t"),
                    c_m = per_step.column("method"),
                    c_tier = per_step.column("tier"),
                    c_rate = per_step.column("rate"),
                    c_fold = per_step.column("fold"),
                    c_ed = per_step.column("euclidean_error"),
                    c_md = per_step.column("mahalanobis_sq"),
                    c_det = per_step.column("cov_det");
  for (const auto& row : per_step.rows) {
    StepRecord s;
    s.traj_id = csv::parse_int(row[c_id]);
    s.t = csv::parse_double(row[c_t]);
    s.method = row[c_m];
    s.tier = simkit::tier_from_name(row[c_tier]);
    s.rate = csv::parse_double(row[c_rate]);
    s.fold = static_cast<int>(csv::parse_int(row[c_fold]));
    s.euclidean_error = csv::parse_double(row[c_ed]);
    s.mahalanobis_sq = csv::parse_double(row[c_md]);
    s.cov_det = csv::parse_double(row[c_det]);
    max_fold = std::max(max_fold, s.fold);
    steps.push_back(std::move(s));
  }

  const auto recomputed = aggregate(steps, max_fold + 1);

  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
  };

  if (recomputed.size() != summary.rows.size())
    return "summary.csv row count mismatch";

  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    const auto& a = recomputed[i];
    const auto& row = summary.rows[i];
    if (row[summary.column("method")] != a.method ||
        row[summary.column("tier")] != simkit::tier_name(a.tier))
      return "summary.csv ordering mismatch at row " + std::to_string(i);
    const double vals[6] = {a.ed_mean, a.ed_std, a.md_mean,
                            a.md_std, a.det_mean, a.det_std};
    const char* cols[6] = {"ed_mean", "ed_std", "md_mean",
                           "md_std", "det_mean", "det_std"};
    for (int c = 0; c < 6; ++c)
      if (!close(vals[c], csv::parse_double(row[summary.column(cols[c])])))
        return std::string("summary.csv value mismatch: ") + a.method + "/" +
               cols[c];
    if ((a.method == "EKF" || a.method == "UKF") &&
        (a.ed_std != 0.0 || a.md_std != 0.0 || a.det_std != 0.0))
      return a.method + " fold std expected to be exactly 0";
  }
  return "";
}

}  // namespace bnkf::evalkit
