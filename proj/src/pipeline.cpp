#include "bnkf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "bnkf/csv.hpp"
#include "bnkf/hybrid.hpp"
#include "bnkf/rng.hpp"

namespace bnkf::pipeline {

namespace fs = std::filesystem;
using config::RunConfig;
using nlohmann::json;

namespace {

// Exclusive-create lock file, removed on scope exit.
class DirLock {
 public:
  explicit DirLock(const std::string& path) : path_(path) {
    std::FILE* f = std::fopen(path.c_str(), "wx");
    if (!f)
      throw EstimateError("output directory is locked by another invocation "
                          "(remove " + path + " if stale)");
    std::fclose(f);
  }
  ~DirLock() { std::remove(path_.c_str()); }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

json read_manifest(const Paths& paths) {
  std::ifstream in(paths.manifest());
  if (!in) return json::object();
  json j;
  in >> j;
  return j;
}

void write_manifest(const Paths& paths, const json& j) {
  std::ofstream out(paths.manifest(), std::ios::binary);
  if (!out) throw EstimateError("cannot write " + paths.manifest());
  out << j.dump(1) << '\n';
}

void run_parallel(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
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

void write_loss_trace(const std::vector<bnn::LossTraceRow>& trace,
                      const std::string& path) {
  csv::Writer w(path, {"epoch", "mse", "kl_scaled", "total"});
  for (const auto& r : trace)
    w.row({std::to_string(r.epoch), csv::format_double(r.mse),
           csv::format_double(r.kl_scaled), csv::format_double(r.total)});
  w.close();
}

std::vector<bnn::TrainExample> out_of_fold_examples(
    const simkit::SupervisedDataset& dataset, int fold) {
  std::vector<bnn::TrainExample> out;
  for (const auto& p : dataset.pairs()) {
    if (p.fold == fold) continue;
    bnn::TrainExample ex;
    ex.x = p.x;
    ex.y = {p.target.x(), p.target.y(), p.target.z()};
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

void cmd_generate(const RunConfig& config, const std::string& out,
                  bool force) {
  Paths paths{out};
  fs::create_directories(out);
  DirLock lock(paths.lock());

  std::vector<std::string> targets = {paths.trajectories()};
  for (const auto& tier : config.tiers) {
    targets.push_back(paths.measurements(tier));
    targets.push_back(paths.dataset(tier));
  }
  if (!force)
    for (const auto& t : targets)
      if (fs::exists(t))
        throw EstimateError("refusing to overwrite " + t +
                            " (pass --force to regenerate)");

  const SensorPose sensor = config.sensor();

  // Trajectories are shared by all tiers.
  std::vector<simkit::Trajectory> trajs(
      static_cast<std::size_t>(config.n_trajectories));
  run_parallel(trajs.size(), config.threads, [&](std::size_t i) {
    simkit::Trajectory t = simkit::generate_trajectory(
        rng::derive_seed(config.master_seed, "traj", i), config.duration_s,
        config.dt0_s, config.generator);
    t.id = static_cast<std::int64_t>(i);
    trajs[i] = std::move(t);
  });
  simkit::write_trajectories(trajs, paths.trajectories());

  for (const auto& tier_label : config.tiers) {
    const simkit::Tier tier = simkit::tier_from_name(tier_label);

    std::vector<std::vector<simkit::MeasurementSequence>> seqs(trajs.size());
    std::vector<std::vector<simkit::DatasetRow>> rows(trajs.size());
    run_parallel(trajs.size(), config.threads, [&](std::size_t i) {
      const auto& traj = trajs[i];
      const auto id = static_cast<std::uint64_t>(traj.id);
      const simkit::MeasurementSequence full = simkit::simulate_measurements(
          traj, sensor, tier,
          rng::derive_seed(config.master_seed, "noise/" + tier_label, id));
      for (double rate : config.rates) {
        simkit::MeasurementSequence seq =
            rate == 1.0
                ? full
                : simkit::downsample(
                      full, rate,
                      rng::derive_seed(config.master_seed,
                                       "downsample/" + tier_label + "/" +
                                           csv::format_double(rate),
                                       id));
        auto r = simkit::build_supervised(seq, traj);
        rows[i].insert(rows[i].end(), r.begin(), r.end());
        seqs[i].push_back(std::move(seq));
      }
    });

    std::vector<simkit::MeasurementSequence> flat_seqs;
    simkit::SupervisedDataset dataset;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      flat_seqs.insert(flat_seqs.end(), seqs[i].begin(), seqs[i].end());
      dataset.rows.insert(dataset.rows.end(), rows[i].begin(), rows[i].end());
    }
    simkit::assign_folds(dataset, config.folds,
                         rng::derive_seed(config.master_seed, "folds"));

    simkit::write_measurements(flat_seqs, paths.measurements(tier_label));
    simkit::write_dataset(dataset, paths.dataset(tier_label));
  }

  json manifest = read_manifest(paths);
  manifest["tool"] = "bnkf";
  manifest["manifest_version"] = 1;
  manifest["config"] = config::to_json(config);
  json files = json::array();
  for (const auto& t : targets) files.push_back(fs::path(t).filename().string());
  manifest["generated_files"] = files;
  write_manifest(paths, manifest);
}

void cmd_train(const RunConfig& config, const std::string& out,
               const std::vector<std::string>& tiers) {
  Paths paths{out};
  DirLock lock(paths.lock());

  json manifest = read_manifest(paths);
  json trained = json::object();

  for (const auto& tier_label : tiers) {
    const std::string dataset_path = paths.dataset(tier_label);
    if (!fs::exists(dataset_path))
      throw EstimateError("missing dataset " + dataset_path +
                          " (run generate first)");
    const simkit::SupervisedDataset dataset = simkit::read_dataset(dataset_path);
    if (dataset.n_folds < 2)
      throw EstimateError("dataset " + dataset_path + " carries no folds");

    fs::create_directories(paths.models_dir(tier_label));

    struct Task {
      int fold;
      bool ensemble;
    };
    std::vector<Task> tasks;
    for (int f = 0; f < dataset.n_folds; ++f) {
      tasks.push_back({f, false});
      tasks.push_back({f, true});
    }

    std::vector<std::string> artifacts(tasks.size() * 3);
    run_parallel(tasks.size(), config.threads, [&](std::size_t ti) {
      const Task task = tasks[ti];
      const auto data = out_of_fold_examples(dataset, task.fold);

      const std::string dir = paths.models_dir(tier_label);
      const std::string fold_tag = "_fold" + std::to_string(task.fold);

      if (!task.ensemble) {
        bnn::TrainConfig tc;
        tc.epochs = config.epochs;
        tc.learning_rate = config.learning_rate;
        tc.batch_size = config.batch_size;
        tc.beta = config.beta;
        tc.prior_sigma = config.prior_sigma;
        tc.seed = rng::derive_seed(config.master_seed,
                                   "train/" + tier_label + "/joint",
                                   static_cast<std::uint64_t>(task.fold));
        std::vector<bnn::LossTraceRow> trace;
        bnn::BnnModel model = bnn::train(data, tc, &trace);
        model.fingerprint.role = "joint";
        model.fingerprint.fold = task.fold;
        bnn::save_model(model, dir + "/joint" + fold_tag + ".json");
        write_loss_trace(trace, dir + "/loss_joint" + fold_tag + ".csv");
        artifacts[ti * 3] = "joint" + fold_tag + ".json";
      } else {
        bnn::TrainConfig tc;
        tc.epochs = config.epochs;
        tc.learning_rate = config.learning_rate;
        tc.batch_size = config.batch_size;
        tc.beta = config.axis_beta;
        tc.prior_sigma = config.prior_sigma;
        tc.seed = rng::derive_seed(config.master_seed,
                                   "train/" + tier_label + "/ensemble",
                                   static_cast<std::uint64_t>(task.fold));
        std::vector<bnn::LossTraceRow> tx, ty, tz;
        hybrid::EnsembleModel ens = hybrid::train_ensemble(data, tc, &tx, &ty, &tz);
        const char* axis_names[3] = {"x", "y", "z"};
        bnn::BnnModel* axes[3] = {&ens.x, &ens.y, &ens.z};
        std::vector<bnn::LossTraceRow>* traces[3] = {&tx, &ty, &tz};
        for (int a = 0; a < 3; ++a) {
          axes[a]->fingerprint.fold = task.fold;
          const std::string name =
              std::string("axis_") + axis_names[a] + fold_tag;
          bnn::save_model(*axes[a], dir + "/" + name + ".json");
          write_loss_trace(*traces[a], dir + "/loss_" + name + ".csv");
          artifacts[ti * 3 + static_cast<std::size_t>(a)] = name + ".json";
        }
      }
    });

    json list = json::array();
    for (const auto& a : artifacts)
      if (!a.empty()) list.push_back(a);
    trained[tier_label] = std::move(list);
  }

  manifest["trained_models"] = std::move(trained);
  if (!manifest.contains("config"))
    manifest["config"] = config::to_json(config);
  write_manifest(paths, manifest);
}

evalkit::FoldModels load_models(const Paths& paths, const std::string& tier,
                                int folds, bool need_joint,
                                bool need_ensemble) {
  evalkit::FoldModels models;
  std::vector<std::string> missing;
  const std::string dir = paths.models_dir(tier);

  for (int f = 0; f < folds; ++f) {
    const std::string fold_tag = "_fold" + std::to_string(f);
    if (need_joint) {
      const std::string p = dir + "/joint" + fold_tag + ".json";
      if (!fs::exists(p)) {
        missing.push_back(p);
      } else if (missing.empty()) {
        models.joint.push_back(bnn::load_model(p));
      }
    }
    if (need_ensemble) {
      hybrid::EnsembleModel ens;
      bnn::BnnModel* axes[3] = {&ens.x, &ens.y, &ens.z};
      const char* axis_names[3] = {"x", "y", "z"};
      bool ok = true;
      for (int a = 0; a < 3; ++a) {
        const std::string p =
            dir + "/axis_" + axis_names[a] + fold_tag + ".json";
        if (!fs::exists(p)) {
          missing.push_back(p);
          ok = false;
        } else if (missing.empty()) {
          *axes[a] = bnn::load_model(p);
        }
      }
      if (ok && missing.empty()) models.ensemble.push_back(std::move(ens));
    }
  }

  if (!missing.empty()) {
    std::string msg = "missing model artifacts:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw EstimateError(msg);
  }
  return models;
}

std::vector<std::string> normalize_methods(const std::string& csv_list) {
  if (csv_list.empty()) return evalkit::kAllMethods;
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv_list.size()) {
    auto pos = csv_list.find(',', start);
    std::string name = csv_list.substr(
        start, pos == std::string::npos ? std::string::npos : pos - start);
    std::string lower;
    for (char c : name) lower += static_cast<char>(std::tolower(c));
    bool found = false;
    for (const auto& m : evalkit::kAllMethods) {
      std::string ml;
      for (char c : m) ml += static_cast<char>(std::tolower(c));
      if (ml == lower) {
        out.push_back(m);
        found = true;
      }
    }
    if (!found && !name.empty())
      throw EstimateError("unknown method '" + name + "'");
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw EstimateError("no methods selected");
  return out;
}

bool cmd_eval(const RunConfig& config, const std::string& out,
              const std::vector<std::string>& tiers,
              const std::vector<std::string>& methods, bool check) {
  Paths paths{out};
  DirLock lock(paths.lock());

  const SensorPose sensor = config.sensor();
  const bool need_joint =
      std::find(methods.begin(), methods.end(), "BNN") != methods.end() ||
      std::find(methods.begin(), methods.end(), "BNKF") != methods.end();
  const bool need_ensemble =
      std::find(methods.begin(), methods.end(), "BNKFe") != methods.end();

  evalkit::BenchmarkResult combined;
  json q_selection = json::object();

  for (const auto& tier_label : tiers) {
    const std::string dataset_path = paths.dataset(tier_label);
    if (!fs::exists(dataset_path))
      throw EstimateError("missing dataset " + dataset_path);
    const simkit::SupervisedDataset dataset = simkit::read_dataset(dataset_path);

    evalkit::FoldModels models;
    if (need_joint || need_ensemble)
      models = load_models(paths, tier_label, dataset.n_folds, need_joint,
                           need_ensemble);

    evalkit::BenchmarkConfig bc;
    bc.kappa = config.kappa;
    bc.mc_samples = config.mc_samples;
    bc.seed = rng::derive_seed(config.master_seed, "eval/" + tier_label);
    bc.methods = methods;
    bc.threads = config.threads;

    if (config.q_auto) {
      const auto tuning =
          evalkit::tune_process_noise(dataset, sensor, config.kappa, config.q_grid);
      bc.process_noise_q = tuning.selected_q;
      json grid = json::array();
      for (const auto& [q, ed] : tuning.grid_ed)
        grid.push_back({{"q", q}, {"mean_ed", ed}});
      q_selection[tier_label] = {{"selected_q", tuning.selected_q},
                                 {"grid", std::move(grid)}};
    } else {
      bc.process_noise_q = config.q_value;
      q_selection[tier_label] = {{"selected_q", config.q_value},
                                 {"grid", json::array()}};
    }

    evalkit::BenchmarkResult result =
        evalkit::run_benchmark(dataset, sensor, &models, bc);
    combined.steps.insert(combined.steps.end(), result.steps.begin(),
                          result.steps.end());
    combined.aggregates.insert(combined.aggregates.end(),
                               result.aggregates.begin(),
                               result.aggregates.end());
  }

  evalkit::emit_report(combined, paths.reports_dir());

  json manifest = read_manifest(paths);
  manifest["process_noise_selection"] = std::move(q_selection);
  if (!manifest.contains("config"))
    manifest["config"] = config::to_json(config);
  write_manifest(paths, manifest);

  for (const auto& a : combined.aggregates)
    std::cout << a.method << " " << simkit::tier_name(a.tier)
              << ": ed=" << a.ed_mean << "+-" << a.ed_std
              << " md=" << a.md_mean << "+-" << a.md_std
              << " det=" << a.det_mean << "+-" << a.det_std
              << " sec/traj=" << a.sec_per_traj << "\n";

  if (check) {
    const std::string err =
        evalkit::verify_report_consistency(paths.reports_dir());
    if (!err.empty()) {
      std::cerr << "report check failed: " << err << "\n";
      return false;
    }
  }
  return true;
}

void cmd_timing(const RunConfig& config, const std::string& out,
                const std::string& tier_label) {
  Paths paths{out};
  DirLock lock(paths.lock());

  const std::string dataset_path = paths.dataset(tier_label);
  if (!fs::exists(dataset_path))
    throw EstimateError("missing dataset " + dataset_path);
  const simkit::SupervisedDataset dataset = simkit::read_dataset(dataset_path);

  const auto views = dataset.sequences();
  if (views.empty()) throw EstimateError("dataset has no sequences");
  // First full-rate sequence: all methods see identical bytes.
  const simkit::SequenceView* chosen = &views.front();
  for (const auto& v : views)
    if (v.rate == 1.0) {
      chosen = &v;
      break;
    }

  evalkit::FoldModels models =
      load_models(paths, tier_label, dataset.n_folds, true, true);

  evalkit::BenchmarkConfig bc;
  bc.kappa = config.kappa;
  bc.mc_samples = config.mc_samples;
  bc.seed = rng::derive_seed(config.master_seed, "timing/" + tier_label);
  bc.methods = evalkit::kAllMethods;
  bc.threads = 1;
  bc.process_noise_q = config.q_auto ? 1.0 : config.q_value;

  const auto rows = evalkit::time_methods(dataset, *chosen, config.sensor(),
                                          &models, bc, config.timing_reps);
  fs::create_directories(paths.timing_dir());
  evalkit::write_timing_csv(rows, paths.timing_dir() + "/timing.csv");

  for (const auto& r : rows)
    std::cout << r.method << ": median " << r.median_s << " s (min " << r.min_s
              << ", max " << r.max_s << ", " << r.n_steps << " steps, "
              << r.reps << " reps, warm-up excluded)\n";

  json manifest = read_manifest(paths);
  manifest["timing"] = {{"tier", tier_label},
                        {"trajectory", chosen->traj_id},
                        {"rate", chosen->rate},
                        {"reps", config.timing_reps}};
  if (!manifest.contains("config"))
    manifest["config"] = config::to_json(config);
  write_manifest(paths, manifest);
}

}  // namespace bnkf::pipeline
