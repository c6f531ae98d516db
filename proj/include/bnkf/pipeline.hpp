#pragma once

#include <string>
#include <vector>

#include "bnkf/config.hpp"
#include "bnkf/evalkit.hpp"

namespace bnkf::pipeline {

// Command implementations behind the CLI. Every command takes and updates
// the run manifest under the output directory and holds a lock file for its
// duration; concurrent invocations against one directory are refused.

struct Paths {
  std::string out;

  std::string manifest() const { return out + "/manifest.json"; }
  std::string lock() const { return out + "/.bnkf.lock"; }
  std::string trajectories() const { return out + "/trajectories.csv"; }
  std::string measurements(const std::string& tier) const {
    return out + "/measurements_" + tier + ".csv";
  }
  std::string dataset(const std::string& tier) const {
    return out + "/dataset_" + tier + ".csv";
  }
  std::string models_dir(const std::string& tier) const {
    return out + "/models/" + tier;
  }
  std::string reports_dir() const { return out + "/reports"; }
  std::string timing_dir() const { return out + "/timing"; }
};

// Dataset generation for every configured tier and rate.
void cmd_generate(const config::RunConfig& config, const std::string& out,
                  bool force);

// Per tier: one joint model and one 3-network ensemble per fold, trained on
// the out-of-fold pair rows. Artifacts and loss traces land in models/.
void cmd_train(const config::RunConfig& config, const std::string& out,
               const std::vector<std::string>& tiers);

// Benchmark every requested method over every requested tier and write the
// reports. With check = true, runs the report-consistency properties and
// returns false when any fails.
bool cmd_eval(const config::RunConfig& config, const std::string& out,
              const std::vector<std::string>& tiers,
              const std::vector<std::string>& methods, bool check);

// Per-method inference timing on a single trajectory sequence.
void cmd_timing(const config::RunConfig& config, const std::string& out,
                const std::string& tier);

// Helpers shared with the tests.
std::vector<std::string> normalize_methods(const std::string& csv_list);
evalkit::FoldModels load_models(const Paths& paths, const std::string& tier,
                                int folds, bool need_joint, bool need_ensemble);

}  // namespace bnkf::pipeline
