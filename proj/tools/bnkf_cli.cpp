// bnkf: synthetic radar tracking benchmark driver.
//
// Workflow: generate -> train -> eval (-> timing), all against one output
// directory and one config; every command records its inputs in the run
// manifest so results can be regenerated byte-for-byte.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bnkf/config.hpp"
#include "bnkf/pipeline.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out = "bnkf_out";
  std::string tier;     // empty = all configured tiers
  std::string methods;  // empty = all
  bool force = false;
  bool check = false;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

std::vector<std::string> select_tiers(const bnkf::config::RunConfig& config,
                                      const std::string& flag) {
  if (flag.empty()) return config.tiers;
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= flag.size()) {
    auto pos = flag.find(',', start);
    const std::string name = flag.substr(
        start, pos == std::string::npos ? std::string::npos : pos - start);
    if (!name.empty()) {
      bnkf::simkit::tier_from_name(name);  // validates
      out.push_back(name);
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw bnkf::EstimateError("empty --tier selection");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar tracking benchmark: filters vs. learned estimators"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path,
                 "JSON config (a run manifest is also accepted)");
  app.add_option("--out", args.out, "output directory");
  app.add_option("--seed", args.seed, "override the master seed")
      ->each([&](const std::string&) { args.seed_set = true; });
  app.add_option("--tier", args.tier,
                 "noise tier selection (comma-separated: low,medium,high)");
  app.add_option("--methods", args.methods,
                 "method selection for eval (comma-separated)");
  app.add_flag("--force", args.force, "allow overwriting generated files");
  app.add_flag("--check", args.check,
               "run report consistency properties after eval");

  auto* generate = app.add_subcommand("generate", "simulate datasets");
  auto* train = app.add_subcommand("train", "train fold models");
  auto* eval = app.add_subcommand("eval", "run the benchmark and reports");
  auto* timing = app.add_subcommand("timing", "single-trajectory timing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    bnkf::config::RunConfig config = bnkf::config::load(args.config_path);
    if (args.seed_set) config.master_seed = args.seed;
    const auto tiers = select_tiers(config, args.tier);

    if (generate->parsed()) {
      bnkf::config::RunConfig scoped = config;
      scoped.tiers = tiers;
      bnkf::pipeline::cmd_generate(scoped, args.out, args.force);
    } else if (train->parsed()) {
      bnkf::pipeline::cmd_train(config, args.out, tiers);
    } else if (eval->parsed()) {
      const auto methods = bnkf::pipeline::normalize_methods(args.methods);
      if (!bnkf::pipeline::cmd_eval(config, args.out, tiers, methods,
                                    args.check))
        return 1;
    } else if (timing->parsed()) {
      if (tiers.size() != 1)
        throw bnkf::EstimateError("timing expects exactly one --tier");
      bnkf::pipeline::cmd_timing(config, args.out, tiers.front());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
