// distlab command line: runs named experiments and writes CSV/JSON/SVG
// artifacts. Usage:
//   distlab <experiment> [--config FILE] [--seed N] [--out DIR] [--check]
//           [--threads K] [--<param> VALUE ...]
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "distlab/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"distribution-learning numerical laboratory"};
  app.allow_extras();  // experiment parameters arrive as --key value extras

  std::string experiment;
  app.add_option("experiment", experiment, "experiment name")->required();
  std::string config_file;
  app.add_option("--config", config_file, "flat key = value config file");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "run seed");
  std::string out_dir = "out";
  app.add_option("--out", out_dir, "output directory");
  bool check = false;
  app.add_flag("--check", check, "run acceptance-relevant assertions");
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for sweeps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e) == 0) return 0;  // --help
    return 2;
  }

  distlab::ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  cfg.check = check;
  cfg.threads = threads;

  try {
    if (!config_file.empty()) cfg.params = distlab::parse_config_file(config_file);
    // remaining --key value pairs override the config file
    const auto extras = app.remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& token = extras[i];
      if (token.rfind("--", 0) != 0 || i + 1 >= extras.size()) {
        std::cerr << "usage error: expected --key value pairs, got '" << token << "'\n";
        return 2;
      }
      cfg.params[token.substr(2)] = extras[++i];
    }

    const int code = distlab::run_experiment(cfg);
    if (code == 1) std::cerr << experiment << ": --check failed (see summary.json)\n";
    if (code == 3) std::cerr << experiment << ": numerical divergence (partial logs kept)\n";
    return code;
  } catch (const distlab::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
