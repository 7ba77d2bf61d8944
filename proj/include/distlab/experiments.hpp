// Named, configuration-driven experiments shared by the CLI and the
// acceptance suite.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "distlab/svg.hpp"
#include "distlab/trajectory.hpp"

namespace distlab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Params {
 public:
  Params(std::map<std::string, std::string> defaults,
         const std::map<std::string, std::string>& overrides);

  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  std::string str(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;  // comma separated

  const std::map<std::string, std::string>& resolved() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct NamedCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunArtifacts {
  nlohmann::json summary;
  std::optional<TrajectoryLog> trajectory;
  std::optional<PlotSpec> plot;
  std::vector<NamedCheck> checks;
  bool diverged = false;
};

struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool check = false;
  int threads = 1;
};

std::vector<std::string> experiment_names();
std::map<std::string, std::string> default_params(const std::string& experiment);

// Runs the experiment in-process; throws ConfigError on unknown names/keys.
RunArtifacts run_named_experiment(const std::string& name, const Params& params,
                                  std::uint64_t seed, bool check, int threads);

// Full harness entry: resolves the config, runs, writes manifest.json,
// trajectory.csv, summary.json and plot.svg under out_dir. Exit codes:
// 0 ok, 1 failed --check, 2 bad config, 3 numerical divergence.
int run_experiment(const ExperimentConfig& config);

std::map<std::string, std::string> parse_config_file(const std::string& path);

// Empirical content of the density-loss uniqueness statement: over a family
// of grid densities, f = -log is minimized at the target while f(p) = p and
// f(p) = -p^2 both admit non-target minimizers.
std::vector<NamedCheck> nll_uniqueness_checks(std::uint64_t seed);

}  // namespace distlab
