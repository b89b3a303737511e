#pragma once

// Command-line front end: config loading, subcommands and artifact writing.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "areuredi/bench.hpp"

namespace areuredi::cli {

struct RunConfig {
  BenchmarkTask task;
  std::vector<Bounds> bounds;  // overrides the task's analytic bounds when non-empty
  std::optional<WeightVector> weights;
  std::string coupling_path;
  std::string denoiser_path;
  std::string output = "areuredi-out";
  std::uint64_t seed = 0;
  int verbosity = 0;

  AnnealSchedule anneal{1.0, 20.0, 0};  // steps 0: task default
  double top_p = 1.0;
  int cap = 0;
  Balancing balancing = Balancing::barker;
  bool monotone = false;
  ScanOrder scan = ScanOrder::random;
  PriorTime prior_time = PriorTime::source;
  TargetTime target_time = TargetTime::final;
  InitMode init = InitMode::source;
  int chains = 0;  // task default
  bool sample_weights = false;

  int rounds = 1;
  RectifyMode rectify_mode = RectifyMode::multiplicative;
  int rectify_steps = 4;
  int tc_steps = 4;
  int n_pairs = 10000;
};

// Reads and validates a JSON config. Errors are ConfigError naming the key path.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");

// Parses "0..19" or "0,3,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

// Runs one invocation; returns 0 on success, 1 on a domain error and 2 on a config error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace areuredi::cli
