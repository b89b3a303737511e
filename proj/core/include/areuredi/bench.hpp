#pragma once

// Benchmark tasks, baselines, run matrices and reporting.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "areuredi/oracle.hpp"
#include "areuredi/redi.hpp"
#include "areuredi/sampler.hpp"

namespace areuredi {

struct BenchmarkTask {
  std::string name;
  int vocab_size = 2;
  int length = 1;
  std::vector<SuiteSpec> objectives;
  std::vector<double> default_weights;  // uniform when empty
  int steps = 0;                        // chain length T
  int n_chains = 100;
  std::vector<std::uint64_t> seeds;

  StateSpace space() const { return StateSpace(vocab_size, length); }
  ObjectiveSet objective_set() const;
  WeightVector weights() const;
  void validate() const;
};

// lotz5, lotz6, lotz8, lotz16 (leading ones vs trailing zeros on bitstrings) and
// tri10 (leading ones, trailing zeros and count of token 2 over {0,1,2}^10).
// Every task has T = 20 L, 100 chains and seeds 0..19.
std::vector<std::string> suite_task_names();
BenchmarkTask suite_task(const std::string& name);

// The uniform base model of a task. Spaces of at most 256 states get the exact
// independent coupling and a full-state denoiser; larger ones a radius-1 windowed
// denoiser fit on 4096 independent uniform pairs. Both use a one-step grid.
BaseModel task_model(const BenchmarkTask& task, bool rectified = false);
TargetDensity task_density(const BenchmarkTask& task);

// Pareto front of a task, computed once and shared.
struct TaskOracle {
  ParetoFront front;
  std::vector<std::vector<double>> front_vectors;  // distinct, sorted
};
const TaskOracle& task_oracle(const BenchmarkTask& task);

struct RunResult {
  std::string task;
  std::string method;
  std::string setting;  // ablation cell label, empty otherwise
  std::uint64_t seed = 0;
  std::vector<Sequence> population;
  std::vector<std::vector<double>> scores;
  double seconds = 0.0;  // informational only
  double hypervolume = 0.0;
  double coverage = 0.0;        // fraction of distinct front score vectors present
  double front_fraction = 0.0;  // fraction of the population that is Pareto-optimal
  std::uint64_t evaluations = 0;
  std::vector<double> mean_scores;  // per objective of the full task
  bool degenerate_weights = false;
  // Per-iteration population means (chain methods only): [t][n], and the mean S_w.
  std::vector<std::vector<double>> trace_means;
  std::vector<double> trace_scalarized;
  std::vector<double> trace_eta;
  std::vector<double> trace_acceptance;
};

enum class BaselineKind { random_search, one_plus_one_ea, nsga2_lite };
std::string to_string(BaselineKind kind);
BaselineKind baseline_from_string(const std::string& name);

struct BaselineOptions {
  std::optional<WeightVector> weights;  // one_plus_one_ea; task default when empty
  int population = 50;                  // nsga2_lite
  int tournament = 2;
  // Called after each nsga2_lite generation with the current archive scores.
  std::function<void(const std::vector<std::vector<double>>&)> on_generation;
};

// Each baseline performs exactly `budget` objective-set evaluations. The
// population is the nondominated archive of everything evaluated.
RunResult run_baseline(BaselineKind kind, const BenchmarkTask& task, std::uint64_t budget, std::uint64_t seed,
                       const BaselineOptions& options = {});

struct AreurediConfig {
  SamplerConfig sampler;  // anneal.steps and density are set from the task
  int steps = 0;          // T; task default when zero
  int n_chains = 0;       // task default when zero
  bool sample_weights = false;  // draw w per chain from the flat simplex
  bool rectified = false;
  std::vector<std::size_t> dropped;  // objectives removed from guidance
};

// Chain c runs on Rng(seed, c); its sampled weights come from Rng(seed, 2^40 + c).
RunResult run_areuredi(const BenchmarkTask& task, const AreurediConfig& cfg, std::uint64_t seed);

// Evaluations AReUReDi spends with full candidate sets: chains (1 + (K - 1) T).
std::uint64_t default_budget(const BenchmarkTask& task);

enum class AblationKind { guidance, annealing, monotone, rectification };
std::string to_string(AblationKind kind);
AblationKind ablation_from_string(const std::string& name);

struct AblationCell {
  std::string label;
  AreurediConfig config;
  std::vector<RunResult> runs;  // one per seed
};

// Named ablation families:
//   guidance       all-on, then each objective dropped in turn
//   annealing      annealed eta_min -> eta_max, and eta fixed at min, midpoint and max
//   monotone       constraint on and off
//   rectification  base model unrectified and rectified once
std::vector<AblationCell> run_ablation(const BenchmarkTask& task, AblationKind kind, const AreurediConfig& base,
                                       std::span<const std::uint64_t> seeds);

double median(std::vector<double> values);

// Exact one-sided Wilcoxon signed-rank test of H1: x tends to exceed y (paired).
// Zero differences are dropped; tied magnitudes get average ranks.
double wilcoxon_greater(std::span<const double> x, std::span<const double> y);

// Runs fn(0..n-1) on up to AREUREDI_THREADS threads (default: hardware concurrency).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);
unsigned thread_count();

std::string csv_header(std::size_t n_objectives);
std::string to_csv_row(const RunResult& r);
// One line per iteration: {task, method, setting, seed, t, eta, S, acceptance, means}.
std::string trace_to_jsonl(const RunResult& r);
std::string summary_markdown(const std::vector<RunResult>& runs);

struct Series {
  std::string label;
  std::vector<double> values;
};
std::string line_chart_svg(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label);

}  // namespace areuredi
