#pragma once

// Brute-force ground truth on enumerable spaces.

#include <cstdint>
#include <vector>

#include "areuredi/objectives.hpp"
#include "areuredi/sampler.hpp"

namespace areuredi {

// a >= b in every coordinate and a > b in at least one.
bool dominates(std::span<const double> a, std::span<const double> b);

// Indices of the points not dominated by any other point; tied vectors are all kept.
std::vector<std::size_t> nondominated(const std::vector<std::vector<double>>& points);

struct ParetoFront {
  std::vector<StateIndex> states;  // ascending
  std::vector<Sequence> members;
  std::vector<std::vector<double>> scores;
};

// Normalized scores of every state, row i for StateIndex i.
std::vector<std::vector<double>> score_table(const ObjectiveSet& objectives, const StateSpace& space,
                                             std::uint64_t cap = kDefaultEnumerationCap);

ParetoFront pareto_front(const ObjectiveSet& objectives, const StateSpace& space,
                         std::uint64_t cap = kDefaultEnumerationCap);

struct ArgmaxSet {
  std::vector<StateIndex> states;  // ascending
  std::vector<Sequence> members;
  double value = 0.0;     // max S_w
  bool interior = true;   // false flags a boundary weight (a zero term annihilates the min)
};

// All states whose S_w lies within `tolerance` of the maximum.
ArgmaxSet argmax_set(const WeightVector& w, const ObjectiveSet& objectives, const StateSpace& space,
                     double tolerance = 1e-12, std::uint64_t cap = kDefaultEnumerationCap);

// pi(x) ∝ p1(x) exp(eta S_w(x)).
std::vector<double> exact_target(std::span<const double> p1, double eta, const WeightVector& w,
                                 const ObjectiveSet& objectives, const StateSpace& space);

struct KernelSpec {
  double eta = 1.0;
  WeightVector weights = WeightVector::uniform(1);
  Balancing balancing = Balancing::barker;
  Pruning pruning;
  TargetDensity density = TargetDensity::exact_p1;
  int t_idx = 0;
  int s_idx = -1;  // -1: the last grid point
};

struct ExactKernel {
  std::size_t n = 0;
  int length = 0;
  std::vector<double> matrix;                       // K = (1/L) sum_i K_i, row-major n x n
  std::vector<std::vector<double>> per_coordinate;  // K_i
  std::vector<double> target;                       // the density the kernel is built to preserve
};

// Exact single-site MH kernels built from the sampler's own proposal and acceptance code.
// With pruning the result is the kernel of the pruned sampler, which need not preserve the target.
ExactKernel exact_kernel(const BaseModel& model, const ObjectiveSet& objectives, const KernelSpec& spec,
                         std::uint64_t cap = 100'000);

// ||pi K - pi||_1
double stationarity_residual(const ExactKernel& kernel, std::span<const double> pi);
// max over i, x, x' of |pi(x) K_i(x, x') - pi(x') K_i(x', x)|
double detailed_balance_residual(const ExactKernel& kernel, std::span<const double> pi);
// max over rows of |sum_x' K(x, x') - 1|
double row_sum_residual(const ExactKernel& kernel);

struct Hypervolume {
  double value = 0.0;
  double std_error = 0.0;  // Monte-Carlo only
  bool exact = true;
};

// Lebesgue measure of the region dominated by the points and bounded below by
// the reference. Exact for N = 2 and N = 3, Monte-Carlo for N >= 4.
Hypervolume hypervolume(const std::vector<std::vector<double>>& points, std::span<const double> reference,
                        std::uint64_t seed = 0, std::uint64_t mc_samples = 200'000);
Hypervolume hypervolume(const std::vector<std::vector<double>>& points);  // origin reference

// Flat Dirichlet draw over all K^L x K^L pairs (full support).
Coupling random_coupling(const StateSpace& space, Rng& rng);

// A random coupling with random linear_score objectives (table entries uniform in [0, 1)).
struct TinyInstance {
  Coupling coupling;
  ObjectiveSet objectives;
};
TinyInstance random_instance(int vocab_size, int length, std::size_t n_objectives, std::uint64_t seed);

// 0.5 sum |p - q| for two distributions on the same indexing.
double tv_distance(std::span<const double> p, std::span<const double> q);
// The same with p given as counts.
double tv_distance(std::span<const std::uint64_t> counts, std::span<const double> q);

}  // namespace areuredi
