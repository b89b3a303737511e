#pragma once

// Discrete flow matching on V^L with per-coordinate mixture paths.
//
// A coupling pi(x0, x1) and a schedule kappa_j(t) define the bridge
//   p_t(x_t^j | x0, x1) = kappa_j(t) [x_t^j = x1^j] + (1 - kappa_j(t)) [x_t^j = x0^j],
// independently over coordinates. A coordinate that is still at its source
// token at time t has jumped to its target by time s > t with probability
// (kappa_j(s) - kappa_j(t)) / (1 - kappa_j(t)). This Markov completion fixes the
// joint law of (x_t, x_s) used by the exact denoiser and by the TC routines.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "areuredi/rng.hpp"
#include "areuredi/seqspace.hpp"

namespace areuredi {

class PathSchedule {
 public:
  enum class Kind { linear, polynomial, bond_aware };

  static PathSchedule linear();
  // kappa(t) = t^exponent, exponent > 0.
  static PathSchedule polynomial(double exponent);
  // kappa_j(t) = b_j t^gamma + (1 - b_j) t with gamma > 1.
  static PathSchedule bond_aware(double gamma, std::vector<std::uint8_t> bond_mask);

  Kind kind() const noexcept { return kind_; }
  double exponent() const noexcept { return exponent_; }
  const std::vector<std::uint8_t>& bond_mask() const noexcept { return mask_; }

  // Coefficient of delta_{x1} in the time-t marginal of coordinate j. Throws for t outside [0, 1].
  double kappa(double t, int j) const;
  double jump_probability(double t, double s, int j) const;

  // Bond-aware schedules carry a mask that must match the sequence length.
  void check_length(int length) const;

  std::string name() const;

 private:
  PathSchedule(Kind kind, double exponent, std::vector<std::uint8_t> mask)
      : kind_(kind), exponent_(exponent), mask_(std::move(mask)) {}

  Kind kind_;
  double exponent_;
  std::vector<std::uint8_t> mask_;
};

// Uniform grid {0, 1/n, ..., 1}. Off-grid lookups are errors, never interpolated.
class TimeGrid {
 public:
  explicit TimeGrid(int steps);

  int steps() const noexcept { return steps_; }
  int points() const noexcept { return steps_ + 1; }
  double time(int k) const noexcept { return static_cast<double>(k) / steps_; }
  int index_of(double t) const;

 private:
  int steps_;
};

struct CouplingPair {
  Sequence x0;
  Sequence x1;
  double mass = 0.0;
};

class Coupling {
 public:
  enum class Kind { exact_table, empirical_pairs };

  // Exact table on an enumerable space. Duplicate pairs are merged, zero-mass
  // pairs dropped, and the masses normalized to sum to one.
  static Coupling exact(StateSpace space, std::vector<CouplingPair> pairs,
                        std::uint64_t cap = kDefaultEnumerationCap);
  // Row-major table over (x0 index, x1 index), size K^L * K^L.
  static Coupling from_table(StateSpace space, std::span<const double> table,
                             std::uint64_t cap = kDefaultEnumerationCap);
  static Coupling independent(StateSpace space, std::span<const double> p0, std::span<const double> p1,
                              std::uint64_t cap = kDefaultEnumerationCap);
  // Uniformly weighted sample of (x0, x1) pairs; duplicates are kept as separate atoms.
  static Coupling empirical(StateSpace space, std::vector<std::pair<Sequence, Sequence>> samples);
  static Coupling empirical_weighted(StateSpace space, std::vector<CouplingPair> pairs);

  Kind kind() const noexcept { return kind_; }
  const StateSpace& space() const noexcept { return space_; }
  std::span<const CouplingPair> pairs() const noexcept { return pairs_; }
  double total_mass() const noexcept;

  // Dense marginals; require an enumerable space.
  Distribution source_marginal(std::uint64_t cap = kDefaultEnumerationCap) const;
  Distribution target_marginal(std::uint64_t cap = kDefaultEnumerationCap) const;
  // Aggregates duplicate atoms into an exact table.
  Coupling as_exact(std::uint64_t cap = kDefaultEnumerationCap) const;
  std::vector<double> table(std::uint64_t cap = kDefaultEnumerationCap) const;

 private:
  Coupling(StateSpace space, Kind kind, std::vector<CouplingPair> pairs)
      : space_(space), kind_(kind), pairs_(std::move(pairs)) {}

  StateSpace space_;
  Kind kind_;
  std::vector<CouplingPair> pairs_;
};

Sequence bridge_sample(std::span<const Token> x0, std::span<const Token> x1, double t,
                       const PathSchedule& schedule, Rng& rng);

// p_t(x_t | x0, x1) under the mixture path.
double bridge_probability(std::span<const Token> x_t, std::span<const Token> x0, std::span<const Token> x1,
                          double t, const PathSchedule& schedule);

Distribution bridge_marginal_exact(const Coupling& coupling, const PathSchedule& schedule, double t,
                                   std::uint64_t cap = kDefaultEnumerationCap);

enum class ContextMode { full_state, windowed };
enum class TargetTimes { all, next_and_final };

struct DenoiserOptions {
  ContextMode mode = ContextMode::full_state;
  int window = 1;          // radius, windowed mode only
  double smoothing = 0.1;  // additive count smoothing, windowed mode only
  TargetTimes targets = TargetTimes::all;
  std::uint64_t cap = kDefaultEnumerationCap;
};

// Tabulated per-coordinate conditionals p_{s|t}(x_s^i | x_t) on a uniform time grid.
class FactorizedDenoiser {
 public:
  const StateSpace& space() const noexcept { return space_; }
  const PathSchedule& schedule() const noexcept { return schedule_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  const DenoiserOptions& options() const noexcept { return options_; }

  bool stores(int t_idx, int s_idx) const noexcept;

  // Writes the K-vector p_{s|t}(. | x_t) for coordinate i into `out`.
  void posterior_into(std::span<const Token> x_t, int t_idx, int s_idx, int i, std::span<double> out) const;
  std::vector<double> posterior(std::span<const Token> x_t, int t_idx, int s_idx, int i) const;
  // Real-valued times must lie on the grid.
  std::vector<double> posterior_marginal(std::span<const Token> x_t, double t, double s, int i) const;

  // Context with zero path probability at grid time t_idx (full_state mode); its conditionals are uniform.
  bool is_hole(std::span<const Token> x_t, int t_idx) const;
  std::size_t hole_count() const noexcept;

  std::string to_json() const;
  static FactorizedDenoiser from_json(const std::string& text);

 private:
  friend FactorizedDenoiser fit_exact_denoiser(const Coupling&, const PathSchedule&, int, DenoiserOptions);

  struct Block {
    std::vector<double> dense;                                    // full_state: [state][i][k]
    std::vector<std::map<std::uint64_t, std::vector<double>>> ctx;  // windowed: per i, context -> probs
  };

  FactorizedDenoiser(StateSpace space, PathSchedule schedule, TimeGrid grid, DenoiserOptions options);

  std::size_t slot(int t_idx, int s_idx) const noexcept {
    return static_cast<std::size_t>(t_idx) * static_cast<std::size_t>(grid_.points()) +
           static_cast<std::size_t>(s_idx);
  }
  std::uint64_t window_key(std::span<const Token> x_t, int i) const noexcept;
  const Block& block(int t_idx, int s_idx) const;

  StateSpace space_;
  PathSchedule schedule_;
  TimeGrid grid_;
  DenoiserOptions options_;
  std::vector<int> block_of_;
  std::vector<Block> blocks_;
  std::vector<std::vector<std::uint8_t>> holes_;  // [t_idx][state]
};

// Exact Bayesian posterior of the bridge process under `coupling`, tabulated on
// a grid of `steps` uniform steps. full_state requires an enumerable space;
// windowed accepts any coupling and uses smoothed expected counts.
FactorizedDenoiser fit_exact_denoiser(const Coupling& coupling, const PathSchedule& schedule, int steps,
                                      DenoiserOptions options = {});

// Ancestral sampling with factorized per-coordinate transitions over `steps`
// uniform steps (the grid step count must be a multiple of `steps`).
Sequence euler_sample(const FactorizedDenoiser& d, std::span<const Token> x0, int steps, Rng& rng);
Sequence euler_sample(const FactorizedDenoiser& d, std::span<const double> p0, int steps, Rng& rng);

// One-step transition matrix M[x][x'] = prod_i p_{s|t}(x'^i | x), dense n x n.
std::vector<double> factorized_transition(const FactorizedDenoiser& d, int t_idx, int s_idx);
// Composition of factorized transitions over `steps` uniform steps from t=0 to t=1.
std::vector<double> chain_transition(const FactorizedDenoiser& d, int steps);

struct NllOptions {
  int draws_per_sample = 16;  // Monte-Carlo (t, x_t) draws per target sample
  double floor = 1e-12;
  bool exact = false;  // exact expectation over grid times, sources and bridges
};

struct NllResult {
  double value = 0.0;  // mean per-token negative log-likelihood, nats
  std::size_t clamped = 0;
};

// Mean of -log p_{1|t}(x1^i | x_t) over coordinates, grid times t < 1 and bridge
// draws x_t. Sources are drawn from pi(x0 | x1), or from the source marginal when
// x1 carries no mass.
NllResult nll_eval(const FactorizedDenoiser& d, std::span<const Sequence> samples, const Coupling& coupling,
                   Rng& rng, NllOptions options = {});

std::string to_json(const Coupling& coupling);
Coupling coupling_from_json(const std::string& text);
std::string to_json(const PathSchedule& schedule);
PathSchedule schedule_from_json(const std::string& text);

}  // namespace areuredi
