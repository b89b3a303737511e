#pragma once

// Coupling rectification and conditional total correlation.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "areuredi/dfm.hpp"

namespace areuredi {

enum class TcMethod { exact, monte_carlo, plug_in };

struct TcEstimate {
  double value = 0.0;  // nats
  TcMethod method = TcMethod::exact;
  int n_batches = 0;
  int batch_size = 0;
  double std_error = 0.0;  // Monte-Carlo methods only
  std::size_t smoothed = 0;  // plug-in cells that hit the smoothing floor
};

// TC_{s|t}(pi) = E_{x_t ~ p_t} KL(p_{s|t}(. | x_t) || prod_i p_{s|t}(.^i | x_t)), by enumeration.
TcEstimate conditional_tc_exact(const Coupling& coupling, const PathSchedule& schedule, double t, double s,
                                std::uint64_t cap = kDefaultEnumerationCap);

struct TcMonteCarloOptions {
  int n_batches = 20;
  int batch_size = 50;
  TcMethod method = TcMethod::monte_carlo;
  double smoothing = 1e-6;
};

// Monte-Carlo TC from sampled (x_t, x_s) pairs.
//
// monte_carlo: averages log p(x_s | x_t) - sum_i log p(x_s^i | x_t), with both
//   conditionals evaluated from the coupling's atoms; unbiased for the exact TC.
// plug_in: per batch, KL of the empirical joint conditional against the product
//   of its empirical coordinate marginals (smoothed); biased upward for small batches.
// std_error is the standard deviation of batch means over sqrt(n_batches).
TcEstimate conditional_tc_mc(const Coupling& coupling, const PathSchedule& schedule, double t, double s, Rng& rng,
                             TcMonteCarloOptions options = {});

// pi'(x0, x1) ∝ pi(x0, x1) p(x1 | x0) / p(x1), with p(x1 | x0) the denoiser's
// factorized chain composed over `steps` uniform steps and p(x1) its push-forward
// of the coupling's source marginal.
Coupling rectify_multiplicative(const Coupling& coupling, const FactorizedDenoiser& d, int steps);

// pi'(x0, x1) = p0(x0) p(x1 | x0): the population limit of re-pairing sources with model samples.
Coupling rectify_model_coupling(const Coupling& coupling, const FactorizedDenoiser& d, int steps);

// Empirical re-pairing: n_pairs sources x0 ~ p0, each paired with an Euler sample from x0.
Coupling rectify_empirical(const FactorizedDenoiser& d, std::span<const double> p0, int n_pairs, int steps,
                           Rng& rng);

enum class RectifyMode { multiplicative, model_coupling, empirical };

std::string to_string(RectifyMode mode);
RectifyMode rectify_mode_from_string(const std::string& name);

struct RectifyConfig {
  RectifyMode mode = RectifyMode::multiplicative;
  int steps = 4;      // sampling/composition steps, also the denoiser grid
  int tc_steps = 4;   // TC is reported for every pair 0 <= t < s <= 1 on this grid
  int n_pairs = 10000;  // empirical mode
  std::uint64_t seed = 0;
  DenoiserOptions denoiser;
};

struct TcPoint {
  double t = 0.0;
  double s = 0.0;
  double before = 0.0;
  double after = 0.0;
};

struct RectificationRound {
  int round = 0;
  Coupling input;
  Coupling output;
  std::vector<TcPoint> tc;  // every grid pair
  double tc_before = 0.0;   // headline pair (t, s) = (0, 1)
  double tc_after = 0.0;
};

std::vector<RectificationRound> rectification_loop(const Coupling& initial, int rounds, const PathSchedule& schedule,
                                                   const RectifyConfig& config);

// One JSON object per round: {round, tc_before, tc_after, method, seed, pairs: [...]}.
std::string round_to_jsonl(const RectificationRound& round, const RectifyConfig& config);

}  // namespace areuredi
