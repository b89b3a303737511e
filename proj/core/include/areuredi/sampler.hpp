#pragma once

// The annealed, locally balanced Metropolis-Hastings chain.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "areuredi/dfm.hpp"
#include "areuredi/objectives.hpp"

namespace areuredi {

enum class Balancing { barker, sqrt };

std::string to_string(Balancing g);
Balancing balancing_from_string(const std::string& name);

// barker: u / (1 + u); sqrt: sqrt(u). Both satisfy g(u) = u g(1/u).
double balance(Balancing g, double u);
// log g(exp(log_u)), evaluated without leaving the log domain.
double log_balance(Balancing g, double log_u);

struct Pruning {
  double top_p = 1.0;  // (0, 1]
  int cap = 0;         // keep at most this many tokens before re-adding the current one; 0 = no cap
  void validate() const;
};

struct Candidate {
  Token token = 0;
  double prior = 0.0;
};

// Tokens by descending prior (lower token first on ties), cut to the smallest
// prefix reaching top_p and to `cap` entries. The current token is appended when
// pruned out, and the priors are renormalized over what is kept.
std::vector<Candidate> candidate_set(std::span<const double> prior, Token current, const Pruning& pruning);

// eta (S(x^(i<-y)) - S(x)), by direct evaluation of both states.
double reward_ratio(std::span<const Token> x, int i, Token y, double eta, const WeightVector& w,
                    const ObjectiveSet& objectives);

// q(y) ∝ prior(y) g(exp(log_ratio(y))) over the candidates.
std::vector<double> build_proposal(std::span<const Candidate> candidates, Balancing g,
                                   std::span<const double> log_ratios);

enum class TargetDensity { exact_p1, factorized_p1 };
enum class ScanOrder { random, sweep };
// Time at which the denoiser prior p_{s|t}(. | x) is queried during the chain.
// source: t = 0 at every iteration. chain: t = k / T at iteration k (grid steps must equal T).
enum class PriorTime { source, chain };
// final: s = 1. next: the grid point after the prior time.
enum class TargetTime { final, next };
enum class InitMode { source, model };

std::string to_string(TargetDensity v);
std::string to_string(ScanOrder v);
std::string to_string(PriorTime v);
std::string to_string(TargetTime v);
std::string to_string(InitMode v);

// A fitted denoiser together with the coupling it was fit on. Precomputes the
// exact p1 table (enumerable spaces) and the factorized p1 approximation: per
// coordinate, the t = 0 -> 1 marginal averaged over the coupling's sources.
class BaseModel {
 public:
  BaseModel(Coupling coupling, FactorizedDenoiser denoiser);

  const Coupling& coupling() const noexcept { return *coupling_; }
  const FactorizedDenoiser& denoiser() const noexcept { return *denoiser_; }
  const StateSpace& space() const noexcept { return coupling_->space(); }

  bool has_exact_p1() const noexcept { return !log_p1_.empty(); }
  double log_p1(std::span<const Token> x, TargetDensity mode) const;
  const std::vector<double>& factorized_marginals() const noexcept { return marginals_; }  // [i][k]
  const std::vector<double>& exact_log_p1() const noexcept { return log_p1_; }

  // x0 drawn from the coupling's source marginal.
  Sequence sample_source(Rng& rng) const;

 private:
  std::shared_ptr<const Coupling> coupling_;
  std::shared_ptr<const FactorizedDenoiser> denoiser_;
  std::vector<double> masses_;
  std::vector<double> log_p1_;
  std::vector<double> marginals_;
};

struct SamplerConfig {
  AnnealSchedule anneal{1.0, 20.0, 1};
  std::optional<WeightVector> weights;  // uniform when empty
  Balancing balancing = Balancing::barker;
  Pruning pruning;
  bool monotone = false;
  ScanOrder scan = ScanOrder::random;
  TargetDensity density = TargetDensity::exact_p1;
  PriorTime prior_time = PriorTime::source;
  TargetTime target_time = TargetTime::final;
  InitMode init = InitMode::source;
  std::uint64_t seed = 0;
  bool record_steps = true;
  // Hard feasibility predicate; infeasible substitutions never enter a candidate set.
  std::function<bool(std::span<const Token>)> constraint;

  void validate() const;
};

struct Proposal {
  std::vector<Candidate> candidates;
  std::vector<double> log_ratios;
  std::vector<double> q;

  // Index of `token` among the candidates, or -1.
  int find(Token token) const noexcept;
};

// Returns S_w of x with coordinate i replaced by y.
using SubstitutionScore = std::function<double(Token)>;

struct MoveRules {
  const BaseModel* model = nullptr;
  Balancing balancing = Balancing::barker;
  Pruning pruning;
  std::function<bool(std::span<const Token>)> constraint;
};

// Locally balanced proposal at (x, i) with prior p_{s|t}(. | x) from the model.
Proposal propose(const MoveRules& rules, std::span<const Token> x, int i, int t_idx, int s_idx, double eta,
                 double scalarized_here, const SubstitutionScore& score);

// log of the MH ratio for moving x -> x' = x^(i<-y), given both proposals and log targets.
// Returns 0 for the identity move, +inf when the current state has zero target mass and -inf
// when the reverse move is impossible.
double log_mh_ratio(const Proposal& forward, const Proposal& reverse, Token from, Token to, double log_target_x,
                    double log_target_next);

struct StepRecord {
  int t_index = 0;
  double eta = 0.0;
  int coordinate = 0;
  Token proposed = 0;
  double log_ratio = 0.0;  // log r_i(y; x)
  double alpha = 1.0;
  bool accepted = false;
  bool monotone_rejected = false;
  bool reverse_missing = false;
  double scalarized = 0.0;     // S_w of the state after the step
  double weighted_sum = 0.0;   // sum_n w_n s~_n of the state after the step
  std::vector<double> scores;  // s~ of the state after the step
};

struct ChainTrajectory {
  Sequence initial;
  Sequence final;
  std::vector<double> final_scores;
  double final_scalarized = 0.0;
  std::vector<StepRecord> records;
  std::uint64_t evaluations = 0;  // objective-set evaluations, the initial state included
  std::size_t accepted = 0;
  std::size_t reverse_missing = 0;
};

// Runs T = cfg.anneal.steps iterations of the chain. Chain randomness comes from
// Rng(cfg.seed, stream).
ChainTrajectory run_chain(const SamplerConfig& cfg, const BaseModel& model, const ObjectiveSet& objectives,
                          std::optional<Sequence> x0 = std::nullopt, std::uint64_t stream = 0);

// JSONL line for one step record: {chain, t, eta, i, y, log_r, alpha, accepted, S, scores}.
std::string step_to_jsonl(const StepRecord& record, std::size_t chain);

}  // namespace areuredi
