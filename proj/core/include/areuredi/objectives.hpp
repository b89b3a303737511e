#pragma once

// Objectives, normalization and Tchebycheff scalarization.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "areuredi/rng.hpp"
#include "areuredi/seqspace.hpp"

namespace areuredi {

// A maximized score s_n : V^L -> R with analytic (or configured) bounds.
struct Objective {
  std::string name;
  std::function<double(std::span<const Token>)> evaluate;
  double lower = 0.0;
  double upper = 1.0;
};

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;
};

// s~_n(x) = clamp((s_n(x) - lower) / (upper - lower), 0, 1).
class Normalizer {
 public:
  explicit Normalizer(std::vector<Bounds> bounds, bool clamp = true);

  std::size_t size() const noexcept { return bounds_.size(); }
  const std::vector<Bounds>& bounds() const noexcept { return bounds_; }
  bool clamps() const noexcept { return clamp_; }

  double normalize(std::size_t n, double raw) const;

 private:
  std::vector<Bounds> bounds_;
  bool clamp_;
};

class WeightVector {
 public:
  // Entries must be nonnegative and sum to one within 1e-12.
  explicit WeightVector(std::vector<double> w);
  static WeightVector uniform(std::size_t n);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t n) const noexcept { return w_[n]; }
  const std::vector<double>& values() const noexcept { return w_; }
  bool interior() const noexcept;

 private:
  std::vector<double> w_;
};

struct AnnealSchedule {
  double eta_min = 1.0;
  double eta_max = 20.0;
  int steps = 1;  // T

  static AnnealSchedule constant(double eta, int steps);
  void validate() const;
};

// min_n w_n s~_n; ties resolve to the lowest index. Throws on dimension mismatch.
double tchebycheff(std::span<const double> scores, const WeightVector& w);
std::size_t bottleneck(std::span<const double> scores, const WeightVector& w);
double weighted_sum(std::span<const double> scores, const WeightVector& w);

double guidance_weight(double scalarized, double eta);
double log_guidance_weight(double scalarized, double eta);

// eta_t = eta_min + (eta_max - eta_min) t / (T - 1); eta_min when T = 1.
double anneal(int t_index, const AnnealSchedule& schedule);

// w_n ∝ 1 / s~_n(x), which equalizes every term w_n s~_n(x).
WeightVector representability_weights(std::span<const double> scores);

// Flat Dirichlet(1, ..., 1) draw via normalized exponentials.
WeightVector sample_weight(Rng& rng, std::size_t n);

enum class SuiteKind { leading_ones, trailing_zeros, ones_count, zeros_count, token_count, motif_count, linear_score };

struct SuiteSpec {
  SuiteKind kind = SuiteKind::ones_count;
  Sequence pattern;             // motif_count
  Token token = 0;              // token_count
  std::vector<double> weights;  // linear_score, row-major L x K
};

// Parses "leading_ones", "motif_count:010", "token_count:2", "linear_score:w00,w01,...".
SuiteSpec parse_suite_spec(const std::string& text);
std::string to_string(const SuiteSpec& spec);

// Builds a suite objective for sequences of the given shape, with analytic bounds.
//   leading_ones    length of the prefix of 1 tokens, [0, L]
//   trailing_zeros  length of the suffix of 0 tokens, [0, L]
//   ones_count / zeros_count / token_count, [0, L]
//   motif_count     overlapping occurrences of the pattern, [0, L - m + 1]
//   linear_score    sum_j W[j][x^j], [sum_j min_k W[j][k], sum_j max_k W[j][k]]
Objective suite_objective(const SuiteSpec& spec, int vocab_size, int length);

double leading_ones(std::span<const Token> x);
double trailing_zeros(std::span<const Token> x);
double motif_count(std::span<const Token> x, std::span<const Token> pattern);

// Objectives paired with their normalizer; evaluation yields s~ in [0, 1]^N.
class ObjectiveSet {
 public:
  // Bounds are taken from each objective.
  explicit ObjectiveSet(std::vector<Objective> objectives, bool clamp = true);

  std::size_t size() const noexcept { return objectives_.size(); }
  const std::vector<Objective>& objectives() const noexcept { return objectives_; }
  const Normalizer& normalizer() const noexcept { return normalizer_; }

  void scores_into(std::span<const Token> x, std::span<double> out) const;
  std::vector<double> scores(std::span<const Token> x) const;

  // The same set with objective n removed.
  ObjectiveSet without(std::size_t n) const;

 private:
  std::vector<Objective> objectives_;
  Normalizer normalizer_;
};

}  // namespace areuredi
