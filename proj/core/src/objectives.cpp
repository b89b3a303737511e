#include "areuredi/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "areuredi/errors.hpp"

namespace areuredi {

Normalizer::Normalizer(std::vector<Bounds> bounds, bool clamp) : bounds_(std::move(bounds)), clamp_(clamp) {
  for (const auto& b : bounds_) {
    if (!(b.lower < b.upper)) throw DomainError("normalizer bounds need lower < upper");
  }
}

double Normalizer::normalize(std::size_t n, double raw) const {
  const auto& b = bounds_.at(n);
  const double v = (raw - b.lower) / (b.upper - b.lower);
  return clamp_ ? std::clamp(v, 0.0, 1.0) : v;
}

WeightVector::WeightVector(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw DomainError("weight vector is empty");
  double total = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("weights must be finite and nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("weights must sum to 1");
}

WeightVector WeightVector::uniform(std::size_t n) {
  if (n == 0) throw DomainError("weight vector is empty");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  // Push the rounding residue onto the last entry.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) head += w[i];
  w.back() = 1.0 - head;
  return WeightVector(std::move(w));
}

bool WeightVector::interior() const noexcept {
  return std::all_of(w_.begin(), w_.end(), [](double v) { return v > 0.0; });
}

AnnealSchedule AnnealSchedule::constant(double eta, int steps) { return {eta, eta, steps}; }

void AnnealSchedule::validate() const {
  if (!(eta_min > 0.0)) throw DomainError("eta_min must be positive");
  if (!(eta_min <= eta_max)) throw DomainError("eta_min must not exceed eta_max");
  if (steps < 1) throw DomainError("annealing needs T >= 1");
}

namespace {

void check_dims(std::span<const double> scores, const WeightVector& w) {
  if (scores.size() != w.size()) {
    throw DomainError("score vector has " + std::to_string(scores.size()) + " entries but weights have " +
                      std::to_string(w.size()));
  }
}

}  // namespace

std::size_t bottleneck(std::span<const double> scores, const WeightVector& w) {
  check_dims(scores, w);
  std::size_t best = 0;
  double value = w[0] * scores[0];
  for (std::size_t n = 1; n < scores.size(); ++n) {
    const double v = w[n] * scores[n];
    if (v < value) {
      value = v;
      best = n;
    }
  }
  return best;
}

double tchebycheff(std::span<const double> scores, const WeightVector& w) {
  const auto n = bottleneck(scores, w);
  return w[n] * scores[n];
}

double weighted_sum(std::span<const double> scores, const WeightVector& w) {
  check_dims(scores, w);
  double total = 0.0;
  for (std::size_t n = 0; n < scores.size(); ++n) total += w[n] * scores[n];
  return total;
}

double guidance_weight(double scalarized, double eta) { return std::exp(log_guidance_weight(scalarized, eta)); }

double log_guidance_weight(double scalarized, double eta) {
  if (!(eta > 0.0)) throw DomainError("guidance strength must be positive");
  return eta * scalarized;
}

double anneal(int t_index, const AnnealSchedule& schedule) {
  schedule.validate();
  if (t_index < 0 || t_index >= schedule.steps) {
    throw DomainError("iteration " + std::to_string(t_index) + " outside [0, " + std::to_string(schedule.steps) + ")");
  }
  if (schedule.steps == 1 || t_index == 0) return schedule.eta_min;
  if (t_index == schedule.steps - 1) return schedule.eta_max;
  return schedule.eta_min + (schedule.eta_max - schedule.eta_min) * t_index / (schedule.steps - 1);
}

WeightVector representability_weights(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("no scores given");
  double denom = 0.0;
  for (double s : scores) {
    if (!(s > 0.0)) throw DomainError("representability weights need strictly positive scores");
    denom += 1.0 / s;
  }
  std::vector<double> w;
  w.reserve(scores.size());
  for (double s : scores) w.push_back((1.0 / s) / denom);
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return WeightVector(std::move(w));
}

WeightVector sample_weight(Rng& rng, std::size_t n) {
  if (n == 0) throw DomainError("weight vector is empty");
  if (n == 1) return WeightVector({1.0});
  std::vector<double> e(n);
  double total = 0.0;
  for (auto& v : e) {
    do {
      v = rng.exponential();
    } while (v == 0.0);
    total += v;
  }
  for (auto& v : e) v /= total;
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) head += e[i];
  e.back() = std::max(1.0 - head, std::numeric_limits<double>::min());
  return WeightVector(std::move(e));
}

double leading_ones(std::span<const Token> x) {
  std::size_t n = 0;
  while (n < x.size() && x[n] == 1) ++n;
  return static_cast<double>(n);
}

double trailing_zeros(std::span<const Token> x) {
  std::size_t n = 0;
  while (n < x.size() && x[x.size() - 1 - n] == 0) ++n;
  return static_cast<double>(n);
}

double motif_count(std::span<const Token> x, std::span<const Token> pattern) {
  if (pattern.empty() || pattern.size() > x.size()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t j = 0; j + pattern.size() <= x.size(); ++j) {
    if (std::equal(pattern.begin(), pattern.end(), x.begin() + static_cast<std::ptrdiff_t>(j))) ++hits;
  }
  return static_cast<double>(hits);
}

namespace {

Sequence parse_tokens(const std::string& text) {
  Sequence out;
  if (text.find(',') == std::string::npos) {
    for (char c : text) {
      if (c < '0' || c > '9') throw DomainError("invalid token '" + std::string(1, c) + "' in pattern");
      out.push_back(c - '0');
    }
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw DomainError("invalid token '" + item + "' in pattern");
    }
  }
  return out;
}

}  // namespace

SuiteSpec parse_suite_spec(const std::string& text) {
  const auto colon = text.find(':');
  const auto name = text.substr(0, colon);
  const auto arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
  SuiteSpec spec;
  if (name == "leading_ones") {
    spec.kind = SuiteKind::leading_ones;
  } else if (name == "trailing_zeros") {
    spec.kind = SuiteKind::trailing_zeros;
  } else if (name == "ones_count") {
    spec.kind = SuiteKind::ones_count;
  } else if (name == "zeros_count") {
    spec.kind = SuiteKind::zeros_count;
  } else if (name == "token_count") {
    spec.kind = SuiteKind::token_count;
    const auto t = parse_tokens(arg);
    if (t.size() != 1) throw DomainError("token_count needs exactly one token");
    spec.token = t[0];
  } else if (name == "motif_count") {
    spec.kind = SuiteKind::motif_count;
    spec.pattern = parse_tokens(arg);
  } else if (name == "linear_score") {
    spec.kind = SuiteKind::linear_score;
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ',')) spec.weights.push_back(std::stod(item));
  } else {
    throw DomainError("unknown objective '" + name + "'");
  }
  return spec;
}

std::string to_string(const SuiteSpec& spec) {
  auto join = [](const auto& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
  };
  switch (spec.kind) {
    case SuiteKind::leading_ones:
      return "leading_ones";
    case SuiteKind::trailing_zeros:
      return "trailing_zeros";
    case SuiteKind::ones_count:
      return "ones_count";
    case SuiteKind::zeros_count:
      return "zeros_count";
    case SuiteKind::token_count:
      return "token_count:" + std::to_string(spec.token);
    case SuiteKind::motif_count:
      return "motif_count:" + join(spec.pattern);
    case SuiteKind::linear_score:
      return "linear_score:" + join(spec.weights);
  }
  return "";
}

Objective suite_objective(const SuiteSpec& spec, int vocab_size, int length) {
  if (vocab_size < 2 || length < 1) throw DomainError("invalid sequence shape");
  const double l = length;
  auto count_of = [](Token t) {
    return [t](std::span<const Token> x) { return static_cast<double>(std::count(x.begin(), x.end(), t)); };
  };
  Objective o;
  o.name = to_string(spec);
  switch (spec.kind) {
    case SuiteKind::leading_ones:
    case SuiteKind::ones_count:
    case SuiteKind::trailing_zeros:
    case SuiteKind::zeros_count:
      o.lower = 0.0;
      o.upper = l;
      if (spec.kind == SuiteKind::leading_ones) o.evaluate = leading_ones;
      if (spec.kind == SuiteKind::trailing_zeros) o.evaluate = trailing_zeros;
      if (spec.kind == SuiteKind::ones_count) o.evaluate = count_of(1);
      if (spec.kind == SuiteKind::zeros_count) o.evaluate = count_of(0);
      return o;
    case SuiteKind::token_count:
      if (spec.token < 0 || spec.token >= vocab_size) throw DomainError("token_count token out of range");
      o.lower = 0.0;
      o.upper = l;
      o.evaluate = count_of(spec.token);
      return o;
    case SuiteKind::motif_count: {
      const auto m = spec.pattern.size();
      if (m == 0 || m > static_cast<std::size_t>(length)) throw DomainError("motif length must be in [1, L]");
      for (Token t : spec.pattern) {
        if (t < 0 || t >= vocab_size) throw DomainError("motif token out of range");
      }
      o.lower = 0.0;
      o.upper = static_cast<double>(length - static_cast<int>(m) + 1);
      o.evaluate = [pattern = spec.pattern](std::span<const Token> x) { return motif_count(x, pattern); };
      return o;
    }
    case SuiteKind::linear_score: {
      const auto k = static_cast<std::size_t>(vocab_size);
      if (spec.weights.size() != static_cast<std::size_t>(length) * k) {
        throw DomainError("linear_score needs L x K weights");
      }
      double lo = 0.0, hi = 0.0;
      for (int j = 0; j < length; ++j) {
        const auto row = spec.weights.begin() + static_cast<std::ptrdiff_t>(j * k);
        lo += *std::min_element(row, row + static_cast<std::ptrdiff_t>(k));
        hi += *std::max_element(row, row + static_cast<std::ptrdiff_t>(k));
      }
      if (!(lo < hi)) throw DomainError("linear_score weights are constant");
      o.lower = lo;
      o.upper = hi;
      o.evaluate = [w = spec.weights, k](std::span<const Token> x) {
        double total = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) total += w[j * k + static_cast<std::size_t>(x[j])];
        return total;
      };
      return o;
    }
  }
  throw DomainError("unknown objective kind");
}

namespace {

std::vector<Bounds> bounds_of(const std::vector<Objective>& objectives) {
  std::vector<Bounds> out;
  for (const auto& o : objectives) out.push_back({o.lower, o.upper});
  return out;
}

}  // namespace

ObjectiveSet::ObjectiveSet(std::vector<Objective> objectives, bool clamp)
    : objectives_(std::move(objectives)), normalizer_(bounds_of(objectives_), clamp) {
  if (objectives_.empty()) throw DomainError("objective set is empty");
}

void ObjectiveSet::scores_into(std::span<const Token> x, std::span<double> out) const {
  for (std::size_t n = 0; n < objectives_.size(); ++n) out[n] = normalizer_.normalize(n, objectives_[n].evaluate(x));
}

std::vector<double> ObjectiveSet::scores(std::span<const Token> x) const {
  std::vector<double> out(objectives_.size());
  scores_into(x, out);
  return out;
}

ObjectiveSet ObjectiveSet::without(std::size_t n) const {
  if (n >= objectives_.size()) throw DomainError("objective index out of range");
  auto rest = objectives_;
  rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(n));
  return ObjectiveSet(std::move(rest), normalizer_.clamps());
}

}  // namespace areuredi
