#include "areuredi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "areuredi/errors.hpp"

namespace areuredi {

bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("score vectors differ in size");
  bool strict = false;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (a[n] < b[n]) return false;
    if (a[n] > b[n]) strict = true;
  }
  return strict;
}

std::vector<std::size_t> nondominated(const std::vector<std::vector<double>>& points) {
  // Filter the distinct vectors, then map back so that ties share a verdict.
  std::map<std::vector<double>, std::vector<std::size_t>> groups;
  for (std::size_t p = 0; p < points.size(); ++p) groups[points[p]].push_back(p);
  std::vector<const std::vector<double>*> unique;
  unique.reserve(groups.size());
  for (const auto& [v, idx] : groups) unique.push_back(&v);
  std::vector<std::size_t> out;
  for (const auto& [v, idx] : groups) {
    const bool beaten = std::any_of(unique.begin(), unique.end(), [&](const auto* u) { return dominates(*u, v); });
    if (!beaten) out.insert(out.end(), idx.begin(), idx.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<double>> score_table(const ObjectiveSet& objectives, const StateSpace& space,
                                             std::uint64_t cap) {
  const auto n = space.require_enumerable(cap);
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (const auto& x : space.states(cap)) out.push_back(objectives.scores(x));
  return out;
}

ParetoFront pareto_front(const ObjectiveSet& objectives, const StateSpace& space, std::uint64_t cap) {
  auto table = score_table(objectives, space, cap);
  ParetoFront front;
  for (auto idx : nondominated(table)) {
    front.states.push_back(idx);
    front.members.push_back(space.decode(idx));
    front.scores.push_back(std::move(table[idx]));
  }
  return front;
}

ArgmaxSet argmax_set(const WeightVector& w, const ObjectiveSet& objectives, const StateSpace& space, double tolerance,
                     std::uint64_t cap) {
  const auto n = space.require_enumerable(cap);
  std::vector<double> s(n);
  double best = -1.0;
  std::vector<double> buf(objectives.size());
  for (auto it = space.states(cap).begin(); it.index() < n; ++it) {
    objectives.scores_into(*it, buf);
    s[it.index()] = tchebycheff(buf, w);
    best = std::max(best, s[it.index()]);
  }
  ArgmaxSet out;
  out.value = best;
  out.interior = w.interior();
  for (StateIndex idx = 0; idx < n; ++idx) {
    if (s[idx] >= best - tolerance) {
      out.states.push_back(idx);
      out.members.push_back(space.decode(idx));
    }
  }
  return out;
}

std::vector<double> exact_target(std::span<const double> p1, double eta, const WeightVector& w,
                                 const ObjectiveSet& objectives, const StateSpace& space) {
  const auto n = space.require_enumerable();
  if (p1.size() != n) throw DomainError("p1 must have K^L entries");
  if (eta < 0.0) throw DomainError("eta must be nonnegative");
  std::vector<double> logw(n, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> buf(objectives.size());
  for (auto it = space.states().begin(); it.index() < n; ++it) {
    const auto idx = it.index();
    if (p1[idx] <= 0.0) continue;
    objectives.scores_into(*it, buf);
    logw[idx] = std::log(p1[idx]) + eta * tchebycheff(buf, w);
    top = std::max(top, logw[idx]);
  }
  if (!std::isfinite(top)) throw DomainError("p1 carries no mass");
  std::vector<double> pi(n);
  double total = 0.0;
  for (StateIndex idx = 0; idx < n; ++idx) {
    pi[idx] = std::exp(logw[idx] - top);
    total += pi[idx];
  }
  for (double& v : pi) v /= total;
  return pi;
}

ExactKernel exact_kernel(const BaseModel& model, const ObjectiveSet& objectives, const KernelSpec& spec,
                         std::uint64_t cap) {
  const auto& space = model.space();
  const auto n = space.require_enumerable(cap);
  if (n > 0 && n > 10'000'000 / n) throw ResourceError("dense kernel exceeds the enumeration cap");
  const int length = space.length();
  const auto& w = spec.weights;
  if (w.size() != objectives.size()) throw DomainError("weight vector and objective set differ in size");
  const int s_idx = spec.s_idx < 0 ? model.denoiser().grid().steps() : spec.s_idx;

  std::vector<double> s(n), log_p1(n);
  std::vector<double> buf(objectives.size());
  for (auto it = space.states(cap).begin(); it.index() < n; ++it) {
    objectives.scores_into(*it, buf);
    s[it.index()] = tchebycheff(buf, w);
    log_p1[it.index()] = model.log_p1(*it, spec.density);
  }

  ExactKernel out;
  out.n = n;
  out.length = length;
  out.matrix.assign(n * n, 0.0);
  out.per_coordinate.assign(static_cast<std::size_t>(length), std::vector<double>(n * n, 0.0));
  const auto pw = [&] {
    std::vector<StateIndex> p(static_cast<std::size_t>(length));
    StateIndex v = 1;
    for (int j = 0; j < length; ++j) {
      p[j] = v;
      v *= static_cast<StateIndex>(space.vocab_size());
    }
    return p;
  }();

  const MoveRules rules{&model, spec.balancing, spec.pruning, {}};
  Sequence x(static_cast<std::size_t>(length));
  for (StateIndex a = 0; a < n; ++a) {
    space.decode_into(a, x);
    for (int i = 0; i < length; ++i) {
      const Token here = x[i];
      const StateIndex base = a - static_cast<StateIndex>(here) * pw[i];
      auto score = [&](Token y) { return s[base + static_cast<StateIndex>(y) * pw[i]]; };
      const auto fwd = propose(rules, x, i, spec.t_idx, s_idx, spec.eta, s[a], score);
      auto& ki = out.per_coordinate[i];
      double moved = 0.0;
      for (std::size_t c = 0; c < fwd.candidates.size(); ++c) {
        const Token y = fwd.candidates[c].token;
        if (y == here || fwd.q[c] <= 0.0) continue;
        const StateIndex b = base + static_cast<StateIndex>(y) * pw[i];
        Sequence xn(x);
        xn[i] = y;
        const auto rev = propose(rules, xn, i, spec.t_idx, s_idx, spec.eta, s[b], score);
        const double lr =
            log_mh_ratio(fwd, rev, here, y, log_p1[a] + spec.eta * s[a], log_p1[b] + spec.eta * s[b]);
        const double alpha = lr >= 0.0 ? 1.0 : std::exp(lr);
        ki[a * n + b] += fwd.q[c] * alpha;
        moved += fwd.q[c] * alpha;
      }
      ki[a * n + a] += 1.0 - moved;
    }
  }
  for (const auto& ki : out.per_coordinate) {
    for (std::size_t e = 0; e < n * n; ++e) out.matrix[e] += ki[e] / length;
  }

  out.target.assign(n, 0.0);
  double top = -std::numeric_limits<double>::infinity();
  for (StateIndex a = 0; a < n; ++a) top = std::max(top, log_p1[a] + spec.eta * s[a]);
  double total = 0.0;
  for (StateIndex a = 0; a < n; ++a) {
    out.target[a] = std::exp(log_p1[a] + spec.eta * s[a] - top);
    total += out.target[a];
  }
  for (double& v : out.target) v /= total;
  return out;
}

double stationarity_residual(const ExactKernel& kernel, std::span<const double> pi) {
  const auto n = kernel.n;
  if (pi.size() != n) throw DomainError("distribution size does not match the kernel");
  std::vector<double> next(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    if (pi[a] == 0.0) continue;
    for (std::size_t b = 0; b < n; ++b) next[b] += pi[a] * kernel.matrix[a * n + b];
  }
  double r = 0.0;
  for (std::size_t b = 0; b < n; ++b) r += std::abs(next[b] - pi[b]);
  return r;
}

double detailed_balance_residual(const ExactKernel& kernel, std::span<const double> pi) {
  const auto n = kernel.n;
  if (pi.size() != n) throw DomainError("distribution size does not match the kernel");
  double worst = 0.0;
  for (const auto& ki : kernel.per_coordinate) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        worst = std::max(worst, std::abs(pi[a] * ki[a * n + b] - pi[b] * ki[b * n + a]));
      }
    }
  }
  return worst;
}

double row_sum_residual(const ExactKernel& kernel) {
  double worst = 0.0;
  for (std::size_t a = 0; a < kernel.n; ++a) {
    double total = 0.0;
    for (std::size_t b = 0; b < kernel.n; ++b) total += kernel.matrix[a * kernel.n + b];
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

namespace {

// Area dominated by 2-D points above the reference.
double area_2d(std::vector<std::pair<double, double>> pts, double rx, double ry) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  double area = 0.0;
  double reach = ry;
  for (const auto& [x, y] : pts) {
    if (y > reach) {
      area += (x - rx) * (y - reach);
      reach = y;
    }
  }
  return area;
}

}  // namespace

Hypervolume hypervolume(const std::vector<std::vector<double>>& points, std::span<const double> reference,
                        std::uint64_t seed, std::uint64_t mc_samples) {
  const std::size_t dim = reference.size();
  if (dim < 1) throw DomainError("reference point is empty");
  for (const auto& p : points) {
    if (p.size() != dim) throw DomainError("point and reference differ in size");
    for (std::size_t n = 0; n < dim; ++n) {
      if (p[n] < reference[n]) throw DomainError("reference point is not dominated by every point");
    }
  }
  Hypervolume hv;
  if (points.empty()) return hv;
  std::vector<std::vector<double>> pts;
  for (auto idx : nondominated(points)) pts.push_back(points[idx]);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  if (dim == 1) {
    hv.value = pts.back()[0] - reference[0];
    return hv;
  }
  if (dim == 2) {
    std::vector<std::pair<double, double>> p2;
    for (const auto& p : pts) p2.emplace_back(p[0], p[1]);
    hv.value = area_2d(std::move(p2), reference[0], reference[1]);
    return hv;
  }
  if (dim == 3) {
    // Slice along the third axis: between consecutive levels the dominated
    // cross-section is the 2-D area of the points at or above the level.
    std::vector<double> levels;
    for (const auto& p : pts) levels.push_back(p[2]);
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    double volume = 0.0;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const double lower = l + 1 < levels.size() ? levels[l + 1] : reference[2];
      std::vector<std::pair<double, double>> slice;
      for (const auto& p : pts) {
        if (p[2] >= levels[l]) slice.emplace_back(p[0], p[1]);
      }
      volume += area_2d(std::move(slice), reference[0], reference[1]) * (levels[l] - lower);
    }
    hv.value = volume;
    return hv;
  }

  std::vector<double> upper(reference.begin(), reference.end());
  for (const auto& p : pts) {
    for (std::size_t n = 0; n < dim; ++n) upper[n] = std::max(upper[n], p[n]);
  }
  double box = 1.0;
  for (std::size_t n = 0; n < dim; ++n) box *= upper[n] - reference[n];
  hv.exact = false;
  if (box == 0.0 || mc_samples == 0) return hv;
  Rng rng(seed, 0);
  std::uint64_t hits = 0;
  std::vector<double> z(dim);
  for (std::uint64_t m = 0; m < mc_samples; ++m) {
    for (std::size_t n = 0; n < dim; ++n) z[n] = reference[n] + rng.uniform() * (upper[n] - reference[n]);
    for (const auto& p : pts) {
      bool covers = true;
      for (std::size_t n = 0; n < dim && covers; ++n) covers = p[n] >= z[n];
      if (covers) {
        ++hits;
        break;
      }
    }
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(mc_samples);
  hv.value = box * frac;
  hv.std_error = box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(mc_samples));
  return hv;
}

Hypervolume hypervolume(const std::vector<std::vector<double>>& points) {
  if (points.empty()) return {};
  const std::vector<double> origin(points.front().size(), 0.0);
  return hypervolume(points, origin);
}

Coupling random_coupling(const StateSpace& space, Rng& rng) {
  const auto n = space.require_enumerable();
  if (n > 0 && n > 10'000'000 / n) throw ResourceError("coupling table exceeds the enumeration cap");
  std::vector<double> table(n * n);
  for (double& v : table) v = rng.exponential();
  return Coupling::from_table(space, table);
}

TinyInstance random_instance(int vocab_size, int length, std::size_t n_objectives, std::uint64_t seed) {
  const StateSpace space(vocab_size, length);
  Rng rng(seed, 0);
  auto coupling = random_coupling(space, rng);
  std::vector<Objective> objs;
  for (std::size_t m = 0; m < n_objectives; ++m) {
    SuiteSpec spec;
    spec.kind = SuiteKind::linear_score;
    spec.weights.resize(static_cast<std::size_t>(vocab_size * length));
    for (double& v : spec.weights) v = rng.uniform();
    objs.push_back(suite_objective(spec, vocab_size, length));
  }
  return {std::move(coupling), ObjectiveSet(std::move(objs))};
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError("distributions differ in size");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - q[i]);
  return 0.5 * total;
}

double tv_distance(std::span<const std::uint64_t> counts, std::span<const double> q) {
  if (counts.size() != q.size()) throw DomainError("distributions differ in size");
  double n = 0.0;
  for (auto c : counts) n += static_cast<double>(c);
  if (n == 0.0) throw DomainError("no counts");
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) total += std::abs(static_cast<double>(counts[i]) / n - q[i]);
  return 0.5 * total;
}

}  // namespace areuredi
