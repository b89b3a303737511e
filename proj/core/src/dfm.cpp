#include "areuredi/dfm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "areuredi/errors.hpp"
#include "bridge_enum.hpp"
#include "json_compat.hpp"

namespace areuredi {

using nlohmann::json;

// ---------------------------------------------------------------------------
// PathSchedule

PathSchedule PathSchedule::linear() { return PathSchedule(Kind::linear, 1.0, {}); }

PathSchedule PathSchedule::polynomial(double exponent) {
  if (!(exponent > 0.0) || !std::isfinite(exponent)) throw DomainError("polynomial exponent must be > 0");
  return PathSchedule(Kind::polynomial, exponent, {});
}

PathSchedule PathSchedule::bond_aware(double gamma, std::vector<std::uint8_t> bond_mask) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw DomainError("bond-aware gamma must be > 1");
  for (auto b : bond_mask) {
    if (b > 1) throw DomainError("bond mask entries must be 0 or 1");
  }
  return PathSchedule(Kind::bond_aware, gamma, std::move(bond_mask));
}

double PathSchedule::kappa(double t, int j) const {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time outside [0, 1]: " + std::to_string(t));
  switch (kind_) {
    case Kind::linear:
      return t;
    case Kind::polynomial:
      return std::pow(t, exponent_);
    case Kind::bond_aware:
      if (j < 0 || j >= static_cast<int>(mask_.size())) throw DomainError("coordinate outside bond mask");
      return mask_[static_cast<std::size_t>(j)] ? std::pow(t, exponent_) : t;
  }
  return t;
}

double PathSchedule::jump_probability(double t, double s, int j) const {
  const double kt = kappa(t, j);
  const double ks = kappa(s, j);
  if (kt >= 1.0) return 1.0;
  return std::clamp((ks - kt) / (1.0 - kt), 0.0, 1.0);
}

void PathSchedule::check_length(int length) const {
  if (kind_ == Kind::bond_aware && static_cast<int>(mask_.size()) != length) {
    throw DomainError("bond mask length " + std::to_string(mask_.size()) + " != L=" + std::to_string(length));
  }
}

std::string PathSchedule::name() const {
  switch (kind_) {
    case Kind::linear:
      return "linear";
    case Kind::polynomial:
      return "polynomial";
    case Kind::bond_aware:
      return "bond_aware";
  }
  return "linear";
}

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(int steps) : steps_(steps) {
  if (steps < 1) throw DomainError("time grid needs at least one step");
}

int TimeGrid::index_of(double t) const {
  const double scaled = t * steps_;
  const double k = std::round(scaled);
  if (k < 0 || k > steps_ || std::abs(k / steps_ - t) > 1e-12) {
    throw DomainError("time " + std::to_string(t) + " is not on the " + std::to_string(steps_) + "-step grid");
  }
  return static_cast<int>(k);
}

// ---------------------------------------------------------------------------
// Coupling

namespace {

void check_mass(double m) {
  if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("coupling masses must be finite and nonnegative");
}

std::vector<CouplingPair> normalized(std::vector<CouplingPair> pairs) {
  double total = 0.0;
  for (const auto& p : pairs) total += p.mass;
  if (!(total > 0.0)) throw DomainError("coupling has zero total mass");
  for (auto& p : pairs) p.mass /= total;
  return pairs;
}

}  // namespace

Coupling Coupling::exact(StateSpace space, std::vector<CouplingPair> pairs, std::uint64_t cap) {
  const auto n = space.require_enumerable(cap);
  std::map<std::pair<StateIndex, StateIndex>, double> merged;
  for (const auto& p : pairs) {
    check_mass(p.mass);
    const auto a = space.encode(p.x0);
    const auto b = space.encode(p.x1);
    if (p.mass > 0.0) merged[{a, b}] += p.mass;
  }
  (void)n;
  std::vector<CouplingPair> out;
  out.reserve(merged.size());
  for (const auto& [key, mass] : merged) out.push_back({space.decode(key.first), space.decode(key.second), mass});
  return Coupling(space, Kind::exact_table, normalized(std::move(out)));
}

Coupling Coupling::from_table(StateSpace space, std::span<const double> table, std::uint64_t cap) {
  const auto n = space.require_enumerable(cap);
  if (table.size() != n * n) throw DomainError("coupling table must have K^L * K^L entries");
  std::vector<CouplingPair> out;
  for (StateIndex a = 0; a < n; ++a) {
    for (StateIndex b = 0; b < n; ++b) {
      const double m = table[a * n + b];
      check_mass(m);
      if (m > 0.0) out.push_back({space.decode(a), space.decode(b), m});
    }
  }
  return Coupling(space, Kind::exact_table, normalized(std::move(out)));
}

Coupling Coupling::independent(StateSpace space, std::span<const double> p0, std::span<const double> p1,
                               std::uint64_t cap) {
  const auto n = space.require_enumerable(cap);
  if (p0.size() != n || p1.size() != n) throw DomainError("marginals must have K^L entries");
  std::vector<CouplingPair> out;
  for (StateIndex a = 0; a < n; ++a) {
    check_mass(p0[a]);
    if (p0[a] == 0.0) continue;
    const auto x0 = space.decode(a);
    for (StateIndex b = 0; b < n; ++b) {
      check_mass(p1[b]);
      if (p1[b] > 0.0) out.push_back({x0, space.decode(b), p0[a] * p1[b]});
    }
  }
  return Coupling(space, Kind::exact_table, normalized(std::move(out)));
}

Coupling Coupling::empirical(StateSpace space, std::vector<std::pair<Sequence, Sequence>> samples) {
  if (samples.empty()) throw DomainError("empirical coupling needs at least one pair");
  std::vector<CouplingPair> out;
  out.reserve(samples.size());
  const double w = 1.0 / static_cast<double>(samples.size());
  for (auto& [a, b] : samples) {
    space.validate(a);
    space.validate(b);
    out.push_back({std::move(a), std::move(b), w});
  }
  return Coupling(space, Kind::empirical_pairs, std::move(out));
}

Coupling Coupling::empirical_weighted(StateSpace space, std::vector<CouplingPair> pairs) {
  if (pairs.empty()) throw DomainError("empirical coupling needs at least one pair");
  for (const auto& p : pairs) {
    space.validate(p.x0);
    space.validate(p.x1);
    check_mass(p.mass);
  }
  return Coupling(space, Kind::empirical_pairs, normalized(std::move(pairs)));
}

double Coupling::total_mass() const noexcept {
  double total = 0.0;
  for (const auto& p : pairs_) total += p.mass;
  return total;
}

Distribution Coupling::source_marginal(std::uint64_t cap) const {
  Distribution out(space_.require_enumerable(cap), 0.0);
  for (const auto& p : pairs_) out[space_.encode(p.x0)] += p.mass;
  return out;
}

Distribution Coupling::target_marginal(std::uint64_t cap) const {
  Distribution out(space_.require_enumerable(cap), 0.0);
  for (const auto& p : pairs_) out[space_.encode(p.x1)] += p.mass;
  return out;
}

Coupling Coupling::as_exact(std::uint64_t cap) const {
  return exact(space_, std::vector<CouplingPair>(pairs_.begin(), pairs_.end()), cap);
}

std::vector<double> Coupling::table(std::uint64_t cap) const {
  const auto n = space_.require_enumerable(cap);
  std::vector<double> out(n * n, 0.0);
  for (const auto& p : pairs_) out[space_.encode(p.x0) * n + space_.encode(p.x1)] += p.mass;
  return out;
}

// ---------------------------------------------------------------------------
// Bridges

Sequence bridge_sample(std::span<const Token> x0, std::span<const Token> x1, double t, const PathSchedule& schedule,
                       Rng& rng) {
  if (x0.size() != x1.size()) throw DomainError("bridge endpoints differ in length");
  Sequence out(x0.begin(), x0.end());
  for (std::size_t j = 0; j < x0.size(); ++j) {
    const double u = rng.uniform();
    if (u < schedule.kappa(t, static_cast<int>(j))) out[j] = x1[j];
  }
  return out;
}

double bridge_probability(std::span<const Token> x_t, std::span<const Token> x0, std::span<const Token> x1, double t,
                          const PathSchedule& schedule) {
  if (x_t.size() != x0.size() || x0.size() != x1.size()) throw DomainError("bridge arguments differ in length");
  double p = 1.0;
  for (std::size_t j = 0; j < x0.size(); ++j) {
    const double k = schedule.kappa(t, static_cast<int>(j));
    double pj = 0.0;
    if (x_t[j] == x1[j]) pj += k;
    if (x_t[j] == x0[j]) pj += 1.0 - k;
    p *= pj;
    if (p == 0.0) break;
  }
  return p;
}

namespace {

std::vector<double> kappas(const PathSchedule& schedule, double t, int length) {
  std::vector<double> out(static_cast<std::size_t>(length));
  for (int j = 0; j < length; ++j) out[j] = schedule.kappa(t, j);
  return out;
}

}  // namespace

Distribution bridge_marginal_exact(const Coupling& coupling, const PathSchedule& schedule, double t,
                                   std::uint64_t cap) {
  const auto& space = coupling.space();
  schedule.check_length(space.length());
  Distribution out(space.require_enumerable(cap), 0.0);
  const auto pw = detail::radix_powers(space);
  const auto kap = kappas(schedule, t, space.length());
  for (const auto& pair : coupling.pairs()) {
    detail::for_each_bridge_state(pw, pair.x0, pair.x1, kap,
                                  [&](StateIndex idx, double p) { out[idx] += pair.mass * p; });
  }
  return out;
}

// ---------------------------------------------------------------------------
// FactorizedDenoiser

FactorizedDenoiser::FactorizedDenoiser(StateSpace space, PathSchedule schedule, TimeGrid grid, DenoiserOptions options)
    : space_(space),
      schedule_(std::move(schedule)),
      grid_(grid),
      options_(options),
      block_of_(static_cast<std::size_t>(grid.points()) * static_cast<std::size_t>(grid.points()), -1),
      holes_(static_cast<std::size_t>(grid.points())) {}

bool FactorizedDenoiser::stores(int t_idx, int s_idx) const noexcept {
  if (t_idx < 0 || s_idx < 0 || t_idx >= grid_.points() || s_idx >= grid_.points()) return false;
  return block_of_[slot(t_idx, s_idx)] >= 0;
}

const FactorizedDenoiser::Block& FactorizedDenoiser::block(int t_idx, int s_idx) const {
  if (!stores(t_idx, s_idx)) {
    throw DomainError("denoiser does not store the transition from grid index " + std::to_string(t_idx) + " to " +
                      std::to_string(s_idx));
  }
  return blocks_[static_cast<std::size_t>(block_of_[slot(t_idx, s_idx)])];
}

std::uint64_t FactorizedDenoiser::window_key(std::span<const Token> x_t, int i) const noexcept {
  const auto radix = static_cast<std::uint64_t>(space_.vocab_size()) + 1;
  std::uint64_t key = 0;
  for (int o = -options_.window; o <= options_.window; ++o) {
    const int j = i + o;
    const auto tok = (j >= 0 && j < space_.length()) ? static_cast<std::uint64_t>(x_t[j])
                                                     : static_cast<std::uint64_t>(space_.vocab_size());
    key = key * radix + tok;
  }
  return key;
}

void FactorizedDenoiser::posterior_into(std::span<const Token> x_t, int t_idx, int s_idx, int i,
                                        std::span<double> out) const {
  space_.validate(x_t);
  const int k = space_.vocab_size();
  if (i < 0 || i >= space_.length()) throw DomainError("coordinate out of range");
  if (static_cast<int>(out.size()) != k) throw DomainError("posterior buffer must have K entries");
  const auto& b = block(t_idx, s_idx);
  if (options_.mode == ContextMode::full_state) {
    const auto idx = space_.encode(x_t);
    const auto offset = (idx * static_cast<std::size_t>(space_.length()) + static_cast<std::size_t>(i)) *
                        static_cast<std::size_t>(k);
    std::copy_n(b.dense.begin() + static_cast<std::ptrdiff_t>(offset), k, out.begin());
    return;
  }
  const auto& table = b.ctx[static_cast<std::size_t>(i)];
  const auto it = table.find(window_key(x_t, i));
  if (it == table.end()) {
    std::fill(out.begin(), out.end(), 1.0 / k);
  } else {
    std::copy(it->second.begin(), it->second.end(), out.begin());
  }
}

std::vector<double> FactorizedDenoiser::posterior(std::span<const Token> x_t, int t_idx, int s_idx, int i) const {
  std::vector<double> out(static_cast<std::size_t>(space_.vocab_size()));
  posterior_into(x_t, t_idx, s_idx, i, out);
  return out;
}

std::vector<double> FactorizedDenoiser::posterior_marginal(std::span<const Token> x_t, double t, double s,
                                                           int i) const {
  const int t_idx = grid_.index_of(t);
  const int s_idx = grid_.index_of(s);
  if (s_idx <= t_idx) throw DomainError("posterior_marginal requires s > t");
  return posterior(x_t, t_idx, s_idx, i);
}

bool FactorizedDenoiser::is_hole(std::span<const Token> x_t, int t_idx) const {
  if (t_idx < 0 || t_idx >= grid_.points()) throw DomainError("grid index out of range");
  const auto& h = holes_[static_cast<std::size_t>(t_idx)];
  if (h.empty()) return false;
  return h[space_.encode(x_t)] != 0;
}

std::size_t FactorizedDenoiser::hole_count() const noexcept {
  std::size_t n = 0;
  for (const auto& h : holes_) n += static_cast<std::size_t>(std::count(h.begin(), h.end(), std::uint8_t{1}));
  return n;
}

namespace {

std::vector<int> target_indices(const TimeGrid& grid, TargetTimes targets, int t_idx) {
  std::vector<int> out;
  if (targets == TargetTimes::all) {
    for (int s = t_idx + 1; s <= grid.steps(); ++s) out.push_back(s);
  } else {
    out.push_back(t_idx + 1);
    if (t_idx + 1 != grid.steps()) out.push_back(grid.steps());
  }
  return out;
}

void normalize_in_place(std::span<double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  for (double& x : v) x /= total;
}

}  // namespace

FactorizedDenoiser fit_exact_denoiser(const Coupling& coupling, const PathSchedule& schedule, int steps,
                                      DenoiserOptions options) {
  const auto& space = coupling.space();
  schedule.check_length(space.length());
  const TimeGrid grid(steps);
  FactorizedDenoiser d(space, schedule, grid, options);
  const int length = space.length();
  const int k = space.vocab_size();

  if (options.mode == ContextMode::full_state) {
    const auto n = space.require_enumerable(options.cap);
    const auto pw = detail::radix_powers(space);
    Sequence xt(static_cast<std::size_t>(length));
    for (int t_idx = 0; t_idx < steps; ++t_idx) {
      const double t = grid.time(t_idx);
      const auto kap = kappas(schedule, t, length);
      // Total posterior weight of each context, and the weight of atoms whose
      // coordinate i is still at its source and will move to token y.
      std::vector<double> total(n, 0.0);
      std::vector<double> pending(n * static_cast<std::size_t>(length * k), 0.0);
      for (const auto& pair : coupling.pairs()) {
        detail::for_each_bridge_state(pw, pair.x0, pair.x1, kap, [&](StateIndex idx, double p) {
          const double w = pair.mass * p;
          if (w == 0.0) return;
          total[idx] += w;
          space.decode_into(idx, xt);
          for (int i = 0; i < length; ++i) {
            if (pair.x0[i] != pair.x1[i] && xt[i] == pair.x0[i]) {
              pending[(idx * length + i) * k + pair.x1[i]] += w;
            }
          }
        });
      }
      auto& holes = d.holes_[static_cast<std::size_t>(t_idx)];
      holes.assign(n, 0);
      for (StateIndex idx = 0; idx < n; ++idx) holes[idx] = total[idx] > 0.0 ? 0 : 1;

      for (int s_idx : target_indices(grid, options.targets, t_idx)) {
        const double s = grid.time(s_idx);
        std::vector<double> jump(static_cast<std::size_t>(length));
        for (int i = 0; i < length; ++i) jump[i] = schedule.jump_probability(t, s, i);
        FactorizedDenoiser::Block b;
        b.dense.assign(n * static_cast<std::size_t>(length * k), 0.0);
        for (StateIndex idx = 0; idx < n; ++idx) {
          if (total[idx] <= 0.0) {
            std::fill_n(b.dense.begin() + static_cast<std::ptrdiff_t>(idx * length * k), length * k, 1.0 / k);
            continue;
          }
          space.decode_into(idx, xt);
          for (int i = 0; i < length; ++i) {
            const std::size_t off = (idx * length + i) * k;
            std::span<double> out(b.dense.data() + off, static_cast<std::size_t>(k));
            double pending_total = 0.0;
            for (int y = 0; y < k; ++y) {
              const double w = pending[off + y];
              pending_total += w;
              out[y] += w * jump[i];
            }
            out[xt[i]] += std::max(0.0, total[idx] - pending_total) + pending_total * (1.0 - jump[i]);
            normalize_in_place(out);
          }
        }
        d.block_of_[d.slot(t_idx, s_idx)] = static_cast<int>(d.blocks_.size());
        d.blocks_.push_back(std::move(b));
      }
    }
    return d;
  }

  // Windowed contexts: expected counts of x_s^i given the radius-w window of
  // x_t around i, in units of coupling atoms.
  if (options.window < 0) throw DomainError("window radius must be >= 0");
  if (!(options.smoothing > 0.0)) throw DomainError("windowed mode needs a positive smoothing constant");
  const int width = 2 * options.window + 1;
  {
    double bits = width * std::log2(static_cast<double>(k) + 1.0);
    if (bits > 63.0) throw ResourceError("window too wide for 64-bit context keys");
  }
  const double atoms = static_cast<double>(coupling.pairs().size());
  for (int t_idx = 0; t_idx < steps; ++t_idx) {
    const double t = grid.time(t_idx);
    const auto kap = kappas(schedule, t, length);
    const auto targets = target_indices(grid, options.targets, t_idx);
    std::vector<std::vector<std::map<std::uint64_t, std::vector<double>>>> counts(
        targets.size(), std::vector<std::map<std::uint64_t, std::vector<double>>>(static_cast<std::size_t>(length)));
    std::vector<std::vector<double>> jump(targets.size(), std::vector<double>(static_cast<std::size_t>(length)));
    for (std::size_t si = 0; si < targets.size(); ++si) {
      for (int i = 0; i < length; ++i) jump[si][i] = schedule.jump_probability(t, grid.time(targets[si]), i);
    }
    std::vector<int> coords;
    Sequence window_tokens(static_cast<std::size_t>(width));
    for (const auto& pair : coupling.pairs()) {
      const double c = pair.mass * atoms;
      if (c == 0.0) continue;
      for (int i = 0; i < length; ++i) {
        coords.clear();
        for (int o = -options.window; o <= options.window; ++o) coords.push_back(i + o);
        // Enumerate window configurations with positive bridge probability.
        std::vector<int> free_pos;
        for (int w = 0; w < width; ++w) {
          const int j = coords[w];
          if (j < 0 || j >= length) {
            window_tokens[w] = k;
          } else if (pair.x0[j] == pair.x1[j] || kap[j] <= 0.0) {
            window_tokens[w] = pair.x0[j];
          } else if (kap[j] >= 1.0) {
            window_tokens[w] = pair.x1[j];
          } else {
            free_pos.push_back(w);
          }
        }
        const std::uint64_t combos = std::uint64_t{1} << free_pos.size();
        for (std::uint64_t mask = 0; mask < combos; ++mask) {
          double p = 1.0;
          for (std::size_t b = 0; b < free_pos.size(); ++b) {
            const int w = free_pos[b];
            const int j = coords[w];
            if ((mask >> b) & 1u) {
              window_tokens[w] = pair.x1[j];
              p *= kap[j];
            } else {
              window_tokens[w] = pair.x0[j];
              p *= 1.0 - kap[j];
            }
          }
          std::uint64_t key = 0;
          for (int w = 0; w < width; ++w) key = key * (static_cast<std::uint64_t>(k) + 1) + window_tokens[w];
          const Token here = window_tokens[options.window];
          const bool pending_here = pair.x0[i] != pair.x1[i] && here == pair.x0[i];
          for (std::size_t si = 0; si < targets.size(); ++si) {
            auto& cell = counts[si][static_cast<std::size_t>(i)][key];
            if (cell.empty()) cell.assign(static_cast<std::size_t>(k), 0.0);
            if (pending_here) {
              cell[pair.x1[i]] += c * p * jump[si][i];
              cell[here] += c * p * (1.0 - jump[si][i]);
            } else {
              cell[here] += c * p;
            }
          }
        }
      }
    }
    for (std::size_t si = 0; si < targets.size(); ++si) {
      FactorizedDenoiser::Block b;
      b.ctx = std::move(counts[si]);
      for (auto& table : b.ctx) {
        for (auto& [key, cell] : table) {
          for (double& v : cell) v += options.smoothing;
          normalize_in_place(cell);
        }
      }
      d.block_of_[d.slot(t_idx, targets[si])] = static_cast<int>(d.blocks_.size());
      d.blocks_.push_back(std::move(b));
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Sampling

Sequence euler_sample(const FactorizedDenoiser& d, std::span<const Token> x0, int steps, Rng& rng) {
  if (steps < 1) throw DomainError("euler_sample needs at least one step");
  const int grid_steps = d.grid().steps();
  if (grid_steps % steps != 0) {
    throw DomainError("denoiser grid of " + std::to_string(grid_steps) + " steps cannot host " +
                      std::to_string(steps) + " sampling steps");
  }
  const int stride = grid_steps / steps;
  d.space().validate(x0);
  Sequence x(x0.begin(), x0.end());
  Sequence next(x.size());
  std::vector<double> probs(static_cast<std::size_t>(d.space().vocab_size()));
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < d.space().length(); ++i) {
      d.posterior_into(x, k * stride, (k + 1) * stride, i, probs);
      next[i] = static_cast<Token>(rng.categorical(probs));
    }
    x.swap(next);
  }
  return x;
}

Sequence euler_sample(const FactorizedDenoiser& d, std::span<const double> p0, int steps, Rng& rng) {
  const auto n = d.space().require_enumerable(d.options().cap);
  if (p0.size() != n) throw DomainError("source distribution must have K^L entries");
  const auto start = d.space().decode(rng.categorical(p0));
  return euler_sample(d, start, steps, rng);
}

std::vector<double> factorized_transition(const FactorizedDenoiser& d, int t_idx, int s_idx) {
  const auto& space = d.space();
  const auto n = space.require_enumerable(d.options().cap);
  const int length = space.length();
  const int k = space.vocab_size();
  std::vector<double> m(n * n, 0.0);
  std::vector<double> post(static_cast<std::size_t>(length * k));
  Sequence x(static_cast<std::size_t>(length));
  Sequence y(static_cast<std::size_t>(length));
  for (StateIndex a = 0; a < n; ++a) {
    space.decode_into(a, x);
    for (int i = 0; i < length; ++i) {
      d.posterior_into(x, t_idx, s_idx, i, std::span<double>(post.data() + i * k, static_cast<std::size_t>(k)));
    }
    for (StateIndex b = 0; b < n; ++b) {
      space.decode_into(b, y);
      double p = 1.0;
      for (int i = 0; i < length && p != 0.0; ++i) p *= post[i * k + y[i]];
      m[a * n + b] = p;
    }
  }
  return m;
}

std::vector<double> chain_transition(const FactorizedDenoiser& d, int steps) {
  const auto n = d.space().require_enumerable(d.options().cap);
  const int grid_steps = d.grid().steps();
  if (steps < 1 || grid_steps % steps != 0) throw DomainError("chain steps must divide the denoiser grid");
  const int stride = grid_steps / steps;
  std::vector<double> acc(n * n, 0.0);
  for (StateIndex a = 0; a < n; ++a) acc[a * n + a] = 1.0;
  std::vector<double> tmp(n * n);
  for (int k = 0; k < steps; ++k) {
    const auto m = factorized_transition(d, k * stride, (k + 1) * stride);
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (StateIndex a = 0; a < n; ++a) {
      for (StateIndex c = 0; c < n; ++c) {
        const double v = acc[a * n + c];
        if (v == 0.0) continue;
        const double* row = m.data() + c * n;
        double* dst = tmp.data() + a * n;
        for (StateIndex b = 0; b < n; ++b) dst[b] += v * row[b];
      }
    }
    acc.swap(tmp);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// NLL

NllResult nll_eval(const FactorizedDenoiser& d, std::span<const Sequence> samples, const Coupling& coupling,
                   Rng& rng, NllOptions options) {
  if (samples.empty()) throw DomainError("nll_eval needs at least one sample");
  if (!(coupling.space() == d.space())) throw DomainError("coupling and denoiser spaces differ");
  const auto& space = d.space();
  const int length = space.length();
  const int k = space.vocab_size();
  const int final_idx = d.grid().steps();
  const auto pairs = coupling.pairs();
  NllResult result;
  double sum = 0.0;
  double weight = 0.0;
  std::vector<double> post(static_cast<std::size_t>(k));

  auto token_nll = [&](std::span<const Token> x_t, int t_idx, std::span<const Token> x1) {
    double acc = 0.0;
    for (int i = 0; i < length; ++i) {
      d.posterior_into(x_t, t_idx, final_idx, i, post);
      double p = post[static_cast<std::size_t>(x1[i])];
      if (p < options.floor) {
        p = options.floor;
        ++result.clamped;
      }
      acc -= std::log(p);
    }
    return acc / length;
  };

  for (const auto& x1 : samples) {
    space.validate(x1);
    std::vector<double> source_w(pairs.size(), 0.0);
    double matched = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (std::equal(pairs[p].x1.begin(), pairs[p].x1.end(), x1.begin())) {
        source_w[p] = pairs[p].mass;
        matched += pairs[p].mass;
      }
    }
    if (matched <= 0.0) {
      for (std::size_t p = 0; p < pairs.size(); ++p) source_w[p] = pairs[p].mass;
    }
    if (options.exact) {
      const auto pw = detail::radix_powers(space);
      double total_w = 0.0;
      for (double w : source_w) total_w += w;
      Sequence xt(static_cast<std::size_t>(length));
      for (int t_idx = 0; t_idx < final_idx; ++t_idx) {
        const auto kap = kappas(d.schedule(), d.grid().time(t_idx), length);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          if (source_w[p] == 0.0) continue;
          const double w_src = source_w[p] / total_w / final_idx;
          detail::for_each_bridge_state(pw, pairs[p].x0, x1, kap, [&](StateIndex idx, double bp) {
            space.decode_into(idx, xt);
            sum += w_src * bp * token_nll(xt, t_idx, x1);
          });
        }
      }
      weight += 1.0;
    } else {
      for (int draw = 0; draw < options.draws_per_sample; ++draw) {
        const int t_idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(final_idx)));
        const auto& x0 = pairs[rng.categorical(source_w)].x0;
        const auto xt = bridge_sample(x0, x1, d.grid().time(t_idx), d.schedule(), rng);
        sum += token_nll(xt, t_idx, x1);
        weight += 1.0;
      }
    }
  }
  result.value = sum / weight;
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json schedule_json(const PathSchedule& s) {
  json j{{"kind", s.name()}};
  if (s.kind() == PathSchedule::Kind::polynomial) j["exponent"] = s.exponent();
  if (s.kind() == PathSchedule::Kind::bond_aware) {
    j["gamma"] = s.exponent();
    j["bond_mask"] = s.bond_mask();
  }
  return j;
}

PathSchedule schedule_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "linear") return PathSchedule::linear();
  if (kind == "polynomial") return PathSchedule::polynomial(j.at("exponent").get<double>());
  if (kind == "bond_aware") {
    return PathSchedule::bond_aware(j.at("gamma").get<double>(), j.at("bond_mask").get<std::vector<std::uint8_t>>());
  }
  throw DomainError("unknown schedule kind: " + kind);
}

void check_format(const json& j, const std::string& format) {
  if (j.value("format", std::string{}) != format) throw DomainError("document is not a " + format);
  if (j.value("version", 0) != 1) throw DomainError("unsupported " + format + " version");
}

}  // namespace

std::string to_json(const PathSchedule& schedule) { return schedule_json(schedule).dump(); }

PathSchedule schedule_from_json(const std::string& text) { return schedule_from(json::parse(text)); }

std::string to_json(const Coupling& coupling) {
  json pairs = json::array();
  for (const auto& p : coupling.pairs()) pairs.push_back({{"x0", p.x0}, {"x1", p.x1}, {"mass", p.mass}});
  const json doc{{"format", "areuredi.coupling"},
                 {"version", 1},
                 {"K", coupling.space().vocab_size()},
                 {"L", coupling.space().length()},
                 {"kind", coupling.kind() == Coupling::Kind::exact_table ? "exact_table" : "empirical_pairs"},
                 {"pairs", std::move(pairs)}};
  return doc.dump();
}

Coupling coupling_from_json(const std::string& text) {
  const auto doc = json::parse(text);
  check_format(doc, "areuredi.coupling");
  const StateSpace space(doc.at("K").get<int>(), doc.at("L").get<int>());
  std::vector<CouplingPair> pairs;
  for (const auto& p : doc.at("pairs")) {
    pairs.push_back({p.at("x0").get<Sequence>(), p.at("x1").get<Sequence>(), p.at("mass").get<double>()});
  }
  if (doc.at("kind").get<std::string>() == "exact_table") return Coupling::exact(space, std::move(pairs));
  return Coupling::empirical_weighted(space, std::move(pairs));
}

std::string FactorizedDenoiser::to_json() const {
  json blocks = json::array();
  for (int t = 0; t < grid_.points(); ++t) {
    for (int s = 0; s < grid_.points(); ++s) {
      if (!stores(t, s)) continue;
      const auto& b = blocks_[static_cast<std::size_t>(block_of_[slot(t, s)])];
      json jb{{"t", t}, {"s", s}};
      if (options_.mode == ContextMode::full_state) {
        jb["probs"] = b.dense;
      } else {
        json per_coord = json::array();
        for (const auto& table : b.ctx) {
          json entries = json::array();
          for (const auto& [key, probs] : table) entries.push_back({{"key", key}, {"probs", probs}});
          per_coord.push_back(std::move(entries));
        }
        jb["contexts"] = std::move(per_coord);
      }
      blocks.push_back(std::move(jb));
    }
  }
  json holes = json::array();
  for (std::size_t t = 0; t < holes_.size(); ++t) {
    std::vector<StateIndex> idx;
    for (std::size_t a = 0; a < holes_[t].size(); ++a) {
      if (holes_[t][a]) idx.push_back(a);
    }
    if (!idx.empty()) holes.push_back({{"t", t}, {"states", idx}});
  }
  const json doc{{"format", "areuredi.denoiser"},
                 {"version", 1},
                 {"K", space_.vocab_size()},
                 {"L", space_.length()},
                 {"steps", grid_.steps()},
                 {"schedule", schedule_json(schedule_)},
                 {"mode", options_.mode == ContextMode::full_state ? "full_state" : "windowed"},
                 {"window", options_.window},
                 {"smoothing", options_.smoothing},
                 {"targets", options_.targets == TargetTimes::all ? "all" : "next_and_final"},
                 {"blocks", std::move(blocks)},
                 {"holes", std::move(holes)}};
  return doc.dump();
}

FactorizedDenoiser FactorizedDenoiser::from_json(const std::string& text) {
  const auto doc = json::parse(text);
  check_format(doc, "areuredi.denoiser");
  const StateSpace space(doc.at("K").get<int>(), doc.at("L").get<int>());
  DenoiserOptions options;
  options.mode = doc.at("mode").get<std::string>() == "full_state" ? ContextMode::full_state : ContextMode::windowed;
  options.window = doc.at("window").get<int>();
  options.smoothing = doc.at("smoothing").get<double>();
  options.targets = doc.at("targets").get<std::string>() == "all" ? TargetTimes::all : TargetTimes::next_and_final;
  FactorizedDenoiser d(space, schedule_from(doc.at("schedule")), TimeGrid(doc.at("steps").get<int>()), options);
  const auto per_block = space.enumerable() ? space.size_or_zero() * space.length() * space.vocab_size() : 0;
  for (const auto& jb : doc.at("blocks")) {
    Block b;
    if (options.mode == ContextMode::full_state) {
      b.dense = jb.at("probs").get<std::vector<double>>();
      if (b.dense.size() != per_block) throw DomainError("denoiser block has the wrong size");
    } else {
      for (const auto& entries : jb.at("contexts")) {
        std::map<std::uint64_t, std::vector<double>> table;
        for (const auto& e : entries) table[e.at("key").get<std::uint64_t>()] = e.at("probs").get<std::vector<double>>();
        b.ctx.push_back(std::move(table));
      }
      if (static_cast<int>(b.ctx.size()) != space.length()) throw DomainError("denoiser block has the wrong size");
    }
    const int t = jb.at("t").get<int>();
    const int s = jb.at("s").get<int>();
    if (t < 0 || s <= t || s > d.grid_.steps()) throw DomainError("denoiser block has invalid times");
    d.block_of_[d.slot(t, s)] = static_cast<int>(d.blocks_.size());
    d.blocks_.push_back(std::move(b));
  }
  if (options.mode == ContextMode::full_state) {
    for (auto& h : d.holes_) h.assign(space.size_or_zero(), 0);
    d.holes_.back().clear();
  }
  for (const auto& jh : doc.at("holes")) {
    auto& h = d.holes_.at(jh.at("t").get<std::size_t>());
    for (auto idx : jh.at("states").get<std::vector<StateIndex>>()) h.at(idx) = 1;
  }
  return d;
}

}  // namespace areuredi
