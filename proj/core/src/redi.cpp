#include "areuredi/redi.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "areuredi/errors.hpp"
#include "bridge_enum.hpp"
#include "json_compat.hpp"

namespace areuredi {
namespace {

struct CoordJoint {
  Token xt;
  Token xs;
  double p;
};

// Per-coordinate joint law of (x_t^j, x_s^j) given the endpoints.
void coordinate_joint(Token a, Token b, double kt, double jump, std::vector<CoordJoint>& out) {
  out.clear();
  if (a == b) {
    out.push_back({a, a, 1.0});
    return;
  }
  if (kt > 0.0) out.push_back({b, b, kt});
  if (kt < 1.0) {
    if (jump > 0.0) out.push_back({a, b, (1.0 - kt) * jump});
    if (jump < 1.0) out.push_back({a, a, (1.0 - kt) * (1.0 - jump)});
  }
}

// p(x_s^j = y | x_t^j, endpoints), as a function of y.
inline double coordinate_step(Token xt, Token xs, Token a, Token b, double jump) {
  if (a != b && xt == a) {
    if (xs == b) return jump;
    if (xs == a) return 1.0 - jump;
    return 0.0;
  }
  return xs == xt ? 1.0 : 0.0;
}

struct TcFrame {
  std::vector<double> kt;
  std::vector<double> jump;
};

TcFrame frame(const PathSchedule& schedule, double t, double s, int length) {
  if (!(t >= 0.0 && t < s && s <= 1.0)) throw DomainError("conditional TC requires 0 <= t < s <= 1");
  TcFrame f;
  for (int j = 0; j < length; ++j) {
    f.kt.push_back(schedule.kappa(t, j));
    f.jump.push_back(schedule.jump_probability(t, s, j));
  }
  return f;
}

}  // namespace

TcEstimate conditional_tc_exact(const Coupling& coupling, const PathSchedule& schedule, double t, double s,
                                std::uint64_t cap) {
  const auto& space = coupling.space();
  schedule.check_length(space.length());
  const auto n = space.require_enumerable(cap);
  if (n > 0 && n > cap / n) throw ResourceError("joint (x_t, x_s) table exceeds the enumeration cap");
  const int length = space.length();
  const int k = space.vocab_size();
  const auto f = frame(schedule, t, s, length);
  const auto pw = detail::radix_powers(space);

  std::vector<double> joint(n * n, 0.0);
  std::vector<std::vector<CoordJoint>> options(static_cast<std::size_t>(length));
  std::vector<std::size_t> pos(static_cast<std::size_t>(length));
  for (const auto& pair : coupling.pairs()) {
    for (int j = 0; j < length; ++j) coordinate_joint(pair.x0[j], pair.x1[j], f.kt[j], f.jump[j], options[j]);
    std::fill(pos.begin(), pos.end(), 0);
    for (;;) {
      StateIndex it = 0, is = 0;
      double p = pair.mass;
      for (int j = 0; j < length; ++j) {
        const auto& o = options[j][pos[j]];
        it += static_cast<StateIndex>(o.xt) * pw[j];
        is += static_cast<StateIndex>(o.xs) * pw[j];
        p *= o.p;
      }
      joint[it * n + is] += p;
      int j = 0;
      while (j < length && ++pos[j] == options[j].size()) pos[j++] = 0;
      if (j == length) break;
    }
  }

  double tc = 0.0;
  Sequence xs(static_cast<std::size_t>(length));
  std::vector<double> marg(static_cast<std::size_t>(length * k));
  for (StateIndex a = 0; a < n; ++a) {
    const double* row = joint.data() + a * n;
    double pt = 0.0;
    for (StateIndex b = 0; b < n; ++b) pt += row[b];
    if (pt <= 0.0) continue;
    std::fill(marg.begin(), marg.end(), 0.0);
    for (StateIndex b = 0; b < n; ++b) {
      if (row[b] == 0.0) continue;
      space.decode_into(b, xs);
      for (int i = 0; i < length; ++i) marg[i * k + xs[i]] += row[b] / pt;
    }
    for (StateIndex b = 0; b < n; ++b) {
      if (row[b] <= 0.0) continue;
      space.decode_into(b, xs);
      double log_prod = 0.0;
      for (int i = 0; i < length; ++i) log_prod += std::log(marg[i * k + xs[i]]);
      tc += row[b] * (std::log(row[b] / pt) - log_prod);
    }
  }
  TcEstimate out;
  out.value = tc;
  out.method = TcMethod::exact;
  return out;
}

TcEstimate conditional_tc_mc(const Coupling& coupling, const PathSchedule& schedule, double t, double s, Rng& rng,
                             TcMonteCarloOptions options) {
  if (options.batch_size < 2) throw DomainError("TC estimation needs batch_size >= 2");
  if (options.n_batches < 2) throw DomainError("TC estimation needs at least two batches");
  if (options.method == TcMethod::exact) throw DomainError("use conditional_tc_exact for the exact method");
  const auto& space = coupling.space();
  schedule.check_length(space.length());
  const int length = space.length();
  const int k = space.vocab_size();
  const auto f = frame(schedule, t, s, length);
  const auto pairs = coupling.pairs();
  std::vector<double> masses;
  masses.reserve(pairs.size());
  for (const auto& p : pairs) masses.push_back(p.mass);

  TcEstimate out;
  out.method = options.method;
  out.n_batches = options.n_batches;
  out.batch_size = options.batch_size;

  std::vector<double> batch_values;
  std::vector<double> atom_w(pairs.size());
  std::vector<double> marg(static_cast<std::size_t>(length * k));
  for (int b = 0; b < options.n_batches; ++b) {
    std::vector<std::pair<Sequence, Sequence>> batch;
    batch.reserve(static_cast<std::size_t>(options.batch_size));
    for (int m = 0; m < options.batch_size; ++m) {
      const auto& pair = pairs[rng.categorical(masses)];
      Sequence xt(pair.x0);
      Sequence xs(pair.x0);
      for (int j = 0; j < length; ++j) {
        const double u1 = rng.uniform();
        const double u2 = rng.uniform();
        if (pair.x0[j] == pair.x1[j]) continue;
        if (u1 < f.kt[j]) {
          xt[j] = xs[j] = pair.x1[j];
        } else if (u2 < f.jump[j]) {
          xs[j] = pair.x1[j];
        }
      }
      batch.emplace_back(std::move(xt), std::move(xs));
    }

    double value = 0.0;
    if (options.method == TcMethod::monte_carlo) {
      for (const auto& [xt, xs] : batch) {
        double total = 0.0;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          atom_w[p] = pairs[p].mass * bridge_probability(xt, pairs[p].x0, pairs[p].x1, t, schedule);
          total += atom_w[p];
        }
        double joint = 0.0;
        std::vector<double> coord(static_cast<std::size_t>(length), 0.0);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          if (atom_w[p] == 0.0) continue;
          const auto& a = pairs[p].x0;
          const auto& c = pairs[p].x1;
          double prod = atom_w[p] / total;
          for (int j = 0; j < length; ++j) {
            const double step = coordinate_step(xt[j], xs[j], a[j], c[j], f.jump[j]);
            coord[j] += atom_w[p] / total * step;
            prod *= step;
          }
          joint += prod;
        }
        double log_prod = 0.0;
        for (int j = 0; j < length; ++j) {
          if (coord[j] < options.smoothing) {
            coord[j] = options.smoothing;
            ++out.smoothed;
          }
          log_prod += std::log(coord[j]);
        }
        value += std::log(std::max(joint, options.smoothing)) - log_prod;
      }
      value /= options.batch_size;
    } else {
      std::map<Sequence, std::map<Sequence, int>> counts;
      for (const auto& [xt, xs] : batch) ++counts[xt][xs];
      for (const auto& [xt, row] : counts) {
        int n_ctx = 0;
        for (const auto& [xs, c] : row) n_ctx += c;
        std::fill(marg.begin(), marg.end(), 0.0);
        for (const auto& [xs, c] : row) {
          for (int i = 0; i < length; ++i) marg[i * k + xs[i]] += c;
        }
        for (double& m : marg) {
          if (m == 0.0) ++out.smoothed;
          m = (m + options.smoothing) / (n_ctx + k * options.smoothing);
        }
        double kl = 0.0;
        for (const auto& [xs, c] : row) {
          const double p = static_cast<double>(c) / n_ctx;
          double log_prod = 0.0;
          for (int i = 0; i < length; ++i) log_prod += std::log(marg[i * k + xs[i]]);
          kl += p * (std::log(p) - log_prod);
        }
        value += static_cast<double>(n_ctx) / options.batch_size * kl;
      }
    }
    batch_values.push_back(value);
  }

  double mean = 0.0;
  for (double v : batch_values) mean += v;
  mean /= static_cast<double>(batch_values.size());
  double var = 0.0;
  for (double v : batch_values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(batch_values.size() - 1);
  out.value = mean;
  out.std_error = std::sqrt(var / static_cast<double>(batch_values.size()));
  return out;
}

Coupling rectify_multiplicative(const Coupling& coupling, const FactorizedDenoiser& d, int steps) {
  if (coupling.kind() != Coupling::Kind::exact_table) throw DomainError("multiplicative update needs an exact table");
  const auto& space = coupling.space();
  const auto n = space.require_enumerable(d.options().cap);
  const auto chain = chain_transition(d, steps);
  const auto p0 = coupling.source_marginal();
  std::vector<double> p1(n, 0.0);
  for (StateIndex a = 0; a < n; ++a) {
    if (p0[a] == 0.0) continue;
    for (StateIndex b = 0; b < n; ++b) p1[b] += p0[a] * chain[a * n + b];
  }
  std::vector<CouplingPair> out;
  double total = 0.0;
  for (const auto& pair : coupling.pairs()) {
    const auto a = space.encode(pair.x0);
    const auto b = space.encode(pair.x1);
    if (p1[b] <= 0.0) {
      throw NumericalError("model marginal p(x1) vanishes on a coupled target " + to_string(pair.x1));
    }
    const double m = pair.mass * chain[a * n + b] / p1[b];
    total += m;
    out.push_back({pair.x0, pair.x1, m});
  }
  if (!(total > 0.0)) throw NumericalError("multiplicative update removed all coupling mass");
  return Coupling::exact(space, std::move(out), d.options().cap);
}

Coupling rectify_model_coupling(const Coupling& coupling, const FactorizedDenoiser& d, int steps) {
  const auto& space = coupling.space();
  const auto n = space.require_enumerable(d.options().cap);
  const auto chain = chain_transition(d, steps);
  const auto p0 = coupling.source_marginal();
  std::vector<double> table(n * n, 0.0);
  for (StateIndex a = 0; a < n; ++a) {
    if (p0[a] == 0.0) continue;
    for (StateIndex b = 0; b < n; ++b) table[a * n + b] = p0[a] * chain[a * n + b];
  }
  return Coupling::from_table(space, table, d.options().cap);
}

Coupling rectify_empirical(const FactorizedDenoiser& d, std::span<const double> p0, int n_pairs, int steps, Rng& rng) {
  if (n_pairs < 1) throw DomainError("empirical rectification needs n_pairs >= 1");
  const auto& space = d.space();
  const auto n = space.require_enumerable(d.options().cap);
  if (p0.size() != n) throw DomainError("source distribution must have K^L entries");
  std::vector<std::pair<Sequence, Sequence>> samples;
  samples.reserve(static_cast<std::size_t>(n_pairs));
  for (int m = 0; m < n_pairs; ++m) {
    auto x0 = space.decode(rng.categorical(p0));
    auto x1 = euler_sample(d, x0, steps, rng);
    samples.emplace_back(std::move(x0), std::move(x1));
  }
  return Coupling::empirical(space, std::move(samples));
}

std::string to_string(RectifyMode mode) {
  switch (mode) {
    case RectifyMode::multiplicative:
      return "multiplicative";
    case RectifyMode::model_coupling:
      return "model_coupling";
    case RectifyMode::empirical:
      return "empirical";
  }
  return "multiplicative";
}

RectifyMode rectify_mode_from_string(const std::string& name) {
  if (name == "multiplicative") return RectifyMode::multiplicative;
  if (name == "model_coupling") return RectifyMode::model_coupling;
  if (name == "empirical") return RectifyMode::empirical;
  throw DomainError("unknown rectification mode: " + name);
}

namespace {

std::vector<TcPoint> tc_grid(const Coupling& coupling, const PathSchedule& schedule, int tc_steps) {
  const auto exact = coupling.kind() == Coupling::Kind::exact_table ? coupling : coupling.as_exact();
  std::vector<TcPoint> out;
  for (int a = 0; a < tc_steps; ++a) {
    for (int b = a + 1; b <= tc_steps; ++b) {
      TcPoint p;
      p.t = static_cast<double>(a) / tc_steps;
      p.s = static_cast<double>(b) / tc_steps;
      p.before = conditional_tc_exact(exact, schedule, p.t, p.s).value;
      out.push_back(p);
    }
  }
  return out;
}

double headline(const std::vector<TcPoint>& points) {
  for (const auto& p : points) {
    if (p.t == 0.0 && p.s == 1.0) return p.before;
  }
  return points.empty() ? 0.0 : points.front().before;
}

}  // namespace

std::vector<RectificationRound> rectification_loop(const Coupling& initial, int rounds, const PathSchedule& schedule,
                                                   const RectifyConfig& config) {
  if (rounds < 1) throw DomainError("rectification needs rounds >= 1");
  if (config.tc_steps < 1) throw DomainError("tc_steps must be >= 1");
  Coupling current = initial;
  if (config.mode != RectifyMode::empirical && current.kind() != Coupling::Kind::exact_table) {
    current = current.as_exact();
  }
  auto tc_current = tc_grid(current, schedule, config.tc_steps);
  std::vector<RectificationRound> out;
  for (int r = 0; r < rounds; ++r) {
    const auto d = fit_exact_denoiser(current, schedule, config.steps, config.denoiser);
    Coupling next = [&] {
      switch (config.mode) {
        case RectifyMode::multiplicative:
          return rectify_multiplicative(current, d, config.steps);
        case RectifyMode::model_coupling:
          return rectify_model_coupling(current, d, config.steps);
        case RectifyMode::empirical: {
          Rng rng(config.seed, static_cast<std::uint64_t>(r));
          return rectify_empirical(d, current.source_marginal(), config.n_pairs, config.steps, rng);
        }
      }
      return current;
    }();
    auto tc_next = tc_grid(next, schedule, config.tc_steps);
    RectificationRound round{r, current, next, tc_current, headline(tc_current), headline(tc_next)};
    for (std::size_t p = 0; p < round.tc.size(); ++p) round.tc[p].after = tc_next[p].before;
    out.push_back(std::move(round));
    current = std::move(next);
    tc_current = std::move(tc_next);
  }
  return out;
}

std::string round_to_jsonl(const RectificationRound& round, const RectifyConfig& config) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : round.tc) pairs.push_back({{"t", p.t}, {"s", p.s}, {"before", p.before}, {"after", p.after}});
  const nlohmann::json line{{"round", round.round},      {"tc_before", round.tc_before},
                            {"tc_after", round.tc_after}, {"method", to_string(config.mode)},
                            {"seed", config.seed},        {"pairs", std::move(pairs)}};
  return line.dump();
}

}  // namespace areuredi
