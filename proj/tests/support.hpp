#pragma once

// Naive reference computations used as test oracles. They share no code with
// the library beyond the state encoding.

#include <cmath>
#include <map>
#include <vector>

#include "areuredi/dfm.hpp"
#include "areuredi/seqspace.hpp"

namespace areuredi::testing {

// P(z_t, z_s) for the per-coordinate "has jumped to x1" indicator, z_t <= z_s.
inline double jump_joint(const PathSchedule& sched, double t, double s, int j, int zt, int zs) {
  const double kt = sched.kappa(t, j);
  const double ks = sched.kappa(s, j);
  if (zt == 0 && zs == 0) return 1.0 - ks;
  if (zt == 0 && zs == 1) return ks - kt;
  if (zt == 1 && zs == 1) return kt;
  return 0.0;
}

// p(x_t^j = a, x_s^j = b | x0, x1) by enumerating jump indicators.
inline double coord_pair_prob(const PathSchedule& sched, double t, double s, int j, Token x0, Token x1, Token a,
                              Token b) {
  double p = 0.0;
  for (int zt = 0; zt < 2; ++zt) {
    for (int zs = zt; zs < 2; ++zs) {
      const Token at = zt ? x1 : x0;
      const Token bs = zs ? x1 : x0;
      if (at == a && bs == b) p += jump_joint(sched, t, s, j, zt, zs);
    }
  }
  return p;
}

// Dense joint p(x_t, x_s), row-major [x_t][x_s].
inline std::vector<double> naive_joint(const Coupling& c, const PathSchedule& sched, double t, double s) {
  const auto& space = c.space();
  const auto n = space.size_or_zero();
  std::vector<double> joint(n * n, 0.0);
  for (const auto& pair : c.pairs()) {
    for (StateIndex a = 0; a < n; ++a) {
      const auto xa = space.decode(a);
      for (StateIndex b = 0; b < n; ++b) {
        const auto xb = space.decode(b);
        double p = pair.mass;
        for (int j = 0; j < space.length() && p > 0.0; ++j) {
          p *= coord_pair_prob(sched, t, s, j, pair.x0[j], pair.x1[j], xa[j], xb[j]);
        }
        joint[a * n + b] += p;
      }
    }
  }
  return joint;
}

// p_{s|t}(x_s^i = k | x_t), normalized; uniform when x_t has no mass.
inline std::vector<double> naive_posterior(const Coupling& c, const PathSchedule& sched, const Sequence& x_t,
                                           double t, double s, int i) {
  const auto& space = c.space();
  const int K = space.vocab_size();
  std::vector<double> out(static_cast<std::size_t>(K), 0.0);
  for (const auto& pair : c.pairs()) {
    double rest = pair.mass;
    for (int j = 0; j < space.length(); ++j) {
      if (j == i) continue;
      double pj = 0.0;
      for (Token b = 0; b < K; ++b) pj += coord_pair_prob(sched, t, s, j, pair.x0[j], pair.x1[j], x_t[j], b);
      rest *= pj;
    }
    for (Token k = 0; k < K; ++k) {
      out[k] += rest * coord_pair_prob(sched, t, s, i, pair.x0[i], pair.x1[i], x_t[i], k);
    }
  }
  double z = 0.0;
  for (double v : out) z += v;
  for (double& v : out) v = z > 0.0 ? v / z : 1.0 / K;
  return out;
}

// E_{x_t} KL(p(x_s | x_t) || prod_i p(x_s^i | x_t)) from the dense joint.
inline double naive_tc(const Coupling& c, const PathSchedule& sched, double t, double s) {
  const auto& space = c.space();
  const auto n = space.size_or_zero();
  const int L = space.length();
  const int K = space.vocab_size();
  const auto joint = naive_joint(c, sched, t, s);
  double tc = 0.0;
  for (StateIndex a = 0; a < n; ++a) {
    double pa = 0.0;
    for (StateIndex b = 0; b < n; ++b) pa += joint[a * n + b];
    if (pa <= 0.0) continue;
    std::vector<std::vector<double>> marg(L, std::vector<double>(K, 0.0));
    for (StateIndex b = 0; b < n; ++b) {
      const auto xb = space.decode(b);
      for (int i = 0; i < L; ++i) marg[i][xb[i]] += joint[a * n + b] / pa;
    }
    for (StateIndex b = 0; b < n; ++b) {
      const double p = joint[a * n + b] / pa;
      if (p <= 0.0) continue;
      const auto xb = space.decode(b);
      double q = 1.0;
      for (int i = 0; i < L; ++i) q *= marg[i][xb[i]];
      tc += pa * p * std::log(p / q);
    }
  }
  return tc;
}

inline Coupling diagonal_pair_coupling(const StateSpace& space, const std::vector<std::pair<Sequence, Sequence>>& pairs) {
  std::vector<CouplingPair> atoms;
  for (const auto& [a, b] : pairs) atoms.push_back({a, b, 1.0});
  return Coupling::exact(space, atoms);
}

}  // namespace areuredi::testing
