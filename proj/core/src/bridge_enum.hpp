#pragma once

#include <span>
#include <vector>

#include "areuredi/errors.hpp"
#include "areuredi/seqspace.hpp"

namespace areuredi::detail {

// Radix weights K^j for j = 0..L-1.
inline std::vector<StateIndex> radix_powers(const StateSpace& space) {
  std::vector<StateIndex> pw(static_cast<std::size_t>(space.length()));
  StateIndex p = 1;
  for (auto& v : pw) {
    v = p;
    p *= static_cast<StateIndex>(space.vocab_size());
  }
  return pw;
}

// Calls fn(index, probability) for every x_t with positive bridge probability
// given endpoints (x0, x1) and per-coordinate mixing coefficients kap.
template <class Fn>
void for_each_bridge_state(std::span<const StateIndex> pw, std::span<const Token> x0, std::span<const Token> x1,
                           std::span<const double> kap, Fn&& fn) {
  StateIndex base = 0;
  int free_coords[64];
  int n_free = 0;
  const int length = static_cast<int>(x0.size());
  if (length > 62) throw ResourceError("bridge enumeration limited to 62 coordinates");
  for (int j = 0; j < length; ++j) {
    if (x0[j] == x1[j] || kap[j] <= 0.0) {
      base += static_cast<StateIndex>(x0[j]) * pw[j];
    } else if (kap[j] >= 1.0) {
      base += static_cast<StateIndex>(x1[j]) * pw[j];
    } else {
      free_coords[n_free++] = j;
    }
  }
  const std::uint64_t combos = std::uint64_t{1} << n_free;
  for (std::uint64_t mask = 0; mask < combos; ++mask) {
    StateIndex idx = base;
    double p = 1.0;
    for (int b = 0; b < n_free; ++b) {
      const int j = free_coords[b];
      if ((mask >> b) & 1u) {
        idx += static_cast<StateIndex>(x1[j]) * pw[j];
        p *= kap[j];
      } else {
        idx += static_cast<StateIndex>(x0[j]) * pw[j];
        p *= 1.0 - kap[j];
      }
    }
    fn(idx, p);
  }
}

}  // namespace areuredi::detail
