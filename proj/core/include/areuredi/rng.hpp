#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace areuredi {

// Philox4x32-10 counter-based generator.
//
// Every random stream is addressed by (seed, stream). The 64-bit seed is the
// Philox key; the 64-bit stream index occupies the two high counter words and
// the block counter the two low words. Stream indices are assigned by callers:
// chain c of a run uses stream `c`, run-matrix cell k uses `(k << 32) | c`.
// Outputs therefore do not depend on thread scheduling.
class Philox {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform integer in [0, n); n > 0. Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept;
  // Index drawn proportionally to nonnegative weights (need not be normalized).
  std::size_t categorical(std::span<const double> weights) noexcept;
  // Standard exponential variate.
  double exponential() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  // Raw ten-round bijection, exposed for known-answer tests.
  static Block bijection(Block counter, Key key) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int used_ = 4;
};

using Rng = Philox;

}  // namespace areuredi
