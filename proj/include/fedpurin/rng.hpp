#pragma once

// Portable pseudo-random numbers.
//
// The standard library's distributions are implementation-defined, so every
// sampler used by the simulator is written out here on top of SplitMix64.
// Given the same seed, any conforming implementation of these algorithms
// reproduces the same stream:
//
//   next():     SplitMix64 (Steele, Lea, Flood 2014), state += 0x9E3779B97F4A7C15
//   uniform():  top 53 bits of next() scaled by 2^-53, in [0, 1)
//   normal():   Marsaglia polar method, second variate cached
//   gamma():    Marsaglia-Tsang squeeze for shape >= 1; for shape < 1 the
//               boost G(a) = G(a+1) * U^(1/a), returned in log space by
//               log_gamma_variate() so tiny shapes do not underflow
//   below(n):   Lemire's multiply-shift with rejection

#include <cstdint>
#include <limits>

namespace fedpurin::rng {

/// One SplitMix64 output step applied to `x`; used to derive child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for a (parent, a, b) stream, e.g. (run seed, client id, round).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0) noexcept;

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }
  result_type next() noexcept;

  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;
  /// Gamma(shape, 1) for shape > 0.
  double gamma(double shape) noexcept;
  /// log of a Gamma(shape, 1) draw; finite even when the draw underflows.
  double log_gamma_variate(double shape) noexcept;

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedpurin::rng
