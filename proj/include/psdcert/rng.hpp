#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace psdcert {

/// Counter-based random stream with keyed substream derivation.
///
/// A stream is (key, counter); draw i of a stream depends only on the key
/// and i, so streams can be forked per (angle, pulse) or per bootstrap
/// replicate and consumed in any order without affecting each other.
/// The generator is the splitmix64 output function over a Weyl sequence.
class RngStream {
public:
  explicit RngStream(std::uint64_t key) noexcept : key_(key) {}

  /// Child stream identified by (parent key, index); independent of the
  /// parent's position.
  RngStream substream(std::uint64_t index) const noexcept {
    return RngStream(mix(key_ ^ mix(index + 0x632be59bd9b4e019ull)));
  }

  std::uint64_t next_u64() noexcept {
    counter_ += 0x9e3779b97f4a7c15ull;
    return mix(key_ + counter_);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double next_uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound); rejection keeps it unbiased.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    const std::uint64_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % bound;
    }
  }

  /// Standard normal via Box-Muller; consumes two uniforms per draw.
  double next_normal() noexcept {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  /// Poisson draw with mean chi.  Inversion by sequential search for small
  /// means, Hormann's PTRS transformed rejection (1993) above 30.
  std::uint64_t next_poisson(double chi) {
    if (!(chi >= 0.0)) throw std::invalid_argument("next_poisson: mean must be non-negative");
    if (chi == 0.0) return 0;
    if (chi < 30.0) return poisson_inversion(chi);
    return poisson_ptrs(chi);
  }

private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t poisson_inversion(double chi) noexcept {
    const double u = next_uniform();
    double p = std::exp(-chi);
    double cum = p;
    std::uint64_t n = 0;
    while (u > cum && p > 0.0 && n < 10000) {
      ++n;
      p *= chi / static_cast<double>(n);
      cum += p;
    }
    return n;
  }

  std::uint64_t poisson_ptrs(double chi) noexcept {
    const double smu = std::sqrt(chi);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = next_uniform() - 0.5;
      const double v = next_uniform();
      const double us = 0.5 - std::abs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + chi + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -chi + kf * std::log(chi) - std::lgamma(kf + 1.0)) {
        return static_cast<std::uint64_t>(kf);
      }
    }
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace psdcert
