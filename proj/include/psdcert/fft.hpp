#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace psdcert::detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place radix-2 decimation-in-time FFT, forward sign convention
/// X_k = sum_j x_j e^{-2 pi i j k / N}.
inline void fft_inplace(std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -6.283185307179586476925287 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

/// Unscaled inverse FFT: x_j = sum_k X_k e^{+2 pi i j k / N} (divide by N for
/// the true inverse).
inline void ifft_unscaled_inplace(std::vector<std::complex<double>>& x) {
  for (auto& v : x) v = std::conj(v);
  fft_inplace(x);
  for (auto& v : x) v = std::conj(v);
}

}  // namespace psdcert::detail
