#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace psdcert {

// Extended-precision scalar for the ill-conditioned solve tier.  gcc/clang
// provide __float128 on x86-64; elsewhere long double is the best available
// stand-in and the acceptance suite will say so if it is not enough.
#if defined(__SIZEOF_FLOAT128__)
using quad = __float128;
#else
using quad = long double;
#endif

namespace detail {

template <class T>
T scalar_abs(T x) {
  return x < T(0) ? -x : x;
}

/// sqrt for any float-like scalar: Newton iterations from a double seed.
/// Three iterations quadruple, then octuple, the seed's 53 bits, which
/// saturates binary128's 113-bit significand.
template <class T>
T scalar_sqrt(T x) {
  if (x <= T(0)) return T(0);
  T r = T(std::sqrt(static_cast<double>(x)));
  for (int i = 0; i < 3; ++i) r = T(0.5) * (r + x / r);
  return r;
}

template <class T>
struct SymEig {
  std::vector<T> eigenvalues;  ///< ascending by absolute value not guaranteed; raw order
  std::vector<T> vectors;      ///< column j (vectors[i + n j]) pairs with eigenvalues[j]
};

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix (row-major,
/// n x n).  Unconditionally stable, precision-agnostic, and entirely
/// adequate for the criterion's tiny matrices (n <= 16).
template <class T>
SymEig<T> jacobi_symmetric_eigen(std::vector<T> a, int n, T rel_tol) {
  if (n < 1 || static_cast<int>(a.size()) != n * n)
    throw std::invalid_argument("jacobi_symmetric_eigen: bad dimensions");
  std::vector<T> v(static_cast<std::size_t>(n) * n, T(0));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * i] = T(1);
  auto at = [&](std::vector<T>& m, int i, int j) -> T& {
    return m[static_cast<std::size_t>(i) * n + j];
  };
  T fro = T(0);
  for (const T& x : a) fro += x * x;
  fro = scalar_sqrt(fro);
  const T stop = rel_tol * (fro > T(0) ? fro : T(1));
  for (int sweep = 0; sweep < 100; ++sweep) {
    T off = T(0);
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    off = scalar_sqrt(T(2) * off);
    if (off <= stop) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const T apq = at(a, p, q);
        if (scalar_abs(apq) <= stop / T(n * n)) continue;
        const T theta = (at(a, q, q) - at(a, p, p)) / (T(2) * apq);
        const T t = (theta >= T(0) ? T(1) : T(-1)) /
                    (scalar_abs(theta) + scalar_sqrt(theta * theta + T(1)));
        const T c = T(1) / scalar_sqrt(t * t + T(1));
        const T s = t * c;
        for (int i = 0; i < n; ++i) {
          const T aip = at(a, i, p), aiq = at(a, i, q);
          at(a, i, p) = c * aip - s * aiq;
          at(a, i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const T api = at(a, p, i), aqi = at(a, q, i);
          at(a, p, i) = c * api - s * aqi;
          at(a, q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const T vip = v[static_cast<std::size_t>(i) * n + p];
          const T viq = v[static_cast<std::size_t>(i) * n + q];
          v[static_cast<std::size_t>(i) * n + p] = c * vip - s * viq;
          v[static_cast<std::size_t>(i) * n + q] = s * vip + c * viq;
        }
      }
    }
  }
  SymEig<T> out;
  out.eigenvalues.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.eigenvalues[static_cast<std::size_t>(i)] = at(a, i, i);
  // vectors stored column-major: column j = eigenvector j
  out.vectors.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.vectors[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * j] =
          v[static_cast<std::size_t>(i) * n + j];
  return out;
}

}  // namespace detail
}  // namespace psdcert
