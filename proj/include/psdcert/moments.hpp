#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "psdcert/channel.hpp"
#include "psdcert/core.hpp"

namespace psdcert {

/// Axis moments <M^{2k}> = int y^k F(y) dy / int F(y) dy by trapezoid on the
/// marginal's own grid, k = 1..k_max.
///
/// The tail check guards the precondition that the grid actually covers the
/// k-th integrand: the top 5% of the grid may hold at most tail_tol of the
/// integrand's absolute mass, else the first failing k is reported.  The
/// default is the strict noiseless contract; noisy reconstructions carry
/// band-limited noise into the tail band and must relax or disable it (the
/// statistical quality control is then the bootstrap spread downstream).
inline AxisMoments axis_moments_from_marginal(const MarginalDistribution& marginal, int k_max,
                                              double tail_tol = 1e-6) {
  marginal.validate();
  if (k_max < 1) throw std::invalid_argument("axis_moments_from_marginal: k_max must be >= 1");
  if (!(marginal.normalization > 0.0))
    throw std::invalid_argument("axis_moments_from_marginal: non-positive normalization");
  const std::vector<double> w = detail::trapezoid_weights(marginal.grid);
  const std::size_t n = marginal.grid.size();
  const std::size_t tail_start = n - std::max<std::size_t>(1, n / 20);
  std::vector<double> values(static_cast<std::size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) {
    double total = 0.0, abs_total = 0.0, abs_tail = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double term = w[j] * marginal.density[j] * std::pow(marginal.grid[j], k);
      total += term;
      abs_total += std::abs(term);
      if (j >= tail_start) abs_tail += std::abs(term);
    }
    if (abs_total > 0.0 && abs_tail > tail_tol * abs_total)
      throw std::runtime_error(
          "axis_moments_from_marginal: grid tail holds " + std::to_string(abs_tail / abs_total) +
          " of the integrand, first failing at k=" + std::to_string(k) +
          "; extend the grid or relax tail_tol");
    values[static_cast<std::size_t>(k - 1)] = total / marginal.normalization;
  }
  return AxisMoments::from_values(std::move(values), "deconvolution");
}

/// Axis moments from falling-factorial moments of the pooled counts:
/// the k-th factorial moment of a Poisson mixture is lambda^k <M^{2k}>, so
/// <M^{2k}> = sum_n g(n) n(n-1)...(n-k+1) / lambda^k.  No deconvolution, no
/// regularization bias.
inline AxisMoments axis_moments_factorial(const PooledHistogram& pooled,
                                          const DetectionParams& params, int k_max) {
  pooled.validate();
  if (k_max < 1) throw std::invalid_argument("axis_moments_factorial: k_max must be >= 1");
  if (pooled.support_max < k_max)
    throw std::invalid_argument(
        "axis_moments_factorial: histogram support " + std::to_string(pooled.support_max) +
        " cannot carry factorial moments to k=" + std::to_string(k_max));
  const double lambda = params.lambda();
  std::vector<double> values(static_cast<std::size_t>(k_max), 0.0);
  for (std::size_t n = 0; n < pooled.probs.size(); ++n) {
    if (pooled.probs[n] == 0.0) continue;
    double falling = 1.0;
    for (int k = 1; k <= k_max; ++k) {
      falling *= static_cast<double>(n) - static_cast<double>(k - 1);
      if (falling <= 0.0) break;  // n < k: the factorial term is 0 from here on
      values[static_cast<std::size_t>(k - 1)] += pooled.probs[n] * falling;
    }
  }
  double lam_k = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    lam_k *= lambda;
    values[static_cast<std::size_t>(k - 1)] /= lam_k;
  }
  return AxisMoments::from_values(std::move(values), "factorial");
}

/// Radial moments from axis moments: <M_rho^{2k}> = <M^{2k}> 2^{2k}/C(2k,k).
/// The rational factor is built from exact integers (4^k and the central
/// binomial are both below 2^53 for k <= 16) and applied in one multiply.
inline RadialMoments radial_from_axis(const AxisMoments& axis) {
  if (axis.k_max < 1) throw std::invalid_argument("radial_from_axis: empty axis moments");
  if (axis.k_max > 16)
    throw std::invalid_argument("radial_from_axis: exact integer factors cover k <= 16 only");
  std::vector<double> values(axis.values.size());
  for (int k = 1; k <= axis.k_max; ++k) {
    std::uint64_t binom = 1;  // C(k+j, j) stays integral at every step
    for (int j = 1; j <= k; ++j) binom = binom * static_cast<std::uint64_t>(k + j) /
                                         static_cast<std::uint64_t>(j);
    const double factor = static_cast<double>(std::uint64_t{1} << (2 * k)) /
                          static_cast<double>(binom);
    values[static_cast<std::size_t>(k - 1)] =
        axis.values[static_cast<std::size_t>(k - 1)] * factor;
  }
  return RadialMoments::from_values(std::move(values), axis.route);
}

}  // namespace psdcert
