#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "psdcert/channel.hpp"
#include "psdcert/core.hpp"
#include "psdcert/fft.hpp"

namespace psdcert {

/// G(M~) of the count-to-magnetization transform, on a symmetric uniform
/// grid M_j = (j - N/2) * dx.  G is a positive combination of even functions
/// of M~, so values are even and non-negative whenever the input histogram
/// is a genuine distribution.
struct GFunction {
  std::vector<double> grid;    ///< M~ nodes (mu_B)
  std::vector<double> values;  ///< G at each node
  double lambda = 0.0;         ///< channel constant the transform used

  double spacing() const {
    if (grid.size() < 2) throw std::invalid_argument("GFunction: grid too small");
    return grid[1] - grid[0];
  }

  void validate() const {
    if (grid.size() != values.size() || grid.size() < 8)
      throw std::invalid_argument("GFunction: grid/values mismatch");
    if (!(lambda > 0.0)) throw std::invalid_argument("GFunction: lambda must be positive");
    const double dx = spacing();
    const std::size_t half = grid.size() / 2;
    if (std::abs(grid[half]) > 1e-9 * dx)
      throw std::invalid_argument("GFunction: grid must have a node at 0 (index N/2)");
    for (std::size_t j = 1; j < grid.size(); ++j)
      if (std::abs((grid[j] - grid[j - 1]) - dx) > 1e-9 * dx)
        throw std::invalid_argument("GFunction: grid must be uniform");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("GFunction: non-finite value");
  }
};

/// Grid and regularization choices for the Fourier deconvolution.
/// frequency_cutoff = 0 means no hard cutoff (Wiener floor only).  The grid
/// half width must cover at least six standard deviations of the pilot
/// magnetization scale; that is the caller's contract, checked indirectly by
/// the normalization bound below.
struct DeconvolutionSettings {
  double grid_half_width = 0.0;
  std::size_t grid_points = 4096;
  double regularization = 1e-6;      ///< Wiener floor epsilon relative to S_f(0)
  double frequency_cutoff = 0.0;     ///< hard cutoff omega_c (0 = off)
  double normalization_bound = 0.2;  ///< max tolerated |normalization - 1|

  void validate() const {
    if (!(grid_half_width > 0.0))
      throw std::invalid_argument("DeconvolutionSettings: grid_half_width must be positive");
    if (!detail::is_power_of_two(grid_points) || grid_points < 16)
      throw std::invalid_argument(
          "DeconvolutionSettings: grid_points must be a power of two, >= 16");
    if (!(regularization >= 0.0))
      throw std::invalid_argument("DeconvolutionSettings: regularization must be >= 0");
    if (frequency_cutoff < 0.0)
      throw std::invalid_argument("DeconvolutionSettings: frequency_cutoff must be >= 0");
    if (!(normalization_bound > 0.0))
      throw std::invalid_argument("DeconvolutionSettings: normalization_bound must be positive");
  }

  std::vector<double> make_grid() const {
    validate();
    const double dx = 2.0 * grid_half_width / static_cast<double>(grid_points);
    std::vector<double> g(grid_points);
    for (std::size_t j = 0; j < grid_points; ++j)
      g[j] = (static_cast<double>(j) - static_cast<double>(grid_points) / 2.0) * dx;
    return g;
  }
};

/// Analytic Fourier transform of the detection kernel f(M) = e^{-lambda M^2}:
/// S_f(omega) = sqrt(pi/lambda) e^{-omega^2/(4 lambda)}.
inline double kernel_transform(double omega, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("kernel_transform: lambda must be positive");
  return std::sqrt(3.141592653589793 / lambda) * std::exp(-omega * omega / (4.0 * lambda));
}

/// G(M~) = sum_n g(n) e^{-lambda M~^2} (n!/(2n)!) (4 lambda M~^2)^n.
/// Every term is evaluated in log space and combined by log-sum-exp per
/// node, so large supports cannot overflow; the support cap below guards
/// runtime, not range.
inline GFunction g_to_G(const PooledHistogram& pooled, const DetectionParams& params,
                        const std::vector<double>& grid) {
  pooled.validate();
  const double lambda = params.lambda();
  if (pooled.support_max > 1000000)
    throw std::runtime_error("g_to_G: histogram support n=" +
                             std::to_string(pooled.support_max) +
                             " too large for term-wise evaluation");
  const std::size_t S = pooled.probs.size();
  std::vector<double> c(S, 0.0);  // ln g(n) + ln n! - ln (2n)!
  for (std::size_t n = 0; n < S; ++n) {
    if (pooled.probs[n] <= 0.0) continue;
    const double nd = static_cast<double>(n);
    c[n] = std::log(pooled.probs[n]) + std::lgamma(nd + 1.0) - std::lgamma(2.0 * nd + 1.0);
  }
  GFunction out;
  out.grid = grid;
  out.lambda = lambda;
  out.values.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double x = lambda * grid[j] * grid[j];
    if (x == 0.0) {
      out.values[j] = pooled.probs[0];
      continue;
    }
    const double l4x = std::log(4.0 * x);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < S; ++n) {
      if (pooled.probs[n] <= 0.0) continue;
      peak = std::max(peak, c[n] + static_cast<double>(n) * l4x);
    }
    double acc = 0.0;
    for (std::size_t n = 0; n < S; ++n) {
      if (pooled.probs[n] <= 0.0) continue;
      acc += std::exp(c[n] + static_cast<double>(n) * l4x - peak);
    }
    out.values[j] = std::exp(peak - x) * acc;
  }
  out.validate();
  return out;
}

namespace detail {

/// Centered DFT pair for grids M_j = (j - N/2) dx, omega_k = 2 pi (k - N/2)/(N dx):
/// S_k = dx (-1)^{k + N/2} FFT[(-1)^j x_j]_k, and the inverse mirrors it.
inline std::vector<std::complex<double>> centered_dft(const std::vector<double>& x, double dx) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> a(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = (j & 1) ? -x[j] : x[j];
  fft_inplace(a);
  const double parity = (n / 2) % 2 == 0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) a[k] *= dx * parity * ((k & 1) ? -1.0 : 1.0);
  return a;
}

inline std::vector<double> centered_idft_real(std::vector<std::complex<double>> s, double dx) {
  const std::size_t n = s.size();
  const double parity = (n / 2) % 2 == 0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k)
    if (k & 1) s[k] = -s[k];
  ifft_unscaled_inplace(s);
  std::vector<double> out(n);
  const double scale = parity / (static_cast<double>(n) * dx);
  for (std::size_t j = 0; j < n; ++j) out[j] = scale * ((j & 1) ? -s[j].real() : s[j].real());
  return out;
}

}  // namespace detail

/// Fourier deconvolution of G into the marginal:
///   1. centered DFT of G,
///   2. divide by the kernel transform under a Wiener floor
///      max(S_f, eps S_f(0)), optionally zeroed above a hard cutoff,
///   3. inverse transform to h(M) = |M| F(M^2),
///   4. F on the squared grid y_j = (j dx)^2 as h/|M|, the M -> 0 node by
///      quadratic extrapolation (h vanishes linearly there, so the ratio is
///      finite but numerically 0/0).
/// The result keeps whatever normalization the data produced; a deviation
/// beyond settings.normalization_bound is an error, not a silent rescale.
/// Negative excursions are kept as-is: clipping would bias the moment
/// criterion toward classicality.
inline MarginalDistribution deconvolve(const GFunction& G, const DeconvolutionSettings& settings) {
  G.validate();
  settings.validate();
  const std::size_t N = G.grid.size();
  if (!detail::is_power_of_two(N))
    throw std::invalid_argument("deconvolve: grid size must be a power of two");
  const double dx = G.spacing();

  std::vector<std::complex<double>> spec = detail::centered_dft(G.values, dx);
  const double floor_val = settings.regularization * kernel_transform(0.0, G.lambda);
  for (std::size_t k = 0; k < N; ++k) {
    const double omega = 6.283185307179586 *
                         (static_cast<double>(k) - static_cast<double>(N) / 2.0) /
                         (static_cast<double>(N) * dx);
    if (settings.frequency_cutoff > 0.0 && std::abs(omega) > settings.frequency_cutoff) {
      spec[k] = 0.0;
      continue;
    }
    spec[k] /= std::max(kernel_transform(omega, G.lambda), floor_val);
  }
  const std::vector<double> h = detail::centered_idft_real(std::move(spec), dx);

  const std::size_t half = N / 2;
  std::vector<double> grid_y(half), density(half);
  grid_y[0] = 0.0;
  for (std::size_t j = 1; j < half; ++j) {
    const double m = static_cast<double>(j) * dx;
    grid_y[j] = m * m;
    density[j] = 0.5 * (h[half + j] + h[half - j]) / m;  // symmetrized h / |M|
  }
  if (half < 4) throw std::invalid_argument("deconvolve: grid too small");
  density[0] = detail::quadratic_extrapolate(0.0, grid_y[1], density[1], grid_y[2], density[2],
                                             grid_y[3], density[3]);
  MarginalDistribution out = MarginalDistribution::from_density(std::move(grid_y),
                                                                std::move(density));
  if (std::abs(out.normalization - 1.0) > settings.normalization_bound)
    throw std::runtime_error(
        "deconvolve: achieved normalization " + std::to_string(out.normalization) +
        " is out of bounds; enlarge the grid, weaken the regularization, or check lambda");
  return out;
}

/// Direct quadrature of the forward convolution
///   G(M~) = int dy F(y) (1/2)[e^{-lambda(sqrt(y)-M~)^2} + e^{-lambda(sqrt(y)+M~)^2}].
/// Used for round trips and the predicted-counts consistency curve.
inline GFunction forward_convolve(const MarginalDistribution& marginal, double lambda,
                                  const std::vector<double>& grid) {
  marginal.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("forward_convolve: lambda must be positive");
  const std::vector<double> w = detail::trapezoid_weights(marginal.grid);
  std::vector<double> m_nodes(marginal.grid.size());
  for (std::size_t i = 0; i < marginal.grid.size(); ++i) m_nodes[i] = std::sqrt(marginal.grid[i]);
  GFunction out;
  out.grid = grid;
  out.lambda = lambda;
  out.values.assign(grid.size(), 0.0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double mt = grid[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < marginal.grid.size(); ++i) {
      const double wf = w[i] * marginal.density[i];
      if (wf == 0.0) continue;
      const double dm = m_nodes[i] - mt;
      const double dp = m_nodes[i] + mt;
      acc += wf * 0.5 * (std::exp(-lambda * dm * dm) + std::exp(-lambda * dp * dp));
    }
    out.values[j] = acc;
  }
  return out;
}

/// Full reconstruction: histogram -> G -> marginal, plus the predicted
/// histogram of the result for the self-consistency curve.  The prediction
/// is truncated at the input support on purpose; its truncation_mass simply
/// reports how much predicted mass lies beyond the observed range.
inline std::pair<MarginalDistribution, ChannelPrediction> reconstruct_marginal(
    const PooledHistogram& pooled, const DetectionParams& params,
    const DeconvolutionSettings& settings) {
  const GFunction G = g_to_G(pooled, params, settings.make_grid());
  MarginalDistribution marginal = deconvolve(G, settings);
  ChannelPrediction prediction =
      predict_histogram(marginal, params, pooled.support_max, /*trunc_tol=*/1.0);
  return {std::move(marginal), std::move(prediction)};
}

}  // namespace psdcert
