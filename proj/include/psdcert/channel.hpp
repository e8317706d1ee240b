#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "psdcert/core.hpp"
#include "psdcert/rng.hpp"

namespace psdcert {

/// Predicted photon-count distribution under the detection channel, truncated
/// at a finite n_max.  probs.size() = n_max + 1; the mass assigned to counts
/// beyond n_max is reported, never dropped silently.
struct ChannelPrediction {
  std::vector<double> probs;
  double truncation_mass = 0.0;

  void validate() const {
    double sum = truncation_mass;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("ChannelPrediction: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("ChannelPrediction: probs + truncation_mass must sum to 1");
  }
};

/// Mean detected photon number chi = lambda * M^2.
inline double mean_detected(double M_sq, const DetectionParams& params) {
  if (!(M_sq >= 0.0)) throw std::invalid_argument("mean_detected: M_sq must be non-negative");
  return params.lambda() * M_sq;
}

/// Poisson probability e^{-chi} chi^n / n!, evaluated in log space so large
/// n and chi stay accurate.
inline double poisson_pmf(std::int64_t n, double chi) {
  if (n < 0) throw std::invalid_argument("poisson_pmf: n must be non-negative");
  if (!(chi >= 0.0)) throw std::invalid_argument("poisson_pmf: chi must be non-negative");
  if (chi == 0.0) return n == 0 ? 1.0 : 0.0;
  if (n == 0) return std::exp(-chi);
  const double nd = static_cast<double>(n);
  return std::exp(nd * std::log(chi) - chi - std::lgamma(nd + 1.0));
}

namespace detail {

/// Negative-binomial pmf over n = 0..n_max for half-integer shape r and
/// success probability p, via the stable ratio recursion
/// g(n) = g(n-1) * p * (n - 1 + r) / n,  g(0) = (1 - p)^r.
inline std::vector<double> nb_pmf_table(double r, double p, std::int64_t n_max) {
  std::vector<double> g(static_cast<std::size_t>(n_max) + 1);
  g[0] = std::pow(1.0 - p, r);
  for (std::int64_t n = 1; n <= n_max; ++n)
    g[static_cast<std::size_t>(n)] =
        g[static_cast<std::size_t>(n - 1)] * p * (static_cast<double>(n) - 1.0 + r) /
        static_cast<double>(n);
  return g;
}

inline std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double half = 0.5 * (grid[j] - grid[j - 1]);
    w[j - 1] += half;
    w[j] += half;
  }
  return w;
}

}  // namespace detail

/// Smallest truncation bound n_max whose cumulative predicted mass reaches
/// 1 - tail_tol for a Gaussian-reference pilot state of axis variance
/// sigma_sq_pilot.  The pilot's count distribution has the closed
/// negative-binomial form with shape 1/2 and p = 2a/(1+2a), a = lambda
/// sigma_sq_pilot, so no quadrature is involved.
inline std::int64_t default_n_max(const DetectionParams& params, double sigma_sq_pilot,
                                  double tail_tol = 1e-9) {
  if (!(sigma_sq_pilot > 0.0))
    throw std::invalid_argument("default_n_max: pilot variance must be positive");
  if (!(tail_tol > 0.0 && tail_tol < 1.0))
    throw std::invalid_argument("default_n_max: tail_tol must be in (0, 1)");
  const double a = params.lambda() * sigma_sq_pilot;
  const double p = 2.0 * a / (1.0 + 2.0 * a);
  double g = std::sqrt(1.0 - p);
  double cum = g;
  std::int64_t n = 0;
  while (cum < 1.0 - tail_tol && n < 100000000) {
    ++n;
    g *= p * (static_cast<double>(n) - 0.5) / static_cast<double>(n);
    cum += g;
  }
  return n;
}

/// Mixture prediction g(n) = integral of F(M^2) p(n, M^2) d(M^2), composite
/// trapezoid on the marginal's own grid.  The quadrature is divided by the
/// marginal's achieved normalization so the result is a distribution even
/// when reconstruction noise left the normalization off 1 (the deficit is
/// the marginal's to report, not this function's).  Callers who care warn
/// on |normalization - 1|; the prediction itself proceeds.
inline ChannelPrediction predict_histogram(const MarginalDistribution& marginal,
                                           const DetectionParams& params, std::int64_t n_max,
                                           double trunc_tol = 1e-6) {
  marginal.validate();
  if (n_max < 0) throw std::invalid_argument("predict_histogram: n_max must be non-negative");
  if (!(marginal.normalization > 0.0))
    throw std::invalid_argument("predict_histogram: marginal has non-positive normalization");
  const double lambda = params.lambda();
  const std::vector<double> w = detail::trapezoid_weights(marginal.grid);

  std::vector<double> lg(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (std::int64_t n = 1; n <= n_max; ++n)
    lg[static_cast<std::size_t>(n)] = std::lgamma(static_cast<double>(n) + 1.0);

  std::vector<double> probs(static_cast<std::size_t>(n_max) + 1, 0.0);
  double chi_max = 0.0;
  for (std::size_t j = 0; j < marginal.grid.size(); ++j) {
    const double weight = w[j] * marginal.density[j];
    if (weight == 0.0) continue;
    const double chi = lambda * marginal.grid[j];
    chi_max = std::max(chi_max, chi);
    if (chi == 0.0) {
      probs[0] += weight;
      continue;
    }
    const double lchi = std::log(chi);
    for (std::int64_t n = 0; n <= n_max; ++n) {
      const double nd = static_cast<double>(n);
      probs[static_cast<std::size_t>(n)] +=
          weight * std::exp(nd * lchi - chi - lg[static_cast<std::size_t>(n)]);
    }
  }
  double sum = 0.0;
  for (double& p : probs) {
    p /= marginal.normalization;
    sum += p;
  }
  ChannelPrediction out;
  out.probs = std::move(probs);
  out.truncation_mass = std::max(0.0, 1.0 - sum);
  if (out.truncation_mass > trunc_tol) {
    const std::int64_t suggested =
        static_cast<std::int64_t>(std::ceil(chi_max + 12.0 * std::sqrt(chi_max) + 20.0));
    throw std::runtime_error("predict_histogram: truncation mass " +
                             detail::sci(out.truncation_mass) + " exceeds tolerance at n_max=" +
                             std::to_string(n_max) + "; need n_max >= " +
                             std::to_string(suggested));
  }
  return out;
}

/// One pulse through the channel: Poisson count with mean chi(M_z^2).
inline std::int64_t sample_pulse(double M_z, const DetectionParams& params, RngStream& stream) {
  if (!std::isfinite(M_z)) throw std::invalid_argument("sample_pulse: M_z must be finite");
  return static_cast<std::int64_t>(stream.next_poisson(params.lambda() * M_z * M_z));
}

/// Full synthetic run: for each angle, pulses_per_angle independent draws of
/// the axis magnetization followed by a channel sample.  Substream per
/// (angle, pulse), so records are independent of evaluation order and the
/// output is seed-deterministic.
///
/// State must provide sampleable() and sample_axis(beta, stream); states
/// whose planar quasi-density has negative regions have no record-level
/// sampler and must go through their exact pooled histogram instead.
template <class State>
std::vector<PulseRecord> simulate_experiment(const State& state,
                                             const std::vector<double>& angle_set,
                                             std::int64_t pulses_per_angle,
                                             const DetectionParams& params, std::uint64_t seed) {
  if (pulses_per_angle <= 0)
    throw std::invalid_argument("simulate_experiment: pulses_per_angle must be positive");
  if (angle_set.empty()) throw std::invalid_argument("simulate_experiment: empty angle set");
  if (!state.sampleable())
    throw std::runtime_error(
        "simulate_experiment: state has no record-level sampler (planar quasi-density is "
        "negative somewhere); use its exact pooled histogram route instead");
  RngStream master(seed);
  std::vector<PulseRecord> records;
  records.reserve(angle_set.size() * static_cast<std::size_t>(pulses_per_angle));
  for (std::size_t a = 0; a < angle_set.size(); ++a) {
    RngStream angle_stream = master.substream(a);
    for (std::int64_t i = 0; i < pulses_per_angle; ++i) {
      RngStream s = angle_stream.substream(static_cast<std::uint64_t>(i));
      const double m = state.sample_axis(angle_set[a], s);
      records.push_back(PulseRecord{angle_set[a], sample_pulse(m, params, s)});
    }
  }
  return records;
}

}  // namespace psdcert
