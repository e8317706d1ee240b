#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "psdcert/channel.hpp"
#include "psdcert/core.hpp"
#include "psdcert/criterion.hpp"
#include "psdcert/moments.hpp"
#include "psdcert/reconstruct.hpp"
#include "psdcert/rng.hpp"

namespace psdcert {

enum class MomentRoute {
  factorial,       ///< falling-factorial moments of the pooled histogram (unbiased)
  deconvolution,   ///< moments of the reconstructed marginal (regularized)
};

inline const char* to_string(MomentRoute r) {
  return r == MomentRoute::factorial ? "factorial" : "deconvolution";
}

inline MomentRoute parse_moment_route(const std::string& s) {
  if (s == "factorial") return MomentRoute::factorial;
  if (s == "deconvolution") return MomentRoute::deconvolution;
  throw std::invalid_argument("unknown moment route '" + s +
                              "' (expected factorial or deconvolution)");
}

inline std::vector<double> default_angle_set() {
  const double pi = 3.14159265358979323846;
  return {0.0, pi / 4.0, pi / 2.0, 3.0 * pi / 4.0};
}

/// Everything the records -> verdict chain needs.  All defaults are valid
/// standalone and tuned to the reference scale <M^2> = 1500.
struct PipelineConfig {
  DetectionParams detection{};
  std::vector<double> angles = default_angle_set();
  PoolWeighting weighting = PoolWeighting::by_count;
  MomentRoute route = MomentRoute::factorial;
  DeconvolutionSettings deconvolution{};  ///< half-width / cutoff 0 = auto from pilot scale
  double sigma_sq_pilot = 1500.0;         ///< pilot <M^2> for automatic grid sizing
  /// Marginal-route tail guard, disabled by default: on sampled data the
  /// reconstruction's band-limited noise dominates the guard band at every
  /// k >= 2 and no threshold separates it from genuine shortness.  Coverage
  /// is instead guaranteed by the pilot-sized grid, gross mismatch by the
  /// deconvolution normalization check, and statistical quality by the
  /// bootstrap spread.  Set a finite value for noiseless marginals.
  double tail_tol = std::numeric_limits<double>::infinity();
  int n_cutoff_max = 16;
  double z = 2.0;
  int replicates = 150;
  std::uint64_t seed = 1;

  void validate() const {
    detection.validate();
    if (angles.empty()) throw std::invalid_argument("PipelineConfig: empty angle set");
    if (n_cutoff_max < 2 || n_cutoff_max % 2 != 0)
      throw std::invalid_argument("PipelineConfig: n_cutoff_max must be even and >= 2");
    if (!(z >= 0.0)) throw std::invalid_argument("PipelineConfig: z must be >= 0");
    if (replicates < 2) throw std::invalid_argument("PipelineConfig: replicates must be >= 2");
    if (!(sigma_sq_pilot > 0.0))
      throw std::invalid_argument("PipelineConfig: sigma_sq_pilot must be positive");
    if (!(tail_tol > 0.0)) throw std::invalid_argument("PipelineConfig: tail_tol must be positive");
  }

  /// Deconvolution settings with grid and cutoff auto-sized when not set
  /// explicitly.  The grid spans six pilot standard deviations.  The hard
  /// frequency cutoff lands at six inverse pilot widths: a state of the pilot
  /// scale has no spectral content left there, while past that point the
  /// kernel transform is so small that floor-regularized division turns the
  /// histogram's shot noise into slow, large-amplitude ripple across the
  /// whole reconstruction.
  DeconvolutionSettings resolved_deconvolution() const {
    DeconvolutionSettings s = deconvolution;
    if (s.grid_half_width <= 0.0) s.grid_half_width = 6.0 * std::sqrt(sigma_sq_pilot);
    if (s.frequency_cutoff <= 0.0) s.frequency_cutoff = 6.0 / std::sqrt(sigma_sq_pilot);
    return s;
  }
};

/// Axis moments of pooled counts by the configured route.
inline AxisMoments axis_moments_by_route(const PooledHistogram& pooled,
                                         const PipelineConfig& config, int k_max) {
  if (config.route == MomentRoute::factorial)
    return axis_moments_factorial(pooled, config.detection, k_max);
  MarginalDistribution marginal =
      deconvolve(g_to_G(pooled, config.detection, config.resolved_deconvolution().make_grid()),
                 config.resolved_deconvolution());
  return axis_moments_from_marginal(marginal, k_max, config.tail_tol);
}

/// records -> pooled counts -> axis moments -> radial moments.
inline RadialMoments radial_moments_from_records(const std::vector<PulseRecord>& records,
                                                 const PipelineConfig& config) {
  const std::vector<AngleHistogram> per_angle = validate_records(records, config.angles);
  const PooledHistogram pooled = pool_angles(per_angle, config.weighting);
  const AxisMoments axis = axis_moments_by_route(pooled, config, config.n_cutoff_max);
  return radial_from_axis(axis);
}

namespace detail {

/// Indices of a uniform half-sample without replacement: the first
/// floor(n/2) slots of a partial Fisher-Yates shuffle.  Deterministic in the
/// stream state.
inline std::vector<std::size_t> half_sample_indices(std::size_t n, RngStream& stream) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t take = n / 2;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.next_below(
                                  static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  return idx;
}

}  // namespace detail

/// Half-sample bootstrap of the cutoff sweep: per replicate, draw half of
/// each angle's records without replacement, rerun pool -> moments -> sweep,
/// and attach the per-N_c std (ddof = 1) across replicates to the full-data
/// sweep.  The std is the raw across-replicate spread, with no half-sample
/// correction factor.  The reported f_mean stays the full-data estimate:
/// the minimum of the trial family is concave in the moments, so averaging
/// the replicate values instead would double its downward noise bias.
/// Bitwise deterministic in (records order, config, replicates, seed).
inline SweepResult bootstrap_sweep(const std::vector<PulseRecord>& records,
                                   const PipelineConfig& config, int replicates,
                                   std::uint64_t seed) {
  config.validate();
  if (replicates < 2) throw std::invalid_argument("bootstrap_sweep: replicates must be >= 2");

  // group record indices per angle once; replicates resample within groups
  validate_records(records, config.angles);  // rejects unknown angles, bad counts
  std::vector<std::vector<std::size_t>> groups(config.angles.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t a = 0; a < config.angles.size(); ++a) {
      if (std::abs(records[i].beta - config.angles[a]) <= 1e-9) {
        groups[a].push_back(i);
        break;
      }
    }
  }
  for (std::size_t a = 0; a < groups.size(); ++a)
    if (!groups[a].empty() && groups[a].size() < 2)
      throw std::invalid_argument("bootstrap_sweep: angle " + std::to_string(config.angles[a]) +
                                  " has fewer than 2 records; cannot half-sample");

  const int n_entries = config.n_cutoff_max / 2;
  std::vector<double> sum(static_cast<std::size_t>(n_entries), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(n_entries), 0.0);

  RngStream root(seed);
  std::vector<PulseRecord> subset;
  for (int rep = 0; rep < replicates; ++rep) {
    RngStream rep_stream = root.substream(static_cast<std::uint64_t>(rep));
    subset.clear();
    for (std::size_t a = 0; a < groups.size(); ++a) {
      if (groups[a].empty()) continue;
      RngStream angle_stream = rep_stream.substream(a);
      for (std::size_t k : detail::half_sample_indices(groups[a].size(), angle_stream))
        subset.push_back(records[groups[a][k]]);
    }
    const RadialMoments radial = radial_moments_from_records(subset, config);
    const SweepResult sweep = sweep_cutoff(radial, config.n_cutoff_max, config.z);
    for (int e = 0; e < n_entries; ++e) {
      const double f = sweep.entries[static_cast<std::size_t>(e)].f_mean;
      sum[static_cast<std::size_t>(e)] += f;
      sum_sq[static_cast<std::size_t>(e)] += f * f;
    }
  }

  const RadialMoments full_radial = radial_moments_from_records(records, config);
  SweepResult result = sweep_cutoff(full_radial, config.n_cutoff_max, config.z);
  const double r = static_cast<double>(replicates);
  for (int e = 0; e < n_entries; ++e) {
    const double mean = sum[static_cast<std::size_t>(e)] / r;
    const double var =
        std::max(0.0, (sum_sq[static_cast<std::size_t>(e)] - r * mean * mean) / (r - 1.0));
    result.entries[static_cast<std::size_t>(e)].bootstrap_std = std::sqrt(var);
  }
  const SweepEntry& last = result.entries.back();
  result.plateau = last.f_mean;
  result.plateau_std = last.bootstrap_std;
  // same 1e-10 solver-noise floor as the deterministic sweep
  result.verdict = (std::isfinite(result.plateau) &&
                    result.plateau < -std::max(config.z * last.bootstrap_std, 1e-10))
                       ? Verdict::nonclassical
                       : Verdict::classical_consistent;
  result.z = config.z;
  result.route = to_string(config.route);
  result.seed = std::to_string(seed);
  return result;
}

inline SweepResult bootstrap_sweep(const std::vector<PulseRecord>& records,
                                   const PipelineConfig& config) {
  return bootstrap_sweep(records, config, config.replicates, config.seed);
}

}  // namespace psdcert
