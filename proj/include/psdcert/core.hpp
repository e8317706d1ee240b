#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace psdcert {

/// Detection-channel parameters.  Magnetization is expressed in units of
/// mu_B throughout, so phi is dimensionless (radians) and lambda carries
/// per-mu_B^2.
struct DetectionParams {
  double q = 0.3;        ///< overall detection efficiency, (0, 1]
  double n_in = 2.0e4;   ///< mean input photons per measurement pulse
  double phi = 0.0012;   ///< polarization rotation per unit magnetization

  DetectionParams() = default;
  DetectionParams(double q_, double n_in_, double phi_) : q(q_), n_in(n_in_), phi(phi_) {
    validate();
  }

  /// Decay constant of the detection kernel, lambda = q * n_in * phi^2.
  /// Recomputed on access so it can never drift from the primary fields.
  double lambda() const noexcept { return q * n_in * phi * phi; }

  void validate() const {
    if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("DetectionParams: q must be in (0, 1]");
    if (!(n_in > 0.0)) throw std::invalid_argument("DetectionParams: n_in must be positive");
    if (!(phi > 0.0)) throw std::invalid_argument("DetectionParams: phi must be positive");
  }
};

/// One measurement pulse: rotation angle of the analysis basis and the
/// detected photon count.
struct PulseRecord {
  double beta = 0.0;    ///< analysis rotation angle (radians)
  std::int64_t n = 0;   ///< detected photons, >= 0
};

/// Photon-count histogram for a single analysis angle.  Counts are exact
/// integers; frequencies are derived views (bootstrap needs raw counts).
struct AngleHistogram {
  double beta = 0.0;
  std::map<std::int64_t, std::uint64_t> counts;  ///< photon number -> occurrences
  std::uint64_t total_pulses = 0;

  void validate() const {
    std::uint64_t sum = 0;
    for (const auto& [n, c] : counts) {
      if (n < 0) throw std::invalid_argument("AngleHistogram: negative photon number");
      sum += c;
    }
    if (sum != total_pulses)
      throw std::invalid_argument("AngleHistogram: counts do not sum to total_pulses");
    if (total_pulses == 0) throw std::invalid_argument("AngleHistogram: empty histogram");
  }
};

/// Angle-averaged photon-count distribution g(n), stored densely by n.
struct PooledHistogram {
  std::vector<double> probs;      ///< probs[n] = g(n), n = 0..support_max
  std::int64_t support_max = -1;  ///< largest n with nonzero probability

  void validate() const {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("PooledHistogram: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("PooledHistogram: probabilities must sum to 1");
    if (support_max < 0 || static_cast<std::size_t>(support_max) >= probs.size() ||
        probs[static_cast<std::size_t>(support_max)] == 0.0) {
      bool all_zero_above = true;
      for (std::size_t n = static_cast<std::size_t>(support_max + 1); n < probs.size(); ++n)
        if (probs[n] != 0.0) all_zero_above = false;
      if (support_max < 0 || !all_zero_above)
        throw std::invalid_argument("PooledHistogram: support_max inconsistent with probs");
    }
  }

  /// Trims trailing zeros and records the true support bound.
  static PooledHistogram from_probs(std::vector<double> probs) {
    std::size_t last = 0;
    bool any = false;
    for (std::size_t n = 0; n < probs.size(); ++n)
      if (probs[n] != 0.0) { last = n; any = true; }
    if (!any) throw std::invalid_argument("PooledHistogram: all probabilities zero");
    probs.resize(last + 1);
    PooledHistogram h;
    h.probs = std::move(probs);
    h.support_max = static_cast<std::int64_t>(last);
    h.validate();
    return h;
  }
};

/// Rotationally averaged marginal magnetization distribution F(M^2) on an
/// explicit grid.  The normalization is recorded, never silently rescaled:
/// reconstruction noise legitimately pushes it away from 1 and callers
/// decide what to do about that.
struct MarginalDistribution {
  std::vector<double> grid;     ///< M^2 nodes (mu_B^2), strictly increasing from 0
  std::vector<double> density;  ///< F(M^2) at each node (per mu_B^2)
  double normalization = 0.0;   ///< trapezoid integral of density over grid

  void validate() const {
    if (grid.size() != density.size() || grid.size() < 2)
      throw std::invalid_argument("MarginalDistribution: grid/density size mismatch");
    if (grid.front() != 0.0)
      throw std::invalid_argument("MarginalDistribution: grid must start at 0");
    for (std::size_t j = 1; j < grid.size(); ++j)
      if (!(grid[j] > grid[j - 1]))
        throw std::invalid_argument("MarginalDistribution: grid must be strictly increasing");
    for (double v : density)
      if (!std::isfinite(v))
        throw std::invalid_argument("MarginalDistribution: density must be finite");
  }

  double trapezoid(const std::vector<double>& integrand) const {
    double s = 0.0;
    for (std::size_t j = 1; j < grid.size(); ++j)
      s += 0.5 * (grid[j] - grid[j - 1]) * (integrand[j] + integrand[j - 1]);
    return s;
  }

  static MarginalDistribution from_density(std::vector<double> grid, std::vector<double> density) {
    MarginalDistribution m;
    m.grid = std::move(grid);
    m.density = std::move(density);
    m.validate();
    m.normalization = m.trapezoid(m.density);
    return m;
  }
};

namespace detail {

/// Scientific-notation rendering for error messages (std::to_string flattens
/// small probabilities to 0.000000).
inline std::string sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << x;
  return os.str();
}

/// Value at x0 of the quadratic through (x1,f1), (x2,f2), (x3,f3); the
/// shared convention for filling singular grid nodes.
inline double quadratic_extrapolate(double x0, double x1, double f1, double x2, double f2,
                                    double x3, double f3) {
  const double l1 = (x0 - x2) * (x0 - x3) / ((x1 - x2) * (x1 - x3));
  const double l2 = (x0 - x1) * (x0 - x3) / ((x2 - x1) * (x2 - x3));
  const double l3 = (x0 - x1) * (x0 - x2) / ((x3 - x1) * (x3 - x2));
  return f1 * l1 + f2 * l2 + f3 * l3;
}

/// Cauchy-Schwarz chain <M^2k>^2 <= <M^2(k-1)><M^2(k+1)> with m_0 = 1.
/// Genuine distributions satisfy it; noisy estimates may not, which is a
/// flag, not an error.
inline bool moment_chain_ok(const std::vector<double>& values) {
  const double slack = 1.0 + 1e-12;
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    const double prev = (k == 0) ? 1.0 : values[k - 1];
    if (values[k] * values[k] > slack * prev * values[k + 1]) return false;
  }
  return true;
}

}  // namespace detail

/// Even moments <M^2k> along one analysis axis, k = 1..k_max.
struct AxisMoments {
  int k_max = 0;
  std::vector<double> values;  ///< values[k-1] = <M^{2k}>
  std::string route;           ///< how they were obtained ("factorial", "deconvolution", "exact")
  bool chain_ok = true;        ///< moment-chain check result; false means noisy input

  static AxisMoments from_values(std::vector<double> values, std::string route) {
    AxisMoments a;
    a.k_max = static_cast<int>(values.size());
    a.values = std::move(values);
    a.route = std::move(route);
    if (a.k_max < 1) throw std::invalid_argument("AxisMoments: need k_max >= 1");
    if (!(a.values[0] >= 0.0)) throw std::invalid_argument("AxisMoments: <M^2> must be >= 0");
    a.chain_ok = detail::moment_chain_ok(a.values);
    return a;
  }
};

/// Even moments <M_rho^2k> of the planar radius M_rho = sqrt(M_y^2 + M_z^2).
struct RadialMoments {
  int k_max = 0;
  std::vector<double> values;  ///< values[k-1] = <M_rho^{2k}>
  std::string route;
  bool chain_ok = true;

  static RadialMoments from_values(std::vector<double> values, std::string route) {
    RadialMoments r;
    r.k_max = static_cast<int>(values.size());
    r.values = std::move(values);
    r.route = std::move(route);
    if (r.k_max < 1) throw std::invalid_argument("RadialMoments: need k_max >= 1");
    if (!(r.values[0] >= 0.0)) throw std::invalid_argument("RadialMoments: <M_rho^2> must be >= 0");
    r.chain_ok = detail::moment_chain_ok(r.values);
    return r;
  }
};

enum class PoolWeighting {
  by_count,     ///< weight each angle by its pulse count (maximum-likelihood pooling)
  equal_angle,  ///< weight every angle equally regardless of pulse count
};

/// Averages per-angle count frequencies into the pooled distribution g(n).
/// Count weighting accumulates raw integer counts and divides once, so it
/// matches record-level pooling exactly and is permutation invariant by
/// construction; equal-angle weighting sums in beta order for the same
/// permutation invariance.
inline PooledHistogram pool_angles(const std::vector<AngleHistogram>& histograms,
                                   PoolWeighting weighting = PoolWeighting::by_count) {
  if (histograms.empty()) throw std::invalid_argument("pool_angles: empty histogram list");
  std::int64_t n_max = 0;
  std::uint64_t grand_total = 0;
  for (const auto& h : histograms) {
    h.validate();
    grand_total += h.total_pulses;
    if (!h.counts.empty()) n_max = std::max(n_max, h.counts.rbegin()->first);
  }
  std::vector<double> probs(static_cast<std::size_t>(n_max) + 1, 0.0);
  if (weighting == PoolWeighting::by_count) {
    std::vector<std::uint64_t> counts(probs.size(), 0);
    for (const auto& h : histograms)
      for (const auto& [n, c] : h.counts) counts[static_cast<std::size_t>(n)] += c;
    for (std::size_t n = 0; n < probs.size(); ++n)
      probs[n] = static_cast<double>(counts[n]) / static_cast<double>(grand_total);
  } else {
    std::vector<const AngleHistogram*> order;
    order.reserve(histograms.size());
    for (const auto& h : histograms) order.push_back(&h);
    std::sort(order.begin(), order.end(),
              [](const AngleHistogram* a, const AngleHistogram* b) { return a->beta < b->beta; });
    const double angle_weight = 1.0 / static_cast<double>(histograms.size());
    for (const AngleHistogram* h : order) {
      const double w = angle_weight / static_cast<double>(h->total_pulses);
      for (const auto& [n, c] : h->counts)
        probs[static_cast<std::size_t>(n)] += w * static_cast<double>(c);
    }
  }
  return PooledHistogram::from_probs(std::move(probs));
}

/// Groups records by analysis angle.  Angles must match the configured set
/// (within 1e-9 rad); output histograms follow angle_set order and cover
/// exactly the angles present in the data.
inline std::vector<AngleHistogram> validate_records(const std::vector<PulseRecord>& records,
                                                    const std::vector<double>& angle_set) {
  if (records.empty()) throw std::invalid_argument("validate_records: no records");
  if (angle_set.empty()) throw std::invalid_argument("validate_records: empty angle set");
  auto angle_index = [&](double beta) -> std::size_t {
    for (std::size_t i = 0; i < angle_set.size(); ++i)
      if (std::abs(beta - angle_set[i]) <= 1e-9) return i;
    throw std::invalid_argument("validate_records: angle " + std::to_string(beta) +
                                " not in configured angle set");
  };
  std::vector<AngleHistogram> out(angle_set.size());
  for (std::size_t i = 0; i < angle_set.size(); ++i) out[i].beta = angle_set[i];
  for (const auto& r : records) {
    if (r.n < 0) throw std::invalid_argument("validate_records: negative photon count");
    auto& h = out[angle_index(r.beta)];
    ++h.counts[r.n];
    ++h.total_pulses;
  }
  std::vector<AngleHistogram> present;
  for (auto& h : out)
    if (h.total_pulses > 0) present.push_back(std::move(h));
  return present;
}

}  // namespace psdcert
