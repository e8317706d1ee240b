#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "psdcert/channel.hpp"
#include "psdcert/core.hpp"
#include "psdcert/rng.hpp"

namespace psdcert {

enum class StateKind { gaussian_reference, ring, uniform_disc, single_excitation, mixture };

/// Rotationally symmetric 2D test state.  Classical kinds carry a genuine
/// planar density; single_excitation carries the first-excited-state
/// quasi-density (1/(2 pi s^2)) (r^2/s^2 - 1) e^{-r^2/(2 s^2)}, which is
/// negative inside r < s and therefore has no record-level sampler even
/// though every axis marginal of it is a genuine probability density.
///
/// Parameter conventions, with y = M^2:
///   gaussian_reference(sigma): axis marginal Gaussian, variance sigma^2;
///     F(y) = exp(-y / (2 sigma^2)) / sqrt(2 pi sigma^2 y).
///   ring(R): all planar mass at radius R; F(y) = 1 / (pi sqrt(y (R^2 - y)))
///     on (0, R^2).  R = 0 is the point mass at the origin.
///   uniform_disc(R): flat planar density; F(y) = 2 sqrt(R^2 - y) / (pi R^2 sqrt(y)).
///   single_excitation(sigma_t): axis marginal ~ sqrt(y) e^{-y/(2 sigma_t^2)},
///     i.e. Gamma(3/2, 2 sigma_t^2); natural units are sigma_t^2 = 1/2 (the
///     width whose ground-state axis variance is 1/2), giving <M^2> = 3/2.
///   mixture: convex combination of components.
struct SyntheticState {
  StateKind kind = StateKind::gaussian_reference;
  double sigma = 1.0;    ///< gaussian_reference width
  double radius = 1.0;   ///< ring / uniform_disc radius
  double sigma_t = 1.0;  ///< single_excitation width (sigma-tilde)
  std::vector<double> weights;
  std::vector<SyntheticState> components;

  static SyntheticState gaussian(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian state: sigma must be positive");
    SyntheticState s;
    s.kind = StateKind::gaussian_reference;
    s.sigma = sigma;
    return s;
  }
  static SyntheticState ring_state(double R) {
    if (!(R >= 0.0)) throw std::invalid_argument("ring state: radius must be non-negative");
    SyntheticState s;
    s.kind = StateKind::ring;
    s.radius = R;
    return s;
  }
  static SyntheticState disc(double R) {
    if (!(R > 0.0)) throw std::invalid_argument("disc state: radius must be positive");
    SyntheticState s;
    s.kind = StateKind::uniform_disc;
    s.radius = R;
    return s;
  }
  static SyntheticState single_excitation_state(double sigma_t) {
    if (!(sigma_t > 0.0))
      throw std::invalid_argument("single_excitation state: width must be positive");
    SyntheticState s;
    s.kind = StateKind::single_excitation;
    s.sigma_t = sigma_t;
    return s;
  }
  static SyntheticState mixture_state(std::vector<double> weights,
                                      std::vector<SyntheticState> components) {
    if (weights.size() != components.size() || weights.empty())
      throw std::invalid_argument("mixture state: weights/components mismatch");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("mixture state: negative weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("mixture state: weights must sum to 1");
    SyntheticState s;
    s.kind = StateKind::mixture;
    s.weights = std::move(weights);
    s.components = std::move(components);
    return s;
  }

  /// Planar density at radius r, deltas excluded (the ring's delta shell is
  /// non-negative and cannot create a negative region).
  double planar_density_smooth(double r) const {
    switch (kind) {
      case StateKind::gaussian_reference:
        return std::exp(-r * r / (2.0 * sigma * sigma)) / (6.283185307179586 * sigma * sigma);
      case StateKind::ring:
        return 0.0;
      case StateKind::uniform_disc:
        return r <= radius ? 1.0 / (3.141592653589793 * radius * radius) : 0.0;
      case StateKind::single_excitation: {
        const double s2 = sigma_t * sigma_t;
        return (r * r / s2 - 1.0) * std::exp(-r * r / (2.0 * s2)) / (6.283185307179586 * s2);
      }
      case StateKind::mixture: {
        double v = 0.0;
        for (std::size_t i = 0; i < components.size(); ++i)
          v += weights[i] * components[i].planar_density_smooth(r);
        return v;
      }
    }
    return 0.0;
  }

  /// Largest radius with non-negligible mass; used for positivity scans and
  /// grid-coverage checks.
  double extent() const {
    switch (kind) {
      case StateKind::gaussian_reference: return 8.0 * sigma;
      case StateKind::ring: return radius;
      case StateKind::uniform_disc: return radius;
      case StateKind::single_excitation: return 8.0 * sigma_t;
      case StateKind::mixture: {
        double e = 0.0;
        for (const auto& c : components) e = std::max(e, c.extent());
        return e;
      }
    }
    return 0.0;
  }

  bool contains_single_excitation() const {
    if (kind == StateKind::single_excitation) return true;
    if (kind == StateKind::mixture)
      for (const auto& c : components)
        if (c.contains_single_excitation()) return true;
    return false;
  }

  /// True exactly when the planar (quasi-)density is non-negative
  /// everywhere.  Pure classical kinds are always sampleable; anything
  /// containing the single-excitation template is scanned radially.
  bool sampleable() const {
    if (!contains_single_excitation()) return true;
    if (kind == StateKind::single_excitation) return false;
    const double r_max = extent();
    const int n_scan = 20000;
    for (int i = 0; i <= n_scan; ++i) {
      const double r = r_max * static_cast<double>(i) / n_scan;
      if (planar_density_smooth(r) < 0.0) return false;
    }
    return true;
  }

  /// Draw from the axis marginal.  Private device also defined for the
  /// single-excitation template (whose axis marginal is a genuine density);
  /// the public guard in sample_axis keeps the record-level contract.
  double sample_axis_unchecked(RngStream& stream) const {
    switch (kind) {
      case StateKind::gaussian_reference:
        return sigma * stream.next_normal();
      case StateKind::ring:
        return radius * std::cos(6.283185307179586 * stream.next_uniform());
      case StateKind::uniform_disc: {
        const double r = radius * std::sqrt(stream.next_uniform());
        return r * std::cos(6.283185307179586 * stream.next_uniform());
      }
      case StateKind::single_excitation: {
        // |M| = sigma_t * chi_3: the Gamma(3/2, 2 sigma_t^2) law of M^2.
        const double g1 = stream.next_normal();
        const double g2 = stream.next_normal();
        const double g3 = stream.next_normal();
        const double mag = sigma_t * std::sqrt(g1 * g1 + g2 * g2 + g3 * g3);
        return stream.next_uniform() < 0.5 ? -mag : mag;
      }
      case StateKind::mixture: {
        const double u = stream.next_uniform();
        double cum = 0.0;
        for (std::size_t i = 0; i < components.size(); ++i) {
          cum += weights[i];
          if (u < cum || i + 1 == components.size())
            return components[i].sample_axis_unchecked(stream);
        }
        return 0.0;
      }
    }
    return 0.0;
  }

  double sample_axis(double /*beta*/, RngStream& stream) const {
    if (!sampleable())
      throw std::runtime_error(
          "sample_axis: state's planar quasi-density is negative somewhere; no record-level "
          "sampler exists, use exact_pooled_histogram with multinomial pulses instead");
    return sample_axis_unchecked(stream);
  }
};

namespace detail {

inline double state_axis_density(const SyntheticState& state, double y);

inline double pure_axis_density(const SyntheticState& state, double y) {
  switch (state.kind) {
    case StateKind::gaussian_reference: {
      const double s2 = state.sigma * state.sigma;
      return std::exp(-y / (2.0 * s2)) / std::sqrt(6.283185307179586 * s2 * y);
    }
    case StateKind::ring: {
      const double R2 = state.radius * state.radius;
      if (y <= 0.0 || y >= R2) return 0.0;
      return 1.0 / (3.141592653589793 * std::sqrt(y * (R2 - y)));
    }
    case StateKind::uniform_disc: {
      const double R2 = state.radius * state.radius;
      if (y <= 0.0 || y > R2) return 0.0;
      return 2.0 * std::sqrt(R2 - y) / (3.141592653589793 * R2 * std::sqrt(y));
    }
    case StateKind::single_excitation: {
      const double th = 2.0 * state.sigma_t * state.sigma_t;  // Gamma scale
      // Gamma(3/2, th): sqrt(y) e^{-y/th} / (Gamma(3/2) th^{3/2}).
      return std::sqrt(y) * std::exp(-y / th) /
             (0.8862269254527580 * th * std::sqrt(th));
    }
    case StateKind::mixture:
      return state_axis_density(state, y);
  }
  return 0.0;
}

inline double state_axis_density(const SyntheticState& state, double y) {
  if (state.kind != StateKind::mixture) return pure_axis_density(state, y);
  double v = 0.0;
  for (std::size_t i = 0; i < state.components.size(); ++i)
    v += state.weights[i] * pure_axis_density(state.components[i], y);
  return v;
}

/// True when the closed-form density is unbounded as y approaches the node.
inline bool axis_density_singular_at(const SyntheticState& state, double y) {
  switch (state.kind) {
    case StateKind::gaussian_reference:
      return y == 0.0;
    case StateKind::ring:
      return y == 0.0 || y == state.radius * state.radius;
    case StateKind::uniform_disc:
      return y == 0.0;
    case StateKind::single_excitation:
      return false;
    case StateKind::mixture:
      for (const auto& c : state.components)
        if (axis_density_singular_at(c, y)) return true;
      return false;
  }
  return false;
}

/// Minimum grid end for a faithful marginal: bounded kinds need their full
/// support, unbounded kinds six widths.
inline double required_grid_max(const SyntheticState& state) {
  switch (state.kind) {
    case StateKind::gaussian_reference: return 36.0 * state.sigma * state.sigma;
    case StateKind::ring: return state.radius * state.radius;
    case StateKind::uniform_disc: return state.radius * state.radius;
    case StateKind::single_excitation: return 36.0 * state.sigma_t * state.sigma_t;
    case StateKind::mixture: {
      double m = 0.0;
      for (const auto& c : state.components) m = std::max(m, required_grid_max(c));
      return m;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Exact marginal F(M^2) on the supplied grid.  Nodes where the closed form
/// is unbounded (the y = 0 end of the gaussian and disc marginals, the ring
/// edges) take the quadratic extrapolation through the three nearest regular
/// nodes; the same convention the deconvolution output uses, so comparisons
/// are like for like.
inline MarginalDistribution exact_marginal(const SyntheticState& state,
                                           const std::vector<double>& grid) {
  if (grid.size() < 4) throw std::invalid_argument("exact_marginal: grid too small");
  if (state.kind == StateKind::ring && state.radius == 0.0)
    throw std::invalid_argument("exact_marginal: point mass has no density representation");
  if (grid.back() < detail::required_grid_max(state))
    throw std::invalid_argument("exact_marginal: grid must cover at least six widths of the state");
  std::vector<double> density(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    density[j] = detail::axis_density_singular_at(state, grid[j])
                     ? 0.0  // placeholder, filled below
                     : detail::state_axis_density(state, grid[j]);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!detail::axis_density_singular_at(state, grid[j])) continue;
    std::vector<std::size_t> near;
    for (std::size_t d = 1; near.size() < 3 && d < grid.size(); ++d) {
      if (j >= d && !detail::axis_density_singular_at(state, grid[j - d])) near.push_back(j - d);
      if (near.size() < 3 && j + d < grid.size() &&
          !detail::axis_density_singular_at(state, grid[j + d]))
        near.push_back(j + d);
    }
    if (near.size() < 3) throw std::invalid_argument("exact_marginal: too few regular nodes");
    density[j] = detail::quadratic_extrapolate(grid[j], grid[near[0]], density[near[0]],
                                               grid[near[1]], density[near[1]], grid[near[2]],
                                               density[near[2]]);
  }
  return MarginalDistribution::from_density(grid, std::move(density));
}

namespace detail {

inline double double_factorial_odd(int k) {  // (2k-1)!! as double, exact for k <= 16
  double v = 1.0;
  for (int j = 1; j <= k; ++j) v *= static_cast<double>(2 * j - 1);
  return v;
}

inline double central_binomial_over_4k(int k) {  // C(2k, k) / 4^k, exact rational ratio
  double v = 1.0;
  for (int j = 1; j <= k; ++j) v *= static_cast<double>(2 * j - 1) / static_cast<double>(2 * j);
  return v;
}

}  // namespace detail

/// Closed-form axis moments <M^{2k}>, k = 1..k_max.  No quadrature: every
/// kind reduces to integer/Gamma arithmetic -
///   gaussian: (2k-1)!! sigma^{2k}
///   ring:     R^{2k} C(2k,k)/4^k
///   disc:     R^{2k} C(2k,k)/(4^k (k+1))
///   single excitation: (2 sigma_t^2)^k Gamma(k+3/2)/Gamma(3/2) = sigma_t^{2k} (2k+1)!!
inline AxisMoments exact_axis_moments(const SyntheticState& state, int k_max) {
  if (k_max < 1 || k_max > 16)
    throw std::invalid_argument("exact_axis_moments: k_max must be in [1, 16]");
  std::vector<double> vals(static_cast<std::size_t>(k_max), 0.0);
  switch (state.kind) {
    case StateKind::gaussian_reference:
      for (int k = 1; k <= k_max; ++k)
        vals[k - 1] = detail::double_factorial_odd(k) * std::pow(state.sigma, 2 * k);
      break;
    case StateKind::ring:
      for (int k = 1; k <= k_max; ++k)
        vals[k - 1] = std::pow(state.radius, 2 * k) * detail::central_binomial_over_4k(k);
      break;
    case StateKind::uniform_disc:
      for (int k = 1; k <= k_max; ++k)
        vals[k - 1] = std::pow(state.radius, 2 * k) * detail::central_binomial_over_4k(k) /
                      static_cast<double>(k + 1);
      break;
    case StateKind::single_excitation:
      for (int k = 1; k <= k_max; ++k)
        vals[k - 1] = detail::double_factorial_odd(k) * static_cast<double>(2 * k + 1) *
                      std::pow(state.sigma_t, 2 * k);
      break;
    case StateKind::mixture:
      for (std::size_t i = 0; i < state.components.size(); ++i) {
        const AxisMoments part = exact_axis_moments(state.components[i], k_max);
        for (int k = 1; k <= k_max; ++k) vals[k - 1] += state.weights[i] * part.values[k - 1];
      }
      break;
  }
  return AxisMoments::from_values(std::move(vals), "exact");
}

/// Free-function form of the axis sampler (interface mirror of the member).
inline double sample_axis(const SyntheticState& state, double beta, RngStream& stream) {
  return state.sample_axis(beta, stream);
}

namespace detail {

/// Unnormalized pooled count probabilities: sum = 1 - truncation mass.
/// Mixtures stay raw here so the public wrapper sees the true total
/// truncation before folding it.
inline std::vector<double> pooled_probs_raw(const SyntheticState& state,
                                            const DetectionParams& params, std::int64_t n_max) {
  const double lambda = params.lambda();
  std::vector<double> probs(static_cast<std::size_t>(n_max) + 1, 0.0);
  auto accumulate_angle_mixture = [&](double chi, double w) {
    // One Poisson component of an angular quadrature.
    if (chi == 0.0) {
      probs[0] += w;
      return;
    }
    const double lchi = std::log(chi);
    double lg = 0.0;
    for (std::int64_t n = 0; n <= n_max; ++n) {
      if (n > 0) lg += std::log(static_cast<double>(n));
      probs[static_cast<std::size_t>(n)] +=
          w * std::exp(static_cast<double>(n) * lchi - chi - lg);
    }
  };
  switch (state.kind) {
    case StateKind::gaussian_reference: {
      const double a = lambda * state.sigma * state.sigma;
      probs = nb_pmf_table(0.5, 2.0 * a / (1.0 + 2.0 * a), n_max);
      break;
    }
    case StateKind::single_excitation: {
      const double a = lambda * state.sigma_t * state.sigma_t;
      probs = nb_pmf_table(1.5, 2.0 * a / (1.0 + 2.0 * a), n_max);
      break;
    }
    case StateKind::ring: {
      // g(n) = (2/pi) int_0^{pi/2} Poisson(n; lambda R^2 cos^2 t) dt;
      // midpoint rule in the angle converges spectrally (smooth periodic).
      const int nq = 4096;
      for (int i = 0; i < nq; ++i) {
        const double t = (static_cast<double>(i) + 0.5) * 1.5707963267948966 / nq;
        const double c = std::cos(t);
        accumulate_angle_mixture(lambda * state.radius * state.radius * c * c,
                                 1.0 / static_cast<double>(nq));
      }
      break;
    }
    case StateKind::uniform_disc: {
      // g(n) = (4/pi) int_0^{pi/2} cos^2 t Poisson(n; lambda R^2 sin^2 t) dt
      const int nq = 4096;
      for (int i = 0; i < nq; ++i) {
        const double t = (static_cast<double>(i) + 0.5) * 1.5707963267948966 / nq;
        const double c = std::cos(t);
        const double s = std::sin(t);
        accumulate_angle_mixture(lambda * state.radius * state.radius * s * s,
                                 2.0 * c * c / static_cast<double>(nq));
      }
      break;
    }
    case StateKind::mixture: {
      for (std::size_t i = 0; i < state.components.size(); ++i) {
        const std::vector<double> part = pooled_probs_raw(state.components[i], params, n_max);
        for (std::size_t n = 0; n < part.size(); ++n) probs[n] += state.weights[i] * part[n];
      }
      break;
    }
  }
  return probs;
}

}  // namespace detail

/// Exact pooled count distribution of the state under the channel: the
/// Poisson mixture of the exact marginal, evaluated without grids.
/// Gaussian and single-excitation kinds have closed negative-binomial forms
/// (shape 1/2 and 3/2, p = 2a/(1+2a), a = lambda * width^2); ring and disc
/// reduce to smooth periodic 1D integrals in the angle.  Truncation mass
/// beyond n_max must be below trunc_tol; the sub-tolerance remainder is
/// folded by renormalization so the result is an exact probability vector.
inline PooledHistogram exact_pooled_histogram(const SyntheticState& state,
                                              const DetectionParams& params, std::int64_t n_max,
                                              double trunc_tol = 1e-9) {
  if (n_max < 0) throw std::invalid_argument("exact_pooled_histogram: n_max must be >= 0");
  std::vector<double> probs = detail::pooled_probs_raw(state, params, n_max);
  double sum = 0.0;
  for (double p : probs) sum += p;
  if (1.0 - sum > trunc_tol)
    throw std::runtime_error("exact_pooled_histogram: truncation mass " +
                             detail::sci(1.0 - sum) + " above tolerance at n_max=" +
                             std::to_string(n_max) + "; increase n_max");
  for (double& p : probs) p /= sum;
  return PooledHistogram::from_probs(std::move(probs));
}

/// Parses a state spec string:
///   gaussian(sigma2=1500) | gaussian(sigma=38.7)
///   ring(radius=40) | disc(radius=40)
///   single_excitation(m2=1500) | single_excitation(sigma_t2=500)
///   mixture(0.9*gaussian(sigma2=1500)+0.1*single_excitation(m2=1500))
inline SyntheticState parse_state_spec(const std::string& spec);

namespace detail {

struct SpecCursor {
  const std::string& s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }
  bool consume(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c))
      throw std::invalid_argument("state spec: expected '" + std::string(1, c) + "' at position " +
                                  std::to_string(pos) + " in '" + s + "'");
  }
  std::string ident() {
    skip_ws();
    std::size_t start = pos;
    while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    if (pos == start) throw std::invalid_argument("state spec: expected identifier in '" + s + "'");
    return s.substr(start, pos - start);
  }
  double number() {
    skip_ws();
    std::size_t consumed = 0;
    double v;
    try {
      v = std::stod(s.substr(pos), &consumed);
    } catch (const std::exception&) {
      throw std::invalid_argument("state spec: expected number at position " +
                                  std::to_string(pos) + " in '" + s + "'");
    }
    pos += consumed;
    return v;
  }
};

inline SyntheticState parse_state(SpecCursor& cur) {
  const std::string kind = cur.ident();
  cur.expect('(');
  if (kind == "mixture") {
    std::vector<double> weights;
    std::vector<SyntheticState> comps;
    do {
      weights.push_back(cur.number());
      cur.expect('*');
      comps.push_back(parse_state(cur));
    } while (cur.consume('+'));
    cur.expect(')');
    return SyntheticState::mixture_state(std::move(weights), std::move(comps));
  }
  std::string key = cur.ident();
  cur.expect('=');
  double value = cur.number();
  cur.expect(')');
  if (kind == "gaussian") {
    if (key == "sigma2") return SyntheticState::gaussian(std::sqrt(value));
    if (key == "sigma") return SyntheticState::gaussian(value);
  } else if (kind == "ring") {
    if (key == "radius") return SyntheticState::ring_state(value);
  } else if (kind == "disc") {
    if (key == "radius") return SyntheticState::disc(value);
  } else if (kind == "single_excitation") {
    if (key == "m2") return SyntheticState::single_excitation_state(std::sqrt(value / 3.0));
    if (key == "sigma_t2") return SyntheticState::single_excitation_state(std::sqrt(value));
  }
  throw std::invalid_argument("state spec: unknown state '" + kind + "(" + key + "=...)'");
}

}  // namespace detail

inline SyntheticState parse_state_spec(const std::string& spec) {
  detail::SpecCursor cur{spec};
  SyntheticState s = detail::parse_state(cur);
  cur.skip_ws();
  if (cur.pos != spec.size())
    throw std::invalid_argument("state spec: trailing characters in '" + spec + "'");
  return s;
}

}  // namespace psdcert
