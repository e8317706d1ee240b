#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "psdcert/core.hpp"
#include "psdcert/qlinalg.hpp"

namespace psdcert {

/// Diagnostic bits attached to a solve or a sweep entry.
enum TrialFlags : unsigned {
  trial_flag_degenerate = 1u << 0,          ///< <M_rho^2> = 0: point mass, minimizer is f = 1
  trial_flag_extended_precision = 1u << 1,  ///< double tier too ill-conditioned, solved in quad
  trial_flag_truncated = 1u << 2,           ///< rank-deficient, least-norm truncated solve
  trial_flag_solve_failed = 1u << 3,        ///< non-finite output, entry untrustworthy
  trial_flag_two_path_mismatch = 1u << 4,   ///< linear and quadratic f disagree beyond tolerance
  trial_flag_monotonicity = 1u << 5,        ///< f rose when the cutoff grew (numerical trouble)
};

/// Minimizing even-polynomial trial function at one cutoff order.
struct TrialSolution {
  int n_cutoff = 0;                  ///< N_c, even, >= 2
  std::vector<double> coefficients;  ///< C_{2k}, k = 1..N_c/2, units of M^{-2k}
  double f_mean = 1.0;               ///< <F> = 1 + sum_k C_{2k} <M_rho^{2k}>
  double condition = 1.0;            ///< condition estimate of the scaled moment matrix
  double scale = 1.0;                ///< preconditioning length s = sqrt(<M_rho^2>)
  double residual = 0.0;             ///< relative residual of the scaled linear system
  unsigned flags = 0;
};

struct SweepEntry {
  int n_cutoff = 0;
  double f_mean = 1.0;
  double bootstrap_std = 0.0;  ///< 0 when no resampling was attached
  double condition = 1.0;
  unsigned flags = 0;
};

enum class Verdict {
  classical_consistent,
  nonclassical,
};

inline const char* to_string(Verdict v) {
  return v == Verdict::nonclassical ? "nonclassical" : "classical-consistent";
}

/// Cutoff sweep with the plateau verdict.
struct SweepResult {
  std::vector<SweepEntry> entries;  ///< ordered by n_cutoff
  double plateau = 1.0;             ///< f_mean at the largest cutoff
  double plateau_std = 0.0;
  Verdict verdict = Verdict::classical_consistent;
  double z = 2.0;         ///< verdict threshold: nonclassical iff plateau < -z * std
  std::string route;      ///< moment route that fed the sweep
  std::string seed;       ///< resampling seed, empty for deterministic sweeps
};

namespace detail {

inline void check_sweep_inputs(const RadialMoments& radial, int n_cutoff) {
  if (n_cutoff < 2 || n_cutoff % 2 != 0)
    throw std::invalid_argument("solve_coefficients: n_cutoff must be even and >= 2");
  if (radial.k_max < n_cutoff)
    throw std::invalid_argument(
        "solve_coefficients: need radial moments to order 2*n_cutoff; have k_max = " +
        std::to_string(radial.k_max) + ", need " + std::to_string(n_cutoff));
  for (int k = 0; k < n_cutoff; ++k)
    if (!std::isfinite(radial.values[static_cast<std::size_t>(k)]))
      throw std::invalid_argument("solve_coefficients: non-finite moment at k = " +
                                  std::to_string(k + 1));
}

/// Scaled-space quad solve: full spectral inverse when the spectrum supports
/// it, truncated least-norm otherwise.  mu is 1-based in k (mu[0] unused).
/// f_mean is evaluated before rounding x to double: dropping a spectral
/// component only removes a non-positive contribution, so on exact classical
/// moments the truncated value cannot dip below the true minimum.
inline void solve_scaled_quad(const std::vector<double>& mu, int K, std::vector<double>& x,
                              double& f_mean, double& condition, double& residual,
                              unsigned& flags) {
  const int n = K;
  std::vector<quad> a(static_cast<std::size_t>(n) * n);
  std::vector<quad> b(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    b[static_cast<std::size_t>(j)] = -quad(mu[static_cast<std::size_t>(j + 1)]);
    for (int l = 0; l < n; ++l)
      a[static_cast<std::size_t>(j) * n + l] = quad(mu[static_cast<std::size_t>(j + l + 2)]);
  }
  const auto eig = jacobi_symmetric_eigen<quad>(a, n, quad(1e-30));
  quad lam_max = quad(0);
  for (const quad& lam : eig.eigenvalues) lam_max = std::max(lam_max, scalar_abs(lam));
  if (lam_max == quad(0)) {
    // all moments vanish beyond k = 0; nothing to solve against
    std::fill(x.begin(), x.end(), 0.0);
    f_mean = 1.0;
    condition = std::numeric_limits<double>::infinity();
    residual = 0.0;
    flags |= trial_flag_truncated;
    return;
  }
  quad lam_min = lam_max;
  for (const quad& lam : eig.eigenvalues) lam_min = std::min(lam_min, scalar_abs(lam));
  condition = static_cast<double>(lam_max / (lam_min > quad(0) ? lam_min : lam_max * quad(1e-60)));
  const bool full_rank = lam_min / lam_max >= quad(1e-25);
  // rank-deficient: least-norm solve, relative spectral cutoff 1e-12
  const quad floor = full_rank ? quad(0) : quad(1e-12) * lam_max;
  std::vector<quad> xq(static_cast<std::size_t>(n), quad(0));
  for (int j = 0; j < n; ++j) {
    const quad lam = eig.eigenvalues[static_cast<std::size_t>(j)];
    if (!full_rank && scalar_abs(lam) < floor) {
      flags |= trial_flag_truncated;
      continue;
    }
    quad proj = quad(0);
    for (int i = 0; i < n; ++i)
      proj += eig.vectors[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * j] *
              b[static_cast<std::size_t>(i)];
    const quad w = proj / lam;
    for (int i = 0; i < n; ++i)
      xq[static_cast<std::size_t>(i)] +=
          w * eig.vectors[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * j];
  }
  quad rnorm = quad(0), bnorm = quad(0);
  for (int j = 0; j < n; ++j) {
    quad r = -b[static_cast<std::size_t>(j)];
    for (int l = 0; l < n; ++l) r += a[static_cast<std::size_t>(j) * n + l] * xq[static_cast<std::size_t>(l)];
    rnorm += r * r;
    bnorm += b[static_cast<std::size_t>(j)] * b[static_cast<std::size_t>(j)];
  }
  residual = (bnorm > quad(0)) ? static_cast<double>(scalar_sqrt(rnorm / bnorm)) : 0.0;
  quad fq = quad(1);
  for (int k = 1; k <= n; ++k)
    fq += xq[static_cast<std::size_t>(k - 1)] * quad(mu[static_cast<std::size_t>(k)]);
  f_mean = static_cast<double>(fq);
  for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j)] = static_cast<double>(xq[static_cast<std::size_t>(j)]);
  flags |= trial_flag_extended_precision;
}

}  // namespace detail

/// Minimizes <F> over even polynomials 1 + sum C_{2k} M_rho^{2k} of degree
/// n_cutoff.  Stationarity gives the Hankel system A x = b with
/// A_{jl} = <M_rho^{2(j+l)}>, b_j = -<M_rho^{2j}>.  Moments are scaled by
/// s = sqrt(<M_rho^2>) first; the solution is exactly scale-covariant, so
/// this costs nothing and keeps paper-scale magnitudes (M ~ 40) solvable.
inline TrialSolution solve_coefficients(const RadialMoments& radial, int n_cutoff) {
  detail::check_sweep_inputs(radial, n_cutoff);
  TrialSolution out;
  out.n_cutoff = n_cutoff;
  const int K = n_cutoff / 2;
  out.coefficients.assign(static_cast<std::size_t>(K), 0.0);

  const double m1 = radial.values[0];
  if (!(m1 > 0.0)) {
    // point mass at the origin: every trial polynomial evaluates to 1
    out.flags |= trial_flag_degenerate;
    out.f_mean = 1.0;
    return out;
  }
  out.scale = std::sqrt(m1);

  // mu[k] = m_k / m1^k, 1-based; mu[1] = 1 by construction
  std::vector<double> mu(static_cast<std::size_t>(n_cutoff) + 1, 1.0);
  double p = 1.0;
  for (int k = 1; k <= n_cutoff; ++k) {
    p *= m1;
    mu[static_cast<std::size_t>(k)] = radial.values[static_cast<std::size_t>(k - 1)] / p;
  }

  std::vector<double> x(static_cast<std::size_t>(K), 0.0);
  Eigen::MatrixXd A(K, K);
  Eigen::VectorXd b(K);
  for (int j = 0; j < K; ++j) {
    b(j) = -mu[static_cast<std::size_t>(j + 1)];
    for (int l = 0; l < K; ++l) A(j, l) = mu[static_cast<std::size_t>(j + l + 2)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  double lam_max = 0.0, lam_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j < K; ++j) {
    const double lam = std::abs(es.eigenvalues()(j));
    lam_max = std::max(lam_max, lam);
    lam_min = std::min(lam_min, lam);
  }
  const double cond_d = (lam_min > 0.0 && lam_max > 0.0)
                            ? lam_max / lam_min
                            : std::numeric_limits<double>::infinity();
  bool need_quad = cond_d > 1e12;
  if (!need_quad) {
    const Eigen::VectorXd xe = A.ldlt().solve(b);
    for (int j = 0; j < K; ++j) x[static_cast<std::size_t>(j)] = xe(j);
    out.condition = cond_d;
    out.residual = b.norm() > 0.0 ? (A * xe - b).norm() / b.norm() : 0.0;
    double f = 1.0;
    for (int k = 1; k <= K; ++k)
      f += x[static_cast<std::size_t>(k - 1)] * mu[static_cast<std::size_t>(k)];
    out.f_mean = f;
    // the verdict lives at the sign of f; within condition * eps of zero the
    // double tier cannot certify it, so those solves are redone in quad
    need_quad = std::abs(f) < 1e-3;
  }
  if (need_quad)
    detail::solve_scaled_quad(mu, K, x, out.f_mean, out.condition, out.residual, out.flags);

  // un-scale: C_{2k} multiplies M^{2k}, so it carries 1/m1^k
  double inv = 1.0;
  for (int k = 1; k <= K; ++k) {
    inv /= m1;
    out.coefficients[static_cast<std::size_t>(k - 1)] = x[static_cast<std::size_t>(k - 1)] * inv;
  }
  for (double c : out.coefficients)
    if (!std::isfinite(c)) {
      out.flags |= trial_flag_solve_failed;
      throw std::runtime_error("solve_coefficients: non-finite coefficients at n_cutoff = " +
                               std::to_string(n_cutoff));
    }
  if (!std::isfinite(out.f_mean))
    throw std::runtime_error("solve_coefficients: non-finite f_mean at n_cutoff = " +
                             std::to_string(n_cutoff));
  return out;
}

/// F(m_rho) = (1 + sum_k C_{2k} m_rho^{2k})^2, Horner in m_rho^2.
inline double trial_value(const TrialSolution& solution, double m_rho) {
  const double t = m_rho * m_rho;
  double acc = 0.0;
  for (std::size_t k = solution.coefficients.size(); k > 0; --k)
    acc = (acc + solution.coefficients[k - 1]) * t;
  const double base = 1.0 + acc;
  return base * base;
}

/// <F> by the full quadratic expansion 1 + 2 sum C m + sum sum C C m.  The
/// expansion is evaluated in the preconditioned variables, where the
/// products C_{2j}C_{2l}m_{j+l} are O(1); term-by-term this is identical to
/// the unscaled expansion because every term is scale-invariant.
inline double f_mean_quadratic(const RadialMoments& radial, const TrialSolution& solution) {
  const int K = static_cast<int>(solution.coefficients.size());
  if (radial.k_max < 2 * K)
    throw std::invalid_argument("f_mean_quadratic: need radial moments to order 2*n_cutoff");
  if (K == 0 || (solution.flags & trial_flag_degenerate)) return 1.0;
  const double m1 = radial.values[0];
  if (!(m1 > 0.0)) return 1.0;
  std::vector<double> mu(static_cast<std::size_t>(2 * K) + 1, 1.0);
  std::vector<double> chat(static_cast<std::size_t>(K) + 1, 0.0);
  double p = 1.0;
  for (int k = 1; k <= 2 * K; ++k) {
    p *= m1;
    mu[static_cast<std::size_t>(k)] = radial.values[static_cast<std::size_t>(k - 1)] / p;
    if (k <= K) chat[static_cast<std::size_t>(k)] = solution.coefficients[static_cast<std::size_t>(k - 1)] * p;
  }
  double f = 1.0;
  for (int k = 1; k <= K; ++k) f += 2.0 * chat[static_cast<std::size_t>(k)] * mu[static_cast<std::size_t>(k)];
  for (int j = 1; j <= K; ++j)
    for (int l = 1; l <= K; ++l)
      f += chat[static_cast<std::size_t>(j)] * chat[static_cast<std::size_t>(l)] *
           mu[static_cast<std::size_t>(j + l)];
  return f;
}

/// Solves every even cutoff 2..n_cutoff_max and applies the plateau verdict.
/// Entries that fail to solve are flagged and kept, never dropped.
inline SweepResult sweep_cutoff(const RadialMoments& radial, int n_cutoff_max, double z = 2.0) {
  if (n_cutoff_max < 2 || n_cutoff_max % 2 != 0)
    throw std::invalid_argument("sweep_cutoff: n_cutoff_max must be even and >= 2");
  if (!(z >= 0.0)) throw std::invalid_argument("sweep_cutoff: z must be >= 0");
  SweepResult result;
  result.z = z;
  result.route = radial.route;
  double prev_f = std::numeric_limits<double>::infinity();
  for (int nc = 2; nc <= n_cutoff_max; nc += 2) {
    SweepEntry e;
    e.n_cutoff = nc;
    try {
      TrialSolution sol = solve_coefficients(radial, nc);
      const double f_quad = f_mean_quadratic(radial, sol);
      e.f_mean = sol.f_mean;
      e.condition = sol.condition;
      e.flags = sol.flags;
      if (sol.residual < 1e-10 &&
          std::abs(f_quad - sol.f_mean) > 1e-8 * std::max(1.0, std::abs(sol.f_mean)))
        e.flags |= trial_flag_two_path_mismatch;
      if (e.f_mean > prev_f + 1e-8) e.flags |= trial_flag_monotonicity;
      prev_f = e.f_mean;
    } catch (const std::exception&) {
      e.flags |= trial_flag_solve_failed;
      e.f_mean = std::numeric_limits<double>::quiet_NaN();
      e.condition = std::numeric_limits<double>::infinity();
    }
    result.entries.push_back(e);
  }
  const SweepEntry& last = result.entries.back();
  result.plateau = last.f_mean;
  result.plateau_std = last.bootstrap_std;
  // the 1e-10 floor keeps solver noise on exact zero-minimum states (rings)
  // from certifying when bootstrap_std is 0; genuine negatives sit far below
  result.verdict = (std::isfinite(result.plateau) &&
                    result.plateau < -std::max(z * last.bootstrap_std, 1e-10))
                       ? Verdict::nonclassical
                       : Verdict::classical_consistent;
  return result;
}

}  // namespace psdcert
