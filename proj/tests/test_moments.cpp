#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "psdcert/moments.hpp"
#include "psdcert/reconstruct.hpp"
#include "psdcert/synthetic.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;
using Catch::Matchers::WithinRel;

namespace {

psdcert::PooledHistogram poisson_hist(double chi, std::int64_t n_top) {
  std::vector<double> probs(static_cast<std::size_t>(n_top) + 1);
  long double term = std::exp(-static_cast<long double>(chi));
  probs[0] = static_cast<double>(term);
  for (std::int64_t n = 1; n <= n_top; ++n) {
    term *= static_cast<long double>(chi) / static_cast<long double>(n);
    probs[static_cast<std::size_t>(n)] = static_cast<double>(term);
  }
  return psdcert::PooledHistogram::from_probs(std::move(probs));
}

std::vector<double> quadratic_grid(double m_max, std::size_t n_cells) {
  std::vector<double> grid(n_cells + 1);
  for (std::size_t j = 0; j <= n_cells; ++j) {
    const double m = m_max * static_cast<double>(j) / static_cast<double>(n_cells);
    grid[j] = m * m;
  }
  return grid;
}

double double_factorial_odd(int k) {  // (2k-1)!!
  double v = 1.0;
  for (int i = 1; i <= k; ++i) v *= static_cast<double>(2 * i - 1);
  return v;
}

}  // namespace

TEST_CASE("factorial route inverts a pure Poisson histogram exactly") {
  const psdcert::DetectionParams params;
  const double m_sq = 900.0;
  const psdcert::PooledHistogram hist = poisson_hist(params.lambda() * m_sq, 120);
  const psdcert::AxisMoments axis = psdcert::axis_moments_factorial(hist, params, 8);
  CHECK(axis.route == "factorial");
  double want = 1.0;
  for (int k = 1; k <= 8; ++k) {
    want *= m_sq;
    CHECK_THAT(axis.values[static_cast<std::size_t>(k - 1)], WithinRel(want, 1e-10));
  }
}

TEST_CASE("factorial route reproduces closed-form state moments") {
  const psdcert::DetectionParams params;

  SECTION("Gaussian") {
    const double sigma_sq = 1500.0;
    const psdcert::PooledHistogram hist = psdcert::exact_pooled_histogram(
        psdcert::SyntheticState::gaussian(std::sqrt(sigma_sq)), params,
        psdcert::default_n_max(params, sigma_sq, 1e-15) + 100);
    const psdcert::AxisMoments axis = psdcert::axis_moments_factorial(hist, params, 6);
    for (int k = 1; k <= 6; ++k)
      CHECK_THAT(axis.values[static_cast<std::size_t>(k - 1)],
                 WithinRel(double_factorial_odd(k) * std::pow(sigma_sq, k), 1e-6));
  }

  SECTION("single excitation") {
    const double sigma_t_sq = 500.0;
    const psdcert::PooledHistogram hist = psdcert::exact_pooled_histogram(
        psdcert::SyntheticState::single_excitation_state(std::sqrt(sigma_t_sq)), params,
        psdcert::default_n_max(params, 3.0 * sigma_t_sq, 1e-15) + 100);
    const psdcert::AxisMoments axis = psdcert::axis_moments_factorial(hist, params, 4);
    for (int k = 1; k <= 4; ++k)
      CHECK_THAT(axis.values[static_cast<std::size_t>(k - 1)],
                 WithinRel(double_factorial_odd(k) * static_cast<double>(2 * k + 1) *
                               std::pow(sigma_t_sq, k),
                           1e-6));
  }
}

TEST_CASE("marginal route on a point mass returns its powers exactly") {
  // piecewise-linear tent with one interior node: the trapezoid rule sees a
  // single nonzero sample, so every moment is y0^k with no quadrature error
  const double y0 = 900.0;
  std::vector<double> grid(2001), density(2001, 0.0);
  for (std::size_t j = 0; j < grid.size(); ++j) grid[j] = static_cast<double>(j);
  density[900] = 1.0;
  const psdcert::AxisMoments axis = psdcert::axis_moments_from_marginal(
      psdcert::MarginalDistribution::from_density(std::move(grid), std::move(density)), 8);
  double want = 1.0;
  for (int k = 1; k <= 8; ++k) {
    want *= y0;
    CHECK_THAT(axis.values[static_cast<std::size_t>(k - 1)], WithinRel(want, 1e-12));
  }
}

TEST_CASE("marginal route reaches 1e-6 on a dense quadratic grid") {
  // the normalization denominator carries the 1/sqrt(y) origin deficit, which
  // shrinks linearly with the grid pitch; 2^22 cells leave ~3e-7
  const double sigma_sq = 1500.0;
  const psdcert::MarginalDistribution marginal =
      psdcert::exact_marginal(psdcert::SyntheticState::gaussian(std::sqrt(sigma_sq)),
                              quadratic_grid(8.0 * std::sqrt(sigma_sq), std::size_t{1} << 22));
  const psdcert::AxisMoments axis = psdcert::axis_moments_from_marginal(marginal, 6);
  CHECK(axis.route == "marginal");
  for (int k = 1; k <= 6; ++k)
    CHECK_THAT(axis.values[static_cast<std::size_t>(k - 1)],
               WithinRel(double_factorial_odd(k) * std::pow(sigma_sq, k), 1e-6));
}

TEST_CASE("radial conversion applies the exact angular-average factors") {
  SECTION("unit axis moments expose the bare factors") {
    const psdcert::RadialMoments radial = psdcert::radial_from_axis(
        psdcert::AxisMoments::from_values({1.0, 1.0, 1.0, 1.0}, "exact"));
    CHECK(radial.route == "exact");
    CHECK_THAT(radial.values[0], WithinRel(2.0, 1e-15));
    CHECK_THAT(radial.values[1], WithinRel(8.0 / 3.0, 1e-15));
    CHECK_THAT(radial.values[2], WithinRel(16.0 / 5.0, 1e-15));
    CHECK_THAT(radial.values[3], WithinRel(128.0 / 35.0, 1e-15));
  }

  SECTION("Gaussian chain: (2k-1)!! sigma^2k maps to k! (2 sigma^2)^k") {
    const double sigma_sq = 7.0;
    std::vector<double> axis(8);
    for (int k = 1; k <= 8; ++k)
      axis[static_cast<std::size_t>(k - 1)] = double_factorial_odd(k) * std::pow(sigma_sq, k);
    const psdcert::RadialMoments radial =
        psdcert::radial_from_axis(psdcert::AxisMoments::from_values(std::move(axis), "exact"));
    double want = 1.0;
    for (int k = 1; k <= 8; ++k) {
      want *= static_cast<double>(k) * 2.0 * sigma_sq;
      CHECK_THAT(radial.values[static_cast<std::size_t>(k - 1)], WithinRel(want, 1e-12));
    }
  }

  SECTION("integer factors are only guaranteed through k = 16") {
    CHECK_NOTHROW(psdcert::radial_from_axis(
        psdcert::AxisMoments::from_values(std::vector<double>(16, 1.0), "exact")));
    CHECK_THROWS_AS(psdcert::radial_from_axis(psdcert::AxisMoments::from_values(
                        std::vector<double>(17, 1.0), "exact")),
                    std::invalid_argument);
  }
}

TEST_CASE("factorial and marginal routes agree on noiseless Gaussian data") {
  const psdcert::DetectionParams params;
  const double sigma_sq = 1500.0;
  const psdcert::SyntheticState state = psdcert::SyntheticState::gaussian(std::sqrt(sigma_sq));
  const psdcert::PooledHistogram hist = psdcert::exact_pooled_histogram(
      state, params, psdcert::default_n_max(params, sigma_sq, 1e-15) + 100);

  const psdcert::AxisMoments via_counts = psdcert::axis_moments_factorial(hist, params, 6);

  psdcert::DeconvolutionSettings settings;
  settings.grid_half_width = 8.0 * std::sqrt(sigma_sq);
  settings.grid_points = 4096;
  settings.frequency_cutoff = 0.69;
  const auto [marginal, prediction] = psdcert::reconstruct_marginal(hist, params, settings);
  const psdcert::AxisMoments via_marginal =
      psdcert::axis_moments_from_marginal(marginal, 5, /*tail_tol=*/1e-3);

  for (int k = 1; k <= 5; ++k) {
    const double a = via_counts.values[static_cast<std::size_t>(k - 1)];
    const double b = via_marginal.values[static_cast<std::size_t>(k - 1)];
    INFO("k=" << k << " factorial=" << a << " marginal=" << b);
    CHECK(std::abs(a - b) <= 1e-3 * std::abs(a));
  }
}

TEST_CASE("moment extraction guards its preconditions") {
  const psdcert::DetectionParams params;

  SECTION("grid too short for the requested moment order") {
    // Gaussian marginal cut at y = 9 sigma^2: the k-th integrand piles ever
    // more of its mass into the top band as k grows.
    const std::size_t n = 2001;
    std::vector<double> grid(n), density(n);
    for (std::size_t j = 1; j < n; ++j) {
      const double y = 9.0 * static_cast<double>(j) / static_cast<double>(n - 1);
      grid[j] = y;
      density[j] = std::exp(-0.5 * y) / std::sqrt(2.0 * 3.141592653589793 * y);
    }
    grid[0] = 0.0;
    density[0] = density[1];  // finite stand-in at the singular origin
    const psdcert::MarginalDistribution marginal =
        psdcert::MarginalDistribution::from_density(std::move(grid), std::move(density));
    CHECK_THROWS_MATCHES(psdcert::axis_moments_from_marginal(marginal, 4),
                         std::runtime_error,
                         MessageMatches(ContainsSubstring("first failing at k=1")));
    CHECK_THROWS_MATCHES(psdcert::axis_moments_from_marginal(marginal, 4, /*tail_tol=*/0.05),
                         std::runtime_error,
                         MessageMatches(ContainsSubstring("first failing at k=4")));
    CHECK_NOTHROW(psdcert::axis_moments_from_marginal(marginal, 3, /*tail_tol=*/0.05));
  }

  SECTION("factorial route needs counts at least as deep as k_max") {
    std::vector<double> probs(6, 1.0 / 6.0);
    CHECK_THROWS_MATCHES(
        psdcert::axis_moments_factorial(psdcert::PooledHistogram::from_probs(std::move(probs)),
                                        params, 8),
        std::invalid_argument, MessageMatches(ContainsSubstring("support 5")));
  }

  SECTION("k_max must be positive") {
    const psdcert::PooledHistogram hist = poisson_hist(1.0, 30);
    CHECK_THROWS_AS(psdcert::axis_moments_factorial(hist, params, 0), std::invalid_argument);
    const psdcert::MarginalDistribution marginal = psdcert::exact_marginal(
        psdcert::SyntheticState::gaussian(1.0), quadratic_grid(8.0, 256));
    CHECK_THROWS_AS(psdcert::axis_moments_from_marginal(marginal, 0), std::invalid_argument);
  }
}
