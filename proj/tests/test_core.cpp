#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "psdcert/core.hpp"

using namespace psdcert;

namespace {

const double kPi = 3.14159265358979323846;

// Brute-force record-level pooling oracle: flatten histograms to individual
// records, count every n across all of them, divide once.
std::vector<double> record_level_pool(const std::vector<AngleHistogram>& hists) {
  std::map<std::int64_t, std::uint64_t> all;
  std::uint64_t total = 0;
  for (const AngleHistogram& h : hists)
    for (const auto& [n, count] : h.counts) {
      all[n] += count;
      total += count;
    }
  std::vector<double> probs(static_cast<std::size_t>(all.rbegin()->first) + 1, 0.0);
  for (const auto& [n, count] : all)
    probs[static_cast<std::size_t>(n)] =
        static_cast<double>(count) / static_cast<double>(total);
  return probs;
}

AngleHistogram make_hist(double beta, std::map<std::int64_t, std::uint64_t> counts) {
  AngleHistogram h;
  h.beta = beta;
  h.counts = std::move(counts);
  h.total_pulses = 0;
  for (const auto& [n, c] : h.counts) h.total_pulses += c;
  return h;
}

}  // namespace

TEST_CASE("detection parameters expose the composite decay constant") {
  DetectionParams p;  // reference values
  CHECK(p.q == 0.3);
  CHECK(p.n_in == 2.0e4);
  CHECK(p.phi == 0.0012);
  CHECK_THAT(p.lambda(), Catch::Matchers::WithinRel(0.3 * 2.0e4 * 0.0012 * 0.0012, 1e-12));

  DetectionParams bad = p;
  bad.q = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.q = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.phi = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("pooling identical histograms is the identity on frequencies") {
  const AngleHistogram h = make_hist(0.0, {{0, 50}, {1, 50}});
  const PooledHistogram g = pool_angles({h, h});
  REQUIRE(g.support_max == 1);
  CHECK_THAT(g.probs[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(g.probs[1], Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("equal-count pooling averages the two angles") {
  const PooledHistogram g =
      pool_angles({make_hist(0.0, {{0, 100}}), make_hist(kPi / 2, {{1, 100}})});
  CHECK_THAT(g.probs[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(g.probs[1], Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("weighting choice changes unbalanced pooling as designed") {
  const std::vector<AngleHistogram> hists = {make_hist(0.0, {{0, 300}}),
                                             make_hist(kPi / 2, {{1, 100}})};
  const PooledHistogram by_count = pool_angles(hists, PoolWeighting::by_count);
  CHECK_THAT(by_count.probs[0], Catch::Matchers::WithinAbs(0.75, 1e-15));
  CHECK_THAT(by_count.probs[1], Catch::Matchers::WithinAbs(0.25, 1e-15));

  const PooledHistogram equal = pool_angles(hists, PoolWeighting::equal_angle);
  CHECK_THAT(equal.probs[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(equal.probs[1], Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("count-weighted pooling equals the record-level pool exactly") {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<std::int64_t> n_dist(0, 12);
  std::uniform_int_distribution<std::uint64_t> c_dist(1, 400);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AngleHistogram> hists;
    const int n_angles = 1 + static_cast<int>(gen() % 5);
    for (int a = 0; a < n_angles; ++a) {
      std::map<std::int64_t, std::uint64_t> counts;
      const int entries = 1 + static_cast<int>(gen() % 8);
      for (int e = 0; e < entries; ++e) counts[n_dist(gen)] += c_dist(gen);
      hists.push_back(make_hist(0.1 * a, std::move(counts)));
    }
    const PooledHistogram pooled = pool_angles(hists, PoolWeighting::by_count);
    const std::vector<double> oracle = record_level_pool(hists);
    REQUIRE(pooled.probs.size() == oracle.size());
    for (std::size_t n = 0; n < oracle.size(); ++n)
      CHECK_THAT(pooled.probs[n], Catch::Matchers::WithinAbs(oracle[n], 1e-15));

    // permutation invariance
    std::vector<AngleHistogram> shuffled = hists;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const PooledHistogram pooled2 = pool_angles(shuffled, PoolWeighting::by_count);
    REQUIRE(pooled2.probs.size() == pooled.probs.size());
    for (std::size_t n = 0; n < pooled.probs.size(); ++n)
      CHECK(pooled.probs[n] == pooled2.probs[n]);

    double sum = 0.0;
    for (double p : pooled.probs) sum += p;
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("pool_angles rejects an empty list") {
  CHECK_THROWS_AS(pool_angles({}), std::invalid_argument);
}

TEST_CASE("validate_records groups by angle and conserves counts") {
  const std::vector<double> angle_set = {0.0, kPi / 2};
  const std::vector<PulseRecord> records = {{0.0, 2}, {0.0, 2}, {kPi / 2, 0}};
  const std::vector<AngleHistogram> hists = validate_records(records, angle_set);
  REQUIRE(hists.size() == 2);
  CHECK(hists[0].beta == 0.0);
  CHECK(hists[0].counts.at(2) == 2);
  CHECK(hists[0].total_pulses == 2);
  CHECK(hists[1].beta == kPi / 2);
  CHECK(hists[1].counts.at(0) == 1);
  CHECK(hists[1].total_pulses == 1);
}

TEST_CASE("validate_records rejects bad input") {
  const std::vector<double> angle_set = {0.0};
  CHECK_THROWS_AS(validate_records({}, angle_set), std::invalid_argument);
  CHECK_THROWS_AS(validate_records({{0.5, 1}}, angle_set), std::invalid_argument);
  CHECK_THROWS_AS(validate_records({{0.0, -1}}, angle_set), std::invalid_argument);
}

TEST_CASE("validate_records conserves large simulated inputs") {
  std::mt19937_64 gen(11);
  const std::vector<double> angle_set = {0.0, kPi / 4, kPi / 2, 3 * kPi / 4};
  std::vector<PulseRecord> records;
  for (int i = 0; i < 10000; ++i)
    records.push_back({angle_set[gen() % 4], static_cast<std::int64_t>(gen() % 20)});
  const std::vector<AngleHistogram> hists = validate_records(records, angle_set);
  std::uint64_t total = 0;
  for (const AngleHistogram& h : hists) total += h.total_pulses;
  CHECK(total == 10000);
}

TEST_CASE("marginal distribution validation and trapezoid normalization") {
  MarginalDistribution m = MarginalDistribution::from_density({0.0, 1.0, 2.0}, {1.0, 1.0, 1.0});
  CHECK_THAT(m.normalization, Catch::Matchers::WithinRel(2.0, 1e-15));

  CHECK_THROWS_AS(MarginalDistribution::from_density({1.0, 2.0}, {1.0, 1.0}),
                  std::invalid_argument);  // grid must start at 0
  CHECK_THROWS_AS(MarginalDistribution::from_density({0.0, 1.0, 1.0}, {1.0, 1.0, 1.0}),
                  std::invalid_argument);  // strictly increasing
  CHECK_THROWS_AS(MarginalDistribution::from_density({0.0, 1.0}, {1.0}),
                  std::invalid_argument);  // size mismatch
}

TEST_CASE("moment containers check the Cauchy-Schwarz chain") {
  // Gaussian axis moments satisfy the chain
  const AxisMoments good = AxisMoments::from_values({1.0, 3.0, 15.0, 105.0}, "exact");
  CHECK(good.chain_ok);
  // wildly inconsistent values trip it
  const AxisMoments bad = AxisMoments::from_values({1.0, 100.0, 1.0}, "exact");
  CHECK_FALSE(bad.chain_ok);
  CHECK_THROWS_AS(AxisMoments::from_values({}, "exact"), std::invalid_argument);
  CHECK_THROWS_AS(AxisMoments::from_values({-1.0}, "exact"), std::invalid_argument);
}

TEST_CASE("pooled histogram invariants are enforced") {
  PooledHistogram g;
  g.probs = {0.5, 0.6};
  g.support_max = 1;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.probs = {0.5, -0.1, 0.6};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  const PooledHistogram ok = PooledHistogram::from_probs({0.25, 0.75, 0.0});
  CHECK(ok.support_max == 1);
  CHECK(ok.probs.size() == 2);
}
