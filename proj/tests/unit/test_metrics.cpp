#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "energy_matching/error.hpp"
#include "energy_matching/metrics.hpp"
#include "helpers.hpp"

using namespace em_test;

TEST_CASE("w2 basic values") {
  const SampleBatch x = random_matrix(3, 10, 1);
  CHECK(w2_empirical(x, x) == 0.0);
  const Point a = Eigen::Vector3d(1, 2, 3), b = Eigen::Vector3d(-1, 0, 5);
  CHECK(w2_empirical(SampleBatch(a), SampleBatch(b)) == doctest::Approx((a - b).norm()).epsilon(1e-14));
  CHECK_THROWS_AS(w2_empirical(x, random_matrix(3, 9, 2)), DimensionError);
}

TEST_CASE("w2 equals the brute-force optimum for n = 4") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SampleBatch x = random_matrix(2, 4, seed);
    const SampleBatch y = random_matrix(2, 4, seed + 100);
    std::vector<int> p = {0, 1, 2, 3};
    double best = 1e300;
    do {
      double s = 0;
      for (int i = 0; i < 4; ++i) s += (x.col(i) - y.col(p[static_cast<size_t>(i)])).squaredNorm();
      best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(w2_empirical(x, y) == doctest::Approx(std::sqrt(best / 4)).epsilon(1e-12));
  }
}

TEST_CASE("w2 is a metric on equal-size empirical measures") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SampleBatch x = random_matrix(2, 12, 3 * seed);
    const SampleBatch y = random_matrix(2, 12, 3 * seed + 1) + SampleBatch::Constant(2, 12, 0.5);
    const SampleBatch z = random_matrix(2, 12, 3 * seed + 2) * 2.0;
    CHECK(std::abs(w2_empirical(x, y) - w2_empirical(y, x)) < 1e-12);
    CHECK(w2_empirical(x, z) <= w2_empirical(x, y) + w2_empirical(y, z) + 1e-12);
    CHECK(w2_empirical(x, y) > 0.0);
  }
}

TEST_CASE("mode coverage") {
  SampleBatch modes(2, 3);
  modes << 0, 5, 10, 0, 0, 0;
  const SampleBatch at0 = SampleBatch::Zero(2, 20);
  const ModeCoverage c = mode_coverage(at0, modes, 0.5);
  CHECK(c.fractions == std::vector<double>{1.0, 0.0, 0.0});
  CHECK(c.unassigned == 0.0);
  const ModeCoverage none = mode_coverage(random_matrix(2, 50, 4) + SampleBatch::Constant(2, 50, 0.3), modes, 1e-12);
  CHECK(none.unassigned == 1.0);
  CHECK_THROWS_AS(mode_coverage(at0, SampleBatch(2, 0), 1.0), ConfigError);
  CHECK_THROWS_AS(mode_coverage(at0, modes, 0.0), ConfigError);
}

TEST_CASE("mode coverage of a uniform mixture is within binomial bounds") {
  const int n = 8000;
  SampleBatch modes(2, 8);
  for (int k = 0; k < 8; ++k) modes.col(k) << 10.0 * k, 0.0;
  Rng rng = make_rng(5);
  std::uniform_int_distribution<int> pick(0, 7);
  SampleBatch s(2, n);
  for (int j = 0; j < n; ++j) s.col(j) = modes.col(pick(rng));
  s += 0.1 * standard_normal(2, n, rng);
  const ModeCoverage c = mode_coverage(s, modes, 1.0);
  const double sigma = std::sqrt(0.125 * 0.875 / n);
  for (double f : c.fractions) CHECK(std::abs(f - 0.125) < 3 * sigma);
}

TEST_CASE("landscape grid") {
  const PotentialNet zero = PotentialNet::affine(Eigen::Vector2d::Zero(), 0.0);
  CHECK(landscape_grid(zero, {}, 5).values.cwiseAbs().maxCoeff() == 0.0);
  const PotentialNet a = PotentialNet::affine(Eigen::Vector2d(1, 10), 0.0);
  const LandscapeGrid g = landscape_grid(a, {0, 1, 0, 1}, 2);
  CHECK(g.values(0, 0) == 0.0);
  CHECK(g.values(0, 1) == 1.0);
  CHECK(g.values(1, 0) == 10.0);
  CHECK(g.values(1, 1) == 11.0);
  CHECK_THROWS_AS(landscape_grid(PotentialNet::isotropic_quadratic(3), {}, 5), DimensionError);
  CHECK_THROWS_AS(landscape_grid(a, {}, 1), ConfigError);
  const LandscapeGrid bowl = landscape_grid(PotentialNet::isotropic_quadratic(2), {-1, 1, -1, 1}, 21);
  const SampleBatch mins = grid_local_minima(bowl);
  REQUIRE(mins.cols() == 1);
  CHECK(mins.col(0).norm() < 1e-12);
}
