#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "energy_matching/coupling.hpp"
#include "energy_matching/error.hpp"
#include "helpers.hpp"

using namespace em_test;

namespace {

double brute_force_min(const Eigen::MatrixXd& c) {
  std::vector<int> p(static_cast<size_t>(c.rows()));
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (size_t i = 0; i < p.size(); ++i) s += c(static_cast<Eigen::Index>(i), p[i]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

bool is_permutation(const std::vector<int>& p) {
  std::set<int> s(p.begin(), p.end());
  return s.size() == p.size() && *s.begin() == 0 && *s.rbegin() == static_cast<int>(p.size()) - 1;
}

}  // namespace

TEST_CASE("assignment equals the brute-force minimum") {
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 7;
    const SampleBatch x = random_matrix(3, n, 10 + trial);
    const SampleBatch y = random_matrix(3, n, 50 + trial);
    const Coupling c = exact_assignment(x, y);
    REQUIRE(is_permutation(c.perm));
    const double best = brute_force_min(squared_distances(x, y)) / n;
    CHECK(std::abs(c.cost - best) < 1e-12);
    CHECK(c.cost == doctest::Approx(permutation_cost(x, y, c.perm)).epsilon(1e-14));
  }
}

TEST_CASE("integer cost matrices with ties give the lexicographically smallest optimum") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(4, 4);
  CHECK(solve_assignment(c) == std::vector<int>{0, 1, 2, 3});
  c << 1, 1, 2, 2,
       1, 1, 2, 2,
       2, 2, 1, 1,
       2, 2, 1, 1;
  CHECK(solve_assignment(c) == std::vector<int>{0, 1, 2, 3});
  c << 3, 1, 1, 9,
       1, 3, 9, 1,
       9, 1, 3, 1,
       1, 9, 1, 3;
  // Several assignments reach the minimum 4; the smallest in lexicographic order wins.
  const auto p = solve_assignment(c);
  double s = 0;
  for (int i = 0; i < 4; ++i) s += c(i, p[static_cast<size_t>(i)]);
  CHECK(s == 4.0);
  CHECK(p == std::vector<int>{1, 0, 3, 2});
}

TEST_CASE("identical batches are matched to themselves") {
  const SampleBatch x = random_matrix(2, 16, 3);
  const Coupling c = exact_assignment(x, x);
  std::vector<int> id(16);
  std::iota(id.begin(), id.end(), 0);
  CHECK(c.perm == id);
  CHECK(c.cost == 0.0);
}

TEST_CASE("squared distances are exact at zero") {
  SampleBatch x = random_matrix(5, 4, 1) * 1e3;
  const Eigen::MatrixXd c = squared_distances(x, x);
  for (int i = 0; i < 4; ++i) CHECK(c(i, i) == 0.0);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(c(0, 1) == doctest::Approx((x.col(0) - x.col(1)).squaredNorm()).epsilon(1e-12));
}

TEST_CASE("sinkhorn plan has uniform marginals and approaches the exact cost") {
  const SampleBatch x = random_matrix(2, 12, 5);
  const SampleBatch y = random_matrix(2, 12, 6);
  const Coupling exact = exact_assignment(x, y);
  const Coupling plan = sinkhorn_plan(x, y, 0.2);
  CHECK(plan.kind == CouplingKind::dense_plan);
  CHECK(plan.converged);
  CHECK((plan.plan.rowwise().sum().array() - 1.0 / 12).abs().maxCoeff() < 1e-8);
  CHECK((plan.plan.colwise().sum().array() - 1.0 / 12).abs().maxCoeff() < 1e-8);
  CHECK(plan.cost >= exact.cost - 1e-9);
  CHECK(plan.cost < exact.cost + 0.1);
  const Coupling rounded = round_to_permutation(plan, x, y);
  CHECK(is_permutation(rounded.perm));
  CHECK(rounded.cost >= exact.cost - 1e-12);
  CHECK(sinkhorn_plan(x, y, 100.0).cost > plan.cost);
  CHECK_THROWS_AS(sinkhorn_plan(x, y, 0.0), ConfigError);
}

TEST_CASE("threshold pairs") {
  const SampleBatch x = random_matrix(2, 6, 7);
  const Coupling plan = sinkhorn_plan(x, x, 1e-3);
  const auto pairs = threshold_pairs(plan, 0.5 / 6);
  CHECK(pairs.size() == 6);
  for (auto [i, j] : pairs) CHECK(i == j);
  CHECK(threshold_pairs(plan, 1.0).empty());
  CHECK_THROWS_AS(threshold_pairs(exact_assignment(x, x), 0.1), ContractError);
}

TEST_CASE("random matching is a seeded permutation no better than optimal") {
  const SampleBatch x = random_matrix(3, 20, 8);
  const SampleBatch y = random_matrix(3, 20, 9);
  const Coupling a = random_matching(x, y, 4);
  CHECK(is_permutation(a.perm));
  CHECK(random_matching(x, y, 4).perm == a.perm);
  CHECK(random_matching(x, y, 5).perm != a.perm);
  CHECK(a.cost >= exact_assignment(x, y).cost);
}

TEST_CASE("cost concentration") {
  const SampleBatch x = random_matrix(1, 2, 1);
  SampleBatch same = SampleBatch::Zero(2, 3);
  const CostConcentration z = cost_concentration(same, same);
  CHECK(z.mean == 0.0);
  CHECK(z.relative_spread == 0.0);
  // Two points on a line: distances {0, 4, 4, 0} -> mean 2, std 2.
  SampleBatch p(1, 2);
  p << 0, 2;
  const CostConcentration c = cost_concentration(p, p);
  CHECK(c.mean == doctest::Approx(2.0));
  CHECK(c.std == doctest::Approx(2.0));
  CHECK(c.relative_spread == doctest::Approx(1.0));
  CHECK_THROWS(cost_concentration(random_matrix(2, 1, 1), random_matrix(2, 1, 2)));
}

TEST_CASE("mismatched batch sizes are rejected") {
  CHECK_THROWS_AS(exact_assignment(random_matrix(2, 3, 1), random_matrix(2, 4, 2)), DimensionError);
}
