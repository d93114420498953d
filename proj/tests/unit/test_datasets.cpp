#include <doctest.h>

#include <Eigen/SVD>

#include "energy_matching/datasets.hpp"
#include "energy_matching/error.hpp"
#include "helpers.hpp"

using namespace em_test;

TEST_CASE("noise-free two moons lie on the documented circles") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    DatasetSpec spec{DatasetKind::two_moons, 4, 0.0, seed};
    const SampleBatch x = generate(spec);
    REQUIRE(x.cols() == 4);
    for (int j = 0; j < 4; ++j) {
      const double du = (x.col(j) - two_moons_upper_center()).norm() - 1.0;
      const double dl = (x.col(j) - two_moons_lower_center()).norm() - 1.0;
      CHECK(std::min(std::abs(du), std::abs(dl)) < 1e-12);
    }
    // Upper arc has y above its centre, lower arc below.
    CHECK(x(1, 0) >= two_moons_upper_center()(1) - 1e-12);
    CHECK(x(1, 3) <= two_moons_lower_center()(1) + 1e-12);
  }
}

TEST_CASE("two moons are centred") {
  const SampleBatch x = generate({DatasetKind::two_moons, 40000, 0.0, 3});
  // Per-coordinate std is below 1, so 4/sqrt(n) bounds the mean error.
  CHECK(x.rowwise().mean().cwiseAbs().maxCoeff() < 4.0 / std::sqrt(40000.0));
}

TEST_CASE("eight gaussians populate every mode evenly") {
  DatasetSpec spec{DatasetKind::eight_gaussians, 8000, 0.05, 4};
  const SampleBatch x = generate(spec);
  const SampleBatch means = mixture_means(spec);
  CHECK(means.colwise().norm().minCoeff() == doctest::Approx(2.0));
  std::vector<int> counts(8, 0);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::Index best;
    (means.colwise() - x.col(j)).colwise().squaredNorm().minCoeff(&best);
    ++counts[static_cast<size_t>(best)];
  }
  for (int c : counts) CHECK(std::abs(c - 1000) <= 150);
}

TEST_CASE("eight gaussians component spread equals the noise") {
  const SampleBatch x = generate({DatasetKind::eight_gaussians, 20000, 0.05, 5});
  double var = 0;
  const SampleBatch means = mixture_means({DatasetKind::eight_gaussians});
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    var += (means.colwise() - x.col(j)).colwise().squaredNorm().minCoeff();
  var /= 2.0 * static_cast<double>(x.cols());
  CHECK(std::sqrt(var) == doctest::Approx(0.05).epsilon(0.03));
}

TEST_CASE("embedded affine data has the declared rank") {
  DatasetSpec spec{DatasetKind::embedded_affine, 50, 0.0, 6};
  spec.k = 2;
  spec.d = 5;
  const SampleBatch x = generate(spec);
  CHECK(x.rows() == 5);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(x).singularValues();
  CHECK(sv(1) > 1.0);
  CHECK(sv.tail(3).maxCoeff() < 1e-10);
  const Eigen::MatrixXd q = embedded_basis(5, 2, 0);
  CHECK((q.transpose() * q - Eigen::Matrix2d::Identity()).norm() < 1e-12);
}

TEST_CASE("quadratic oracle and checkerboard moments") {
  DatasetSpec spec{DatasetKind::quadratic_oracle, 20000, 0.3, 7};
  spec.d = 3;
  const SampleBatch x = generate(spec);
  CHECK(x.rowwise().mean().cwiseAbs().maxCoeff() < 4 * 0.3 / std::sqrt(20000.0));
  const Eigen::VectorXd var = (x.colwise() - x.rowwise().mean()).rowwise().squaredNorm() / 20000.0;
  for (int i = 0; i < 3; ++i) CHECK(var(i) == doctest::Approx(0.09).epsilon(0.05));

  const SampleBatch c = generate({DatasetKind::checkerboard, 20000, 0.0, 8});
  CHECK(c.cwiseAbs().maxCoeff() <= 2.0);
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    const long cell = static_cast<long>(std::floor(c(0, j))) + static_cast<long>(std::floor(c(1, j)));
    CHECK((cell & 1L) == 0);
  }
}

TEST_CASE("generation is reproducible and validates its spec") {
  DatasetSpec spec{DatasetKind::gaussian_mixture, 100, 0.1, 9};
  spec.components = 5;
  CHECK(generate(spec) == generate(spec));
  DatasetSpec other = spec;
  other.seed = 10;
  CHECK(generate(spec) != generate(other));
  spec.n = 0;
  CHECK_THROWS_AS(generate(spec), ConfigError);
  DatasetSpec bad{DatasetKind::embedded_affine, 10, 0.0, 1};
  bad.k = 4;
  bad.d = 3;
  CHECK_THROWS_AS(generate(bad), ConfigError);
  CHECK(dataset_kind_from_string("checkerboard") == DatasetKind::checkerboard);
  CHECK_THROWS_AS(dataset_kind_from_string("spirals"), ConfigError);
}
