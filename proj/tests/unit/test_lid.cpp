#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "energy_matching/error.hpp"
#include "energy_matching/lid.hpp"
#include "helpers.hpp"

using namespace em_test;

TEST_CASE("jacobi eigenvalues agree with an independent solver") {
  for (int n : {1, 2, 5, 10}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Eigen::MatrixXd g = random_matrix(n, n, seed * 31 + n);
      const Eigen::MatrixXd a = 0.5 * (g + g.transpose());
      const Eigen::VectorXd mine = symmetric_eigenvalues(a);
      const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues();
      CHECK((mine - ref).norm() <= 1e-8 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
  }
  Eigen::Matrix3d d = Eigen::Vector3d(3, -1, 2).asDiagonal();
  CHECK(symmetric_eigenvalues(d) == Eigen::Vector3d(-1, 2, 3));
}

TEST_CASE("spectrum of exact quadratics") {
  const PotentialNet q = PotentialNet::quadratic(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(4, 0, 0));
  const SpectrumReport r = hessian_spectrum(q, Eigen::Vector3d(0.1, 0.2, -0.3));
  CHECK(std::abs(r.eigenvalues(0)) < 1e-6);
  CHECK(std::abs(r.eigenvalues(1)) < 1e-6);
  CHECK(r.eigenvalues(2) == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(estimate_lid(r, 0.5) == 2);
  CHECK(estimate_lid(r, 10.0) == 3);
  CHECK(r.gradient_warning == false);

  const SpectrumReport flat = hessian_spectrum(PotentialNet::affine(Eigen::Vector3d(1, 2, 3), 0), Eigen::Vector3d::Zero());
  CHECK(flat.eigenvalues.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(flat.gradient_warning);
}

TEST_CASE("random quadratic form spectrum") {
  const Eigen::MatrixXd f = random_matrix(5, 5, 77);
  const Eigen::VectorXd w = random_matrix(5, 1, 78).col(0);
  const PotentialNet q = PotentialNet::quadratic(f, w);
  const Eigen::MatrixXd h = f.transpose() * w.asDiagonal() * f;
  Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues();
  std::sort(ref.data(), ref.data() + 5, [](double a, double b) { return std::abs(a) < std::abs(b); });
  const SpectrumReport r = hessian_spectrum(q, random_matrix(5, 1, 79).col(0), 1e9);
  CHECK((r.eigenvalues - ref).norm() < 1e-6 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("estimate_lid counts small magnitudes and is monotone in tau") {
  SpectrumReport r;
  r.eigenvalues = Eigen::Vector3d(0, 0, 4);
  CHECK(estimate_lid(r, 0.5) == 2);
  CHECK(estimate_lid(r, 0.0) == 2);
  CHECK(estimate_lid(r, 4.0) == 3);
  r.eigenvalues = Eigen::Vector4d(0.01, -0.2, 1.5, -3.0);
  int prev = 0;
  for (double tau = 0; tau < 5; tau += 0.05) {
    const int lid = estimate_lid(r, tau);
    CHECK(lid >= prev);
    CHECK(lid <= 4);
    prev = lid;
  }
  CHECK_THROWS_AS(estimate_lid(r, -1.0), ConfigError);
}

TEST_CASE("gap threshold splits at the largest relative jump") {
  Eigen::VectorXd ev(5);
  ev << 1e-4, -2e-4, 3.0, 5.0, -4.0;
  const double tau = gap_threshold(ev);
  CHECK(tau > 2e-4);
  CHECK(tau < 3.0);
  SpectrumReport s;
  s.eigenvalues = ev;
  CHECK(estimate_lid(s, tau) == 2);
  const double exact_zero = gap_threshold(Eigen::Vector3d(0, 0, 2));
  CHECK(exact_zero > 0.0);
  CHECK(exact_zero < 2.0);
}

TEST_CASE("batch estimation uses the median gap threshold") {
  const PotentialNet q = PotentialNet::quadratic(Eigen::MatrixXd::Identity(4, 4), Eigen::Vector4d(3, 2, 0, 0));
  const auto reports = estimate_lid_batch(q, random_matrix(4, 7, 3) * 0.1);
  REQUIRE(reports.size() == 7);
  for (const auto& r : reports) CHECK(r.lid == 2);
  const auto fixed = estimate_lid_batch(q, random_matrix(4, 2, 3), 2.5);
  CHECK(fixed[0].lid == 3);
  CHECK(fixed[0].tau == 2.5);
}
