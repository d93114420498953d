#include <doctest.h>

#include <limits>

#include "energy_matching/error.hpp"
#include "energy_matching/sampling.hpp"
#include "helpers.hpp"

using namespace em_test;

namespace {

// Value of chain j's energy as a function of its own coordinates.
double chain_value(const EnergyTerm& term, SampleBatch pts, Eigen::Index j, const Eigen::VectorXd& xj) {
  pts.col(j) = xj;
  return term.value(pts)(j);
}

}  // namespace

TEST_CASE("fidelity term value and gradient") {
  const Eigen::MatrixXd a = random_matrix(2, 3, 1);
  const Eigen::VectorXd y = random_matrix(2, 1, 2).col(0);
  const EnergyTerm f = EnergyTerm::fidelity(a, y, 0.5);
  const SampleBatch pts = random_matrix(3, 4, 3);
  const Eigen::VectorXd v = f.value(pts);
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(v(j) >= 0.0);
    CHECK(v(j) == doctest::Approx((y - a * pts.col(j)).squaredNorm() / 0.25));
    const Eigen::VectorXd fd =
        fd_gradient([&](const Eigen::VectorXd& x) { return chain_value(f, pts, j, x); }, pts.col(j));
    CHECK(rel_err(f.gradient(pts).col(j), fd) < 1e-7);
  }
  CHECK((f.residual_norms(pts).array().square() / 0.25 - v.array()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("interaction term value and gradient") {
  const Eigen::MatrixXd b = random_matrix(2, 3, 4);
  const EnergyTerm w = EnergyTerm::interaction(b, 0.7);
  const SampleBatch pts = random_matrix(3, 5, 5);
  const Eigen::VectorXd v = w.value(pts);
  for (Eigen::Index j = 0; j < 5; ++j) {
    CHECK(v(j) <= 0.0);
    double expect = 0;
    for (Eigen::Index k = 0; k < 5; ++k) expect -= (b * (pts.col(j) - pts.col(k))).squaredNorm() / 0.49;
    CHECK(v(j) == doctest::Approx(expect));
    const Eigen::VectorXd fd =
        fd_gradient([&](const Eigen::VectorXd& x) { return chain_value(w, pts, j, x); }, pts.col(j));
    CHECK(rel_err(w.gradient(pts).col(j), fd) < 1e-7);
  }
}

TEST_CASE("infinite scales switch the guidance terms off") {
  const double inf = std::numeric_limits<double>::infinity();
  const SampleBatch pts = random_matrix(2, 3, 6);
  CHECK(EnergyTerm::interaction_mask(Eigen::Vector2d(1, 0), inf).gradient(pts).norm() == 0.0);
  CHECK(EnergyTerm::fidelity_mask(Eigen::Vector2d(1, 0), Eigen::Vector2d(3, 0), inf).gradient(pts).norm() == 0.0);
  CHECK_THROWS_AS(EnergyTerm::interaction(Eigen::MatrixXd::Identity(2, 2), 0.0), ConfigError);
}

TEST_CASE("mask fidelity ignores unobserved coordinates") {
  const EnergyTerm f = EnergyTerm::fidelity_mask(Eigen::Vector2d(1, 0), Eigen::Vector2d(2, 99), 1.0);
  SampleBatch pts(2, 1);
  pts << 2, -5;
  CHECK(f.value(pts)(0) == 0.0);
}

TEST_CASE("composite energy scales guidance by the temperature") {
  const PotentialNet net = PotentialNet::isotropic_quadratic(2);
  const EnergyTerm f = EnergyTerm::fidelity_mask(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 0), 1.0);
  const CompositeEnergy u(net, {f});
  const SampleBatch pts = random_matrix(2, 3, 7);
  CHECK((u.value(pts, 0.3) - (net.eval(pts) + 0.3 * f.value(pts))).norm() < 1e-13);
  CHECK((u.gradient(pts, 0.3) - (net.grad_x(pts) + 0.3 * f.gradient(pts))).norm() < 1e-13);
  CHECK((u.gradient(pts, 0.0) - net.grad_x(pts)).norm() == 0.0);
  CHECK_THROWS_AS(CompositeEnergy(net, {EnergyTerm::interaction(Eigen::MatrixXd::Identity(3, 3), 1.0)}),
                  DimensionError);
}

TEST_CASE("deterministic integrator steps on a quadratic") {
  const CompositeEnergy u(PotentialNet::isotropic_quadratic(2), {});
  const SampleBatch x = random_matrix(2, 3, 8);
  const SampleBatch zero = SampleBatch::Zero(2, 3);
  const double dt = 0.1;
  CHECK((euler_maruyama_step(u, x, dt, 0.0, zero) - (1 - dt) * x).norm() < 1e-15);
  // Heun on x' = -x: x (1 - dt + dt^2 / 2).
  CHECK((euler_heun_step(u, x, dt, 0.0, zero) - (1 - dt + dt * dt / 2) * x).norm() < 1e-15);
  // Noise enters once with scale sqrt(2 eps dt).
  const SampleBatch eta = random_matrix(2, 3, 9);
  CHECK((euler_heun_step(u, x, dt, 0.2, eta) - euler_heun_step(u, x, dt, 0.0, zero) - std::sqrt(0.04) * eta).norm() <
        1e-14);
  const Point p = x.col(0);
  CHECK((euler_heun_step(u, p, dt, 0.0, Point(Point::Zero(2))) - (1 - dt + dt * dt / 2) * p).norm() < 1e-15);
}

TEST_CASE("before t_star the sampler is deterministic whatever the noise stream") {
  const CompositeEnergy u(random_net(2, {8}, Activation::silu, 10), {});
  SampleConfig cfg;
  cfg.tau_s = 0.5;
  cfg.dt = 0.05;
  cfg.t_star = 0.8;
  cfg.eps_max = 0.5;
  cfg.num_chains = 6;
  const SampleBatch init = random_matrix(2, 6, 11);
  cfg.seed = 1;
  const SampleResult a = sample(u, cfg, &init);
  cfg.seed = 2;
  const SampleResult b = sample(u, cfg, &init);
  CHECK(a.samples == b.samples);
  cfg.tau_s = 1.5;
  CHECK(sample(u, cfg, &init).samples != b.samples);
}

TEST_CASE("sampler bookkeeping") {
  const CompositeEnergy u(PotentialNet::isotropic_quadratic(2), {});
  SampleConfig cfg;
  cfg.tau_s = 0.1;
  cfg.dt = 0.01;
  CHECK(cfg.num_steps() == 10);
  cfg.tau_s = 0.3;
  cfg.dt = 0.1;
  CHECK(cfg.num_steps() == 3);
  cfg.num_chains = 5;
  cfg.record_trajectory = true;
  cfg.trajectory_every = 2;
  const SampleResult r = sample(u, cfg);
  CHECK(r.samples.cols() == 5);
  CHECK(r.retained == std::vector<int>{0, 1, 2, 3, 4});
  // Steps 0 and 2 plus the final state.
  CHECK(r.trajectory.size() == 15);
  CHECK(r.trajectory.back().step == 3);
  CHECK(sample(u, cfg).samples == r.samples);
  cfg.init = ChainInit::data;
  CHECK_THROWS_AS(sample(u, cfg), ContractError);
  cfg.tau_s = 0.0;
  CHECK_THROWS_AS(sample(u, cfg), ConfigError);
}

TEST_CASE("diverging chains are frozen and counted") {
  const CompositeEnergy u(PotentialNet::affine(Eigen::Vector2d(1e308, 0), 0), {});
  SampleConfig cfg;
  cfg.tau_s = 20;
  cfg.dt = 10;
  cfg.num_chains = 4;
  const SampleResult r = sample(u, cfg);
  CHECK(r.diverged == 4);
  CHECK(r.samples.cols() == 0);
}

TEST_CASE("interaction pushes chains apart along the repelled coordinate") {
  const PotentialNet net = PotentialNet::isotropic_quadratic(2);
  const SampleBatch init = random_matrix(2, 8, 12) * 0.1;
  SampleConfig cfg;
  cfg.tau_s = 1.0;
  cfg.dt = 0.01;
  cfg.t_star = 0.5;
  cfg.eps_max = 0.1;
  cfg.num_chains = 8;
  const SampleResult plain = sample(CompositeEnergy(net, {}), cfg, &init);
  const SampleResult rep =
      sample(CompositeEnergy(net, {EnergyTerm::interaction_mask(Eigen::Vector2d(0, 1), 2.0)}), cfg, &init);
  auto spread = [](const SampleBatch& s) { return (s.row(1).array() - s.row(1).mean()).square().sum(); };
  CHECK(spread(rep.samples) > spread(plain.samples));
}
