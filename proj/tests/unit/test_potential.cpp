#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <limits>

#include "energy_matching/error.hpp"
#include "energy_matching/io.hpp"
#include "helpers.hpp"

using namespace em_test;

TEST_CASE("grad_x matches central differences for every activation") {
  for (auto act : {Activation::silu, Activation::tanh, Activation::softplus, Activation::quadratic}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const PotentialNet net = random_net(3, {7, 5}, act, seed, 0.7);
      const Eigen::VectorXd x = random_matrix(3, 1, 100 + seed).col(0);
      const Eigen::VectorXd fd = fd_gradient([&](const Eigen::VectorXd& p) { return net.eval(p); }, x);
      CHECK(rel_err(net.grad_x(x), fd) < 1e-7);
    }
  }
}

TEST_CASE("batched and single-point evaluation agree") {
  const PotentialNet net = random_net(4, {6, 6}, Activation::silu, 3);
  const SampleBatch xs = random_matrix(4, 9, 4);
  const Eigen::VectorXd v = net.eval(xs);
  const SampleBatch g = net.grad_x(xs);
  Eigen::VectorXd v2;
  SampleBatch g2;
  net.eval_and_grad_x(xs, v2, g2);
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    CHECK(v(j) == doctest::Approx(net.eval(Point(xs.col(j)))).epsilon(1e-14));
    CHECK((g.col(j) - net.grad_x(Point(xs.col(j)))).norm() < 1e-13);
  }
  CHECK((v - v2).norm() == 0.0);
  CHECK((g - g2).norm() == 0.0);
}

TEST_CASE("quadratic and affine factories are exact") {
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(3, 3);
  const PotentialNet q = PotentialNet::quadratic(f, Eigen::Vector3d(4, 0, 0));
  const Point x = Eigen::Vector3d(0.5, -2, 3);
  CHECK(q.eval(x) == doctest::Approx(0.5 * 4 * 0.25));
  CHECK((q.grad_x(x) - Eigen::Vector3d(2, 0, 0)).norm() < 1e-14);
  const Eigen::MatrixXd h = q.hessian_x(x);
  CHECK((h - Eigen::Vector3d(4, 0, 0).asDiagonal().toDenseMatrix()).norm() < 1e-7);
  CHECK((h - h.transpose()).norm() == 0.0);

  const PotentialNet a = PotentialNet::affine(Eigen::Vector3d(1, -2, 0.5), 3.0);
  CHECK(a.eval(x) == doctest::Approx(0.5 + 4 + 1.5 + 3));
  CHECK(a.hessian_x(x).norm() < 1e-8);

  const PotentialNet iso = PotentialNet::isotropic_quadratic(3);
  CHECK(iso.eval(x) == doctest::Approx(0.5 * x.squaredNorm()));
}

TEST_CASE("hessian of a random net matches differences of the analytic gradient") {
  const PotentialNet net = random_net(3, {8}, Activation::tanh, 11);
  const Eigen::VectorXd x = random_matrix(3, 1, 12).col(0);
  const Eigen::MatrixXd h = net.hessian_x(x);
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd row =
        fd_gradient([&](const Eigen::VectorXd& p) { return net.grad_x(p)(i); }, x, 1e-5);
    CHECK(rel_err(h.row(i).transpose(), row) < 1e-6);
  }
}

TEST_CASE("non-finite hessian names the coordinate") {
  const PotentialNet net = PotentialNet::affine(Eigen::Vector2d(1, 1), 0);
  const Eigen::Vector2d x(1.0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(net.hessian_x(x), NumericalError);
}

TEST_CASE("parameter gradient of a value tape matches finite differences") {
  for (auto act : {Activation::silu, Activation::tanh, Activation::softplus}) {
    const PotentialNet net = random_net(2, {5, 4}, act, 21, 1.3);
    const SampleBatch pts = random_matrix(2, 6, 22);
    const Eigen::VectorXd w = random_matrix(6, 1, 23).col(0);
    LossTape tape(net);
    tape.add_values(pts, w);
    const LossGrad lg = loss_grad_params(net, tape);
    auto f = [&](const Eigen::VectorXd& p) {
      PotentialNet n2 = net;
      n2.set_params(p);
      return w.dot(n2.eval(pts));
    };
    CHECK(lg.value == doctest::Approx(f(net.params())).epsilon(1e-13));
    CHECK(rel_err(lg.grad, fd_gradient(f, net.params())) < 1e-7);
  }
}

TEST_CASE("parameter gradient through grad_x matches finite differences") {
  for (auto act : {Activation::silu, Activation::tanh, Activation::softplus, Activation::quadratic}) {
    const PotentialNet net = random_net(3, {6, 5}, act, 31, 0.8);
    const SampleBatch pts = random_matrix(3, 5, 32);
    const SampleBatch off = random_matrix(3, 5, 33);
    LossTape tape(net);
    tape.add_grad_residuals(pts, off, 0.2);
    tape.add_values(pts.leftCols(2), -0.5);
    const LossGrad lg = loss_grad_params(net, tape);
    auto f = [&](const Eigen::VectorXd& p) {
      PotentialNet n2 = net;
      n2.set_params(p);
      return 0.2 * (n2.grad_x(pts) + off).colwise().squaredNorm().sum() - 0.5 * n2.eval(SampleBatch(pts.leftCols(2))).sum();
    };
    CHECK(lg.value == doctest::Approx(f(net.params())).epsilon(1e-12));
    CHECK(rel_err(lg.grad, fd_gradient(f, net.params())) < 1e-6);
  }
}

TEST_CASE("loss tape rejects a different architecture") {
  const PotentialNet a = random_net(2, {4}, Activation::silu, 1);
  const PotentialNet b = random_net(2, {5}, Activation::silu, 1);
  LossTape tape(a);
  tape.add_values(random_matrix(2, 3, 2), 1.0);
  CHECK_THROWS_AS(loss_grad_params(b, tape), ContractError);
}

TEST_CASE("initialization layout and bounds") {
  const PotentialNet net = init_net(3, {4, 2}, 1.0, 5);
  CHECK(net.param_count() == param_count_for(3, {4, 2}));
  CHECK(net.param_count() == (3 + 1) * 4 + (4 + 1) * 2 + (2 + 1) * 1);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.fan_in(l)));
    const Eigen::Index n = static_cast<Eigen::Index>(net.fan_in(l) + 1) * net.fan_out(l);
    CHECK(net.params().segment(net.weight_offset(l), n).cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(init_net(3, {4, 2}, 1.0, 5).params() == net.params());
  CHECK(init_net(3, {4, 2}, 1.0, 6).params() != net.params());
  // An empty width list is a single affine layer.
  CHECK(init_net(3, {}, 1.0, 5).param_count() == 4);
  CHECK_THROWS_AS(init_net(3, {0}, 1.0, 5), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  PotentialNet net = random_net(2, {3, 3}, Activation::softplus, 8, 0.37);
  net.mutable_params()(0) = 1.0 / 3.0;
  net.mutable_params()(1) = -0.0;
  net.mutable_params()(2) = 5e-324;
  const Eigen::VectorXd ema = net.params() * 0.5;
  const auto dir = std::filesystem::temp_directory_path() / "em_ckpt_test";
  save_checkpoint(dir / "c.json", net, &ema);
  const Checkpoint back = load_checkpoint(dir / "c.json");
  CHECK(back.net.same_architecture(net));
  CHECK(back.net.output_scale() == net.output_scale());
  CHECK(std::memcmp(back.net.params().data(), net.params().data(), sizeof(double) * net.param_count()) == 0);
  REQUIRE(back.ema_params.has_value());
  CHECK(*back.ema_params == ema);
  CHECK(decode_f64_le(encode_f64_le(ema)) == ema);
  std::filesystem::remove_all(dir);
}

TEST_CASE("points csv round trip") {
  const SampleBatch x = random_matrix(3, 7, 9);
  const auto path = std::filesystem::temp_directory_path() / "em_points_test.csv";
  write_points_csv(path, x);
  CHECK(read_points_csv(path) == x);
  std::filesystem::remove(path);
}
