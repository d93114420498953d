#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "energy_matching/potential.hpp"
#include "energy_matching/types.hpp"

namespace em_test {

using namespace energy_matching;

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

/// Central finite-difference gradient of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + step;
    xm(i) = x(i) - step;
    g(i) = (f(xp) - f(xm)) / (2.0 * step);
    xp(i) = xm(i) = x(i);
  }
  return g;
}

/// Network with moderate random weights so that activations are not saturated.
inline PotentialNet random_net(int d, std::vector<int> widths, Activation act, std::uint64_t seed,
                               double scale = 1.0) {
  return init_net(d, std::move(widths), scale, seed, act);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return standard_normal(r, c, rng);
}

}  // namespace em_test
