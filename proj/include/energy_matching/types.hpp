#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace energy_matching {

/// A point in R^d.
using Point = Eigen::VectorXd;

/// An empirical distribution: one point per column (d x n).
using SampleBatch = Eigen::MatrixXd;

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Fills a d x n batch with i.i.d. N(0, 1) entries, column by column.
inline SampleBatch standard_normal(Eigen::Index d, Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleBatch out(d, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < d; ++i) out(i, j) = normal(rng);
  return out;
}

}  // namespace energy_matching
