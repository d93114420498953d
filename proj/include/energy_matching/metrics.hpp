#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "energy_matching/potential.hpp"
#include "energy_matching/types.hpp"

namespace energy_matching {

/// Exact 2-Wasserstein distance between two uniform empirical measures of
/// equal size: sqrt of the optimal mean squared matching cost.
double w2_empirical(const SampleBatch& x, const SampleBatch& y);

struct ModeCoverage {
  std::vector<double> fractions;  ///< per mode
  double unassigned = 0.0;
};

/// Each sample counts towards its nearest mode if that mode lies within
/// `radius`; otherwise it is unassigned.
ModeCoverage mode_coverage(const SampleBatch& samples, const SampleBatch& modes, double radius);

struct Box2 {
  double x_min = -3.0, x_max = 3.0;
  double y_min = -3.0, y_max = 3.0;
};

struct LandscapeGrid {
  Eigen::VectorXd xs;      ///< resolution nodes along x1
  Eigen::VectorXd ys;      ///< resolution nodes along x2
  Eigen::MatrixXd values;  ///< values(i, j) = V(xs(j), ys(i))
};

/// V on a resolution x resolution grid covering `bounds` (corners included).
LandscapeGrid landscape_grid(const PotentialNet& net, const Box2& bounds, int resolution, int threads = 1);

/// Row-major CSV with header x1,x2,V: x1 varies fastest.
void write_landscape_csv(const std::filesystem::path& path, const LandscapeGrid& grid);

/// Grid nodes that are strict local minima over their 8-neighbourhood.
SampleBatch grid_local_minima(const LandscapeGrid& grid);

}  // namespace energy_matching
