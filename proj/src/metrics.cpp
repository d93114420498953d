#include "energy_matching/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "energy_matching/coupling.hpp"
#include "energy_matching/error.hpp"
#include "energy_matching/parallel.hpp"

namespace energy_matching {

double w2_empirical(const SampleBatch& x, const SampleBatch& y) {
  if (x.cols() != y.cols()) throw DimensionError("w2_empirical: sets must have equal size");
  if (x.rows() != y.rows()) throw DimensionError("w2_empirical: dimension mismatch");
  if (x.cols() == 0) throw DimensionError("w2_empirical: empty sets");
  const Coupling c = exact_assignment(x, y);
  return std::sqrt(std::max(0.0, c.cost));
}

ModeCoverage mode_coverage(const SampleBatch& samples, const SampleBatch& modes, double radius) {
  if (modes.cols() == 0) throw ConfigError("modes: list is empty");
  if (!(radius > 0.0)) throw ConfigError("radius: must be positive");
  if (modes.rows() != samples.rows()) throw DimensionError("mode_coverage: dimension mismatch");
  ModeCoverage out;
  out.fractions.assign(static_cast<size_t>(modes.cols()), 0.0);
  const Eigen::Index n = samples.cols();
  if (n == 0) return out;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index best = 0;
    const double dist2 = (modes.colwise() - samples.col(j)).colwise().squaredNorm().minCoeff(&best);
    if (std::sqrt(dist2) <= radius)
      out.fractions[static_cast<size_t>(best)] += 1.0;
    else
      out.unassigned += 1.0;
  }
  for (double& f : out.fractions) f /= static_cast<double>(n);
  out.unassigned /= static_cast<double>(n);
  return out;
}

LandscapeGrid landscape_grid(const PotentialNet& net, const Box2& bounds, int resolution, int threads) {
  if (net.input_dim() != 2) throw DimensionError("landscape_grid: only 2-dimensional potentials can be gridded");
  if (resolution < 2) throw ConfigError("resolution: must be >= 2");
  if (!(bounds.x_max > bounds.x_min) || !(bounds.y_max > bounds.y_min))
    throw ConfigError("bounds: max must exceed min");
  LandscapeGrid g;
  g.xs = Eigen::VectorXd::LinSpaced(resolution, bounds.x_min, bounds.x_max);
  g.ys = Eigen::VectorXd::LinSpaced(resolution, bounds.y_min, bounds.y_max);
  g.values.resize(resolution, resolution);
  SampleBatch pts(2, static_cast<Eigen::Index>(resolution) * resolution);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) pts.col(i * resolution + j) << g.xs(j), g.ys(i);
  Eigen::VectorXd v(pts.cols());
  for_each_chunk(pts.cols(), resolve_threads(threads), [&](long begin, long end) {
    v.segment(begin, end - begin) = net.eval(SampleBatch(pts.middleCols(begin, end - begin)));
  });
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) g.values(i, j) = v(i * resolution + j);
  return g;
}

void write_landscape_csv(const std::filesystem::path& path, const LandscapeGrid& grid) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17) << "x1,x2,V\n";
  for (Eigen::Index i = 0; i < grid.ys.size(); ++i)
    for (Eigen::Index j = 0; j < grid.xs.size(); ++j)
      out << grid.xs(j) << ',' << grid.ys(i) << ',' << grid.values(i, j) << '\n';
}

SampleBatch grid_local_minima(const LandscapeGrid& grid) {
  std::vector<Point> mins;
  const Eigen::Index r = grid.values.rows(), c = grid.values.cols();
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      const double v = grid.values(i, j);
      bool is_min = true;
      for (int di = -1; di <= 1 && is_min; ++di)
        for (int dj = -1; dj <= 1 && is_min; ++dj) {
          if (di == 0 && dj == 0) continue;
          const Eigen::Index ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= r || jj >= c) continue;
          if (grid.values(ii, jj) <= v) is_min = false;
        }
      if (is_min) mins.push_back(Eigen::Vector2d(grid.xs(j), grid.ys(i)));
    }
  }
  SampleBatch out(2, static_cast<Eigen::Index>(mins.size()));
  for (size_t k = 0; k < mins.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = mins[k];
  return out;
}

}  // namespace energy_matching
