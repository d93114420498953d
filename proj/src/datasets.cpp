#include "energy_matching/datasets.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/QR>

#include "energy_matching/error.hpp"

namespace energy_matching {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::two_moons: return "two_moons";
    case DatasetKind::eight_gaussians: return "eight_gaussians";
    case DatasetKind::gaussian_mixture: return "gaussian_mixture";
    case DatasetKind::checkerboard: return "checkerboard";
    case DatasetKind::embedded_affine: return "embedded_affine";
    case DatasetKind::quadratic_oracle: return "quadratic_oracle";
  }
  return "unknown";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
  for (auto k : {DatasetKind::two_moons, DatasetKind::eight_gaussians, DatasetKind::gaussian_mixture,
                 DatasetKind::checkerboard, DatasetKind::embedded_affine, DatasetKind::quadratic_oracle})
    if (to_string(k) == name) return k;
  throw ConfigError("dataset: unknown kind '" + std::string(name) + "'");
}

int DatasetSpec::dim() const {
  switch (kind) {
    case DatasetKind::embedded_affine:
    case DatasetKind::quadratic_oracle: return d;
    default: return 2;
  }
}

Point two_moons_upper_center() { return Eigen::Vector2d(-0.5, -0.25); }
Point two_moons_lower_center() { return Eigen::Vector2d(0.5, 0.25); }

Eigen::MatrixXd embedded_basis(int d, int k, std::uint64_t basis_seed) {
  if (k < 1 || k > d) throw ConfigError("k: must satisfy 1 <= k <= d");
  Rng rng = make_rng(basis_seed);
  const Eigen::MatrixXd g = standard_normal(d, k, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
}

SampleBatch mixture_means(const DatasetSpec& spec) {
  const int m = spec.kind == DatasetKind::eight_gaussians ? 8 : spec.components;
  const double r = spec.kind == DatasetKind::eight_gaussians ? 2.0 : spec.radius;
  SampleBatch means(2, m);
  for (int i = 0; i < m; ++i) {
    const double a = 2.0 * std::numbers::pi * i / m;
    means(0, i) = r * std::cos(a);
    means(1, i) = r * std::sin(a);
  }
  return means;
}

SampleBatch generate(const DatasetSpec& spec) {
  if (spec.n <= 0) throw ConfigError("n: must be positive");
  if (!(spec.noise >= 0.0)) throw ConfigError("noise: must be nonnegative");
  Rng rng = make_rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = spec.n;

  switch (spec.kind) {
    case DatasetKind::two_moons: {
      SampleBatch x(2, n);
      const int upper = (n + 1) / 2;
      const Point cu = two_moons_upper_center();
      const Point cl = two_moons_lower_center();
      for (int i = 0; i < n; ++i) {
        const double t = std::numbers::pi * unit(rng);
        if (i < upper) {
          x(0, i) = cu(0) + std::cos(t);
          x(1, i) = cu(1) + std::sin(t);
        } else {
          x(0, i) = cl(0) - std::cos(t);
          x(1, i) = cl(1) - std::sin(t);
        }
      }
      if (spec.noise > 0) x += spec.noise * standard_normal(2, n, rng);
      return x;
    }
    case DatasetKind::eight_gaussians:
    case DatasetKind::gaussian_mixture: {
      if (spec.kind == DatasetKind::gaussian_mixture && spec.components < 1)
        throw ConfigError("components: must be >= 1");
      const SampleBatch means = mixture_means(spec);
      std::uniform_int_distribution<int> pick(0, static_cast<int>(means.cols()) - 1);
      SampleBatch x(2, n);
      for (int i = 0; i < n; ++i) x.col(i) = means.col(pick(rng));
      if (spec.noise > 0) x += spec.noise * standard_normal(2, n, rng);
      return x;
    }
    case DatasetKind::checkerboard: {
      SampleBatch x(2, n);
      std::uniform_int_distribution<int> coin(0, 1);
      for (int i = 0; i < n; ++i) {
        const double x1 = 4.0 * unit(rng) - 2.0;
        const double x2 = unit(rng) - 2.0 * coin(rng);
        x(0, i) = x1;
        x(1, i) = x2 + static_cast<double>(static_cast<long>(std::floor(x1)) & 1L);
      }
      if (spec.noise > 0) x += spec.noise * standard_normal(2, n, rng);
      return x;
    }
    case DatasetKind::embedded_affine: {
      if (spec.d < 1) throw ConfigError("d: must be >= 1");
      const Eigen::MatrixXd q = embedded_basis(spec.d, spec.k, spec.basis_seed);
      SampleBatch x = q * standard_normal(spec.k, n, rng);
      if (spec.noise > 0) x += spec.noise * standard_normal(spec.d, n, rng);
      return x;
    }
    case DatasetKind::quadratic_oracle: {
      if (spec.d < 1) throw ConfigError("d: must be >= 1");
      return spec.noise * standard_normal(spec.d, n, rng);
    }
  }
  throw ConfigError("dataset: unknown kind");
}

}  // namespace energy_matching
