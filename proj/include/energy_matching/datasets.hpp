#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "energy_matching/types.hpp"

namespace energy_matching {

enum class DatasetKind { two_moons, eight_gaussians, gaussian_mixture, checkerboard, embedded_affine, quadratic_oracle };

std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);

/// Layouts (all roughly centred at the origin):
///   two_moons        two unit half-circles, upper arc centred at (-0.5, -0.25)
///                    and lower arc centred at (0.5, 0.25); n/2 rounded up on the
///                    upper arc; isotropic Gaussian noise of std `noise`.
///   eight_gaussians  eight means on the circle of radius 2 at angles k*pi/4,
///                    component std `noise`.
///   gaussian_mixture `components` means on the circle of radius `radius`,
///                    component std `noise`.
///   checkerboard     uniform on the 8 dark squares of a 4x4 board over
///                    [-2, 2]^2, plus noise.
///   embedded_affine  x = Q u + noise * eta with u ~ N(0, I_k) and Q a d x k
///                    orthonormal basis drawn from `basis_seed`.
///   quadratic_oracle N(0, noise^2 I_d), the equilibrium of V = |x|^2 / 2 at
///                    temperature noise^2.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::two_moons;
  int n = 1000;
  double noise = 0.05;
  std::uint64_t seed = 0;
  int k = 2;
  int d = 2;
  int components = 8;
  double radius = 2.0;
  std::uint64_t basis_seed = 0;

  /// Dimension of the generated points.
  int dim() const;
};

/// d x n batch; reproducible per seed.
SampleBatch generate(const DatasetSpec& spec);

/// Orthonormal d x k basis used by embedded_affine.
Eigen::MatrixXd embedded_basis(int d, int k, std::uint64_t basis_seed);

/// The two circle centres of the two_moons layout.
Point two_moons_upper_center();
Point two_moons_lower_center();

/// Component means of eight_gaussians / gaussian_mixture.
SampleBatch mixture_means(const DatasetSpec& spec);

}  // namespace energy_matching
