#pragma once

#include <vector>

#include <Eigen/Core>

#include "energy_matching/potential.hpp"
#include "energy_matching/types.hpp"

namespace energy_matching {

struct SpectrumReport {
  Eigen::VectorXd eigenvalues;  ///< sorted ascending by absolute value
  double tau = 0.0;
  int lid = 0;
  Point point;
  double grad_norm = 0.0;
  /// Set when ||grad V(x)|| exceeds the configured bound, i.e. x is probably
  /// not close to a minimum of V and the quadratic picture is unreliable.
  bool gradient_warning = false;
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, in
/// ascending order. Only the upper triangle is read.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a, int max_sweeps = 100);

/// Spectrum of the symmetrized Hessian of V at x. lid and tau are left at 0.
SpectrumReport hessian_spectrum(const PotentialNet& net, const Point& x, double grad_warn_bound = 1.0);

/// Number of eigenvalues with |lambda| <= tau.
int estimate_lid(const SpectrumReport& spectrum, double tau);

/// Threshold at the largest relative gap of the sorted |eigenvalues|: the
/// geometric midpoint of the two magnitudes around the gap.
double gap_threshold(const Eigen::VectorXd& eigenvalues);

/// Median of gap_threshold over a set of spectra.
double default_tau(const std::vector<SpectrumReport>& spectra);

/// Spectrum of every column; lid filled in with `tau`, or with default_tau
/// over the whole set when tau < 0.
std::vector<SpectrumReport> estimate_lid_batch(const PotentialNet& net, const SampleBatch& points, double tau = -1.0,
                                               double grad_warn_bound = 1.0, int threads = 1);

}  // namespace energy_matching
