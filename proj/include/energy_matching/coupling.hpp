#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "energy_matching/types.hpp"

namespace energy_matching {

enum class CouplingKind { permutation, dense_plan };

/// A minibatch OT pairing between two equal-size batches X and Y.
///
/// For the permutation kind, column i of X is paired with column perm[i]
/// of Y and cost = sum_i ||x_i - y_perm[i]||^2 / n. For the dense kind,
/// plan(i, j) is the mass moved from x_i to y_j, with row and column sums
/// 1/n, and cost = sum_ij plan(i, j) ||x_i - y_j||^2.
struct Coupling {
  CouplingKind kind = CouplingKind::permutation;
  std::vector<int> perm;
  Eigen::MatrixXd plan;
  double cost = 0.0;

  // Solver diagnostics (Sinkhorn only).
  int iterations = 0;
  double marginal_error = 0.0;
  bool converged = true;
};

/// C(i, j) = ||x_i - y_j||^2.
Eigen::MatrixXd squared_distances(const SampleBatch& x, const SampleBatch& y);

/// Minimum-cost perfect assignment for a square cost matrix (shortest
/// augmenting path Hungarian method, O(n^3)). Among optimal assignments the
/// lexicographically smallest is returned. result[i] is the column of row i.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Exact OT between the uniform empirical measures on X and Y.
Coupling exact_assignment(const SampleBatch& x, const SampleBatch& y);

/// Entropic OT plan from log-domain Sinkhorn iterations with regularization
/// kappa on C(i, j) = ||x_i - y_j||^2. Stops once the row marginal error
/// drops below tol or after max_iter iterations (see Coupling::converged).
Coupling sinkhorn_plan(const SampleBatch& x, const SampleBatch& y, double kappa, int max_iter = 10000,
                       double tol = 1e-9);

/// Uniformly random permutation, reproducible per seed.
Coupling random_matching(const SampleBatch& x, const SampleBatch& y, std::uint64_t seed);

/// All (row, column) pairs with plan mass strictly above pi_th.
std::vector<std::pair<int, int>> threshold_pairs(const Coupling& plan, double pi_th);

/// Permutation carrying the most plan mass (a maximum-weight matching on the
/// plan), with its transport cost on X, Y.
Coupling round_to_permutation(const Coupling& plan, const SampleBatch& x, const SampleBatch& y);

/// Total cost of a permutation: sum_i ||x_i - y_perm[i]||^2 / n.
double permutation_cost(const SampleBatch& x, const SampleBatch& y, const std::vector<int>& perm);

/// Reorders y so that column i is the partner of x_i.
SampleBatch apply_permutation(const SampleBatch& y, const std::vector<int>& perm);

struct CostConcentration {
  double mean = 0.0;
  double std = 0.0;
  double relative_spread = 0.0;
};

/// Statistics over all n^2 pairwise squared distances. relative_spread is
/// std / mean, and 0 when the mean is 0.
CostConcentration cost_concentration(const SampleBatch& x, const SampleBatch& y);

}  // namespace energy_matching
