#include "energy_matching/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "energy_matching/error.hpp"

namespace energy_matching {

namespace {

void check_pair(const SampleBatch& x, const SampleBatch& y) {
  if (x.cols() == 0 || y.cols() == 0) throw DimensionError("coupling requires non-empty batches");
  if (x.cols() != y.cols()) {
    std::ostringstream msg;
    msg << "coupling requires equal batch sizes, got " << x.cols() << " and " << y.cols();
    throw DimensionError(msg.str());
  }
  if (x.rows() != y.rows()) throw DimensionError("coupling requires batches of equal dimension");
}

// Shortest augmenting path Hungarian method. Returns the assignment and the
// final dual potentials; reduced costs cost(i, j) - u(i) - v(j) are >= 0 and
// vanish on assigned pairs.
struct HungarianResult {
  std::vector<int> row_to_col;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

HungarianResult hungarian(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based, index 0 is the virtual source column.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  std::vector<double> minv(static_cast<size_t>(n) + 1);
  std::vector<char> used(static_cast<size_t>(n) + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      const double ui0 = u[static_cast<size_t>(i0)];
      for (int j = 1; j <= n; ++j) {
        const auto uj = static_cast<size_t>(j);
        if (used[uj]) continue;
        const double cur = a(i0 - 1, j - 1) - ui0 - v[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        const auto uj = static_cast<size_t>(j);
        if (used[uj]) {
          u[static_cast<size_t>(p[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  HungarianResult r;
  r.row_to_col.assign(static_cast<size_t>(n), -1);
  r.u.resize(n);
  r.v.resize(n);
  for (int j = 1; j <= n; ++j) r.row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  for (int i = 0; i < n; ++i) {
    r.u(i) = u[static_cast<size_t>(i) + 1];
    r.v(i) = v[static_cast<size_t>(i) + 1];
  }
  return r;
}

// Moves an optimal assignment to the lexicographically smallest optimal one.
// Every optimal assignment lives on the tight edges of any optimal dual, so
// rows are fixed greedily to the smallest column that still admits a perfect
// matching of the remaining rows on tight edges.
class LexicographicRefiner {
 public:
  LexicographicRefiner(const Eigen::MatrixXd& cost, const HungarianResult& h)
      : cost_(cost), h_(h), n_(static_cast<int>(cost.rows())), perm_(h.row_to_col) {
    owner_.assign(static_cast<size_t>(n_), -1);
    for (int i = 0; i < n_; ++i) owner_[static_cast<size_t>(perm_[static_cast<size_t>(i)])] = i;
    const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
    tol_ = 1e-12 * scale;
  }

  std::vector<int> run() {
    for (int i = 0; i < n_; ++i) {
      const int current = perm_[static_cast<size_t>(i)];
      for (int j = 0; j < current; ++j) {
        if (!tight(i, j) || owner_[static_cast<size_t>(j)] < i) continue;
        if (try_move(i, j)) break;
      }
    }
    return perm_;
  }

 private:
  bool tight(int i, int j) const { return cost_(i, j) - h_.u(i) - h_.v(j) <= tol_; }

  // Reassigns row `row` to column `col`, re-routing the displaced rows along
  // tight edges until the column row used to own is taken.
  bool try_move(int row, int col) {
    fixed_row_ = row;
    target_ = perm_[static_cast<size_t>(row)];
    visited_.assign(static_cast<size_t>(n_), 0);
    visited_[static_cast<size_t>(col)] = 1;
    path_.clear();
    if (!search(owner_[static_cast<size_t>(col)])) return false;
    // path_ holds (row, new column) pairs.
    perm_[static_cast<size_t>(row)] = col;
    owner_[static_cast<size_t>(col)] = row;
    for (auto [r, c] : path_) {
      perm_[static_cast<size_t>(r)] = c;
      owner_[static_cast<size_t>(c)] = r;
    }
    return true;
  }

  bool search(int r) {
    for (int c = 0; c < n_; ++c) {
      if (visited_[static_cast<size_t>(c)] || !tight(r, c)) continue;
      const int o = owner_[static_cast<size_t>(c)];
      if (c != target_ && o <= fixed_row_) continue;
      visited_[static_cast<size_t>(c)] = 1;
      if (c == target_ || search(o)) {
        path_.emplace_back(r, c);
        return true;
      }
    }
    return false;
  }

  const Eigen::MatrixXd& cost_;
  const HungarianResult& h_;
  int n_;
  std::vector<int> perm_;
  std::vector<int> owner_;
  double tol_ = 0.0;
  int fixed_row_ = 0;
  int target_ = 0;
  std::vector<char> visited_;
  std::vector<std::pair<int, int>> path_;
};

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double m = z.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

Eigen::MatrixXd squared_distances(const SampleBatch& x, const SampleBatch& y) {
  if (x.rows() != y.rows()) throw DimensionError("squared_distances: dimension mismatch");
  const Eigen::VectorXd xn = x.colwise().squaredNorm().transpose();
  const Eigen::RowVectorXd yn = y.colwise().squaredNorm();
  Eigen::MatrixXd c = -2.0 * (x.transpose() * y);
  c.colwise() += xn;
  c.rowwise() += yn;
  // Clean up cancellation error; exact zeros for coincident points.
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      if (c(i, j) < 1e-9 * (xn(i) + yn(j))) c(i, j) = (x.col(i) - y.col(j)).squaredNorm();
  return c;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw DimensionError("solve_assignment: cost matrix must be square");
  if (cost.rows() == 0) throw DimensionError("solve_assignment: empty cost matrix");
  if (!cost.allFinite()) throw NumericalError("solve_assignment: non-finite cost entries");
  const HungarianResult h = hungarian(cost);
  return LexicographicRefiner(cost, h).run();
}

double permutation_cost(const SampleBatch& x, const SampleBatch& y, const std::vector<int>& perm) {
  double total = 0.0;
  for (size_t i = 0; i < perm.size(); ++i)
    total += (x.col(static_cast<Eigen::Index>(i)) - y.col(perm[i])).squaredNorm();
  return total / static_cast<double>(perm.size());
}

SampleBatch apply_permutation(const SampleBatch& y, const std::vector<int>& perm) {
  SampleBatch out(y.rows(), static_cast<Eigen::Index>(perm.size()));
  for (size_t i = 0; i < perm.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = y.col(perm[i]);
  return out;
}

Coupling exact_assignment(const SampleBatch& x, const SampleBatch& y) {
  check_pair(x, y);
  Coupling c;
  c.kind = CouplingKind::permutation;
  c.perm = solve_assignment(squared_distances(x, y));
  c.cost = permutation_cost(x, y, c.perm);
  return c;
}

Coupling sinkhorn_plan(const SampleBatch& x, const SampleBatch& y, double kappa, int max_iter, double tol) {
  check_pair(x, y);
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("sinkhorn_plan: kappa must be positive");
  if (max_iter < 1) throw ConfigError("sinkhorn_plan: max_iter must be >= 1");
  const Eigen::MatrixXd cost = squared_distances(x, y);
  const Eigen::Index n = cost.rows();
  const double log_marginal = -std::log(static_cast<double>(n));
  const double target = 1.0 / static_cast<double>(n);

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  Coupling c;
  c.kind = CouplingKind::dense_plan;
  c.converged = false;
  Eigen::VectorXd scratch(n);
  for (int it = 1; it <= max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      scratch = (g - cost.row(i).transpose()) / kappa;
      f(i) = kappa * (log_marginal - log_sum_exp(scratch));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      scratch = (f - cost.col(j)) / kappa;
      g(j) = kappa * (log_marginal - log_sum_exp(scratch));
    }
    if (!f.allFinite() || !g.allFinite())
      throw NumericalError("sinkhorn_plan: scaling potentials underflowed; increase kappa");
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      scratch = (f(i) + g.array() - cost.row(i).transpose().array()) / kappa;
      err = std::max(err, std::abs(scratch.array().exp().sum() - target));
    }
    c.iterations = it;
    c.marginal_error = err;
    if (err < tol) {
      c.converged = true;
      break;
    }
  }
  c.plan.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) c.plan(i, j) = std::exp((f(i) + g(j) - cost(i, j)) / kappa);
  if (!c.plan.allFinite()) throw NumericalError("sinkhorn_plan: non-finite plan entries; increase kappa");
  c.cost = c.plan.cwiseProduct(cost).sum();
  return c;
}

Coupling random_matching(const SampleBatch& x, const SampleBatch& y, std::uint64_t seed) {
  check_pair(x, y);
  Coupling c;
  c.kind = CouplingKind::permutation;
  c.perm.resize(static_cast<size_t>(x.cols()));
  std::iota(c.perm.begin(), c.perm.end(), 0);
  Rng rng = make_rng(seed);
  std::shuffle(c.perm.begin(), c.perm.end(), rng);
  c.cost = permutation_cost(x, y, c.perm);
  return c;
}

std::vector<std::pair<int, int>> threshold_pairs(const Coupling& plan, double pi_th) {
  if (plan.kind != CouplingKind::dense_plan)
    throw ContractError("threshold_pairs requires a dense plan coupling");
  std::vector<std::pair<int, int>> pairs;
  for (Eigen::Index i = 0; i < plan.plan.rows(); ++i)
    for (Eigen::Index j = 0; j < plan.plan.cols(); ++j)
      if (plan.plan(i, j) > pi_th) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  return pairs;
}

Coupling round_to_permutation(const Coupling& plan, const SampleBatch& x, const SampleBatch& y) {
  if (plan.kind != CouplingKind::dense_plan)
    throw ContractError("round_to_permutation requires a dense plan coupling");
  check_pair(x, y);
  Coupling c;
  c.kind = CouplingKind::permutation;
  c.perm = solve_assignment(-plan.plan);
  c.cost = permutation_cost(x, y, c.perm);
  return c;
}

CostConcentration cost_concentration(const SampleBatch& x, const SampleBatch& y) {
  if (x.cols() < 2 || y.cols() < 2) throw DimensionError("cost_concentration requires n >= 2");
  const Eigen::MatrixXd cost = squared_distances(x, y);
  CostConcentration out;
  const double count = static_cast<double>(cost.size());
  out.mean = cost.sum() / count;
  out.std = std::sqrt((cost.array() - out.mean).square().sum() / count);
  out.relative_spread = out.mean > 0.0 ? out.std / out.mean : 0.0;
  return out;
}

}  // namespace energy_matching
