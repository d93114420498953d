#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "energy_matching/potential.hpp"
#include "energy_matching/schedule.hpp"
#include "energy_matching/types.hpp"

namespace energy_matching {

enum class EnergyKind { potential, fidelity, interaction };

/// One additive energy contribution evaluated on a set of simultaneously
/// evolving chains (one per column).
///
///   potential:   V(x_m)
///   fidelity:    ||y - A x_m||^2 / zeta^2                      (>= 0)
///   interaction: sum_{k != m} -||B (x_m - x_k)||^2 / sigma^2    (<= 0)
class EnergyTerm {
 public:
  static EnergyTerm potential(PotentialNet net);
  /// A is m x d, y has m entries.
  static EnergyTerm fidelity(Eigen::MatrixXd a, Eigen::VectorXd y, double zeta);
  /// A = diag(mask); y is a full d-vector (entries off the mask are ignored).
  static EnergyTerm fidelity_mask(const Eigen::VectorXd& mask, const Eigen::VectorXd& y, double zeta);
  /// B is any k x d matrix.
  static EnergyTerm interaction(Eigen::MatrixXd b, double sigma);
  static EnergyTerm interaction_mask(const Eigen::VectorXd& mask, double sigma);

  EnergyKind kind() const { return kind_; }
  int input_dim() const;

  /// Per-chain values.
  Eigen::VectorXd value(const SampleBatch& points) const;
  /// Per-chain gradients with respect to that chain's own coordinates.
  SampleBatch gradient(const SampleBatch& points) const;

  /// Measurement residual norms ||y - A x_m|| (fidelity terms only).
  Eigen::VectorXd residual_norms(const SampleBatch& points) const;

 private:
  EnergyTerm() = default;

  EnergyKind kind_ = EnergyKind::potential;
  std::optional<PotentialNet> net_;
  Eigen::MatrixXd op_;  // A or B
  Eigen::VectorXd y_;
  double scale_ = 1.0;  // zeta or sigma
};

/// U(x) = V(x) + sum of potential terms + eps * (fidelity + interaction).
/// The eps factor makes the stationary law of Langevin dynamics at
/// temperature eps proportional to exp(-V/eps - fidelity - interaction).
class CompositeEnergy {
 public:
  CompositeEnergy(PotentialNet net, std::vector<EnergyTerm> terms);

  const PotentialNet& net() const { return net_; }
  const std::vector<EnergyTerm>& terms() const { return terms_; }
  int input_dim() const { return net_.input_dim(); }

  Eigen::VectorXd value(const SampleBatch& points, double eps) const;
  SampleBatch gradient(const SampleBatch& points, double eps, int threads = 1) const;

 private:
  PotentialNet net_;
  std::vector<EnergyTerm> terms_;
  bool has_interaction_ = false;
};

CompositeEnergy compose_energy(const PotentialNet& net, std::vector<EnergyTerm> terms);

enum class Integrator { euler_maruyama, euler_heun };
enum class ChainInit { noise, data };

struct SampleConfig {
  double tau_s = 2.0;
  double dt = 0.01;
  double t_star = 1.0;
  double eps_max = 0.01;
  Integrator integrator = Integrator::euler_heun;
  int num_chains = 1024;
  ChainInit init = ChainInit::noise;
  /// Data-started chains run at eps_max throughout instead of the schedule.
  bool data_chains_at_eps_max = false;
  std::uint64_t seed = 0;
  bool record_trajectory = false;
  int trajectory_every = 1;
  int threads = 1;

  void validate() const;
  /// N = floor(tau_s / dt), guarded against representation error.
  int num_steps() const;
  TempSchedule schedule() const { return {t_star, eps_max}; }
};

struct TrajectoryRow {
  int chain = 0;
  int step = 0;
  double t = 0.0;
  Point x;
  double energy = 0.0;
};

struct SampleResult {
  SampleBatch samples;        ///< live chains only
  std::vector<int> retained;  ///< chain index of each returned sample
  int diverged = 0;
  std::vector<TrajectoryRow> trajectory;
};

/// x - dt grad U(x) + sqrt(2 eps dt) noise, applied to every column.
SampleBatch euler_maruyama_step(const CompositeEnergy& energy, const SampleBatch& x, double dt, double eps,
                                const SampleBatch& noise, int threads = 1);

/// Heun predictor-corrector on the drift, then sqrt(2 eps dt) noise:
///   x~ = x - dt grad U(x);  x' = x - dt/2 (grad U(x) + grad U(x~)) + sqrt(2 eps dt) noise.
SampleBatch euler_heun_step(const CompositeEnergy& energy, const SampleBatch& x, double dt, double eps,
                            const SampleBatch& noise, int threads = 1);
Point euler_heun_step(const CompositeEnergy& energy, const Point& x, double dt, double eps, const Point& noise);

/// Called after every step n (1-based) with the live chains and their ids.
using SampleObserver = std::function<void(int step, const SampleBatch& live, const std::vector<int>& ids)>;

/// Langevin sampling of cfg.num_chains chains for floor(tau_s / dt) steps.
/// `init` supplies the starting points for ChainInit::data (or any custom
/// start); otherwise chains start from N(0, I). Chains that turn non-finite
/// are frozen, excluded from the output and counted in `diverged`.
SampleResult sample(const CompositeEnergy& energy, const SampleConfig& cfg,
                    const SampleBatch* init = nullptr, const SampleObserver& observer = {});

}  // namespace energy_matching
