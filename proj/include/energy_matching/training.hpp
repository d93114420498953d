#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "energy_matching/potential.hpp"
#include "energy_matching/schedule.hpp"
#include "energy_matching/types.hpp"

namespace energy_matching {

/// Temperature used by Langevin chains that start on data.
enum class DataInitTemperature { schedule, constant_eps_max };

struct TrainConfig {
  int batch_size = 256;
  double lr = 1e-3;
  int iters_phase1 = 5000;
  int iters_phase2 = 500;
  double t_star = 1.0;
  double eps_max = 0.01;
  double dt = 0.01;
  int m_langevin = 200;
  double lambda_cd = 1e-3;
  double trim_alpha = 0.1;
  double clamp_beta = 0.02;
  double ema_decay_phase1 = 0.999;
  double ema_decay_phase2 = 0.99;
  double neg_data_fraction = 0.5;
  DataInitTemperature data_init_temperature = DataInitTemperature::schedule;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  /// Non-fatal advice, e.g. m_langevin * dt < 1.
  std::vector<std::string> warnings() const;
  TempSchedule schedule() const { return {t_star, eps_max}; }
};

struct IterRecord {
  int phase = 1;
  int iter = 0;
  double loss_ot = 0.0;
  double loss_cd = 0.0;
  double mean_pos_energy = 0.0;
  double trimmed_mean_neg_energy = 0.0;
  double grad_norm = 0.0;
  int dropped_chains = 0;
};

struct TrainReport {
  std::vector<IterRecord> records;
};

/// Yields a d x B batch of data points.
using DataSource = std::function<SampleBatch(int batch_size, Rng& rng)>;

/// Draws batches uniformly with replacement from a fixed dataset.
DataSource resample_from(SampleBatch data);

struct TrainHooks {
  std::function<void(const IterRecord&)> on_record;
  /// Called with (iteration, ema net) every checkpoint_every iterations.
  std::function<void(int, const PotentialNet&)> on_checkpoint;
  int checkpoint_every = 0;
};

struct TrainResult {
  PotentialNet net;  ///< EMA weights
  TrainReport report;
};

/// Point along the straight path: (1 - t) x_noise + t x_data.
Point interpolate(const Point& x_noise, const Point& x_data, double t);

/// Flow objective on an already coupled batch (column i of noise is the OT
/// partner of column i of data):
///   mean_b || grad_x V(x_t_b) + x_data_b - x_noise_b ||^2.
LossGrad ot_loss(const PotentialNet& net, const SampleBatch& data, const SampleBatch& noise,
                 const Eigen::VectorXd& times);

enum class ChainOrigin { data, noise };

struct LangevinResult {
  SampleBatch samples;        ///< retained (finite) chains only
  std::vector<int> retained;  ///< input column of each retained chain
  int dropped = 0;
};

/// Euler-Maruyama chains x <- x - dt grad V(x) + sqrt(2 dt eps_m) eta with
/// frozen parameters, eps_m = eps(m dt) or eps_max for data-started chains
/// under DataInitTemperature::constant_eps_max. Chains that become
/// non-finite are dropped.
LangevinResult langevin_negatives(const PotentialNet& net, const SampleBatch& init,
                                  const std::vector<ChainOrigin>& origins, const TrainConfig& cfg, Rng& rng);

struct CdLoss {
  double value = 0.0;  ///< after clamping at -beta
  double raw = 0.0;    ///< before clamping
  bool clamped = false;
  double mean_pos_energy = 0.0;
  double trimmed_mean_neg_energy = 0.0;
  int trimmed = 0;
  Eigen::VectorXd grad;
};

/// Trimmed mean of values after discarding the ceil(alpha * n) largest.
double trimmed_mean(const Eigen::VectorXd& values, double alpha);

/// Contrastive objective mean V(pos) - trimmed_mean V(neg), clamped below at
/// -clamp_beta. Negatives are frozen sample locations; when clamped the
/// gradient is zero.
CdLoss cd_loss(const PotentialNet& net, const SampleBatch& positives, const SampleBatch& negatives,
               double trim_alpha, double clamp_beta);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(Eigen::Index n);
void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, double lr);
void ema_update(Eigen::VectorXd& ema, const Eigen::VectorXd& params, double decay);

/// Warm-up on the flow objective only.
TrainResult train_phase1(const DataSource& data, const TrainConfig& cfg, const PotentialNet& init,
                         const TrainHooks& hooks = {});

/// Joint flow + contrastive training starting from a warm network.
TrainResult train_phase2(const DataSource& data, const TrainConfig& cfg, const PotentialNet& warm,
                         const TrainHooks& hooks = {});

}  // namespace energy_matching
