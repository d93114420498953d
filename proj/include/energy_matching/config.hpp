#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "energy_matching/datasets.hpp"
#include "energy_matching/potential.hpp"
#include "energy_matching/sampling.hpp"
#include "energy_matching/training.hpp"

namespace energy_matching {

/// Every setting of a command-line run. Serialized as one flat JSON object;
/// the resolved object is what manifests record.
struct RunConfig {
  // data
  DatasetSpec dataset;
  std::string data_path;  ///< CSV of points; overrides the generator when set
  int eval_n = 2048;
  std::uint64_t eval_seed = 7;

  // model
  std::vector<int> widths = {128, 128, 128};
  Activation activation = Activation::silu;
  double output_scale = 1.0;
  std::uint64_t init_seed = 0;

  // training
  TrainConfig train;
  std::string phase = "both";  ///< phase1 | phase2 | both
  int checkpoint_every = 0;

  // sampling
  double tau_s = 2.0;
  Integrator integrator = Integrator::euler_heun;
  int num_chains = 1024;
  ChainInit chain_init = ChainInit::noise;
  bool data_chains_at_eps_max = false;
  std::uint64_t sample_seed = 1;
  bool trajectory = false;
  int trajectory_every = 10;

  // inverse problems
  std::string problem_path;

  // lid
  double lid_tau = -1.0;  ///< negative: gap heuristic
  double grad_warn_bound = 1.0;
  int lid_top_k = 0;      ///< 0: all eigenvalues

  // landscape
  std::array<double, 4> bounds = {-3.0, 3.0, -3.0, 3.0};
  int resolution = 101;

  // ablations
  std::vector<int> ablate_n = {64, 128, 256};
  std::vector<int> ablate_d = {2, 64, 3072};
  int ablate_repeats = 3;
  double sinkhorn_kappa = 0.05;
  std::vector<double> tau_grid = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0};

  // io
  std::string checkpoint;
  std::string out = "out";
  int threads = 0;  ///< 0: ENERGY_MATCHING_THREADS, else all cores

  void validate() const;
  SampleConfig sample_config() const;
  TrainConfig train_config() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
/// Applies every key of a flat object onto `cfg`. Unknown keys and values of
/// the wrong type raise ConfigError naming the key.
void apply_config_json(RunConfig& cfg, const nlohmann::json& doc);
RunConfig config_from_json(const nlohmann::json& doc);
/// `key=value`; the value is parsed as JSON when possible, else taken as a string.
void apply_override(RunConfig& cfg, std::string_view assignment);

std::vector<std::string> config_keys();

}  // namespace energy_matching
