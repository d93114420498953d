#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Core>

#include "energy_matching/coupling.hpp"
#include "energy_matching/datasets.hpp"
#include "energy_matching/error.hpp"
#include "energy_matching/io.hpp"
#include "energy_matching/lid.hpp"
#include "energy_matching/metrics.hpp"
#include "energy_matching/sampling.hpp"
#include "energy_matching/training.hpp"

namespace em_cli {

using namespace energy_matching;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

SampleBatch load_points(const RunConfig& cfg) {
  if (!cfg.data_path.empty()) return read_points_csv(cfg.data_path);
  return generate(cfg.dataset);
}

Checkpoint load_required_checkpoint(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("checkpoint: required for this command");
  if (!fs::exists(cfg.checkpoint)) throw IoError("checkpoint: file not found: " + cfg.checkpoint);
  return load_checkpoint(cfg.checkpoint);
}

void write_train_log(const fs::path& path, const TrainReport& report) {
  auto out = open_csv(path);
  out << "phase,iter,loss_ot,loss_cd,mean_pos_energy,trimmed_mean_neg_energy,grad_norm,dropped_chains\n";
  for (const auto& r : report.records)
    out << r.phase << ',' << r.iter << ',' << r.loss_ot << ',' << r.loss_cd << ',' << r.mean_pos_energy << ','
        << r.trimmed_mean_neg_energy << ',' << r.grad_norm << ',' << r.dropped_chains << '\n';
}

void write_trajectory(const fs::path& path, const std::vector<TrajectoryRow>& rows, int d) {
  auto out = open_csv(path);
  out << "chain,step,t";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  out << ",energy\n";
  for (const auto& r : rows) {
    out << r.chain << ',' << r.step << ',' << r.t;
    for (int i = 0; i < d; ++i) out << ',' << r.x(i);
    out << ',' << r.energy << '\n';
  }
}

SampleBatch chain_init_points(const RunConfig& cfg, int d) {
  if (cfg.chain_init == ChainInit::noise) return {};
  SampleBatch pts;
  if (!cfg.data_path.empty()) {
    pts = read_points_csv(cfg.data_path);
  } else {
    DatasetSpec spec = cfg.dataset;
    spec.n = cfg.num_chains;
    pts = generate(spec);
  }
  if (pts.rows() != d) throw DimensionError("initial points do not match the checkpoint dimension");
  if (pts.cols() > cfg.num_chains) pts.conservativeResize(Eigen::NoChange, cfg.num_chains);
  return pts;
}

json sample_summary(const SampleResult& r) {
  return {{"retained", r.samples.cols()}, {"diverged", r.diverged}};
}

SampleResult run_sampler(const RunConfig& cfg, const CompositeEnergy& energy, Manifest& m) {
  const SampleBatch init = chain_init_points(cfg, energy.input_dim());
  const SampleResult r = sample(energy, cfg.sample_config(), init.cols() > 0 ? &init : nullptr);
  const fs::path out = cfg.out;
  write_points_csv(out / "samples.csv", r.samples);
  m.add_output("samples", out / "samples.csv");
  if (cfg.trajectory) {
    write_trajectory(out / "trajectory.csv", r.trajectory, energy.input_dim());
    m.add_output("trajectory", out / "trajectory.csv");
  }
  if (r.diverged > 0) std::cerr << "warning: " << r.diverged << " chains diverged and were dropped\n";
  m.summary = sample_summary(r);
  return r;
}

double scale_from_json(const json& v, const char* key) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (v.is_string() && (v == "inf" || v == "infinity")) return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw ConfigError(std::string("problem.") + key + ": expected a number or \"inf\"");
  return v.get<double>();
}

Eigen::MatrixXd matrix_from_json(const json& rows, const char* key) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array())
    throw ConfigError(std::string("problem.") + key + ": expected a non-empty array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError(std::string("problem.") + key + ": ragged rows");
    for (size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& v, const char* key) {
  if (!v.is_array()) throw ConfigError(std::string("problem.") + key + ": expected an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  return out;
}

std::vector<EnergyTerm> terms_from_problem(const json& doc) {
  static const std::vector<std::string> known = {"fidelity", "interaction"};
  for (const auto& [key, value] : doc.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("problem: unknown key '" + key + "'");
  std::vector<EnergyTerm> terms;
  try {
    if (doc.contains("fidelity")) {
      const json& f = doc.at("fidelity");
      const Eigen::VectorXd y = vector_from_json(f.at("y"), "fidelity.y");
      const double zeta = scale_from_json(f.value("zeta", json(1.0)), "fidelity.zeta");
      if (f.contains("mask"))
        terms.push_back(EnergyTerm::fidelity_mask(vector_from_json(f.at("mask"), "fidelity.mask"), y, zeta));
      else
        terms.push_back(EnergyTerm::fidelity(matrix_from_json(f.at("A"), "fidelity.A"), y, zeta));
    }
    if (doc.contains("interaction")) {
      const json& w = doc.at("interaction");
      const double sigma = scale_from_json(w.value("sigma", json(1.0)), "interaction.sigma");
      if (w.contains("mask"))
        terms.push_back(EnergyTerm::interaction_mask(vector_from_json(w.at("mask"), "interaction.mask"), sigma));
      else
        terms.push_back(EnergyTerm::interaction(matrix_from_json(w.at("B"), "interaction.B"), sigma));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  return terms;
}

}  // namespace

json versions() {
  return {{"energy_matching", kVersion},
          {"checkpoint_format", kCheckpointFormatVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
#ifdef __VERSION__
          {"compiler", __VERSION__},
#endif
          {"cplusplus", __cplusplus}};
}

void write_manifest(const RunConfig& cfg, const Manifest& m) {
  json doc = {{"command", m.command},
              {"config", config_to_json(cfg)},
              {"seed", cfg.train.seed},
              {"versions", versions()},
              {"outputs", m.outputs},
              {"summary", m.summary}};
  write_json_file(fs::path(cfg.out) / "manifest.json", doc);
}

void cmd_gen(const RunConfig& cfg, Manifest& m) {
  const SampleBatch x = generate(cfg.dataset);
  const fs::path path = fs::path(cfg.out) / "data.csv";
  write_points_csv(path, x);
  m.add_output("data", path);
  m.summary = {{"n", x.cols()}, {"dim", x.rows()}};
}

void cmd_train(const RunConfig& cfg, Manifest& m) {
  const TrainConfig tc = cfg.train_config();
  for (const auto& w : tc.warnings()) std::cerr << "warning: " << w << '\n';
  const SampleBatch data = load_points(cfg);
  const DataSource source = resample_from(data);
  const fs::path out = cfg.out;

  TrainHooks hooks;
  int phase = 1;
  if (cfg.checkpoint_every > 0) {
    hooks.checkpoint_every = cfg.checkpoint_every;
    hooks.on_checkpoint = [&](int iter, const PotentialNet& net) {
      std::ostringstream name;
      name << "phase" << phase << "_iter" << std::setw(6) << std::setfill('0') << iter << ".json";
      save_checkpoint(out / "checkpoints" / name.str(), net);
    };
  }

  PotentialNet net = cfg.phase == "phase2" ? load_required_checkpoint(cfg).net
                                           : init_net(static_cast<int>(data.rows()), cfg.widths, cfg.output_scale,
                                                      cfg.init_seed, cfg.activation);
  if (net.input_dim() != data.rows()) throw DimensionError("training data do not match the network dimension");
  TrainReport report;
  if (cfg.phase == "phase1" || cfg.phase == "both") {
    TrainResult r = train_phase1(source, tc, net, hooks);
    net = std::move(r.net);
    report.records = std::move(r.report.records);
    if (cfg.phase == "both") {
      save_checkpoint(out / "checkpoint_phase1.json", net);
      m.add_output("checkpoint_phase1", out / "checkpoint_phase1.json");
    }
  }
  if (cfg.phase == "phase2" || cfg.phase == "both") {
    phase = 2;
    TrainResult r = train_phase2(source, tc, net, hooks);
    net = std::move(r.net);
    report.records.insert(report.records.end(), r.report.records.begin(), r.report.records.end());
  }
  save_checkpoint(out / "checkpoint.json", net);
  m.add_output("checkpoint", out / "checkpoint.json");
  write_train_log(out / "train_log.csv", report);
  m.add_output("train_log", out / "train_log.csv");
  int dropped = 0;
  for (const auto& r : report.records) dropped += r.dropped_chains;
  m.summary = {{"iterations", report.records.size()}, {"dropped_chains", dropped}};
  if (!report.records.empty()) m.summary["final_loss_ot"] = report.records.back().loss_ot;
}

void cmd_sample(const RunConfig& cfg, Manifest& m) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  run_sampler(cfg, CompositeEnergy(ck.net, {}), m);
}

void cmd_invert(const RunConfig& cfg, Manifest& m) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  if (cfg.problem_path.empty()) throw ConfigError("problem: required for invert");
  const std::vector<EnergyTerm> terms = terms_from_problem(read_json_file(cfg.problem_path));
  const CompositeEnergy energy(ck.net, terms);
  const SampleResult r = run_sampler(cfg, energy, m);
  for (const auto& t : terms) {
    if (t.kind() == EnergyKind::fidelity && r.samples.cols() > 0)
      m.summary["mean_residual_norm"] = t.residual_norms(r.samples).mean();
  }
}

void cmd_lid(const RunConfig& cfg, Manifest& m) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  const SampleBatch pts = load_points(cfg);
  const auto reports = estimate_lid_batch(ck.net, pts, cfg.lid_tau, cfg.grad_warn_bound, cfg.threads);
  const int d = ck.net.input_dim();
  const int k = cfg.lid_top_k > 0 ? std::min(cfg.lid_top_k, d) : d;
  const fs::path path = fs::path(cfg.out) / "lid.csv";
  auto out = open_csv(path);
  out << "point,lid,tau,grad_norm,gradient_warning";
  for (int i = 0; i < k; ++i) out << ",abs_eig" << i;
  out << '\n';
  int warnings = 0;
  std::vector<int> lids;
  for (size_t j = 0; j < reports.size(); ++j) {
    const auto& r = reports[j];
    out << j << ',' << r.lid << ',' << r.tau << ',' << r.grad_norm << ',' << (r.gradient_warning ? 1 : 0);
    for (int i = 0; i < k; ++i) out << ',' << std::abs(r.eigenvalues(i));
    out << '\n';
    warnings += r.gradient_warning ? 1 : 0;
    lids.push_back(r.lid);
  }
  if (warnings > 0)
    std::cerr << "warning: " << warnings << " points have |grad V| above " << cfg.grad_warn_bound
              << "; they may be far from the data manifold\n";
  m.add_output("lid", path);
  std::sort(lids.begin(), lids.end());
  m.summary = {{"points", reports.size()}, {"gradient_warnings", warnings}};
  if (!reports.empty()) {
    m.summary["tau"] = reports.front().tau;
    m.summary["median_lid"] = lids[lids.size() / 2];
  }
}

void cmd_landscape(const RunConfig& cfg, Manifest& m) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  const Box2 box{cfg.bounds[0], cfg.bounds[1], cfg.bounds[2], cfg.bounds[3]};
  const LandscapeGrid grid = landscape_grid(ck.net, box, cfg.resolution, cfg.threads);
  const fs::path path = fs::path(cfg.out) / "landscape.csv";
  write_landscape_csv(path, grid);
  m.add_output("landscape", path);
  m.summary = {{"min", grid.values.minCoeff()}, {"max", grid.values.maxCoeff()}};
}

void cmd_ablate_solver(const RunConfig& cfg, Manifest& m) {
  const fs::path path = fs::path(cfg.out) / "ablate_solver.csv";
  auto out = open_csv(path);
  out << "solver,n,d,repeat,total_cost,wall_time,relative_spread\n";
  using clock = std::chrono::steady_clock;
  bool lp_never_worse = true;
  for (int n : cfg.ablate_n) {
    for (int d : cfg.ablate_d) {
      if (n < 2 || d < 1) throw ConfigError("ablate_n/ablate_d: need n >= 2 and d >= 1");
      for (int rep = 0; rep < cfg.ablate_repeats; ++rep) {
        Rng rng = make_rng(cfg.train.seed * 1000003ull + static_cast<std::uint64_t>(n) * 7919u +
                           static_cast<std::uint64_t>(d) * 31u + static_cast<std::uint64_t>(rep));
        const SampleBatch x = standard_normal(d, n, rng);
        const SampleBatch y = standard_normal(d, n, rng);
        const double spread = cost_concentration(x, y).relative_spread;
        const double mean_cost = squared_distances(x, y).mean();

        auto t0 = clock::now();
        const Coupling lp = exact_assignment(x, y);
        const double t_lp = std::chrono::duration<double>(clock::now() - t0).count();
        t0 = clock::now();
        const Coupling sk = round_to_permutation(sinkhorn_plan(x, y, cfg.sinkhorn_kappa * mean_cost), x, y);
        const double t_sk = std::chrono::duration<double>(clock::now() - t0).count();
        t0 = clock::now();
        const Coupling rnd = random_matching(x, y, static_cast<std::uint64_t>(rep));
        const double t_rnd = std::chrono::duration<double>(clock::now() - t0).count();

        for (auto [name, c, t] : {std::tuple{"lp", &lp, t_lp}, std::tuple{"sinkhorn", &sk, t_sk},
                                  std::tuple{"random", &rnd, t_rnd}})
          out << name << ',' << n << ',' << d << ',' << rep << ',' << c->cost * n << ',' << t << ',' << spread << '\n';
        lp_never_worse = lp_never_worse && lp.cost <= rnd.cost && lp.cost <= sk.cost;
      }
    }
  }
  m.add_output("ablate_solver", path);
  m.summary = {{"lp_never_worse", lp_never_worse}};
}

void cmd_ablate_tau(const RunConfig& cfg, Manifest& m) {
  const Checkpoint ck = load_required_checkpoint(cfg);
  if (cfg.tau_grid.empty()) throw ConfigError("tau_grid: must not be empty");
  DatasetSpec held = cfg.dataset;
  held.n = cfg.eval_n;
  held.seed = cfg.eval_seed;
  const SampleBatch reference = cfg.data_path.empty() ? generate(held) : read_points_csv(cfg.data_path);
  if (reference.rows() != ck.net.input_dim()) throw DimensionError("held-out data do not match the checkpoint");

  RunConfig run = cfg;
  run.num_chains = static_cast<int>(reference.cols());
  run.chain_init = ChainInit::noise;
  run.tau_s = *std::max_element(cfg.tau_grid.begin(), cfg.tau_grid.end());
  SampleConfig sc = run.sample_config();
  sc.record_trajectory = false;

  std::map<int, double> step_to_tau;
  for (double tau : cfg.tau_grid) {
    const int step = static_cast<int>(std::floor(tau / sc.dt + 1e-9));
    if (step < 1) throw ConfigError("tau_grid: every entry must be at least dt");
    step_to_tau[step] = tau;
  }
  std::vector<std::tuple<double, double, long>> rows;
  const CompositeEnergy energy(ck.net, {});
  sample(energy, sc, nullptr, [&](int step, const SampleBatch& x, const std::vector<int>& ids) {
    const auto it = step_to_tau.find(step);
    if (it == step_to_tau.end() || x.cols() == 0) return;
    SampleBatch ref(reference.rows(), x.cols());
    for (size_t k = 0; k < ids.size(); ++k) ref.col(static_cast<Eigen::Index>(k)) = reference.col(ids[k]);
    rows.emplace_back(it->second, w2_empirical(x, ref), x.cols());
  });
  const fs::path path = fs::path(cfg.out) / "ablate_tau.csv";
  auto out = open_csv(path);
  out << "tau_s,w2,retained\n";
  json curve = json::array();
  for (const auto& [tau, w2, kept] : rows) {
    out << tau << ',' << w2 << ',' << kept << '\n';
    curve.push_back({{"tau_s", tau}, {"w2", w2}});
  }
  m.add_output("ablate_tau", path);
  m.summary = {{"curve", curve}};
}

}  // namespace em_cli
