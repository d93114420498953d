#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"
#include "energy_matching/error.hpp"
#include "energy_matching/io.hpp"

using namespace energy_matching;

namespace {

struct Options {
  std::string config_path;
  std::string manifest_path;
  std::vector<std::string> overrides;
  std::string out, checkpoint, data, problem, phase;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> tau_s;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("-c,--config", o.config_path, "flat JSON config file");
  sub->add_option("--manifest", o.manifest_path, "rerun with the config recorded in a manifest");
  sub->add_option("-s,--set", o.overrides, "override a config key: key=value")->take_all();
  sub->add_option("-o,--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "training seed");
  sub->add_option("--threads", o.threads, "worker threads (0: ENERGY_MATCHING_THREADS or all cores)");
}

RunConfig resolve(const Options& o) {
  RunConfig cfg;
  if (!o.manifest_path.empty()) {
    const auto doc = read_json_file(o.manifest_path);
    if (!doc.contains("config")) throw ConfigError("manifest: missing 'config'");
    apply_config_json(cfg, doc.at("config"));
  }
  if (!o.config_path.empty()) apply_config_json(cfg, read_json_file(o.config_path));
  for (const auto& kv : o.overrides) apply_override(cfg, kv);
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  if (!o.data.empty()) cfg.data_path = o.data;
  if (!o.problem.empty()) cfg.problem_path = o.problem;
  if (!o.phase.empty()) cfg.phase = o.phase;
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.tau_s) cfg.tau_s = *o.tau_s;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-landscape generative modelling: train, sample, invert, and analyse scalar potentials."};
  app.require_subcommand(1);
  Options o;

  using Handler = void (*)(const RunConfig&, em_cli::Manifest&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"gen", "write a synthetic dataset as CSV", em_cli::cmd_gen},
      {"train", "fit a potential (phase1, phase2 or both)", em_cli::cmd_train},
      {"sample", "unconditional Langevin sampling from a checkpoint", em_cli::cmd_sample},
      {"invert", "conditional sampling with fidelity/interaction terms from a problem file", em_cli::cmd_invert},
      {"lid", "local intrinsic dimension from Hessian spectra", em_cli::cmd_lid},
      {"landscape", "potential values on a 2D grid", em_cli::cmd_landscape},
      {"ablate-solver", "coupling solver cost and time comparison", em_cli::cmd_ablate_solver},
      {"ablate-tau", "W2 to held-out data as a function of sampling time", em_cli::cmd_ablate_tau},
  };
  std::map<CLI::App*, std::pair<std::string, Handler>> handlers;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, o);
    if (name != "gen" && name != "ablate-solver") sub->add_option("--checkpoint", o.checkpoint, "checkpoint JSON");
    if (name != "ablate-solver") sub->add_option("--data", o.data, "points CSV");
    if (name == "train") sub->add_option("--phase", o.phase, "phase1 | phase2 | both");
    if (name == "invert") sub->add_option("--problem", o.problem, "problem JSON");
    if (name == "sample" || name == "invert") sub->add_option("--tau-s", o.tau_s, "sampling time");
    handlers[sub] = {name, fn};
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& [sub, entry] : handlers) {
      if (!sub->parsed()) continue;
      const RunConfig cfg = resolve(o);
      em_cli::Manifest manifest;
      manifest.command = entry.first;
      entry.second(cfg, manifest);
      em_cli::write_manifest(cfg, manifest);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
