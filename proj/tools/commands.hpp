#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "energy_matching/config.hpp"

namespace em_cli {

/// Collects what a run wrote; serialized next to the outputs.
struct Manifest {
  std::string command;
  nlohmann::json outputs = nlohmann::json::object();
  nlohmann::json summary = nlohmann::json::object();

  void add_output(const std::string& name, const std::filesystem::path& path) { outputs[name] = path.string(); }
};

nlohmann::json versions();
void write_manifest(const energy_matching::RunConfig& cfg, const Manifest& manifest);

void cmd_gen(const energy_matching::RunConfig& cfg, Manifest& m);
void cmd_train(const energy_matching::RunConfig& cfg, Manifest& m);
void cmd_sample(const energy_matching::RunConfig& cfg, Manifest& m);
void cmd_invert(const energy_matching::RunConfig& cfg, Manifest& m);
void cmd_lid(const energy_matching::RunConfig& cfg, Manifest& m);
void cmd_landscape(const energy_matching::RunConfig& cfg, Manifest& m);
void cmd_ablate_solver(const energy_matching::RunConfig& cfg, Manifest& m);
void cmd_ablate_tau(const energy_matching::RunConfig& cfg, Manifest& m);

}  // namespace em_cli
