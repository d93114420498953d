#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "energy_matching/potential.hpp"
#include "energy_matching/types.hpp"

namespace energy_matching {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  PotentialNet net;
  std::optional<Eigen::VectorXd> ema_params;
};

/// JSON container: {format_version, input_dim, layer_widths, activation,
/// output_scale, params, ema_params?}. Parameter arrays are base64 encoded
/// little-endian IEEE-754 doubles, so a round trip is bit-exact.
nlohmann::json checkpoint_to_json(const PotentialNet& net, const Eigen::VectorXd* ema_params = nullptr);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const PotentialNet& net,
                     const Eigen::VectorXd* ema_params = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_f64_le(const Eigen::VectorXd& values);
Eigen::VectorXd decode_f64_le(const std::string& base64);

/// Points as CSV rows with a header x0,x1,...
void write_points_csv(const std::filesystem::path& path, const SampleBatch& points);
/// Reads numeric CSV rows (a non-numeric first line is treated as a header).
SampleBatch read_points_csv(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace energy_matching
