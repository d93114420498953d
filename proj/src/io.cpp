#include "energy_matching/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "energy_matching/error.hpp"

namespace energy_matching {

namespace {

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const size_t rest = bytes.size() - i;
  if (rest > 0) {
    unsigned v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (size_t i = 0; i < kAlphabet.size(); ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
  std::vector<unsigned char> out;
  unsigned acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = lookup[static_cast<unsigned char>(c)];
    if (v < 0) throw IoError("invalid base64 character in parameter array");
    acc = (acc << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace

std::string encode_f64_le(const Eigen::VectorXd& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<size_t>(values.size()) * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFF));
  }
  return base64_encode(bytes);
}

Eigen::VectorXd decode_f64_le(const std::string& base64) {
  const auto bytes = base64_decode(base64);
  if (bytes.size() % 8 != 0) throw IoError("parameter array length is not a multiple of 8 bytes");
  Eigen::VectorXd out(static_cast<Eigen::Index>(bytes.size() / 8));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[static_cast<size_t>(i) * 8 + static_cast<size_t>(b)]} << (8 * b);
    out(i) = std::bit_cast<double>(bits);
  }
  return out;
}

nlohmann::json checkpoint_to_json(const PotentialNet& net, const Eigen::VectorXd* ema_params) {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["input_dim"] = net.input_dim();
  doc["layer_widths"] = net.layer_widths();
  doc["activation"] = std::string(to_string(net.activation()));
  doc["output_scale"] = net.output_scale();
  doc["params"] = encode_f64_le(net.params());
  if (ema_params) {
    if (ema_params->size() != net.param_count()) throw DimensionError("EMA parameter count mismatch");
    doc["ema_params"] = encode_f64_le(*ema_params);
  }
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw IoError("unsupported checkpoint format_version " + std::to_string(version));
    PotentialNet net(doc.at("input_dim").get<int>(), doc.at("layer_widths").get<std::vector<int>>(),
                     activation_from_string(doc.at("activation").get<std::string>()),
                     doc.at("output_scale").get<double>(),
                     decode_f64_le(doc.at("params").get<std::string>()));
    Checkpoint ck{std::move(net), std::nullopt};
    if (doc.contains("ema_params")) {
      Eigen::VectorXd ema = decode_f64_le(doc.at("ema_params").get<std::string>());
      if (ema.size() != ck.net.param_count()) throw IoError("checkpoint ema_params has the wrong length");
      ck.ema_params = std::move(ema);
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const PotentialNet& net, const Eigen::VectorXd* ema_params) {
  write_json_file(path, checkpoint_to_json(net, ema_params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json_file(path)); }

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

void write_points_csv(const std::filesystem::path& path, const SampleBatch& points) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out << (i ? "," : "") << 'x' << i;
  out << '\n';
  out.precision(17);
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) out << (i ? "," : "") << points(i, j);
    out << '\n';
  }
}

namespace {

bool parse_row(const std::string& line, std::vector<double>& row) {
  row.clear();
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) return false;
    row.push_back(v);
    p = next;
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p < end) {
      if (*p != ',') return false;
      ++p;
    }
  }
  return !row.empty();
}

}  // namespace

SampleBatch read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::vector<double> row;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!parse_row(line, row)) {
      if (line_no == 1) continue;
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": not a numeric CSV row");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    rows.push_back(row);
  }
  if (rows.empty()) throw IoError(path.string() + ": no data rows");
  SampleBatch out(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (size_t j = 0; j < rows.size(); ++j)
    for (size_t i = 0; i < rows[j].size(); ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[j][i];
  return out;
}

}  // namespace energy_matching
