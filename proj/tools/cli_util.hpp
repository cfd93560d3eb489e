#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dhj/core.hpp"
#include "dhj/version.hpp"

namespace dhjcli {

using json = nlohmann::ordered_json;

/// Config validation failure; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError("missing required field '" + path + key + "'");
  return j.at(key);
}

inline double require_number(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number()) throw ConfigError("field '" + path + key + "' must be a number");
  return v.get<double>();
}

inline int require_int(const json& j, const std::string& key, const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer()) throw ConfigError("field '" + path + key + "' must be an integer");
  return v.get<int>();
}

inline std::string require_string(const json& j, const std::string& key,
                                  const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_string()) throw ConfigError("field '" + path + key + "' must be a string");
  return v.get<std::string>();
}

inline Eigen::VectorXd require_vector(const json& j, const std::string& key,
                                      const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_array() || v.empty())
    throw ConfigError("field '" + path + key + "' must be a nonempty array");
  Eigen::VectorXd out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ConfigError("field '" + path + key + "' must contain numbers only");
    out(Eigen::Index(i)) = v[i].get<double>();
  }
  return out;
}

/// Row-major nested arrays.
inline Eigen::MatrixXd require_matrix(const json& j, const std::string& key,
                                      const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty())
    throw ConfigError("field '" + path + key + "' must be a nonempty nested array");
  const size_t rows = v.size(), cols = v[0].size();
  Eigen::MatrixXd out(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!v[r].is_array() || v[r].size() != cols)
      throw ConfigError("field '" + path + key + "' has ragged rows");
    for (size_t c = 0; c < cols; ++c) out(Eigen::Index(r), Eigen::Index(c)) = v[r][c].get<double>();
  }
  return out;
}

/// 17-significant-digit decimal, enough for a lossless double round trip.
inline std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// One CSV cell: a number or a literal string (e.g. "saturated").
using Cell = std::variant<double, std::string>;

inline void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
                      const std::vector<std::vector<Cell>>& rows) {
  std::ofstream out(file);
  if (!out) throw dhj::Error("cannot open output file: " + file.string());
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      if (std::holds_alternative<double>(row[i]))
        out << format_number(std::get<double>(row[i]));
      else
        out << std::get<std::string>(row[i]);
    }
    out << "\n";
  }
}

/// Minimal CSV reader for the round-trip checks: returns header + string cells.
inline std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>> read_csv(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw dhj::Error("cannot open CSV file: " + file.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      header = std::move(cells);
      first = false;
    } else if (!cells.empty()) {
      rows.push_back(std::move(cells));
    }
  }
  return {header, rows};
}

/// FNV-1a hash of the raw config bytes, hex-encoded.
inline std::string config_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t hash = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

inline json make_metadata(const std::string& command, const std::string& config_path) {
  json meta;
  meta["command"] = command;
  meta["version"] = dhj::kVersion;
  meta["config_hash"] = config_hash(config_path);
  return meta;
}

inline void write_report(const std::filesystem::path& file, const json& report) {
  std::ofstream out(file);
  if (!out) throw dhj::Error("cannot open output file: " + file.string());
  out << report.dump(2) << "\n";
}

}  // namespace dhjcli
