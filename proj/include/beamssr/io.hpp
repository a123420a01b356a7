// Record files, provenance-stamped CSV tables and run manifests.
#pragma once

#include "beamssr/core.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace beamssr {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RecordFile {
  SimParams params;
  std::vector<DipoleRecord> records;
};

/// NDJSON: a header object {"format", "params", "n_traj"}, then one object
/// per sample {"traj", "seed", "t", "re_J", "im_J"}.
void write_records_ndjson(const std::filesystem::path& path, const SimParams& params,
                          const std::vector<DipoleRecord>& records);

/// Binary columnar: magic "SSRDIP01", u32 header length, JSON header
/// (params, n_traj, n_samples, seeds), then the f64 time column and per
/// trajectory the f64 re and im columns, all little-endian.
void write_records_binary(const std::filesystem::path& path, const SimParams& params,
                          const std::vector<DipoleRecord>& records);

/// Reads either format (detected from the first bytes).
RecordFile read_records(const std::filesystem::path& path);

/// Plain CSV with leading `# key=value` provenance lines.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void add_provenance(const std::string& key, const std::string& value) { provenance_.emplace_back(key, value); }
  void add_provenance(const SimParams& params);
  void add_row(const std::vector<double>& row);
  void add_row(const std::vector<std::string>& row);
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> provenance_;
  std::vector<std::string> rows_;
};

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& data);

struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> params;  // resolved parameters
  std::string tool_version;
  double wall_clock_seconds = 0.0;
  std::vector<std::filesystem::path> outputs;  // relative to the manifest's directory
};

/// Writes manifest.json into `dir`, hashing every listed output.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace beamssr
