#include "beamssr/io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace beamssr {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'S', 'R', 'D', 'I', 'P', '0', '1'};
static_assert(std::endian::native == std::endian::little, "binary record format assumes a little-endian host");

json params_json(const SimParams& p) {
  json j = json::object();
  for (const auto& [k, v] : p.to_pairs()) j[k] = v;
  return j;
}

SimParams params_from_json(const json& j) {
  SimParams p;
  for (const auto& [k, v] : j.items()) p.set(k, v.is_string() ? v.get<std::string>() : v.dump());
  return p;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::string to_hex(const unsigned char* bytes, unsigned int len) {
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(bytes[i]);
  return os.str();
}

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

RecordFile read_ndjson(std::istream& in, const std::string& name) {
  RecordFile out;
  std::string line;
  if (!std::getline(in, line)) throw IoError(name + ": empty record file");
  const json header = json::parse(line);
  if (header.value("format", "") != "beamssr-dipole-ndjson") throw IoError(name + ": not a dipole record file");
  out.params = params_from_json(header.at("params"));
  out.records.resize(header.at("n_traj").get<std::size_t>());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json s = json::parse(line);
    const auto k = s.at("traj").get<std::size_t>();
    if (k >= out.records.size()) throw IoError(name + ": trajectory index out of range");
    auto& r = out.records[k];
    r.trajectory_seed = s.at("seed").get<std::uint64_t>();
    r.times.push_back(s.at("t").get<double>());
    r.j_complex.emplace_back(s.at("re_J").get<double>(), s.at("im_J").get<double>());
  }
  return out;
}

RecordFile read_binary(std::istream& in, const std::string& name) {
  char magic[8];
  std::uint32_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError(name + ": bad binary record header");
  std::string text(len, '\0');
  in.read(text.data(), len);
  const json header = json::parse(text);

  RecordFile out;
  out.params = params_from_json(header.at("params"));
  const auto n_traj = header.at("n_traj").get<std::size_t>();
  const auto n = header.at("n_samples").get<std::size_t>();
  const auto seeds = header.at("seeds").get<std::vector<std::uint64_t>>();
  std::vector<double> times(n), re(n), im(n);
  auto read_column = [&](std::vector<double>& col) {
    in.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw IoError(name + ": truncated binary record file");
  };
  read_column(times);
  out.records.resize(n_traj);
  for (std::size_t k = 0; k < n_traj; ++k) {
    read_column(re);
    read_column(im);
    auto& r = out.records[k];
    r.times = times;
    r.trajectory_seed = seeds.at(k);
    r.j_complex.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.j_complex[i] = {re[i], im[i]};
  }
  return out;
}

}  // namespace

void write_records_ndjson(const std::filesystem::path& path, const SimParams& params,
                          const std::vector<DipoleRecord>& records) {
  auto out = open_out(path);
  json header = {{"format", "beamssr-dipole-ndjson"}, {"params", params_json(params)}, {"n_traj", records.size()}};
  out << header.dump() << '\n';
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      json s = {{"traj", k},
                {"seed", r.trajectory_seed},
                {"t", r.times[i]},
                {"re_J", r.j_complex[i].real()},
                {"im_J", r.j_complex[i].imag()}};
      out << s.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_records_binary(const std::filesystem::path& path, const SimParams& params,
                          const std::vector<DipoleRecord>& records) {
  const std::size_t n = records.empty() ? 0 : records.front().times.size();
  std::vector<std::uint64_t> seeds;
  for (const auto& r : records) {
    if (r.times.size() != n || r.j_complex.size() != n) throw IoError("records differ in sample count");
    seeds.push_back(r.trajectory_seed);
  }
  const json header = {{"format", "beamssr-dipole-binary"},
                       {"params", params_json(params)},
                       {"n_traj", records.size()},
                       {"n_samples", n},
                       {"seeds", seeds}};
  const std::string text = header.dump();
  const auto len = static_cast<std::uint32_t>(text.size());

  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (n > 0) out.write(reinterpret_cast<const char*>(records.front().times.data()), static_cast<std::streamsize>(n * sizeof(double)));
  std::vector<double> col(n);
  for (const auto& r : records) {
    for (std::size_t i = 0; i < n; ++i) col[i] = r.j_complex[i].real();
    out.write(reinterpret_cast<const char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
    for (std::size_t i = 0; i < n; ++i) col[i] = r.j_complex[i].imag();
    out.write(reinterpret_cast<const char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

RecordFile read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char head[8] = {};
  in.read(head, 8);
  in.clear();
  in.seekg(0);
  if (std::memcmp(head, kMagic, 8) == 0) return read_binary(in, path.string());
  return read_ndjson(in, path.string());
}

void CsvTable::add_provenance(const SimParams& params) {
  for (const auto& [k, v] : params.to_pairs()) add_provenance(k, v);
}

void CsvTable::add_row(const std::vector<double>& row) {
  std::vector<std::string> cells;
  cells.reserve(row.size());
  for (double v : row) cells.push_back(format_value(v));
  add_row(cells);
}

void CsvTable::add_row(const std::vector<std::string>& row) {
  if (row.size() != columns_.size()) throw IoError("CSV row has " + std::to_string(row.size()) + " cells, expected " +
                                                   std::to_string(columns_.size()));
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) line += (i ? "," : "") + row[i];
  rows_.push_back(std::move(line));
}

void CsvTable::write(const std::filesystem::path& path) const {
  auto out = open_out(path);
  for (const auto& [k, v] : provenance_) out << "# " << k << '=' << v << '\n';
  for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
  out << '\n';
  for (const auto& r : rows_) out << r << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) throw IoError("SHA-256 failed");
  return to_hex(digest, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  return to_hex(digest, len);
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  json params = json::object();
  for (const auto& [k, v] : m.params) params[k] = v;
  json files = json::array();
  for (const auto& rel : m.outputs) {
    const auto full = dir / rel;
    files.push_back({{"path", rel.generic_string()},
                     {"sha256", sha256_file(full)},
                     {"bytes", std::filesystem::file_size(full)}});
  }
  const json doc = {{"command", m.command},
                    {"params", params},
                    {"tool_version", m.tool_version},
                    {"wall_clock_seconds", m.wall_clock_seconds},
                    {"outputs", files}};
  auto out = open_out(dir / "manifest.json");
  out << doc.dump(2) << '\n';
}

}  // namespace beamssr
