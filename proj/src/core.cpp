#include "beamssr/core.hpp"
#include "beamssr/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace beamssr {

IntegratorBlowup::IntegratorBlowup(std::size_t atom, double t)
    : std::runtime_error("integrator blowup: non-finite state for atom " + std::to_string(atom) +
                         " at t=" + std::to_string(t)),
      atom_index(atom),
      time(t) {}

void SimParams::validate() const {
  auto fail = [](const std::string& what) { throw InvalidParameter("invalid parameter: " + what); };
  if (!std::isfinite(n_gamma_tau) || n_gamma_tau <= 0.0) fail("n_gamma_tau > 0");
  if (!std::isfinite(k_vz_tau)) fail("k_vz_tau finite");
  if (n_atoms < 1) fail("n_atoms >= 1");
  if (!(dt > 0.0) || dt > 0.02) fail("0 < dt <= 0.02");
  if (!std::isfinite(t_sim) || !std::isfinite(t0) || !(t0 < t_sim)) fail("t0 < t_sim");
  if (t0 < 0.0) fail("t0 >= 0");
  if (n_traj < 1) fail("n_traj >= 1");
  if (sample_stride < 1) fail("sample_stride >= 1");
  if (dt * n_gamma_tau > 0.5) fail("dt * n_gamma_tau <= 0.5");
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, value);
  if (ec != std::errc() || ptr != last) throw InvalidParameter("cannot parse " + key + " = '" + text + "'");
  return value;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> SimParams::to_pairs() const {
  return {{"n_gamma_tau", format_double(n_gamma_tau)},
          {"k_vz_tau", format_double(k_vz_tau)},
          {"n_atoms", std::to_string(n_atoms)},
          {"dt", format_double(dt)},
          {"t_sim", format_double(t_sim)},
          {"t0", format_double(t0)},
          {"n_traj", std::to_string(n_traj)},
          {"sample_stride", std::to_string(sample_stride)},
          {"master_seed", std::to_string(master_seed)}};
}

void SimParams::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "n_gamma_tau") n_gamma_tau = parse_number<double>(key, value);
  else if (key == "k_vz_tau") k_vz_tau = parse_number<double>(key, value);
  else if (key == "n_atoms") n_atoms = parse_number<int>(key, value);
  else if (key == "dt") dt = parse_number<double>(key, value);
  else if (key == "t_sim") t_sim = parse_number<double>(key, value);
  else if (key == "t0") t0 = parse_number<double>(key, value);
  else if (key == "n_traj") n_traj = parse_number<int>(key, value);
  else if (key == "sample_stride") sample_stride = parse_number<int>(key, value);
  else if (key == "master_seed") master_seed = parse_number<std::uint64_t>(key, value);
  else throw InvalidParameter("unknown parameter key '" + key + "'");
}

std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidParameter("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (std::find(std::begin(kSimParamKeys), std::end(kSimParamKeys), key) == std::end(kSimParamKeys))
      throw InvalidParameter("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open config file " + path);
  return parse_config(in);
}

InternalUnits nondimensionalize(const SimParams& params) {
  params.validate();
  InternalUnits u;
  u.v_z = params.k_vz_tau / (u.k_c * u.tau);
  u.gamma_c = params.n_gamma_tau / (params.n_atoms * u.tau);
  u.n_atoms = params.n_atoms;
  return u;
}

std::size_t sample_index(const std::vector<double>& times, double t) {
  if (times.empty()) return 0;
  const double spacing = times.size() > 1 ? times[1] - times[0] : 1.0;
  auto it = std::lower_bound(times.begin(), times.end(), t - 0.5 * spacing);
  return static_cast<std::size_t>(it - times.begin());
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t trajectory_index)
    : key_(splitmix64(splitmix64(master_seed) ^ splitmix64(trajectory_index + 0x632BE59BD9B4E019ULL))) {
  std::uint32_t words[6];
  std::uint64_t s = key_;
  for (int i = 0; i < 3; ++i, s = splitmix64(s)) {
    words[2 * i] = static_cast<std::uint32_t>(s);
    words[2 * i + 1] = static_cast<std::uint32_t>(s >> 32);
  }
  std::seed_seq seq(std::begin(words), std::end(words));
  engine_.seed(seq);
}

}  // namespace beamssr
