// Shared parameterization, domain types and error types.
//
// Internal unit system: transit time tau = 1, wavelength lambda = 1,
// cavity half-width w = 1/2, longitudinal velocity v_x = 1.  Every physical
// result depends only on the two dimensionless groups N*Gamma_c*tau and
// k_c*v_z*tau (plus N for finite-size effects).
#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamssr {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a trajectory produces a non-finite spin component.
struct IntegratorBlowup : std::runtime_error {
  IntegratorBlowup(std::size_t atom, double time);
  std::size_t atom_index;
  double time;
};

/// Generic numerical failure (root finders, fits, limits).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct SimParams {
  double n_gamma_tau = 30.0;   // N * Gamma_c * tau
  double k_vz_tau = 0.0;       // k_c * v_z * tau
  int n_atoms = 800;           // mean intracavity atom number N
  double dt = 0.005;           // integration step, units of tau
  double t_sim = 100.0;        // total simulated time
  double t0 = 10.0;            // transient discarded downstream
  int n_traj = 1;              // number of independent trajectories
  int sample_stride = 10;      // record J every this many steps
  std::uint64_t master_seed = 20200101;

  /// Throws InvalidParameter naming the first violated invariant.
  void validate() const;

  /// Ordered (key, value) text pairs, keys equal to the field names.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  void set(const std::string& key, const std::string& value);

  bool operator==(const SimParams&) const = default;
};

inline constexpr const char* kSimParamKeys[] = {
    "n_gamma_tau", "k_vz_tau", "n_atoms",       "dt",         "t_sim",
    "t0",          "n_traj",   "sample_stride", "master_seed"};

/// Reads a flat `key = value` file.  Blank lines and `#` comments are
/// ignored; unknown keys are rejected.
std::map<std::string, std::string> read_config_file(const std::string& path);
std::map<std::string, std::string> parse_config(std::istream& in);

struct InternalUnits {
  double tau = 1.0;
  double lambda = 1.0;
  double w = 0.5;
  double v_x = 1.0;
  double k_c = kTwoPi;
  double v_z = 0.0;
  double gamma_c = 0.0;  // single-atom emission rate into the cavity
  int n_atoms = 0;
};

InternalUnits nondimensionalize(const SimParams& params);

// ---------------------------------------------------------------------------
// State and records
// ---------------------------------------------------------------------------

/// One atom: position (x in units of the strip, z in wavelengths) and its
/// classical Bloch vector.
struct AtomState {
  double x = 0.0;
  double z = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  double sz = 0.0;

  double length_squared() const { return sx * sx + sy * sy + sz * sz; }
};

/// Time series of the complex collective dipole J = (J_x - i J_y) / 2.
struct DipoleRecord {
  std::vector<double> times;
  std::vector<cplx> j_complex;
  std::uint64_t trajectory_seed = 0;
};

/// Index of the first sample with time >= t (within half a sample).
std::size_t sample_index(const std::vector<double>& times, double t);

}  // namespace beamssr
