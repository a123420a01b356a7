// Stationary N -> infinity solutions: collective dipole length and emission
// frequency in the regular and bistable superradiant phases.
//
// All quantities are in internal units (tau = lambda = 1, w = 1/2, v_x = 1).
// j_norm = |<J>| / N with J = (J_x - i J_y) / 2; the "parallel" dipole of
// the regular phase is J_par = 2 |<J>|, so J_par / N = 2 j_norm.
#pragma once

#include "beamssr/core.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace beamssr {

/// Bloch vectors of the stationary solution in the frame rotating with the
/// emission frequency, sampled along atom paths: s = x + w (distance since
/// entry) on a uniform grid of n_s points in [0, 1], entry phase z0 on a
/// uniform periodic grid of n_z0 points in [0, 1).
class CharacteristicField {
 public:
  CharacteristicField() = default;
  CharacteristicField(int n_s, int n_z0, double v_z);

  int n_s() const { return n_s_; }
  int n_z0() const { return n_z0_; }
  std::array<double, 3>& at(int is, int iz) { return data_[static_cast<std::size_t>(is) * n_z0_ + iz]; }
  const std::array<double, 3>& at(int is, int iz) const { return data_[static_cast<std::size_t>(is) * n_z0_ + iz]; }

  /// Bloch vector at cavity position (x, z), x in [-w, w], z in [0, 1).
  /// Linear interpolation in entry phase, exact at grid nodes in s.
  std::array<double, 3> bloch(double x, double z) const;
  /// Tipping angle K in [0, pi] and phase psi, <s> ~ sin(K) e^{-i psi}.
  double K(double x, double z) const;
  double psi(double x, double z) const;

 private:
  int n_s_ = 0;
  int n_z0_ = 0;
  double v_z_ = 0.0;
  std::vector<std::array<double, 3>> data_;
};

struct MeanFieldSolution {
  double n_gamma_tau = 0.0;
  double k_vz_tau = 0.0;
  double j_norm = 0.0;   // |<J>| / N, in [0, 1/2]
  double omega = 0.0;    // emission frequency, <J> = |<J>| e^{-i omega t}
  double residual = 0.0; // |self-consistency residual| / N
  CharacteristicField field;

  double j_parallel() const { return 2.0 * j_norm; }
  double K(double x, double z) const { return field.K(x, z); }
  double psi(double x, double z) const { return field.psi(x, z); }
};

/// Thrown when the stationary self-consistency cannot be met.
struct NoConvergence : NumericalError {
  NoConvergence(const std::string& what, double residual_re, double residual_im);
  double residual_re, residual_im;
};

/// Thrown when only the trivial (non-superradiant) solution exists.
struct DegenerateRegion : NumericalError {
  using NumericalError::NumericalError;
};

/// Largest nonnegative root y = J_par / N of
///   (G/2) y^2 = 1 - J0((G/2) y sinc(k_vz_tau / 2)),
/// the closed-form self-consistency of the regular (omega = 0) phase.
/// Returns 0 when only the trivial root exists.  Other nontrivial roots, if
/// any, are appended to `other_roots`.
double solve_j_parallel_ssr(double n_gamma_tau, double k_vz_tau, std::vector<double>* other_roots = nullptr);

/// Closed-form tipping angle of the regular phase at cavity position (x, z)
/// (x in [-w, w]) for a given J_par (in units of N).  Continuous through
/// k_vz_tau -> 0.
double tipping_angle_ssr(double x, double z, double j_parallel_norm, double n_gamma_tau, double k_vz_tau);

struct MeanFieldOptions {
  int n_z0 = 256;        // entry phases (periodic trapezoid rule)
  double rel_tol = 1e-9; // characteristic ODE tolerance
  int n_s_field = 65;    // samples along each path kept in the field
  double tolerance = 1e-9;  // target |residual|
};

/// Complex self-consistency response I(j, omega) = (1/N) int dx eta <s> e^{i omega t}
/// for a trial dipole length j = |<J>|/N and frequency omega; a solution
/// satisfies I = j.
cplx meanfield_response(double j_norm, double omega, double n_gamma_tau, double k_vz_tau,
                        const MeanFieldOptions& options = {});

/// Stationary solution.  For |k_vz_tau| <= pi the omega = 0 branch; beyond
/// the branch with omega of the same sign as k_vz_tau (the other branch is
/// its mirror image).
MeanFieldSolution solve_bistable(double n_gamma_tau, double k_vz_tau, const MeanFieldOptions& options = {});

/// Newton polish from an initial guess; used for continuation.
MeanFieldSolution solve_stationary_from(double n_gamma_tau, double k_vz_tau, double j_guess, double omega_guess,
                                        const MeanFieldOptions& options = {});

struct BranchPoint {
  double k_vz_tau = 0.0;
  double omega = 0.0;
  double j_norm = 0.0;
  double residual = 0.0;
  bool converged = false;
  std::string message;
};

/// Sweeps the grid with warm starts.  Beyond k_vz_tau = pi both the +omega
/// and -omega branch are emitted.  Failures are recorded per point.
std::vector<BranchPoint> frequency_branch_diagram(double n_gamma_tau, const std::vector<double>& k_vz_grid,
                                                  const MeanFieldOptions& options = {});

}  // namespace beamssr
