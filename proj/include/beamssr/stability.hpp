// Linear stability of the non-superradiant state, the superradiance
// boundary, and phase-diffusion theory of the regular superradiant phase.
#pragma once

#include "beamssr/core.hpp"
#include "beamssr/meanfield.hpp"

#include <vector>

namespace beamssr {

/// Thrown by the root search when no root is found in the scan box.
struct NoRootFound : NumericalError {
  NoRootFound(const std::string& what, cplx best_nu, double best_abs_d);
  cplx best_nu;       // grid point with the smallest |D|
  double best_abs_d;
};

/// Thrown when the phase-diffusion constant C0 vanishes (threshold).
struct ThresholdDivergence : NumericalError {
  using NumericalError::NumericalError;
};

struct DispersionEvaluation {
  cplx nu;
  cplx value;
};

/// D(nu) = 1 - (G/4) int_0^1 (1 - t) cos(a t) e^{-nu t} dt  (G = N Gamma_c tau,
/// a = k_c v_z tau).  Entire in nu.
cplx dispersion_D(cplx nu, double n_gamma_tau, double k_vz_tau);
/// dD/dnu.
cplx dispersion_D_prime(cplx nu, double n_gamma_tau, double k_vz_tau);

struct RootScanBox {
  double re_min = -5.0;
  double re_max = 5.0;   // widened to G/4 + 1 when needed (no roots beyond G/4)
  double im_extent = 4.0 * kPi;  // |Im nu| <= im_extent + |k_vz_tau|
  double spacing = 0.4;
};

/// Root of D with the largest real part, returned with Im >= 0.
cplx leading_root(double n_gamma_tau, double k_vz_tau, const RootScanBox& box = {});

/// All distinct roots found in the box, sorted by decreasing real part.
std::vector<cplx> dispersion_roots(double n_gamma_tau, double k_vz_tau, const RootScanBox& box = {});

struct PhaseBoundaryPoint {
  double k_vz_tau = 0.0;
  double n_gamma_tau_critical = 0.0;
  double re_nu0_residual = 0.0;  // Re(leading_root) at the returned value
};

/// Critical N Gamma_c tau where Re(leading_root) crosses zero (bisection).
double sr_boundary(double k_vz_tau, double rel_tol = 1e-10);
PhaseBoundaryPoint sr_boundary_point(double k_vz_tau, double rel_tol = 1e-10);

/// Critical N Gamma_c tau of the first real-axis crossing, D(0) = 0, or
/// +inf when D(0) > 0 for every coupling.
double real_axis_boundary(double k_vz_tau);

/// Goldstone-mode dispersion D_perp(nu) of the regular phase (omega = 0).
cplx dispersion_Dperp(cplx nu, const MeanFieldSolution& mf);
cplx dispersion_Dperp(cplx nu, double n_gamma_tau, double k_vz_tau, double j_parallel_norm);

/// C0 = lim_{nu->0} D_perp(nu) / nu (closed-form route).
double compute_C0(const MeanFieldSolution& mf);
double compute_C0(double n_gamma_tau, double k_vz_tau, double j_parallel_norm);

struct C1Result {
  double value = 0.0;
  bool well_conditioned = true;  // Richardson extrapolants agree to 1%
};

/// C1 = lim_{nu->0} D_perp(nu) / nu^2, valid where C0 = 0.  Throws
/// InvalidParameter when |C0| > 1e-6.
C1Result compute_C1(const MeanFieldSolution& mf);
C1Result compute_C1(double n_gamma_tau, double k_vz_tau, double j_parallel_norm);

/// Phase-diffusion linewidth N Gamma tau of the regular phase.
double linewidth_phase_diffusion(double n_gamma_tau, double k_vz_tau);

}  // namespace beamssr
