// Stochastic trajectory engine for the semiclassical spin equations of a
// pre-excited atomic beam crossing a single cavity mode.
#pragma once

#include "beamssr/core.hpp"
#include "beamssr/rng.hpp"

#include <utility>
#include <vector>

namespace beamssr {

struct EnsembleState {
  std::vector<AtomState> atoms;
  double time = 0.0;
};

/// One shared pair of cavity-noise increments, each Normal(0, Gamma_c dt).
struct NoiseIncrement {
  double dWx = 0.0;
  double dWy = 0.0;
};

/// cos(2 pi z) inside the half-open strip -w <= x < w, zero outside.
double mode_function(double x, double z);

/// Fresh atom at the entry plane: excited, transverse components +-1.
AtomState inject_atom(RngStream& rng);

/// (J_x, J_y) = sum_j eta(x_j, z_j) (s_x, s_y).
std::pair<double, double> collective_dipole(const EnsembleState& state);

/// J = (J_x - i J_y) / 2.
inline cplx complex_dipole(const EnsembleState& state) {
  auto [jx, jy] = collective_dipole(state);
  return {0.5 * jx, -0.5 * jy};
}

/// N atoms with x uniform in the strip and the injected internal state.
EnsembleState initial_fill(const InternalUnits& units, RngStream& rng);

struct StepOptions {
  bool noise = true;    // draw cavity noise (step(state, rng) only)
  bool recycle = true;  // re-inject atoms leaving the strip
  bool move = true;     // advance positions
};

/// Advances an EnsembleState by one step.  Each atom's Bloch vector is
/// rotated exactly; the collective drift uses J at the step midpoint
/// (predictor-corrector), so |s| is conserved to rounding.
class Integrator {
 public:
  Integrator(const InternalUnits& units, double dt, StepOptions options = {});

  NoiseIncrement draw_noise(RngStream& rng) const;

  /// Step with an explicit noise increment.  `rng` is only used to inject
  /// replacement atoms.
  void step(EnsembleState& state, const NoiseIncrement& noise, RngStream& rng);

  /// Step drawing the shared noise from `rng` (zero when options.noise is off).
  void step(EnsembleState& state, RngStream& rng);

  double dt() const { return dt_; }
  const InternalUnits& units() const { return units_; }

 private:
  InternalUnits units_;
  double dt_;
  StepOptions options_;
  double noise_sigma_;
  double cos_half_, sin_half_, cos_full_, sin_full_;
  std::vector<double> eta_mid_, eta_end_;
  std::vector<double> z_seen_, cos_, sin_;  // phase cache, see step()
};

/// Rotates (sx, sy, sz) about the vector (p, q, 0) by the angle |(p, q)|.
void rotate_bloch(double p, double q, double& sx, double& sy, double& sz);

DipoleRecord run_trajectory(const SimParams& params, int trajectory_index);

/// Worker count from BEAMSSR_WORKERS, else the hardware concurrency.
int default_worker_count();

/// Runs trajectories 0..n_traj-1.  Output is identical for any worker count.
/// Per-trajectory failures are collected and rethrown as one NumericalError
/// listing the failing indices.
std::vector<DipoleRecord> run_ensemble(const SimParams& params, int workers = 0);

}  // namespace beamssr
