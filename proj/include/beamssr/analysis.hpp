// Post-processing of trajectory ensembles: two-time correlations, emission
// spectra, damped-cosine fits of g1, phase traces, mode-hop statistics and
// power-law fits.
#pragma once

#include "beamssr/core.hpp"

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace beamssr {

using Ensemble = std::vector<DipoleRecord>;

/// Too few trajectories or samples for the requested estimator.
struct InsufficientSamples : NumericalError {
  using NumericalError::NumericalError;
};

/// C(t) = < J(t0 + t) J*(t0) > over trajectories, t = 0, dt_s, ...,
/// (t_sim - t0).  With J ~ e^{-i w t}, C(t) ~ e^{-i w t}.  The optional
/// averaging over reference times t0' in [t0, t1] shortens the lag range to
/// t_sim - t1.
std::vector<cplx> two_time_correlation(const Ensemble& records, double t0);
std::vector<cplx> two_time_correlation(const Ensemble& records, double t0, double t1);

/// Lag times belonging to a correlation of length n.
std::vector<double> lag_times(const Ensemble& records, std::size_t n);

enum class Window { Rectangular, Hann };

struct SpectrumResult {
  std::vector<double> omega_grid;  // ascending, units 1/tau
  std::vector<double> s_values;    // |int_0^T e^{i w t} C(t) dt|, arbitrary units
  SimParams params;
  double t0 = 0.0;
  double T = 0.0;
  double resolution = 0.0;  // 2 pi / T

  /// Frequency of the largest value within [lo, hi].
  double peak_in(double lo, double hi) const;
};

struct SpectrumOptions {
  Window window = Window::Rectangular;
  int pad_factor = 1;  // zero padding: transform length = pad_factor * samples
};

SpectrumResult spectrum(const Ensemble& records, double t0, double T, const SimParams& params = {},
                        const SpectrumOptions& options = {});

/// Spectrum of an already computed correlation sampled at spacing dt_s.
SpectrumResult spectrum_of_correlation(const std::vector<cplx>& c, double dt_s, const SpectrumOptions& options = {});

/// g1(t) = Re C(t) / <|J(t0)|^2>.
std::vector<double> g1_normalized(const Ensemble& records, double t0);

struct FitResult {
  double omega = 0.0;  // >= 0; the sign is absorbed into phi0
  double gamma = 0.0;
  double phi0 = 0.0;
  double residual_norm = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  bool converged = false;

  double stderr_omega() const { return std::sqrt(covariance(0, 0)); }
  double stderr_gamma() const { return std::sqrt(covariance(1, 1)); }
  double stderr_phi0() const { return std::sqrt(covariance(2, 2)); }
};

/// Thrown when the fit does not converge; carries the best-so-far parameters.
struct FitNonConvergence : NumericalError {
  FitNonConvergence(const std::string& what, FitResult best);
  FitResult best;
};

/// Least-squares fit of cos(w t + phi0) e^{-Gamma t / 2}.
FitResult fit_damped_cosine(const std::vector<double>& g1, const std::vector<double>& times);

struct PhaseTraces {
  std::vector<double> times;               // lag times
  std::vector<std::vector<double>> traces; // one unwrapped trace per trajectory
};

/// Per-trajectory phase Delta phi(t) = arg( avg_{t0' in [t0, t1]} J(t + t0') J*(t0') ),
/// unwrapped sample to sample.  t1 == t0 gives the single-reference trace.
PhaseTraces phase_trace(const Ensemble& records, double t0, double t1);

/// Adds the nearest 2 pi multiple so consecutive values differ by less than pi.
std::vector<double> unwrap_phase(const std::vector<double>& wrapped);

/// Per-trajectory emission frequency from the least-squares slope of the
/// phase trace (Delta phi = -w t).
std::vector<double> trajectory_frequencies(const PhaseTraces& traces);

/// Fraction of sign changes between consecutive bin-averaged frequencies,
/// M bins over [0, t_max], normalized by (M - 1) times the number of traces.
double jump_probability(const PhaseTraces& traces, double t_max, int M);

/// <Delta phi(t)^2> over trajectories.
std::vector<double> phase_variance(const PhaseTraces& traces);

struct ScalingResult {
  double alpha = 0.0;
  double intercept = 0.0;  // natural log of the prefactor
  double stderr_alpha = 0.0;
  std::vector<double> n_values;
  std::vector<double> gamma_values;
};

/// OLS fit of log Gamma = intercept + alpha log N.
ScalingResult scaling_fit(const std::vector<std::pair<double, double>>& points);

/// Exponent beta of <Delta phi^2> ~ t^beta fitted over [t_lo, t_hi]
/// (defaults: 2 tau to half the trace length).
double superdiffusion_exponent(const PhaseTraces& traces, double t_lo = 2.0, double t_hi = -1.0);

/// <|J|^2> / N^2 averaged over trajectories and samples with t >= t_from.
double mean_intensity(const Ensemble& records, double t_from, int n_atoms);

/// Records whose phase-trace frequency has the given sign.
Ensemble select_by_frequency_sign(const Ensemble& records, const std::vector<double>& frequencies, int sign);

}  // namespace beamssr
