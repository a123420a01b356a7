#include "beamssr/dynamics.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

namespace beamssr {

namespace {

constexpr double kHalfWidth = 0.5;

inline bool in_strip(double x) { return x >= -kHalfWidth && x < kHalfWidth; }

}  // namespace

double mode_function(double x, double z) { return in_strip(x) ? std::cos(kTwoPi * z) : 0.0; }

AtomState inject_atom(RngStream& rng) {
  AtomState a;
  a.x = -kHalfWidth;
  a.z = rng.uniform();
  a.sx = rng.sign();
  a.sy = rng.sign();
  a.sz = 1.0;
  return a;
}

std::pair<double, double> collective_dipole(const EnsembleState& state) {
  double jx = 0.0, jy = 0.0;
  for (const auto& a : state.atoms) {
    const double eta = mode_function(a.x, a.z);
    jx += eta * a.sx;
    jy += eta * a.sy;
  }
  return {jx, jy};
}

EnsembleState initial_fill(const InternalUnits& units, RngStream& rng) {
  EnsembleState state;
  state.atoms.reserve(static_cast<std::size_t>(units.n_atoms));
  for (int j = 0; j < units.n_atoms; ++j) {
    const double x = -units.w + 2.0 * units.w * rng.uniform();
    AtomState a = inject_atom(rng);
    a.x = x;
    state.atoms.push_back(a);
  }
  return state;
}

namespace {

// Rotation factors sin(t)/t and (1 - cos(t))/t^2 for t^2 = theta2.  The
// series form is used for t < 0.3, where its truncation error is below 1e-16.
template <bool Series>
inline void rotation_factors(double theta2, double& a, double& b) {
  if constexpr (Series) {
    const double t2 = theta2;
    a = 1.0 + t2 * (-1.0 / 6 + t2 * (1.0 / 120 + t2 * (-1.0 / 5040 + t2 * (1.0 / 362880 + t2 * (-1.0 / 39916800)))));
    b = 0.5 + t2 * (-1.0 / 24 + t2 * (1.0 / 720 + t2 * (-1.0 / 40320 + t2 * (1.0 / 3628800 + t2 * (-1.0 / 479001600)))));
  } else {
    if (theta2 < 0.09) {
      rotation_factors<true>(theta2, a, b);
    } else {
      const double theta = std::sqrt(theta2);
      a = std::sin(theta) / theta;
      b = (1.0 - std::cos(theta)) / theta2;
    }
  }
}

template <bool Series>
inline void rotate_inline(double p, double q, double& sx, double& sy, double& sz) {
  const double theta2 = p * p + q * q;
  double a, b;
  rotation_factors<Series>(theta2, a, b);
  // Omega x s and Omega (Omega . s) - theta^2 s, with Omega = (p, q, 0).
  const double cx = q * sz;
  const double cy = -p * sz;
  const double cz = p * sy - q * sx;
  const double dot = p * sx + q * sy;
  const double nx = sx + a * cx + b * (p * dot - theta2 * sx);
  const double ny = sy + a * cy + b * (q * dot - theta2 * sy);
  const double nz = sz + a * cz - b * theta2 * sz;
  sx = nx;
  sy = ny;
  sz = nz;
}

}  // namespace

void rotate_bloch(double p, double q, double& sx, double& sy, double& sz) { rotate_inline<false>(p, q, sx, sy, sz); }

Integrator::Integrator(const InternalUnits& units, double dt, StepOptions options)
    : units_(units), dt_(dt), options_(options), noise_sigma_(std::sqrt(units.gamma_c * dt)) {
  const double dphase = units.k_c * units.v_z * dt;
  cos_half_ = std::cos(0.5 * dphase);
  sin_half_ = std::sin(0.5 * dphase);
  cos_full_ = std::cos(dphase);
  sin_full_ = std::sin(dphase);
}

NoiseIncrement Integrator::draw_noise(RngStream& rng) const {
  NoiseIncrement n;
  n.dWx = noise_sigma_ * rng.normal();
  n.dWy = noise_sigma_ * rng.normal();
  return n;
}

void Integrator::step(EnsembleState& state, RngStream& rng) {
  NoiseIncrement noise;
  if (options_.noise) noise = draw_noise(rng);
  step(state, noise, rng);
}

namespace {

template <bool Series>
void predict(const std::vector<AtomState>& atoms, const double* eta_mid, const double* eta_end, double ax, double ay,
             double& jx, double& jy) {
  double sum_x = 0.0, sum_y = 0.0;
  const std::size_t n = atoms.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double eta = eta_mid[i];
    double sx = atoms[i].sx, sy = atoms[i].sy, sz = atoms[i].sz;
    rotate_inline<Series>(-eta * ay, eta * ax, sx, sy, sz);
    sum_x += eta_end[i] * sx;
    sum_y += eta_end[i] * sy;
  }
  jx = sum_x;
  jy = sum_y;
}

template <bool Series>
void correct(std::vector<AtomState>& atoms, const double* eta_mid, double ax, double ay) {
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const double eta = eta_mid[i];
    rotate_inline<Series>(-eta * ay, eta * ax, atoms[i].sx, atoms[i].sy, atoms[i].sz);
  }
}

}  // namespace

void Integrator::step(EnsembleState& state, const NoiseIncrement& noise, RngStream& rng) {
  auto& atoms = state.atoms;
  const std::size_t n = atoms.size();
  if (z_seen_.size() != n) {
    z_seen_.assign(n, std::numeric_limits<double>::quiet_NaN());
    cos_.assign(n, 0.0);
    sin_.assign(n, 0.0);
  }
  eta_mid_.resize(n);
  eta_end_.resize(n);

  const bool move = options_.move;
  const double half_move = move ? 0.5 * units_.v_x * dt_ : 0.0;
  const double full_move = move ? units_.v_x * dt_ : 0.0;
  const double ch = move ? cos_half_ : 1.0, sh = move ? sin_half_ : 0.0;
  const double cf = move ? cos_full_ : 1.0, sf = move ? sin_full_ : 0.0;

  // Mode function at start, midpoint and end of the step.  The phase
  // cos/sin(k z) of an atom is carried over from the previous step when its
  // z is unchanged from what this integrator produced.
  double j0x = 0.0, j0y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const AtomState& a = atoms[i];
    double c, s;
    if (a.z == z_seen_[i]) {
      c = cos_[i];
      s = sin_[i];
    } else {
      const double phase = units_.k_c * a.z;
      c = std::cos(phase);
      s = std::sin(phase);
    }
    const double eta0 = in_strip(a.x) ? c : 0.0;
    eta_mid_[i] = in_strip(a.x + half_move) ? c * ch - s * sh : 0.0;
    const double c_end = c * cf - s * sf;
    eta_end_[i] = in_strip(a.x + full_move) ? c_end : 0.0;
    cos_[i] = c_end;
    sin_[i] = s * cf + c * sf;
    j0x += eta0 * a.sx;
    j0y += eta0 * a.sy;
  }

  const double drift = 0.5 * units_.gamma_c * dt_;
  constexpr double kSeriesLimit = 0.09;  // max squared rotation angle for the series path

  // Predictor: rotate with J0, accumulate J at the end of the step.
  double j1x, j1y;
  {
    const double ax = drift * j0x + noise.dWx;
    const double ay = drift * j0y + noise.dWy;
    if (ax * ax + ay * ay < kSeriesLimit)
      predict<true>(atoms, eta_mid_.data(), eta_end_.data(), ax, ay, j1x, j1y);
    else
      predict<false>(atoms, eta_mid_.data(), eta_end_.data(), ax, ay, j1x, j1y);
  }

  // Corrector with the midpoint collective dipole.
  const double ax = drift * 0.5 * (j0x + j1x) + noise.dWx;
  const double ay = drift * 0.5 * (j0y + j1y) + noise.dWy;
  if (ax * ax + ay * ay < kSeriesLimit)
    correct<true>(atoms, eta_mid_.data(), ax, ay);
  else
    correct<false>(atoms, eta_mid_.data(), ax, ay);

  const double dz = units_.v_z * dt_;
  state.time += dt_;
  for (std::size_t i = 0; i < n; ++i) {
    AtomState& a = atoms[i];
    if (!std::isfinite(a.sx + a.sy + a.sz)) throw IntegratorBlowup(i, state.time);
    if (move) {
      a.x += full_move;
      a.z += dz;
      a.z -= std::floor(a.z);
    }
    z_seen_[i] = a.z;
    if (options_.recycle && a.x >= units_.w) {
      const double x = a.x - 2.0 * units_.w;
      a = inject_atom(rng);
      a.x = x;
    }
  }
}

DipoleRecord run_trajectory(const SimParams& params, int trajectory_index) {
  const InternalUnits units = nondimensionalize(params);
  RngStream rng = rng_stream(params.master_seed, static_cast<std::uint64_t>(trajectory_index));
  EnsembleState state = initial_fill(units, rng);
  Integrator integrator(units, params.dt);

  const long n_steps = std::lround(params.t_sim / params.dt);
  DipoleRecord rec;
  rec.trajectory_seed = rng.key();
  const std::size_t n_samples = static_cast<std::size_t>(n_steps / params.sample_stride) + 1;
  rec.times.reserve(n_samples);
  rec.j_complex.reserve(n_samples);
  rec.times.push_back(0.0);
  rec.j_complex.push_back(complex_dipole(state));
  for (long k = 1; k <= n_steps; ++k) {
    integrator.step(state, rng);
    if (k % params.sample_stride == 0) {
      rec.times.push_back(static_cast<double>(k) * params.dt);
      rec.j_complex.push_back(complex_dipole(state));
    }
  }
  return rec;
}

int default_worker_count() {
  if (const char* env = std::getenv("BEAMSSR_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

std::vector<DipoleRecord> run_ensemble(const SimParams& params, int workers) {
  params.validate();
  if (workers <= 0) workers = default_worker_count();
  const int n = params.n_traj;
  workers = std::min(workers, n);

  std::vector<DipoleRecord> out(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        out[static_cast<std::size_t>(k)] = run_trajectory(params, k);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(k)] = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::ostringstream msg;
  int failed = 0;
  for (int k = 0; k < n; ++k) {
    if (errors[static_cast<std::size_t>(k)].empty()) continue;
    msg << (failed++ ? "; " : "") << "trajectory " << k << ": " << errors[static_cast<std::size_t>(k)];
  }
  if (failed) throw NumericalError(std::to_string(failed) + " trajectories failed: " + msg.str());
  return out;
}

}  // namespace beamssr
