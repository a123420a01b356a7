#include "beamssr/meanfield.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace beamssr {

namespace odeint = boost::numeric::odeint;

namespace {

double sinc(double u) {
  if (std::abs(u) < 1e-4) return 1.0 - u * u / 6.0;
  return std::sin(u) / u;
}

// Bloch vector (bx, by, bz) in the rotating frame plus the accumulated
// response integral (re, im).
using CharState = std::array<double, 5>;

struct CharacteristicRhs {
  double g;      // Gamma_c |<J>| in internal units, = G j
  double omega;
  double phase0; // 2 pi z0
  double a;      // k_c v_z tau

  void operator()(const CharState& b, CharState& d, double s) const {
    const double eta = std::cos(phase0 + a * s);
    d[0] = omega * b[1] + g * eta * b[2];
    d[1] = -omega * b[0];
    d[2] = -g * eta * b[0];
    d[3] = 0.5 * eta * b[0];
    d[4] = -0.5 * eta * b[1];
  }
};

auto make_stepper(double rel_tol) {
  return odeint::make_controlled<odeint::runge_kutta_dopri5<CharState>>(1e-3 * rel_tol, rel_tol);
}

CharState integrate_path(const CharacteristicRhs& rhs, double rel_tol) {
  CharState b{0.0, 0.0, 1.0, 0.0, 0.0};
  odeint::integrate_adaptive(make_stepper(rel_tol), rhs, b, 0.0, 1.0, 0.02);
  return b;
}

struct Residual {
  double j, omega;
  cplx value;  // I - j
};

Residual residual_at(double j, double omega, double G, double a, const MeanFieldOptions& opt) {
  return {j, omega, meanfield_response(j, omega, G, a, opt) - cplx(j, 0.0)};
}

std::string describe(double G, double a) {
  std::ostringstream os;
  os.precision(6);
  os << "(n_gamma_tau=" << G << ", k_vz_tau=" << a << ")";
  return os.str();
}

CharacteristicField build_field(double j, double omega, double G, double a, const MeanFieldOptions& opt) {
  const int n_s = std::max(2, opt.n_s_field);
  CharacteristicField field(n_s, opt.n_z0, a / kTwoPi);
  std::vector<double> s_grid(static_cast<std::size_t>(n_s));
  for (int i = 0; i < n_s; ++i) s_grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n_s - 1);
  for (int k = 0; k < opt.n_z0; ++k) {
    const CharacteristicRhs rhs{G * j, omega, kTwoPi * k / opt.n_z0, a};
    CharState b{0.0, 0.0, 1.0, 0.0, 0.0};
    int idx = 0;
    odeint::integrate_times(make_stepper(opt.rel_tol), rhs, b, s_grid.begin(), s_grid.end(), 0.02,
                            [&](const CharState& st, double) {
                              field.at(idx++, k) = {st[0], st[1], st[2]};
                            });
  }
  return field;
}

MeanFieldSolution finish(double j, double omega, double G, double a, const MeanFieldOptions& opt) {
  MeanFieldSolution sol;
  sol.n_gamma_tau = G;
  sol.k_vz_tau = a;
  sol.j_norm = j;
  sol.omega = omega;
  sol.residual = std::abs(residual_at(j, omega, G, a, opt).value);
  sol.field = build_field(j, omega, G, a, opt);
  return sol;
}

// Regular phase: omega = 0 and the response is real.  Solve Re I(j) = j
// bracketing around the closed-form root.
MeanFieldSolution solve_regular(double G, double a, const MeanFieldOptions& opt) {
  const double y = solve_j_parallel_ssr(G, a);
  if (y <= 0.0) throw DegenerateRegion("no superradiant solution at " + describe(G, a));
  auto f = [&](double j) { return meanfield_response(j, 0.0, G, a, opt).real() - j; };
  double lo = 0.5 * y * 0.98, hi = 0.5 * y * 1.02;
  double flo = f(lo), fhi = f(hi);
  for (int k = 0; k < 20 && flo * fhi > 0.0; ++k) {
    lo *= 0.9;
    hi = std::min(0.5, hi * 1.1);
    flo = f(lo);
    fhi = f(hi);
  }
  if (flo * fhi > 0.0) throw NoConvergence("no bracket for the regular branch at " + describe(G, a), flo, 0.0);
  std::uintmax_t iters = 100;
  auto tol = [&](double l, double h) { return std::abs(h - l) < 1e-13; };
  auto [l, h] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return finish(0.5 * (l + h), 0.0, G, a, opt);
}

// Largest j in (0, 1/2] with |I(j, omega)| = j, or NaN if there is none.
double amplitude_root(double omega, double G, double a, const MeanFieldOptions& opt) {
  auto g = [&](double j) { return std::abs(meanfield_response(j, omega, G, a, opt)) - j; };
  constexpr int kGrid = 24;
  double j_hi = 0.5, g_hi = g(j_hi);  // |I| <= 1/pi < 1/2, so g_hi < 0
  for (int k = kGrid - 1; k >= 0; --k) {
    const double j_lo = k > 0 ? 0.5 * k / kGrid : 1e-4;
    const double g_lo = g(j_lo);
    if (g_lo > 0.0) {
      std::uintmax_t iters = 100;
      auto tol = [](double l, double h) { return std::abs(h - l) < 1e-13; };
      auto [l, h] = boost::math::tools::toms748_solve(g, j_lo, j_hi, g_lo, g_hi, tol, iters);
      return 0.5 * (l + h);
    }
    j_hi = j_lo;
    g_hi = g_lo;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Bistable phase: scan omega (same sign as a) for a change of sign of
// arg I at the amplitude root, then refine by bracketing.
MeanFieldSolution solve_detuned(double G, double a, const MeanFieldOptions& opt) {
  MeanFieldOptions coarse = opt;
  coarse.n_z0 = std::min(opt.n_z0, 64);
  coarse.rel_tol = std::max(opt.rel_tol, 1e-7);

  const double sgn = a > 0 ? 1.0 : -1.0;
  std::vector<double> grid = {1e-3, 3e-3, 1e-2, 3e-2};
  const double w_max = std::abs(a) + kTwoPi;
  for (int k = 1; k <= 96; ++k) grid.push_back(0.05 + (w_max - 0.05) * k / 96.0);

  auto phase = [&](double w, const MeanFieldOptions& o, double& j) {
    j = amplitude_root(w, G, a, o);
    if (!std::isfinite(j)) return std::numeric_limits<double>::quiet_NaN();
    return std::arg(meanfield_response(j, w, G, a, o));
  };

  double w_prev = 0.0, h_prev = std::numeric_limits<double>::quiet_NaN(), j_dummy;
  for (double w_abs : grid) {
    const double w = sgn * w_abs;
    const double h = phase(w, coarse, j_dummy);
    if (std::isfinite(h) && std::isfinite(h_prev) && h * h_prev < 0.0 && std::abs(h - h_prev) < kPi) {
      // Refine at full resolution; the coarse bracket may need widening.
      double j_ref = 0.0;
      auto f = [&](double ww) { return phase(ww, opt, j_ref); };
      const double lo = std::min(w_prev, w), hi = std::max(w_prev, w);
      const double flo = f(lo), fhi = f(hi);
      if (!(flo * fhi < 0.0)) {
        h_prev = h;
        w_prev = w;
        continue;
      }
      std::uintmax_t iters = 100;
      auto tol = [](double l, double u) { return std::abs(u - l) < 1e-12; };
      auto [l, u] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
      const double w_star = 0.5 * (l + u);
      const double j_star = amplitude_root(w_star, G, a, opt);
      return finish(j_star, w_star, G, a, opt);
    }
    h_prev = h;
    w_prev = w;
  }
  throw DegenerateRegion("no detuned superradiant solution found at " + describe(G, a));
}

}  // namespace

CharacteristicField::CharacteristicField(int n_s, int n_z0, double v_z)
    : n_s_(n_s), n_z0_(n_z0), v_z_(v_z), data_(static_cast<std::size_t>(n_s) * n_z0) {}

std::array<double, 3> CharacteristicField::bloch(double x, double z) const {
  const double s = std::clamp(x + 0.5, 0.0, 1.0);
  const double fs = s * (n_s_ - 1);
  const int i0 = std::min(static_cast<int>(fs), n_s_ - 1);
  const int i1 = std::min(i0 + 1, n_s_ - 1);
  const double ts = fs - i0;

  auto along = [&](int is) {
    const double s_node = static_cast<double>(is) / (n_s_ - 1);
    double z0 = z - v_z_ * s_node;
    z0 -= std::floor(z0);
    const double fz = z0 * n_z0_;
    const int k0 = static_cast<int>(fz) % n_z0_;
    const int k1 = (k0 + 1) % n_z0_;
    const double tz = fz - std::floor(fz);
    const auto& p = at(is, k0);
    const auto& q = at(is, k1);
    return std::array<double, 3>{p[0] + tz * (q[0] - p[0]), p[1] + tz * (q[1] - p[1]), p[2] + tz * (q[2] - p[2])};
  };
  const auto b0 = along(i0);
  if (i1 == i0 || ts == 0.0) return b0;
  const auto b1 = along(i1);
  return {b0[0] + ts * (b1[0] - b0[0]), b0[1] + ts * (b1[1] - b0[1]), b0[2] + ts * (b1[2] - b0[2])};
}

double CharacteristicField::K(double x, double z) const {
  const auto b = bloch(x, z);
  return std::atan2(std::hypot(b[0], b[1]), b[2]);
}

double CharacteristicField::psi(double x, double z) const {
  const auto b = bloch(x, z);
  return std::atan2(b[1], b[0]);
}

NoConvergence::NoConvergence(const std::string& what, double re, double im)
    : NumericalError(what + " (residual " + std::to_string(re) + ", " + std::to_string(im) + ")"),
      residual_re(re),
      residual_im(im) {}

double solve_j_parallel_ssr(double G, double a, std::vector<double>* other_roots) {
  if (!(G > 0.0)) return 0.0;
  const double sc = sinc(0.5 * a);
  auto f = [&](double y) { return 0.5 * G * y * y - 1.0 + std::cyl_bessel_j(0.0, 0.5 * G * y * sc); };
  // 1 - J0 <= 1.41, so every root lies below sqrt(2 * 1.41 / G).
  const double y_max = std::sqrt(2.0 * 1.41 / G);
  constexpr int kGrid = 4000;
  std::vector<double> roots;
  double y_prev = y_max, f_prev = f(y_max);
  for (int k = kGrid - 1; k >= 1; --k) {
    const double y = y_max * k / kGrid;
    const double fy = f(y);
    if (fy == 0.0) {
      roots.push_back(y);
    } else if (fy * f_prev < 0.0) {
      std::uintmax_t iters = 200;
      auto tol = [](double l, double h) { return std::abs(h - l) < 1e-15; };
      auto [l, h] = boost::math::tools::toms748_solve(f, y, y_prev, fy, f_prev, tol, iters);
      roots.push_back(0.5 * (l + h));
    }
    y_prev = y;
    f_prev = fy;
  }
  if (roots.empty()) return 0.0;
  if (other_roots) other_roots->insert(other_roots->end(), roots.begin() + 1, roots.end());
  return roots.front();
}

double tipping_angle_ssr(double x, double z, double y, double G, double a) {
  const double s = x + 0.5;
  return G * y * 0.5 * s * sinc(0.5 * a * s) * std::cos(kTwoPi * z - 0.5 * a * s);
}

cplx meanfield_response(double j, double omega, double G, double a, const MeanFieldOptions& opt) {
  double re = 0.0, im = 0.0;
  for (int k = 0; k < opt.n_z0; ++k) {
    const CharacteristicRhs rhs{G * j, omega, kTwoPi * k / opt.n_z0, a};
    const CharState b = integrate_path(rhs, opt.rel_tol);
    re += b[3];
    im += b[4];
  }
  return {re / opt.n_z0, im / opt.n_z0};
}

MeanFieldSolution solve_stationary_from(double G, double a, double j, double omega, const MeanFieldOptions& opt) {
  if (!(G > 0.0) || !std::isfinite(a)) throw InvalidParameter("invalid parameters " + describe(G, a));
  Residual r = residual_at(j, omega, G, a, opt);
  for (int it = 0; it < 40; ++it) {
    if (std::abs(r.value) < opt.tolerance) return finish(r.j, r.omega, G, a, opt);
    const double hj = 1e-6, hw = 1e-6;
    const cplx dj = (residual_at(r.j + hj, r.omega, G, a, opt).value - r.value) / hj;
    const cplx dw = (residual_at(r.j, r.omega + hw, G, a, opt).value - r.value) / hw;
    const double det = dj.real() * dw.imag() - dw.real() * dj.imag();
    if (!std::isfinite(det) || det == 0.0) break;
    const double step_j = (dw.imag() * r.value.real() - dw.real() * r.value.imag()) / det;
    const double step_w = (-dj.imag() * r.value.real() + dj.real() * r.value.imag()) / det;
    // Damped update: halve until the residual decreases.
    double lambda = 1.0;
    Residual trial{};
    for (int h = 0; h < 12; ++h, lambda *= 0.5) {
      const double jj = r.j - lambda * step_j;
      if (jj <= 0.0 || jj > 0.5) continue;
      trial = residual_at(jj, r.omega - lambda * step_w, G, a, opt);
      if (std::abs(trial.value) < std::abs(r.value)) break;
    }
    if (!(trial.j > 0.0) || std::abs(trial.value) >= std::abs(r.value)) break;
    r = trial;
    if (r.j < 1e-6) throw DegenerateRegion("dipole collapsed at " + describe(G, a));
  }
  if (std::abs(r.value) < opt.tolerance) return finish(r.j, r.omega, G, a, opt);
  throw NoConvergence("stationary solve did not converge at " + describe(G, a), r.value.real(), r.value.imag());
}

MeanFieldSolution solve_bistable(double G, double a, const MeanFieldOptions& opt) {
  if (!(G > 0.0) || !std::isfinite(a)) throw InvalidParameter("invalid parameters " + describe(G, a));
  if (std::abs(a) <= kPi) return solve_regular(G, a, opt);
  MeanFieldSolution sol = solve_detuned(G, a, opt);
  if (sol.residual > opt.tolerance) {
    try {
      sol = solve_stationary_from(G, a, sol.j_norm, sol.omega, opt);
    } catch (const NoConvergence&) {
      // keep the bracketed solution; its residual is reported
    }
  }
  return sol;
}

std::vector<BranchPoint> frequency_branch_diagram(double G, const std::vector<double>& grid,
                                                  const MeanFieldOptions& opt) {
  std::vector<BranchPoint> out;
  bool have_prev = false;
  double j_prev = 0.0, w_prev = 0.0;
  for (double a : grid) {
    BranchPoint p;
    p.k_vz_tau = a;
    try {
      MeanFieldSolution sol;
      bool done = false;
      if (std::abs(a) > kPi && have_prev) {
        try {
          sol = solve_stationary_from(G, a, j_prev, (a > 0 ? 1.0 : -1.0) * std::abs(w_prev), opt);
          done = sol.omega * a > 0.0;
        } catch (const NumericalError&) {
        }
      }
      if (!done) sol = solve_bistable(G, a, opt);
      p.omega = sol.omega;
      p.j_norm = sol.j_norm;
      p.residual = sol.residual;
      p.converged = sol.residual < 10.0 * opt.tolerance;
      if (!p.converged) p.message = "residual above tolerance";
      if (sol.omega != 0.0) {
        have_prev = true;
        j_prev = sol.j_norm;
        w_prev = sol.omega;
      } else {
        have_prev = false;
      }
    } catch (const std::exception& e) {
      p.converged = false;
      p.message = e.what();
      have_prev = false;
    }
    out.push_back(p);
    if (p.converged && p.omega != 0.0) {
      BranchPoint mirror = p;
      mirror.omega = -p.omega;
      out.push_back(mirror);
    }
  }
  return out;
}

}  // namespace beamssr
