#include "beamssr/stability.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace beamssr {

namespace {

using boost::math::quadrature::gauss_kronrod;

double sinc(double u) {
  if (std::abs(u) < 1e-4) return 1.0 - u * u / 6.0;
  return std::sin(u) / u;
}

// F(mu) = int_0^1 (1 - t) e^{-mu t} dt = sum_k (-mu)^k / (k+2)!
cplx overlap_laplace(cplx mu) {
  if (std::abs(mu) < 1.0) {
    cplx term = 0.5, sum = 0.0;
    for (int k = 0; k < 24; ++k) {
      sum += term;
      term *= -mu / static_cast<double>(k + 3);
    }
    return sum;
  }
  return 1.0 / mu - (1.0 - std::exp(-mu)) / (mu * mu);
}

// F'(mu) = -int_0^1 t (1 - t) e^{-mu t} dt = -sum_k (k+1) (-mu)^k / (k+3)!
cplx overlap_laplace_prime(cplx mu) {
  if (std::abs(mu) < 1.0) {
    cplx power = 1.0, sum = 0.0;
    double fact = 6.0;  // (k+3)!
    for (int k = 0; k < 24; ++k) {
      sum += static_cast<double>(k + 1) * power / fact;
      power *= -mu;
      fact *= static_cast<double>(k + 4);
    }
    return -sum;
  }
  const cplx e = std::exp(-mu);
  return -1.0 / (mu * mu) - e / (mu * mu) + 2.0 * (1.0 - e) / (mu * mu * mu);
}

// (1 - e^{-x}) / x
cplx phi1(cplx x) {
  if (std::abs(x) < 1e-3) return 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
  return (1.0 - std::exp(-x)) / x;
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  return gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
}

cplx integrate_complex(const std::function<cplx(double)>& f, double a, double b) {
  const double re = integrate([&](double s) { return f(s).real(); }, a, b);
  const double im = integrate([&](double s) { return f(s).imag(); }, a, b);
  return {re, im};
}

// Tipping-angle amplitude of the regular phase after distance s.
double amplitude(double s, double G, double a, double y) { return G * y * 0.5 * s * sinc(0.5 * a * s); }

void require_regular(const MeanFieldSolution& mf) {
  if (mf.omega != 0.0) throw InvalidParameter("Goldstone dispersion requires the regular (omega = 0) phase");
  if (!(mf.j_norm > 0.0)) throw InvalidParameter("Goldstone dispersion requires a superradiant solution");
}

}  // namespace

NoRootFound::NoRootFound(const std::string& what, cplx nu, double d)
    : NumericalError(what), best_nu(nu), best_abs_d(d) {}

cplx dispersion_D(cplx nu, double G, double a) {
  const cplx ia(0.0, a);
  return 1.0 - (G / 8.0) * (overlap_laplace(nu - ia) + overlap_laplace(nu + ia));
}

cplx dispersion_D_prime(cplx nu, double G, double a) {
  const cplx ia(0.0, a);
  return -(G / 8.0) * (overlap_laplace_prime(nu - ia) + overlap_laplace_prime(nu + ia));
}

std::vector<cplx> dispersion_roots(double G, double a, const RootScanBox& box) {
  const double re_max = std::max(box.re_max, 0.25 * G + 1.0);
  const double im_max = box.im_extent + std::abs(a);
  std::vector<cplx> roots;
  cplx best_nu = 0.0;
  double best_d = std::numeric_limits<double>::infinity();

  for (double re = box.re_min; re <= re_max + 1e-12; re += box.spacing) {
    for (double im = 0.0; im <= im_max + 1e-12; im += box.spacing) {
      cplx nu(re, im);
      const double d_start = std::abs(dispersion_D(nu, G, a));
      if (d_start < best_d) {
        best_d = d_start;
        best_nu = nu;
      }
      bool ok = false;
      for (int it = 0; it < 60; ++it) {
        const cplx d = dispersion_D(nu, G, a);
        const cplx dp = dispersion_D_prime(nu, G, a);
        if (dp == 0.0) break;
        const cplx step = d / dp;
        nu -= step;
        if (!std::isfinite(nu.real()) || !std::isfinite(nu.imag()) || nu.real() < box.re_min - 5.0) break;
        if (std::abs(step) < 1e-13 * (1.0 + std::abs(nu))) {
          ok = std::abs(dispersion_D(nu, G, a)) < 1e-10;
          break;
        }
      }
      if (!ok) continue;
      if (nu.real() < box.re_min - box.spacing || nu.real() > re_max + box.spacing ||
          std::abs(nu.imag()) > im_max + box.spacing)
        continue;
      if (nu.imag() < 0.0) nu = std::conj(nu);
      const bool seen = std::any_of(roots.begin(), roots.end(),
                                    [&](cplx r) { return std::abs(r - nu) < 1e-7 * (1.0 + std::abs(nu)); });
      if (!seen) roots.push_back(nu);
    }
  }
  if (roots.empty())
    throw NoRootFound("no root of D(nu) in the scan box; smallest |D| = " + std::to_string(best_d), best_nu, best_d);
  std::sort(roots.begin(), roots.end(), [](cplx x, cplx y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  return roots;
}

cplx leading_root(double G, double a, const RootScanBox& box) {
  const auto roots = dispersion_roots(G, a, box);
  // Ties (within rounding) go to the larger |Im|.
  cplx best = roots.front();
  for (const cplx& r : roots)
    if (std::abs(r.real() - best.real()) < 1e-10 && r.imag() > best.imag()) best = r;
  return best;
}

PhaseBoundaryPoint sr_boundary_point(double a, double rel_tol) {
  if (!std::isfinite(a)) throw InvalidParameter("k_vz_tau must be finite");
  auto growth = [&](double G) {
    try {
      return leading_root(G, a).real();
    } catch (const NoRootFound&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  double lo = 1.0, hi = 40.0;
  if (growth(lo) >= 0.0) throw NumericalError("superradiance boundary below n_gamma_tau = 1");
  while (growth(hi) <= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e5) throw NumericalError("no superradiance boundary below n_gamma_tau = 1e5");
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (growth(mid) > 0.0 ? hi : lo) = mid;
  }
  PhaseBoundaryPoint p;
  p.k_vz_tau = a;
  p.n_gamma_tau_critical = 0.5 * (lo + hi);
  p.re_nu0_residual = growth(p.n_gamma_tau_critical);
  return p;
}

double sr_boundary(double a, double rel_tol) { return sr_boundary_point(a, rel_tol).n_gamma_tau_critical; }

double real_axis_boundary(double a) {
  // D(0) = 1 - (G/8) sinc^2(a/2)
  const double s = sinc(0.5 * a);
  // zeros of sinc at a = 2 pi k come out as ~1e-17 in floating point
  if (s * s < 1e-24) return std::numeric_limits<double>::infinity();
  return 8.0 / (s * s);
}

cplx dispersion_Dperp(cplx nu, double G, double a, double y) {
  // z-average of cos(2 pi z + a t) sin(A cos(2 pi z - a s/2)) = J1(A) cos(a (s/2 + t));
  // the t-integral over [0, 1 - s] is done in closed form.
  auto integrand = [&](double s) -> cplx {
    const double T = 1.0 - s;
    const cplx ia(0.0, a);
    const cplx phase = std::exp(cplx(0.0, 0.5 * a * s));
    const cplx inner = 0.5 * T * (phase * phi1((nu - ia) * T) + std::conj(phase) * phi1((nu + ia) * T));
    return std::cyl_bessel_j(1.0, amplitude(s, G, a, y)) * inner;
  };
  return nu / y * integrate_complex(integrand, 0.0, 1.0);
}

cplx dispersion_Dperp(cplx nu, const MeanFieldSolution& mf) {
  require_regular(mf);
  return dispersion_Dperp(nu, mf.n_gamma_tau, mf.k_vz_tau, mf.j_parallel());
}

double compute_C0(double G, double a, double y) {
  if (!(y > 0.0)) throw InvalidParameter("C0 requires a superradiant solution");
  auto f = [&](double s) {
    const double T = 1.0 - s;
    return std::cyl_bessel_j(1.0, amplitude(s, G, a, y)) * T * sinc(0.5 * a * T);
  };
  return std::cos(0.5 * a) / y * integrate(f, 0.0, 1.0);
}

double compute_C0(const MeanFieldSolution& mf) {
  require_regular(mf);
  return compute_C0(mf.n_gamma_tau, mf.k_vz_tau, mf.j_parallel());
}

C1Result compute_C1(double G, double a, double y) {
  const double c0 = compute_C0(G, a, y);
  if (std::abs(c0) > 1e-6)
    throw InvalidParameter("C1 is defined only where C0 vanishes (C0 = " + std::to_string(c0) + ")");
  auto g = [&](double nu) { return dispersion_Dperp(cplx(nu, 0.0), G, a, y).real() / (nu * nu); };
  const double g2 = g(1e-2), g3 = g(1e-3), g4 = g(1e-4);
  // g(nu) = C1 + c nu + O(nu^2): first-order Richardson with ratio 10, then second order.
  const double r1 = (10.0 * g3 - g2) / 9.0;
  const double r2 = (10.0 * g4 - g3) / 9.0;
  C1Result out;
  out.value = (100.0 * r2 - r1) / 99.0;
  out.well_conditioned = std::abs(r1 - r2) <= 0.01 * std::abs(r2);
  return out;
}

C1Result compute_C1(const MeanFieldSolution& mf) {
  require_regular(mf);
  return compute_C1(mf.n_gamma_tau, mf.k_vz_tau, mf.j_parallel());
}

double linewidth_phase_diffusion(double G, double a) {
  const double y = solve_j_parallel_ssr(G, a);
  if (!(y > 0.0)) throw DegenerateRegion("no regular superradiant phase at these parameters");
  const double c0 = compute_C0(G, a, y);
  if (std::abs(c0) < 1e-8) throw ThresholdDivergence("C0 vanishes: phase-diffusion linewidth diverges");
  // Injection noise: each entering atom's transverse fluctuation is seen
  // through c(z) = int_0^1 cos(2 pi z + a s) ds; in units of N.
  const double d_injection = integrate(
      [&](double z) {
        const double c = integrate([&](double s) { return std::cos(kTwoPi * z + a * s); }, 0.0, 1.0);
        return c * c;
      },
      0.0, 1.0);
  // Cavity noise: 4 / Gamma_c = 4 N / G.
  const double d_cavity = 4.0 / G;
  return (d_injection + d_cavity) / (c0 * y * c0 * y);
}

}  // namespace beamssr
