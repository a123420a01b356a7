#include <doctest.h>

#include "beamssr/analysis.hpp"
#include "beamssr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace beamssr;

namespace {

// Ensemble of pure tones J = A e^{-i (w t + phi_k)} with random phases phi_k.
Ensemble tones(const std::vector<double>& omegas, double dt, int n, double amplitude = 1.0) {
  Ensemble e;
  RngStream rng = rng_stream(99, 0);
  for (double w : omegas) {
    DipoleRecord r;
    const double phi = kTwoPi * rng.uniform();
    for (int i = 0; i < n; ++i) {
      const double t = i * dt;
      r.times.push_back(t);
      r.j_complex.push_back(amplitude * std::exp(cplx(0.0, -(w * t + phi))));
    }
    e.push_back(std::move(r));
  }
  return e;
}

PhaseTraces make_traces(const std::vector<double>& times, const std::vector<std::vector<double>>& tr) {
  PhaseTraces p;
  p.times = times;
  p.traces = tr;
  return p;
}

std::vector<double> grid(double dt, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = i * dt;
  return t;
}

}  // namespace

TEST_CASE("two-time correlation of a pure tone") {
  const double w = 2.0, dt = 0.05;
  const auto e = tones({w, w, w}, dt, 400, 3.0);
  const auto c = two_time_correlation(e, 1.0);
  CHECK(c.size() == 400 - 20);
  for (std::size_t k = 0; k < c.size(); k += 37) {
    const cplx expect = 9.0 * std::exp(cplx(0.0, -w * k * dt));
    CHECK(std::abs(c[k] - expect) < 1e-11);
  }
  // reference-time averaging leaves a stationary signal unchanged
  const auto ca = two_time_correlation(e, 1.0, 3.0);
  CHECK(ca.size() == 400 - 60);
  for (std::size_t k = 0; k < ca.size(); k += 41) CHECK(std::abs(ca[k] - c[k]) < 1e-10);

  CHECK_THROWS_AS(two_time_correlation(tones({w}, dt, 50), 0.0), InsufficientSamples);
  CHECK_THROWS_AS(two_time_correlation(e, 100.0), InsufficientSamples);
}

TEST_CASE("g1 is one at zero lag and a cosine for a tone") {
  const auto e = tones({1.5, -1.5, 1.5, 0.7}, 0.1, 300, 0.2);
  const auto g = g1_normalized(e, 2.0);
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-14));
  const auto t = lag_times(e, g.size());
  const double expect = (3.0 * std::cos(1.5 * t[50]) + std::cos(0.7 * t[50])) / 4.0;
  CHECK(g[50] == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("spectrum peaks at the emission frequency with the positive-exponent convention") {
  const double dt = 0.05;
  const auto e = tones({4.0, 4.0}, dt, 4001);
  const auto s = spectrum(e, 0.0, 200.0);
  CHECK(s.resolution == doctest::Approx(kTwoPi / 200.0));
  CHECK(std::abs(s.peak_in(-100.0, 100.0) - 4.0) <= s.resolution);
  CHECK(std::is_sorted(s.omega_grid.begin(), s.omega_grid.end()));
  SpectrumOptions opt;
  opt.pad_factor = 8;
  opt.window = Window::Hann;
  const auto fine = spectrum(e, 0.0, 200.0, {}, opt);
  CHECK(std::abs(fine.peak_in(-100.0, 100.0) - 4.0) <= fine.resolution / 8.0);
  CHECK_THROWS_AS(spectrum(e, 0.0, 500.0), InvalidParameter);
}

TEST_CASE("mirror-symmetric ensemble gives a symmetric two-peak spectrum") {
  const auto e = tones({3.0, -3.0, 3.0, -3.0}, 0.05, 2001);
  const auto s = spectrum(e, 0.0, 100.0);
  const double plus = s.peak_in(0.5, 50.0), minus = s.peak_in(-50.0, -0.5);
  CHECK(plus == doctest::Approx(-minus).epsilon(1e-12));
  CHECK(std::abs(plus - 3.0) <= s.resolution);
  const auto n = s.omega_grid.size();
  for (std::size_t k = 1; k < n / 2; k += 13) {
    // grid is symmetric about the zero bin
    const auto zero = static_cast<std::size_t>(std::find(s.omega_grid.begin(), s.omega_grid.end(), 0.0) - s.omega_grid.begin());
    if (zero + k < n && zero >= k) CHECK(s.s_values[zero + k] == doctest::Approx(s.s_values[zero - k]).epsilon(1e-9));
  }
}

TEST_CASE("Parseval identity for the rectangular window") {
  RngStream rng = rng_stream(5, 1);
  std::vector<cplx> c(257);
  for (auto& v : c) v = cplx(rng.normal(), rng.normal());
  const double dt = 0.05;
  const auto s = spectrum_of_correlation(c, dt);
  const double dw = s.omega_grid[1] - s.omega_grid[0];
  double lhs = 0.0, rhs = 0.0;
  for (double v : s.s_values) lhs += v * v * dw;
  for (const auto& v : c) rhs += std::norm(v);
  rhs *= kTwoPi * dt;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("damped-cosine fit recovers its own model to machine precision") {
  const auto t = grid(0.05, 800);
  for (auto [w, g, phi] : {std::tuple{2.0, 0.7, 0.3}, std::tuple{0.0, 1.5, 0.0}, std::tuple{4.46, 0.05, -1.0}}) {
    std::vector<double> y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) y[i] = std::cos(w * t[i] + phi) * std::exp(-g * t[i] / 2);
    const auto f = fit_damped_cosine(y, t);
    CHECK(f.converged);
    CHECK(f.omega == doctest::Approx(w).epsilon(1e-8));
    CHECK(f.gamma == doctest::Approx(g).epsilon(1e-8));
    CHECK(f.residual_norm < 1e-9);
  }
  // negative frequency folds into the phase
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) y[i] = std::cos(-1.2 * t[i] + 0.4) * std::exp(-0.3 * t[i]);
  const auto f = fit_damped_cosine(y, t);
  CHECK(f.omega == doctest::Approx(1.2).epsilon(1e-8));
  CHECK(std::cos(f.phi0) == doctest::Approx(std::cos(0.4)).epsilon(1e-8));
  CHECK(std::sin(f.phi0) == doctest::Approx(-std::sin(0.4)).epsilon(1e-8));
}

TEST_CASE("damped-cosine fit on noisy data: unbiased within its standard error") {
  const auto t = grid(0.1, 600);
  RngStream rng = rng_stream(17, 3);
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) y[i] = std::cos(1.0 * t[i]) * std::exp(-0.4 * t[i] / 2) + 0.01 * rng.normal();
  const auto f = fit_damped_cosine(y, t);
  CHECK(std::abs(f.gamma - 0.4) < 5.0 * f.stderr_gamma());
  CHECK(std::abs(f.omega - 1.0) < 5.0 * f.stderr_omega());
  CHECK(f.stderr_gamma() > 0.0);
  CHECK_THROWS_AS(fit_damped_cosine(std::vector<double>(5, 1.0), grid(0.1, 5)), InsufficientSamples);
}

TEST_CASE("phase unwrapping restores a linear ramp") {
  std::vector<double> w, truth;
  for (int i = 0; i < 500; ++i) {
    truth.push_back(-0.9 * i);
    w.push_back(std::remainder(truth.back(), kTwoPi));
  }
  const auto u = unwrap_phase(w);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] - u[0] == doctest::Approx(truth[i] - truth[0]).epsilon(1e-12));
}

TEST_CASE("phase traces and per-trajectory frequencies") {
  const auto e = tones({2.0, -1.0, 0.5}, 0.05, 1000);
  const auto p = phase_trace(e, 5.0, 5.0);
  REQUIRE(p.traces.size() == 3);
  CHECK(p.traces[0][0] == doctest::Approx(0.0).epsilon(1e-12));
  const auto w = trajectory_frequencies(p);
  CHECK(w[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(w[1] == doctest::Approx(-1.0).epsilon(1e-10));
  const auto pos = select_by_frequency_sign(e, w, +1), neg = select_by_frequency_sign(e, w, -1);
  CHECK(pos.size() == 2);
  CHECK(neg.size() == 1);
}

TEST_CASE("jump probability: counts, offset and time-reversal invariance") {
  const auto t = grid(0.5, 181);  // t_max = 90, bins of 4.5
  // frequency sign alternates every bin: every transition is a jump
  std::vector<double> alt(t.size()), none(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double tt = t[i];
    const double phase_in_bin = std::fmod(tt, 9.0);
    alt[i] = phase_in_bin < 4.5 ? phase_in_bin : 9.0 - phase_in_bin;
    none[i] = -1.3 * tt;
  }
  CHECK(jump_probability(make_traces(t, {alt}), 90.0, 20) == doctest::Approx(1.0));
  CHECK(jump_probability(make_traces(t, {none}), 90.0, 20) == 0.0);
  CHECK(jump_probability(make_traces(t, {alt, none}), 90.0, 20) == doctest::Approx(0.5));

  RngStream rng = rng_stream(4, 4);
  std::vector<std::vector<double>> walk(30, std::vector<double>(t.size(), 0.0));
  for (auto& tr : walk)
    for (std::size_t i = 1; i < tr.size(); ++i) tr[i] = tr[i - 1] + rng.normal();
  const double p = jump_probability(make_traces(t, walk), 90.0, 20);
  auto shifted = walk, reversed = walk;
  for (auto& tr : shifted)
    for (auto& v : tr) v += 2.7;
  for (auto& tr : reversed) std::reverse(tr.begin(), tr.end());
  CHECK(jump_probability(make_traces(t, shifted), 90.0, 20) == doctest::Approx(p).epsilon(1e-14));
  CHECK(jump_probability(make_traces(t, reversed), 90.0, 20) == doctest::Approx(p).epsilon(1e-14));
  // an unbiased random walk changes frequency sign half the time
  CHECK(std::abs(p - 0.5) < 0.1);

  CHECK_THROWS_AS(jump_probability(make_traces(t, walk), 120.0, 20), InvalidParameter);
  CHECK_THROWS_AS(jump_probability(make_traces(t, walk), 90.0, 1), InvalidParameter);
}

TEST_CASE("power-law fits: scaling exponent and superdiffusion exponent") {
  const auto s = scaling_fit({{50, 7.0 / 50}, {100, 7.0 / 100}, {200, 7.0 / 200}, {400, 7.0 / 400}});
  CHECK(s.alpha == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s.intercept == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  CHECK(s.stderr_alpha < 1e-10);
  CHECK_THROWS_AS(scaling_fit({{50, 1.0}, {100, -1.0}, {200, 1.0}}), InvalidParameter);
  CHECK_THROWS_AS(scaling_fit({{50, 1.0}, {100, 1.0}}), InsufficientSamples);

  // traces +-c t^{3/2} have variance c^2 t^3 exactly
  const auto t = grid(0.1, 1001);
  std::vector<double> up(t.size()), down(t.size()), lin(t.size()), neg(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    up[i] = 0.3 * std::pow(t[i], 1.5);
    down[i] = -up[i];
    lin[i] = std::sqrt(t[i]);
    neg[i] = -lin[i];
  }
  CHECK(superdiffusion_exponent(make_traces(t, {up, down})) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(superdiffusion_exponent(make_traces(t, {lin, neg})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mean intensity is |J|^2 / N^2") {
  const auto e = tones({1.0, 2.0}, 0.1, 100, 40.0);
  CHECK(mean_intensity(e, 3.0, 200) == doctest::Approx(0.04).epsilon(1e-13));
  CHECK_THROWS_AS(mean_intensity(e, 1e3, 200), InsufficientSamples);
}
