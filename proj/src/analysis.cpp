#include "beamssr/analysis.hpp"

#include <Eigen/Dense>
#include <fftw3.h>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <mutex>
#include <numeric>

namespace beamssr {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place transform sum_n x_n e^{+2 pi i k n / M}.
void fft_positive_exponent(std::vector<cplx>& data) {
  const int n = static_cast<int>(data.size());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

double sample_spacing(const Ensemble& records) {
  if (records.empty() || records.front().times.size() < 2) throw InsufficientSamples("records hold fewer than 2 samples");
  const auto& t = records.front().times;
  return t[1] - t[0];
}

void check_shape(const Ensemble& records) {
  const std::size_t n = records.front().times.size();
  for (const auto& r : records)
    if (r.times.size() != n || r.j_complex.size() != n) throw InvalidParameter("records differ in sample count");
}

struct LinearFit {
  double slope = 0.0, intercept = 0.0, stderr_slope = 0.0;
};

LinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.stderr_slope = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

// Model cos(w t + phi) exp(-g t / 2) minus data, parameters (w, g, phi).
struct DampedCosine : Eigen::DenseFunctor<double> {
  const std::vector<double>& t;
  const std::vector<double>& y;
  DampedCosine(const std::vector<double>& t_, const std::vector<double>& y_)
      : Eigen::DenseFunctor<double>(3, static_cast<int>(t_.size())), t(t_), y(y_) {}

  int operator()(const InputType& p, ValueType& r) const {
    for (std::size_t i = 0; i < t.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = std::cos(p[0] * t[i] + p[2]) * std::exp(-0.5 * p[1] * t[i]) - y[i];
    return 0;
  }
  int df(const InputType& p, JacobianType& jac) const {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double e = std::exp(-0.5 * p[1] * t[i]);
      const double c = std::cos(p[0] * t[i] + p[2]);
      const double s = std::sin(p[0] * t[i] + p[2]);
      jac(k, 0) = -t[i] * s * e;
      jac(k, 1) = -0.5 * t[i] * c * e;
      jac(k, 2) = -s * e;
    }
    return 0;
  }
};

// Initial frequency: peak of the zero-padded transform of g1 over w >= 0.
double guess_frequency(const std::vector<double>& g1, double dt) {
  std::size_t m = 1;
  while (m < 8 * g1.size()) m <<= 1;
  std::vector<cplx> buf(m, 0.0);
  for (std::size_t i = 0; i < g1.size(); ++i) buf[i] = g1[i];
  fft_positive_exponent(buf);
  std::size_t best = 0;
  for (std::size_t k = 1; k < m / 2; ++k)
    if (std::abs(buf[k]) > std::abs(buf[best])) best = k;
  return kTwoPi * static_cast<double>(best) / (static_cast<double>(m) * dt);
}

// Initial decay rate from the log of the envelope (local maxima of |g1|).
double guess_decay(const std::vector<double>& g1, const std::vector<double>& t) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    const double v = std::abs(g1[i]);
    const bool left = i == 0 || v >= std::abs(g1[i - 1]);
    const bool right = i + 1 == g1.size() || v >= std::abs(g1[i + 1]);
    if (left && right && v > 1e-3) {
      xs.push_back(t[i]);
      ys.push_back(std::log(v));
    }
  }
  if (xs.size() < 2) {
    xs.clear();
    ys.clear();
    for (std::size_t i = 0; i < g1.size(); ++i)
      if (std::abs(g1[i]) > 0.05) {
        xs.push_back(t[i]);
        ys.push_back(std::log(std::abs(g1[i])));
      }
  }
  if (xs.size() < 2) return 1.0 / (t.back() - t.front());
  const double g = -2.0 * ols(xs, ys).slope;
  return g > 0.0 ? g : 1e-3 / (t.back() - t.front());
}

}  // namespace

std::vector<cplx> two_time_correlation(const Ensemble& records, double t0) {
  return two_time_correlation(records, t0, t0);
}

std::vector<cplx> two_time_correlation(const Ensemble& records, double t0, double t1) {
  if (records.size() < 2) throw InsufficientSamples("correlation needs at least 2 trajectories");
  check_shape(records);
  if (t1 < t0) throw InvalidParameter("t1 < t0");
  const auto& times = records.front().times;
  const std::size_t i0 = sample_index(times, t0);
  const std::size_t i1 = sample_index(times, t1);
  if (i1 >= times.size()) throw InsufficientSamples("reference time beyond the recorded range");
  const std::size_t n_lag = times.size() - i1;
  std::vector<cplx> c(n_lag, 0.0);
  for (const auto& r : records) {
    const auto& j = r.j_complex;
    for (std::size_t i = i0; i <= i1; ++i) {
      const cplx ref = std::conj(j[i]);
      for (std::size_t k = 0; k < n_lag; ++k) c[k] += j[i + k] * ref;
    }
  }
  const double norm = 1.0 / (static_cast<double>(records.size()) * static_cast<double>(i1 - i0 + 1));
  for (auto& v : c) v *= norm;
  return c;
}

std::vector<double> lag_times(const Ensemble& records, std::size_t n) {
  const double dt = sample_spacing(records);
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

SpectrumResult spectrum_of_correlation(const std::vector<cplx>& c, double dt, const SpectrumOptions& options) {
  const std::size_t n = c.size();
  if (n < 2) throw InsufficientSamples("spectrum needs at least 2 correlation samples");
  const std::size_t m = n * static_cast<std::size_t>(std::max(1, options.pad_factor));
  std::vector<cplx> buf(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (options.window == Window::Hann) w = 0.5 * (1.0 + std::cos(kPi * static_cast<double>(i) / static_cast<double>(n)));
    buf[i] = w * c[i];
  }
  fft_positive_exponent(buf);

  SpectrumResult out;
  out.T = static_cast<double>(n) * dt;
  out.resolution = kTwoPi / out.T;
  out.omega_grid.resize(m);
  out.s_values.resize(m);
  const std::size_t half = (m + 1) / 2;  // indices >= half are negative frequencies
  const double dw = kTwoPi / (static_cast<double>(m) * dt);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t src = (k + half) % m;
    const double kk = src >= half ? static_cast<double>(src) - static_cast<double>(m) : static_cast<double>(src);
    out.omega_grid[k] = kk * dw;
    out.s_values[k] = dt * std::abs(buf[src]);
  }
  return out;
}

SpectrumResult spectrum(const Ensemble& records, double t0, double T, const SimParams& params,
                        const SpectrumOptions& options) {
  const double dt = sample_spacing(records);
  std::vector<cplx> c = two_time_correlation(records, t0);
  const auto n = static_cast<std::size_t>(std::llround(T / dt));
  if (n > c.size()) throw InvalidParameter("T exceeds the recorded lag range t_sim - t0");
  c.resize(n);
  SpectrumResult out = spectrum_of_correlation(c, dt, options);
  out.params = params;
  out.t0 = t0;
  return out;
}

double SpectrumResult::peak_in(double lo, double hi) const {
  double best = std::numeric_limits<double>::quiet_NaN(), best_s = -1.0;
  for (std::size_t k = 0; k < omega_grid.size(); ++k)
    if (omega_grid[k] >= lo && omega_grid[k] <= hi && s_values[k] > best_s) {
      best_s = s_values[k];
      best = omega_grid[k];
    }
  return best;
}

std::vector<double> g1_normalized(const Ensemble& records, double t0) {
  const auto c = two_time_correlation(records, t0);
  const double denom = c.front().real();  // <|J(t0)|^2>
  if (!(denom > std::numeric_limits<double>::epsilon())) throw NumericalError("<|J(t0)|^2> vanishes; g1 undefined");
  std::vector<double> g(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) g[k] = c[k].real() / denom;
  return g;
}

FitNonConvergence::FitNonConvergence(const std::string& what, FitResult b) : NumericalError(what), best(std::move(b)) {}

FitResult fit_damped_cosine(const std::vector<double>& g1, const std::vector<double>& times) {
  if (g1.size() != times.size()) throw InvalidParameter("g1 and times differ in length");
  if (g1.size() < 20) throw InsufficientSamples("damped-cosine fit needs at least 20 samples");
  const double dt = times[1] - times[0];

  DampedCosine functor(times, g1);
  Eigen::VectorXd p(3);
  p << guess_frequency(g1, dt), guess_decay(g1, times), 0.0;

  Eigen::LevenbergMarquardt<DampedCosine> lm(functor);
  lm.setMaxfev(2000);
  lm.setXtol(1e-15);
  lm.setFtol(1e-15);
  const auto status = lm.minimize(p);

  FitResult fit;
  fit.omega = p[0];
  fit.gamma = p[1];
  fit.phi0 = p[2];
  if (fit.omega < 0.0) {
    fit.omega = -fit.omega;
    fit.phi0 = -fit.phi0;
  }
  fit.phi0 = std::remainder(fit.phi0, kTwoPi);

  Eigen::VectorXd r(static_cast<Eigen::Index>(g1.size()));
  functor(p, r);
  const double rss = r.squaredNorm();
  fit.residual_norm = std::sqrt(rss);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(g1.size()), 3);
  Eigen::VectorXd q(3);
  q << fit.omega, fit.gamma, fit.phi0;
  functor.df(q, jac);
  const Eigen::Matrix3d jtj = jac.transpose() * jac;
  fit.covariance = rss / static_cast<double>(g1.size() - 3) * jtj.inverse();

  using namespace Eigen::LevenbergMarquardtSpace;
  fit.converged = status != ImproperInputParameters && status != TooManyFunctionEvaluation && std::isfinite(rss);
  if (!fit.converged) throw FitNonConvergence("damped-cosine fit did not converge", fit);
  return fit;
}

std::vector<double> unwrap_phase(const std::vector<double>& wrapped) {
  std::vector<double> out(wrapped.size());
  double offset = 0.0;
  for (std::size_t i = 0; i < wrapped.size(); ++i) {
    if (i > 0) {
      const double d = wrapped[i] + offset - out[i - 1];
      offset -= kTwoPi * std::round(d / kTwoPi);
    }
    out[i] = wrapped[i] + offset;
  }
  return out;
}

PhaseTraces phase_trace(const Ensemble& records, double t0, double t1) {
  if (records.empty()) throw InsufficientSamples("no trajectories");
  check_shape(records);
  if (t1 < t0) throw InvalidParameter("t1 < t0");
  const double dt = sample_spacing(records);
  const auto& times = records.front().times;
  const std::size_t i0 = sample_index(times, t0);
  const std::size_t i1 = sample_index(times, t1);
  if (i1 >= times.size()) throw InsufficientSamples("reference time beyond the recorded range");
  const std::size_t n_lag = times.size() - i1;

  PhaseTraces out;
  out.times.resize(n_lag);
  for (std::size_t k = 0; k < n_lag; ++k) out.times[k] = static_cast<double>(k) * dt;
  out.traces.reserve(records.size());
  std::vector<double> wrapped(n_lag);
  for (const auto& r : records) {
    const auto& j = r.j_complex;
    for (std::size_t k = 0; k < n_lag; ++k) {
      cplx acc = 0.0;
      for (std::size_t i = i0; i <= i1; ++i) acc += j[i + k] * std::conj(j[i]);
      wrapped[k] = std::arg(acc);
    }
    out.traces.push_back(unwrap_phase(wrapped));
  }
  return out;
}

std::vector<double> trajectory_frequencies(const PhaseTraces& traces) {
  std::vector<double> w;
  w.reserve(traces.traces.size());
  for (const auto& tr : traces.traces) w.push_back(-ols(traces.times, tr).slope);
  return w;
}

double jump_probability(const PhaseTraces& traces, double t_max, int M) {
  if (M < 2) throw InvalidParameter("jump_probability needs M >= 2");
  if (traces.traces.empty()) throw InsufficientSamples("no phase traces");
  if (traces.times.empty() || traces.times.back() < t_max - 1e-9) throw InvalidParameter("traces do not cover t_max");
  const double bin = t_max / M;
  std::vector<std::size_t> idx(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m <= M; ++m) idx[static_cast<std::size_t>(m)] = sample_index(traces.times, m * bin);

  long jumps = 0;
  for (const auto& tr : traces.traces) {
    double prev = 0.0;
    for (int m = 1; m <= M; ++m) {
      const double w = (tr[idx[static_cast<std::size_t>(m)]] - tr[idx[static_cast<std::size_t>(m - 1)]]) / bin;
      if (m > 1 && w * prev < 0.0) ++jumps;
      prev = w;
    }
  }
  return static_cast<double>(jumps) / (static_cast<double>(M - 1) * static_cast<double>(traces.traces.size()));
}

std::vector<double> phase_variance(const PhaseTraces& traces) {
  if (traces.traces.empty()) throw InsufficientSamples("no phase traces");
  std::vector<double> v(traces.times.size(), 0.0);
  for (const auto& tr : traces.traces)
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += tr[k] * tr[k];
  for (auto& x : v) x /= static_cast<double>(traces.traces.size());
  return v;
}

ScalingResult scaling_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw InsufficientSamples("scaling fit needs at least 3 points");
  auto sorted = points;
  std::sort(sorted.begin(), sorted.end());
  ScalingResult out;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto [n, g] = sorted[i];
    if (!(n > 0.0)) throw InvalidParameter("nonpositive N in scaling fit");
    if (!(g > 0.0)) throw InvalidParameter("nonpositive Gamma in scaling fit");
    if (i > 0 && n == sorted[i - 1].first) throw InvalidParameter("duplicate N in scaling fit");
    out.n_values.push_back(n);
    out.gamma_values.push_back(g);
    lx.push_back(std::log(n));
    ly.push_back(std::log(g));
  }
  const LinearFit f = ols(lx, ly);
  out.alpha = f.slope;
  out.intercept = f.intercept;
  out.stderr_alpha = f.stderr_slope;
  return out;
}

double superdiffusion_exponent(const PhaseTraces& traces, double t_lo, double t_hi) {
  const auto var = phase_variance(traces);
  if (t_hi <= 0.0) t_hi = 0.5 * traces.times.back();
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < var.size(); ++k) {
    const double t = traces.times[k];
    if (t >= t_lo && t <= t_hi && var[k] > 0.0) {
      lx.push_back(std::log(t));
      ly.push_back(std::log(var[k]));
    }
  }
  if (lx.size() < 3) throw InsufficientSamples("fewer than 3 samples in the superdiffusion fit window");
  return ols(lx, ly).slope;
}

double mean_intensity(const Ensemble& records, double t_from, int n_atoms) {
  double sum = 0.0;
  long count = 0;
  for (const auto& r : records)
    for (std::size_t i = sample_index(r.times, t_from); i < r.times.size(); ++i) {
      sum += std::norm(r.j_complex[i]);
      ++count;
    }
  if (count == 0) throw InsufficientSamples("no samples after t_from");
  const double n = static_cast<double>(n_atoms);
  return sum / static_cast<double>(count) / (n * n);
}

Ensemble select_by_frequency_sign(const Ensemble& records, const std::vector<double>& frequencies, int sign) {
  if (frequencies.size() != records.size()) throw InvalidParameter("one frequency per record expected");
  Ensemble out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if ((sign > 0 && frequencies[i] > 0.0) || (sign < 0 && frequencies[i] < 0.0)) out.push_back(records[i]);
  return out;
}

}  // namespace beamssr
