// beamssr: command-line driver.
//
//   beamssr simulate      --n-gamma-tau 30 --k-vz-tau 5.0265 --n-atoms 800 --n-traj 500 --t-sim 2000
//   beamssr phase-diagram --k-vz-grid 0:0.15707963:12.566371
//   beamssr meanfield     --n-gamma-tau 30 --k-vz-grid 0:0.1:9.5
//   beamssr spectrum      --input out/simulate/<hash>/records.bin
//   beamssr scaling       --n-list 50,100,200,400,800 --k-vz-tau 1.5708
//   beamssr linewidth     --n-gamma-tau 30 --k-vz-grid 0.1:0.1:3.1
//   beamssr jumps         --input out/simulate/<hash>/records.bin
//
// Every command writes into <out>/<command>/<hash of resolved parameters>/
// together with manifest.json.  Exit codes: 0 ok, 1 numerical or I/O
// failure, 2 usage or invalid parameters.

#include "beamssr/analysis.hpp"
#include "beamssr/dynamics.hpp"
#include "beamssr/io.hpp"
#include "beamssr/meanfield.hpp"
#include "beamssr/stability.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace beamssr;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Parameter flags shared by every command: one flag per config key
// (underscores become dashes), plus --config.  Flags override the file.
struct ParamFlags {
  std::string config;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "flat key = value parameter file")->check(CLI::ExistingFile);
    for (const char* key : kSimParamKeys) {
      std::string flag = std::string("--") + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      cmd->add_option(flag, values[key], std::string("parameter ") + key);
    }
  }

  // Resolved parameters and the set of keys that were given explicitly.
  SimParams resolve(std::set<std::string>* given = nullptr) const {
    SimParams p;
    auto apply = [&](const std::string& k, const std::string& v) {
      p.set(k, v);
      if (given) given->insert(k);
    };
    if (!config.empty())
      for (const auto& [k, v] : read_config_file(config)) apply(k, v);
    for (const auto& [k, v] : values)
      if (!v.empty()) apply(k, v);
    return p;
  }
};

void require(const std::set<std::string>& given, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (!given.count(k)) throw UsageError(std::string("missing required parameter ") + k);
}

// "lo:step:hi" (inclusive) or a comma-separated list.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw UsageError("bad number '" + s + "' in grid '" + text + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("grid must be lo:step:hi, got '" + text + "'");
    const double lo = number(parts[0]), step = number(parts[1]), hi = number(parts[2]);
    if (!(step > 0.0) || hi < lo) throw UsageError("empty grid '" + text + "'");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');)
      if (!part.empty()) out.push_back(number(part));
  }
  if (out.empty()) throw UsageError("empty grid");
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Output directory and manifest bookkeeping for one command invocation.
class Run {
 public:
  Run(std::string command, std::string out_root, std::vector<std::pair<std::string, std::string>> params)
      : command_(std::move(command)), params_(std::move(params)), start_(std::chrono::steady_clock::now()) {
    std::string canon = command_;
    for (const auto& [k, v] : params_) canon += '\n' + k + '=' + v;
    dir_ = fs::path(out_root) / command_ / sha256_hex(canon).substr(0, 16);
    fs::create_directories(dir_);
  }
  fs::path file(const std::string& name) {
    outputs_.emplace_back(name);
    return dir_ / name;
  }
  void finish() {
    RunManifest m;
    m.command = command_;
    m.params = params_;
    m.tool_version = kToolVersion;
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m.outputs = outputs_;
    write_manifest(dir_, m);
    std::cout << dir_.string() << '\n';
  }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> params_;
  std::chrono::steady_clock::time_point start_;
  fs::path dir_;
  std::vector<fs::path> outputs_;
};

std::vector<std::pair<std::string, std::string>> with(std::vector<std::pair<std::string, std::string>> base,
                                                      std::vector<std::pair<std::string, std::string>> extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady-state superradiance of an atomic beam crossing a cavity mode"};
  app.require_subcommand(1);
  std::string out_root = "out";
  int workers = 0;
  app.add_option("--out", out_root, "output root directory");
  app.add_option("--workers", workers, "worker threads (default: BEAMSSR_WORKERS or all cores)")->check(CLI::NonNegativeNumber);

  std::function<void()> action;

  // simulate ---------------------------------------------------------------
  ParamFlags sim_flags;
  std::string sim_format = "binary";
  auto* sim = app.add_subcommand("simulate", "run a trajectory ensemble and store J(t)");
  sim_flags.attach(sim);
  sim->add_option("--format", sim_format, "record format")->check(CLI::IsMember({"binary", "ndjson"}));
  sim->callback([&] {
    action = [&] {
      std::set<std::string> given;
      const SimParams p = sim_flags.resolve(&given);
      require(given, {"n_gamma_tau", "k_vz_tau"});
      p.validate();
      Run run("simulate", out_root, with(p.to_pairs(), {{"format", sim_format}}));
      const auto records = run_ensemble(p, workers);
      const std::string name = sim_format == "binary" ? "records.bin" : "records.ndjson";
      if (sim_format == "binary") write_records_binary(run.file(name), p, records);
      else write_records_ndjson(run.file(name), p, records);
      run.finish();
    };
  });

  // phase-diagram ----------------------------------------------------------
  std::string pd_grid = "0:0.15707963267948966:12.566370614359172";
  double pd_g_max = 40.0;
  auto* pd = app.add_subcommand("phase-diagram", "superradiance boundary and the regular/bistable threshold line");
  pd->add_option("--k-vz-grid", pd_grid, "k_vz_tau grid, lo:step:hi or a comma list");
  pd->add_option("--n-gamma-tau-max", pd_g_max, "upper end of the threshold line");
  pd->callback([&] {
    action = [&] {
      const auto grid = parse_grid(pd_grid);
      Run run("phase-diagram", out_root, {{"k_vz_grid", pd_grid}, {"n_gamma_tau_max", fmt(pd_g_max)}});
      CsvTable boundary({"k_vz_tau", "n_gamma_tau_critical", "real_axis_boundary", "re_nu0_residual"});
      boundary.add_provenance("k_vz_grid", pd_grid);
      for (double a : grid) {
        const auto pt = sr_boundary_point(a);
        boundary.add_row(std::vector<double>{a, pt.n_gamma_tau_critical, real_axis_boundary(a), pt.re_nu0_residual});
      }
      boundary.write(run.file("boundary.csv"));

      // regular/bistable line: C0 changes sign at k_vz_tau = pi for every
      // superradiant coupling above the tri-critical point
      CsvTable line({"k_vz_tau", "n_gamma_tau", "C0_below", "C0_at", "C0_above"});
      const double g_tri = sr_boundary(kPi);
      line.add_provenance("tricritical_n_gamma_tau", fmt(g_tri));
      for (int i = 1; i <= 20; ++i) {
        const double g = g_tri + (pd_g_max - g_tri) * i / 20.0;
        auto c0 = [&](double a) { return compute_C0(g, a, solve_j_parallel_ssr(g, a)); };
        line.add_row(std::vector<double>{kPi, g, c0(0.99 * kPi), c0(kPi), c0(1.01 * kPi)});
      }
      line.write(run.file("threshold_line.csv"));
      run.finish();
    };
  });

  // meanfield --------------------------------------------------------------
  double mf_g = 30.0;
  std::string mf_grid = "0:0.1:9.5";
  int mf_nz = 256;
  auto* mf = app.add_subcommand("meanfield", "stationary mean-field branches over k_vz_tau");
  mf->add_option("--n-gamma-tau", mf_g, "N Gamma_c tau")->check(CLI::PositiveNumber);
  mf->add_option("--k-vz-grid", mf_grid, "k_vz_tau grid, lo:step:hi or a comma list");
  mf->add_option("--n-z0", mf_nz, "entry-phase quadrature points")->check(CLI::PositiveNumber);
  mf->callback([&] {
    action = [&] {
      const auto grid = parse_grid(mf_grid);
      Run run("meanfield", out_root, {{"n_gamma_tau", fmt(mf_g)}, {"k_vz_grid", mf_grid}, {"n_z0", std::to_string(mf_nz)}});
      MeanFieldOptions opt;
      opt.n_z0 = mf_nz;
      CsvTable t({"k_vz_tau", "omega", "j_norm", "j_norm_squared", "residual", "converged", "message"});
      t.add_provenance("n_gamma_tau", fmt(mf_g));
      for (const auto& p : frequency_branch_diagram(mf_g, grid, opt))
        t.add_row(std::vector<std::string>{fmt(p.k_vz_tau), fmt(p.omega), fmt(p.j_norm), fmt(p.j_norm * p.j_norm),
                                           fmt(p.residual), p.converged ? "1" : "0", '"' + p.message + '"'});
      t.write(run.file("branches.csv"));
      run.finish();
    };
  });

  // spectrum ---------------------------------------------------------------
  std::string sp_input, sp_window = "rectangular";
  double sp_t0 = -1.0, sp_T = -1.0, sp_fit = 80.0;
  int sp_pad = 1;
  auto* sp = app.add_subcommand("spectrum", "S(omega), g1(t) and its damped-cosine fit from a record file");
  sp->add_option("--input", sp_input, "record file from simulate")->required()->check(CLI::ExistingFile);
  sp->add_option("--t0", sp_t0, "reference time (default: the record's t0)");
  sp->add_option("--T", sp_T, "correlation length (default: t_sim - t0)");
  sp->add_option("--window", sp_window, "window")->check(CLI::IsMember({"rectangular", "hann"}));
  sp->add_option("--pad", sp_pad, "zero-padding factor")->check(CLI::PositiveNumber);
  sp->add_option("--fit-window", sp_fit, "largest lag used in the g1 fit");
  sp->callback([&] {
    action = [&] {
      const RecordFile rf = read_records(sp_input);
      const double t0 = sp_t0 >= 0.0 ? sp_t0 : rf.params.t0;
      const double T = sp_T > 0.0 ? sp_T : rf.records.front().times.back() - t0;
      Run run("spectrum", out_root,
              with(rf.params.to_pairs(), {{"input_sha256", sha256_file(sp_input)}, {"t0_ref", fmt(t0)}, {"T", fmt(T)},
                                          {"window", sp_window}, {"pad", std::to_string(sp_pad)},
                                          {"fit_window", fmt(sp_fit)}}));
      SpectrumOptions opt;
      opt.window = sp_window == "hann" ? Window::Hann : Window::Rectangular;
      opt.pad_factor = sp_pad;
      const auto s = spectrum(rf.records, t0, T, rf.params, opt);
      CsvTable st({"omega", "S"});
      st.add_provenance(rf.params);
      st.add_provenance("t0_ref", fmt(t0));
      st.add_provenance("T", fmt(T));
      for (std::size_t k = 0; k < s.omega_grid.size(); ++k) st.add_row(std::vector<double>{s.omega_grid[k], s.s_values[k]});
      st.write(run.file("spectrum.csv"));

      const auto g = g1_normalized(rf.records, t0);
      const auto t = lag_times(rf.records, g.size());
      CsvTable gt({"t", "g1"});
      gt.add_provenance(rf.params);
      for (std::size_t k = 0; k < g.size(); ++k) gt.add_row(std::vector<double>{t[k], g[k]});
      gt.write(run.file("g1.csv"));

      std::size_t n = 0;
      while (n < t.size() && t[n] <= sp_fit + 1e-9) ++n;
      FitResult f;
      std::string status = "converged";
      try {
        f = fit_damped_cosine({g.begin(), g.begin() + n}, {t.begin(), t.begin() + n});
      } catch (const FitNonConvergence& e) {
        f = e.best;
        status = "not_converged";
      }
      CsvTable ft({"omega", "gamma", "phi0", "stderr_omega", "stderr_gamma", "n_gamma_tau_linewidth", "status"});
      ft.add_provenance(rf.params);
      ft.add_row(std::vector<std::string>{fmt(f.omega), fmt(f.gamma), fmt(f.phi0), fmt(f.stderr_omega()),
                                          fmt(f.stderr_gamma()), fmt(f.gamma * rf.params.n_atoms), status});
      ft.write(run.file("fit.csv"));
      run.finish();
    };
  });

  // scaling ----------------------------------------------------------------
  ParamFlags sc_flags;
  std::string sc_list = "50,100,200,400,800";
  double sc_budget = 4.8e5, sc_fit = 80.0;
  auto* sc = app.add_subcommand("scaling", "linewidth against atom number, Gamma tau ~ N^alpha");
  sc_flags.attach(sc);
  sc->add_option("--n-list", sc_list, "atom numbers");
  sc->add_option("--budget", sc_budget, "trajectories per point = budget / N")->check(CLI::PositiveNumber);
  sc->add_option("--fit-window", sc_fit, "largest lag used in the g1 fit");
  sc->callback([&] {
    action = [&] {
      const SimParams base = sc_flags.resolve();
      std::vector<int> ns;
      for (double v : parse_grid(sc_list)) ns.push_back(static_cast<int>(v));
      Run run("scaling", out_root,
              with(base.to_pairs(), {{"n_list", sc_list}, {"budget", fmt(sc_budget)}, {"fit_window", fmt(sc_fit)}}));
      CsvTable t({"n_atoms", "n_traj", "omega", "gamma_tau", "stderr_gamma", "converged"});
      t.add_provenance(base);
      std::vector<std::pair<double, double>> pts;
      for (int n : ns) {
        SimParams p = base;
        p.n_atoms = n;
        p.n_traj = std::max(2, static_cast<int>(sc_budget / n));
        p.validate();
        const auto records = run_ensemble(p, workers);
        const auto g = g1_normalized(records, p.t0);
        const auto lt = lag_times(records, g.size());
        std::size_t m = 0;
        while (m < lt.size() && lt[m] <= sc_fit + 1e-9) ++m;
        FitResult f;
        try {
          f = fit_damped_cosine({g.begin(), g.begin() + m}, {lt.begin(), lt.begin() + m});
        } catch (const FitNonConvergence& e) {
          f = e.best;
        }
        t.add_row(std::vector<double>{double(n), double(p.n_traj), f.omega, f.gamma, f.stderr_gamma(),
                                      f.converged ? 1.0 : 0.0});
        if (f.gamma > 0.0) pts.emplace_back(n, f.gamma);
      }
      t.write(run.file("linewidths.csv"));
      const auto s = scaling_fit(pts);
      CsvTable a({"alpha", "intercept", "stderr_alpha"});
      a.add_provenance(base);
      a.add_row(std::vector<double>{s.alpha, s.intercept, s.stderr_alpha});
      a.write(run.file("alpha.csv"));
      run.finish();
    };
  });

  // linewidth --------------------------------------------------------------
  double lw_g = 30.0;
  std::string lw_grid = "0.1:0.1:3.1";
  auto* lw = app.add_subcommand("linewidth", "phase-diffusion linewidth of the regular phase");
  lw->add_option("--n-gamma-tau", lw_g, "N Gamma_c tau")->check(CLI::PositiveNumber);
  lw->add_option("--k-vz-grid", lw_grid, "k_vz_tau grid, lo:step:hi or a comma list");
  lw->callback([&] {
    action = [&] {
      const auto grid = parse_grid(lw_grid);
      Run run("linewidth", out_root, {{"n_gamma_tau", fmt(lw_g)}, {"k_vz_grid", lw_grid}});
      CsvTable t({"k_vz_tau", "j_parallel_norm", "C0", "n_gamma_tau_linewidth", "status"});
      t.add_provenance("n_gamma_tau", fmt(lw_g));
      for (double a : grid) {
        const double y = solve_j_parallel_ssr(lw_g, a);
        std::string status = "ok", value = "nan";
        try {
          // the phase-diffusion result only describes the regular phase
          if (std::abs(a) > kPi) status = "bistable_phase";
          else value = fmt(linewidth_phase_diffusion(lw_g, a));
        } catch (const ThresholdDivergence&) {
          status = "diverges";
        } catch (const DegenerateRegion&) {
          status = "not_superradiant";
        }
        const std::string c0 = y > 0.0 ? fmt(compute_C0(lw_g, a, y)) : "nan";
        t.add_row(std::vector<std::string>{fmt(a), fmt(y), c0, value, status});
      }
      t.write(run.file("linewidth.csv"));
      run.finish();
    };
  });

  // jumps ------------------------------------------------------------------
  std::string jp_input;
  double jp_t0 = 10.0, jp_tmax = 90.0;
  int jp_bins = 20;
  auto* jp = app.add_subcommand("jumps", "mode-hop probability and per-trajectory frequencies");
  jp->add_option("--input", jp_input, "record file from simulate")->required()->check(CLI::ExistingFile);
  jp->add_option("--t0", jp_t0, "reference time");
  jp->add_option("--t-max", jp_tmax, "analysed lag range");
  jp->add_option("--bins", jp_bins, "number of frequency bins M")->check(CLI::Range(2, 100000));
  jp->callback([&] {
    action = [&] {
      const RecordFile rf = read_records(jp_input);
      Run run("jumps", out_root,
              with(rf.params.to_pairs(), {{"input_sha256", sha256_file(jp_input)}, {"t0_ref", fmt(jp_t0)},
                                          {"t_max", fmt(jp_tmax)}, {"bins", std::to_string(jp_bins)}}));
      const auto tr = phase_trace(rf.records, jp_t0, jp_t0);
      const double p = jump_probability(tr, jp_tmax, jp_bins);
      const auto w = trajectory_frequencies(tr);
      CsvTable s({"p_jump", "positive_fraction", "superdiffusion_beta"});
      s.add_provenance(rf.params);
      const double pos = static_cast<double>(std::count_if(w.begin(), w.end(), [](double x) { return x > 0.0; }));
      s.add_row(std::vector<double>{p, pos / static_cast<double>(w.size()), superdiffusion_exponent(tr)});
      s.write(run.file("jumps.csv"));
      CsvTable f({"trajectory", "seed", "omega"});
      f.add_provenance(rf.params);
      for (std::size_t k = 0; k < w.size(); ++k)
        f.add_row(std::vector<std::string>{std::to_string(k), std::to_string(rf.records[k].trajectory_seed), fmt(w[k])});
      f.write(run.file("frequencies.csv"));
      const auto var = phase_variance(tr);
      CsvTable v({"t", "phase_variance"});
      v.add_provenance(rf.params);
      for (std::size_t k = 0; k < var.size(); ++k) v.add_row(std::vector<double>{tr.times[k], var[k]});
      v.write(run.file("phase_variance.csv"));
      run.finish();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (workers == 0) workers = default_worker_count();
    action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidParameter& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
