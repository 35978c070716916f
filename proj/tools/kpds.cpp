// kpds: command-line driver for single runs, convergence sweeps and self tests.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "kpds/kpds.hpp"

namespace fs = std::filesystem;
using namespace kpds;

namespace {

struct Options {
  std::string preset;
  bool paper_scale = false;
  std::string out_dir = ".";
  std::optional<std::size_t> nt;
  std::size_t snapshot_stride = 0;
  PresetOverrides overrides;
};

void add_preset_flags(CLI::App* app, Options& o) {
  app->add_option("--seed-preset", o.preset, "Preset to start from (see list-presets)");
  app->add_flag("--paper-scale", o.paper_scale, "Use the large grids and reference step counts (slow)");
  app->add_option("--equation", o.overrides.equation, "kp1, kp2, ds2-foc or ds2-def")
      ->check(CLI::IsMember({"kp1", "kp2", "ds2-foc", "ds2-def"}));
  app->add_option("--scheme", o.overrides.scheme, "ifrk4, etd-cm, etd-k, etd-ho, dcrk, irk4, strang2, yoshida4");
  app->add_option("--nx", o.overrides.nx, "Points in x (power of two)");
  app->add_option("--ny", o.overrides.ny, "Points in y (power of two)");
  app->add_option("--lx", o.overrides.lx, "Domain is [-pi lx, pi lx) in x");
  app->add_option("--ly", o.overrides.ly, "Domain is [-pi ly, pi ly) in y");
  app->add_option("--epsilon", o.overrides.epsilon, "Dispersion parameter");
  app->add_option("--eta", o.overrides.eta, "DS initial data anisotropy");
  app->add_option("--tmax", o.overrides.t_max, "Final time");
  app->add_option("--dcrk-tau", o.overrides.dcrk_tau, "DCRK stiffness threshold on |hL|");
  app->add_option("--out-dir", o.out_dir, "Directory for output files");
}

ExperimentPreset resolve(const Options& o) {
  std::string name = o.preset;
  if (name.empty()) name = o.overrides.equation ? default_preset_for(*o.overrides.equation) : "zaitsev-kp1";
  return apply_overrides(find_preset(name, o.paper_scale), o.overrides);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

void print_preset(const ExperimentPreset& p) {
  std::cout << p.name << "\n  " << p.summary << "\n  model " << p.model.label() << ", grid " << p.grid.nx() << "x"
            << p.grid.ny() << " on [-" << p.grid.lx() << "pi," << p.grid.lx() << "pi)x[-" << p.grid.ly() << "pi,"
            << p.grid.ly() << "pi), t_max " << p.t_max << "\n  nt";
  for (auto n : p.nt_list) std::cout << ' ' << n;
  std::cout << ", reference " << to_string(p.reference) << "\n  schemes";
  for (auto s : p.schemes) std::cout << ' ' << to_string(s);
  std::cout << '\n';
}

int cmd_list(bool paper_scale) {
  for (const auto& p : preset_registry(paper_scale)) print_preset(p);
  return 0;
}

int cmd_run(Options o) {
  const ExperimentPreset p = resolve(o);
  const Scheme scheme = o.overrides.scheme ? scheme_from_string(*o.overrides.scheme) : p.schemes.front();
  const std::size_t nt = o.nt.value_or(p.nt_list.back());
  ensure_dir(o.out_dir);
  const fs::path dir(o.out_dir);
  const bool real_field = p.model.is_kp();
  const SpectralField v0 = initial_state(p);
  const double h = p.t_max / static_cast<double>(nt);

  MassTrace trace;
  trace.record(0.0, mass(v0));
  std::size_t snapshots = 0;
  auto snap = [&](std::span<const cplx> v, double t) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%06zu.spf", snapshots++);
    write_spf1((dir / name).string(), make_snapshot(SpectralField(p.grid, CVec(v.begin(), v.end())), t, real_field));
  };
  if (o.snapshot_stride > 0) snap(v0.coeffs, 0.0);
  RunOptions ro;
  ro.stride = 1;
  ro.observer = [&](std::size_t step, double t, std::span<const cplx> v) {
    trace.record(t, parseval_norm2(v, p.grid));
    if (o.snapshot_stride > 0 && (step % o.snapshot_stride == 0 || step == nt)) snap(v, t);
  };
  const LegResult r = run_leg(p, scheme, nt, v0, ro);

  {
    auto os = open_out(dir / "mass.csv");
    trace.write_csv(os);
  }
  std::cout << std::setprecision(6) << "preset " << p.name << ", scheme " << to_string(scheme) << ", nt " << nt
            << ", h " << h << "\n";
  if (r.status != LegStatus::ok) {
    std::cerr << "error: " << to_string(r.status) << ": " << r.message << '\n';
    return 2;
  }
  const SpectrumProfile sp = spectrum_profile(r.state);
  {
    auto os = open_out(dir / "spectrum_kx.csv");
    SpectrumProfile::write_csv(os, sp.kx_shell, sp.kx_log10_max);
  }
  {
    auto os = open_out(dir / "spectrum_ky.csv");
    SpectrumProfile::write_csv(os, sp.ky_shell, sp.ky_log10_max);
  }
  std::cout << "stepping time " << r.cpu_seconds << " s\n"
            << "mass test at t_max " << r.mass_test << "\n"
            << "spectral tail log10 (x, y) " << sp.tail_x() << ", " << sp.tail_y() << "\n";
  if (p.model.is_kp()) {
    std::cout << "constraint max |v(0, ky)| " << check_constraint(r.state) << "\n"
              << "energy initial " << energy_kp(v0, p.model) << ", final " << energy_kp(r.state, p.model) << "\n";
  } else {
    std::cout << "energy initial " << energy_ds(v0, p.model) << ", final " << energy_ds(r.state, p.model) << "\n";
    if (p.model.rho < 0) {
      const SungResult s = sung_ratio(p.model);
      std::cout << "smallness ratio " << s.value << " vs " << sung_threshold()
                << (s.satisfied ? " (satisfied)" : " (not satisfied)") << "\n";
    }
  }
  if (p.exact != ExactSolution::none)
    std::cout << "delta2 against exact solution " << error_norm(r.state, exact_state(p, p.t_max), v0) << "\n";
  if (scheme == Scheme::irk4)
    std::cout << "irk4 iterations mean " << r.stats.irk_mean_iterations() << ", max " << r.stats.irk_max_iterations
              << "\n";
  std::cout << "wrote " << (dir / "mass.csv").string() << ", spectrum_kx.csv, spectrum_ky.csv";
  if (snapshots) std::cout << ", " << snapshots << " snapshots";
  std::cout << '\n';
  return 0;
}

int cmd_converge(Options o, bool quiet) {
  const ExperimentPreset p = resolve(o);
  ensure_dir(o.out_dir);
  const fs::path dir(o.out_dir);
  ConvergenceOptions co;
  co.log = quiet ? nullptr : &std::cerr;
  const ConvergenceReport rep = run_convergence(p, co);
  const fs::path csv = dir / (p.name + "_convergence.csv"), fits = dir / (p.name + "_fits.csv");
  {
    auto os = open_out(csv);
    write_report_csv(os, rep.rows);
  }
  {
    auto os = open_out(fits);
    write_summary_csv(os, rep.summaries);
  }
  std::cout << std::setprecision(4);
  if (rep.reference_spread > 0) std::cout << "reference spread " << rep.reference_spread << "\n";
  for (const auto& s : rep.summaries) {
    std::cout << std::left << std::setw(10) << to_string(s.scheme) << std::right;
    if (s.fit)
      std::cout << " slope " << s.fit->a << " (" << s.fit->points << " points)";
    else
      std::cout << " slope n/a";
    if (s.mass_fit) std::cout << ", mass slope " << s.mass_fit->a;
    if (s.non_convergent) std::cout << ", non-convergent on coarse steps";
    // how far |test| understates delta2, geometric mean over usable legs
    double log_ratio = 0.0;
    int legs = 0;
    for (const auto& r : rep.rows)
      if (r.scheme == s.scheme && r.status == LegStatus::ok && std::abs(r.mass_test) >= mass_fit_floor && r.delta2 > 0) {
        log_ratio += std::log10(r.delta2 / std::abs(r.mass_test));
        ++legs;
      }
    if (legs > 0) std::cout << ", delta2/|test| ~ 10^" << log_ratio / legs;
    std::cout << '\n';
  }
  std::cout << "wrote " << csv.string() << ", " << fits.string() << '\n';
  return 0;
}

int cmd_phi_selftest() {
  const PhiCheck c = phi_two_path_check();
  const double tol = 5e-15;
  std::cout << std::setprecision(3) << "phi two-path check: " << c.samples << " points, max deviation "
            << c.max_deviation << " (phi" << c.worst_index << " at z = " << c.worst_z.real() << (c.worst_z.imag() < 0 ? "" : "+")
            << c.worst_z.imag() << "i), tolerance " << tol << '\n';
  return c.max_deviation <= tol ? 0 : 1;
}

int cmd_exact_selftest(std::size_t n) {
  const OracleCheck c = exact_oracle_check(n);
  std::cout << std::setprecision(3) << "zaitsev residual " << c.zaitsev_residual << "\n"
            << "theta residual " << c.theta_residual << "\n"
            << "theta translation " << c.theta_shift << "\n";
  const bool ok = c.zaitsev_residual <= 1e-6 && c.theta_residual <= 1e-6 && c.theta_shift <= 5e-8;
  std::cout << (ok ? "ok" : "FAILED") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral time stepping for KP and Davey-Stewartson II equations"};
  app.set_config("--config", "", "TOML or INI file with flag values");
  app.require_subcommand(1);

  bool list_paper = false;
  auto* list = app.add_subcommand("list-presets", "Show the experiment presets");
  list->add_flag("--paper-scale", list_paper, "Show the paper-scale variants");

  Options run_opts;
  auto* run = app.add_subcommand("run", "One simulation; writes mass trace, spectrum and snapshots");
  add_preset_flags(run, run_opts);
  run->add_option("--nt", run_opts.nt, "Number of time steps");
  run->add_option("--snapshot-stride", run_opts.snapshot_stride, "Write a snapshot every k steps (0: none)");

  Options conv_opts;
  bool quiet = false;
  auto* conv = app.add_subcommand("converge", "Convergence sweep of a preset; writes report CSVs");
  add_preset_flags(conv, conv_opts);
  conv->add_option("--nt-list", conv_opts.overrides.nt_list, "Step counts, comma separated")->delimiter(',');
  conv->add_option("--reference", conv_opts.overrides.reference,
                   "exact, single:<scheme>:<nt> or mean:<scheme>,...:<nt>");
  conv->add_flag("--quiet", quiet, "No per-leg progress on stderr");

  auto* phi = app.add_subcommand("phi-selftest", "Cross-check phi functions against contour integrals");
  std::size_t oracle_n = 256;
  auto* exact = app.add_subcommand("exact-selftest", "Residuals of the exact KP solutions");
  exact->add_option("--n", oracle_n, "Grid size per direction")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) return cmd_list(list_paper);
    if (*run) return cmd_run(run_opts);
    if (*conv) return cmd_converge(conv_opts, quiet);
    if (*phi) return cmd_phi_selftest();
    if (*exact) return cmd_exact_selftest(oracle_n);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
