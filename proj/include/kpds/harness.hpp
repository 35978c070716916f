#pragma once

// Experiment presets, reference solutions and convergence sweeps.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kpds/diagnostics.hpp"
#include "kpds/exact_solutions.hpp"
#include "kpds/integrators.hpp"
#include "kpds/models.hpp"
#include "kpds/phi_engine.hpp"
#include "kpds/spectral_grid.hpp"

namespace kpds {

enum class ReferenceKind { exact, single, mean };

struct ReferencePolicy {
  ReferenceKind kind = ReferenceKind::exact;
  std::vector<Scheme> schemes;
  std::size_t nt = 0;
};

/// "exact", "single:<scheme>:<nt>" or "mean:<scheme>,<scheme>,...:<nt>".
inline std::string to_string(const ReferencePolicy& r) {
  if (r.kind == ReferenceKind::exact) return "exact";
  std::string s = r.kind == ReferenceKind::single ? "single:" : "mean:";
  for (std::size_t i = 0; i < r.schemes.size(); ++i) s += (i ? "," : "") + to_string(r.schemes[i]);
  return s + ":" + std::to_string(r.nt);
}

inline ReferencePolicy parse_reference(const std::string& text) {
  if (text == "exact") return {};
  const auto a = text.find(':'), b = text.rfind(':');
  if (a == std::string::npos || a == b) throw std::invalid_argument("bad reference policy '" + text + "'");
  ReferencePolicy r;
  const std::string kind = text.substr(0, a);
  if (kind == "single")
    r.kind = ReferenceKind::single;
  else if (kind == "mean")
    r.kind = ReferenceKind::mean;
  else
    throw std::invalid_argument("bad reference kind '" + kind + "'");
  std::stringstream list(text.substr(a + 1, b - a - 1));
  for (std::string item; std::getline(list, item, ',');) r.schemes.push_back(scheme_from_string(item));
  r.nt = std::stoul(text.substr(b + 1));
  if (r.schemes.empty() || r.nt == 0) throw std::invalid_argument("bad reference policy '" + text + "'");
  if (r.kind == ReferenceKind::single && r.schemes.size() != 1)
    throw std::invalid_argument("single reference takes exactly one scheme");
  return r;
}

enum class ExactSolution { none, zaitsev, theta };

/// Range of Delta_2 values admitted to the slope fit.
struct FitWindow {
  double min_delta = 0.0;
  double max_delta = std::numeric_limits<double>::infinity();
};

struct ExperimentPreset {
  std::string name;
  std::string summary;
  ModelSpec model;
  Grid2D grid{2, 2};
  double t_max = 1.0;
  std::vector<std::size_t> nt_list;
  ReferencePolicy reference;
  std::vector<Scheme> schemes;
  ExactSolution exact = ExactSolution::none;
  ZaitsevParams zaitsev;
  ThetaParams theta;
  double dcrk_tau = 1.0;
  FitWindow window;

  void validate() const {
    model.validate();
    if (!(t_max > 0.0)) throw std::invalid_argument(name + ": t_max must be positive");
    if (nt_list.empty()) throw std::invalid_argument(name + ": empty nt list");
    for (std::size_t i = 0; i < nt_list.size(); ++i) {
      if (nt_list[i] == 0) throw std::invalid_argument(name + ": nt must be positive");
      if (i > 0 && nt_list[i] <= nt_list[i - 1]) throw std::invalid_argument(name + ": nt list must be strictly increasing");
    }
    if (reference.kind == ReferenceKind::exact) {
      if (exact == ExactSolution::none) throw std::invalid_argument(name + ": exact reference needs an exact solution");
    } else if (reference.nt <= 2 * nt_list.back()) {
      throw std::invalid_argument(name + ": reference nt must exceed twice the largest nt");
    }
    if (schemes.empty()) throw std::invalid_argument(name + ": no schemes");
    auto check = [&](Scheme s) {
      if (is_splitting(s) && model.is_kp())
        throw UnsupportedScheme(name + ": " + to_string(s) + " is only available for DS II");
    };
    for (Scheme s : schemes) check(s);
    for (Scheme s : reference.schemes) check(s);
  }
};

inline const std::vector<Scheme>& kp_schemes() {
  static const std::vector<Scheme> s{Scheme::ifrk4, Scheme::dcrk, Scheme::etd_cm, Scheme::etd_krogstad, Scheme::etd_ho};
  return s;
}

/// Desk-scale presets by default; `paper_scale` switches to the large grids
/// and reference step counts (long runtimes).
inline std::vector<ExperimentPreset> preset_registry(bool paper_scale = false) {
  std::vector<ExperimentPreset> out;
  const auto kp = kp_schemes();
  {
    ExperimentPreset p;
    p.name = "zaitsev-kp1";
    p.summary = "KP I, Zaitsev wave (alpha=1, beta=0.5), crest starting at x = -2.5, exact reference";
    p.model = ModelSpec::kp1(1.0);
    p.grid = paper_scale ? Grid2D(2048, 512, 5, 5) : Grid2D(512, 128, 5, 5);
    p.t_max = 1.0;
    p.nt_list = {200, 400, 800, 1600};
    p.schemes = kp;
    p.exact = ExactSolution::zaitsev;
    p.zaitsev = ZaitsevParams{1.0, 0.5, -2.5};
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "theta-kp2";
    p.summary = "KP II, doubly periodic genus-2 solution, two x-periods by one y-period, exact reference";
    p.model = ModelSpec::kp2(1.0);
    p.theta = theta_reference_params();
    p.grid = Grid2D(256, 256, 2.0 / p.theta.mu[0], 1.0 / std::abs(p.theta.nu[0]));
    p.t_max = 1.0;
    p.nt_list = {100, 200, 400, 800};
    p.schemes = kp;
    p.schemes.push_back(Scheme::irk4);
    p.exact = ExactSolution::theta;
    p.window = {1e-6, 1e-2};
    out.push_back(p);
  }
  for (int lambda : {-1, 1}) {
    ExperimentPreset p;
    p.name = lambda < 0 ? "kp1-smalldisp" : "kp2-smalldisp";
    p.summary = std::string(lambda < 0 ? "KP I" : "KP II") +
                ", u0 = -d/dx sech^2(R), eps = 0.1, reference Hochbruck-Ostermann";
    p.model = lambda < 0 ? ModelSpec::kp1(0.1) : ModelSpec::kp2(0.1);
    p.grid = paper_scale ? Grid2D(2048, 512, 5, 5) : Grid2D(1024, 256, 5, 5);
    p.t_max = 0.4;
    p.nt_list = {28, 40, 56, 80, 113, 160, 226};
    p.reference = {ReferenceKind::single, {Scheme::etd_ho}, 5000};
    p.schemes = kp;
    p.window = {1e-4, 1.0};
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "ds2-defoc";
    p.summary = "defocusing DS II, u0 = exp(-x^2 - y^2), eps = 0.1, mean-of-three reference";
    p.model = ModelSpec::ds2(0.1, 1, 1.0);
    p.grid = paper_scale ? Grid2D(1024, 1024, 5, 5) : Grid2D(512, 512, 5, 5);
    p.t_max = 0.8;
    p.nt_list = {100, 200, 400, 800};
    p.reference = {ReferenceKind::mean, {Scheme::etd_cm, Scheme::dcrk, Scheme::ifrk4}, paper_scale ? 6000u : 4000u};
    p.schemes = kp;
    p.schemes.push_back(Scheme::strang2);
    p.schemes.push_back(Scheme::yoshida4);
    out.push_back(p);
  }
  {
    ExperimentPreset p;
    p.name = "ds2-foc";
    p.summary = "focusing DS II, u0 = exp(-x^2 - 0.1 y^2), eps = 0.1, mean-of-three reference";
    p.model = ModelSpec::ds2(0.1, -1, 0.1);
    p.grid = paper_scale ? Grid2D(4096, 2048, 5, 5) : Grid2D(1024, 512, 5, 5);
    p.t_max = paper_scale ? 0.6 : 0.3;
    p.nt_list = {100, 200, 400, 800};
    p.reference = {ReferenceKind::mean, {Scheme::etd_cm, Scheme::dcrk, Scheme::ifrk4}, paper_scale ? 6000u : 4000u};
    p.schemes = kp;
    p.schemes.push_back(Scheme::strang2);
    p.schemes.push_back(Scheme::yoshida4);
    out.push_back(p);
  }
  return out;
}

inline ExperimentPreset find_preset(const std::string& name, bool paper_scale = false) {
  for (auto& p : preset_registry(paper_scale))
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset '" + name + "'");
}


/// Command-line style overrides of preset fields; unset fields keep the preset's value.
struct PresetOverrides {
  std::optional<std::string> equation;  // kp1, kp2, ds2-foc, ds2-def
  std::optional<std::size_t> nx, ny;
  std::optional<double> lx, ly, epsilon, eta, t_max, dcrk_tau;
  std::vector<std::size_t> nt_list;
  std::optional<std::string> reference;
  std::optional<std::string> scheme;  // restricts the scheme list to one
};

inline std::string default_preset_for(const std::string& equation) {
  if (equation == "kp1") return "kp1-smalldisp";
  if (equation == "kp2") return "kp2-smalldisp";
  if (equation == "ds2-foc") return "ds2-foc";
  if (equation == "ds2-def") return "ds2-defoc";
  throw std::invalid_argument("unknown equation '" + equation + "'");
}

inline ExperimentPreset apply_overrides(ExperimentPreset p, const PresetOverrides& o) {
  if (o.equation) {
    const std::string& e = *o.equation;
    ModelSpec m;
    if (e == "kp1")
      m = ModelSpec::kp1(p.model.epsilon);
    else if (e == "kp2")
      m = ModelSpec::kp2(p.model.epsilon);
    else if (e == "ds2-foc" || e == "ds2-def")
      m = ModelSpec::ds2(p.model.epsilon, e == "ds2-foc" ? -1 : 1, p.model.is_kp() ? 1.0 : p.model.eta);
    else
      throw std::invalid_argument("unknown equation '" + e + "'");
    if (m.is_kp() != p.model.is_kp())
      throw std::invalid_argument(p.name + ": --equation " + e + " changes the model family of the preset");
    if (p.exact != ExactSolution::none && m.equation != p.model.equation)
      throw std::invalid_argument(p.name + ": the exact solution fixes the equation");
    p.model = m;
  }
  if (o.epsilon) {
    if (p.exact != ExactSolution::none && *o.epsilon != p.model.epsilon)
      throw std::invalid_argument(p.name + ": the exact solution fixes epsilon = 1");
    p.model.epsilon = *o.epsilon;
  }
  if (o.eta) {
    if (p.model.is_kp()) throw std::invalid_argument("--eta applies to DS II only");
    p.model.eta = *o.eta;
  }
  if (o.nx || o.ny || o.lx || o.ly)
    p.grid = Grid2D(o.nx.value_or(p.grid.nx()), o.ny.value_or(p.grid.ny()), o.lx.value_or(p.grid.lx()),
                    o.ly.value_or(p.grid.ly()));
  if (o.t_max) p.t_max = *o.t_max;
  if (o.dcrk_tau) p.dcrk_tau = *o.dcrk_tau;
  if (!o.nt_list.empty()) p.nt_list = o.nt_list;
  if (o.reference) p.reference = parse_reference(*o.reference);
  if (o.scheme) p.schemes = {scheme_from_string(*o.scheme)};
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// States

/// Calls f with the problem object of the model.
template <class F>
decltype(auto) with_problem(const ModelSpec& model, const Grid2D& grid, F&& f) {
  if (model.is_kp()) {
    KpProblem p(model, grid);
    return f(p);
  }
  DsProblem p(model, grid);
  return f(p);
}

inline SpectralField exact_state(const ExperimentPreset& p, double t) {
  SpectralField v(p.grid);
  switch (p.exact) {
    case ExactSolution::zaitsev: v = forward_transform(sample_zaitsev(p.grid, t, p.zaitsev), p.grid); break;
    case ExactSolution::theta: v = forward_transform(sample_theta(p.grid, t, p.theta), p.grid); break;
    case ExactSolution::none: throw std::invalid_argument(p.name + ": no exact solution");
  }
  project_constraint(v);
  return v;
}

inline SpectralField initial_state(const ExperimentPreset& p) {
  if (p.exact != ExactSolution::none) return exact_state(p, 0.0);
  if (p.model.is_kp()) return forward_transform(initial_data_kp(p.grid), p.grid);
  return forward_transform(initial_data_ds(p.grid, p.model.eta), p.grid);
}

// ---------------------------------------------------------------------------
// Legs

enum class LegStatus { ok, diverged, no_convergence, failed };

inline std::string to_string(LegStatus s) {
  switch (s) {
    case LegStatus::ok: return "ok";
    case LegStatus::diverged: return "diverged";
    case LegStatus::no_convergence: return "no-convergence";
    case LegStatus::failed: return "failed";
  }
  return "failed";
}

inline LegStatus leg_status_from_string(const std::string& s) {
  if (s == "ok") return LegStatus::ok;
  if (s == "diverged") return LegStatus::diverged;
  if (s == "no-convergence") return LegStatus::no_convergence;
  if (s == "failed") return LegStatus::failed;
  throw std::invalid_argument("unknown leg status '" + s + "'");
}

struct LegResult {
  SpectralField state{Grid2D(2, 2)};
  StepperStats stats;
  double cpu_seconds = 0.0;
  double mass_test = 0.0;
  LegStatus status = LegStatus::ok;
  std::string message;
};

struct RunOptions {
  Observer observer;
  std::size_t stride = 0;
  CoeffCache* cache = nullptr;
};

/// One simulation of the preset's model from v0 with nt steps to t_max.
inline LegResult run_leg(const ExperimentPreset& p, Scheme scheme, std::size_t nt, const SpectralField& v0,
                         const RunOptions& opts = {}) {
  LegResult r;
  r.state = v0;
  StepperConfig config;
  config.scheme_options.dcrk_tau = p.dcrk_tau;
  try {
    with_problem(p.model, p.grid, [&](auto& problem) {
      const double h = p.t_max / static_cast<double>(nt);
      std::shared_ptr<const SchemeCoeffs> coeffs;
      const CoeffCache::Key key{scheme, p.model.label(), p.grid.nx(), p.grid.ny(), p.grid.lx(), p.grid.ly(), h, p.dcrk_tau};
      if (opts.cache)
        coeffs = opts.cache->get(key, problem.symbol());
      else
        coeffs = std::make_shared<const SchemeCoeffs>(build_coeffs(scheme, problem.symbol(), h, config.scheme_options));
      const auto t0 = std::chrono::steady_clock::now();
      const EvolveResult e = evolve(problem, r.state.span(), scheme, nt, p.t_max, config, opts.observer, opts.stride, coeffs);
      r.cpu_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.stats = e.stats;
    });
    r.mass_test = mass(r.state) / mass(v0) - 1.0;
    // finite coefficients whose norm overflows
    if (!std::isfinite(r.mass_test)) {
      r.status = LegStatus::diverged;
      r.message = "mass overflow at t_max";
    }
  } catch (const NonFiniteState& e) {
    r.status = LegStatus::diverged;
    r.message = e.what();
  } catch (const NoConvergence& e) {
    r.status = LegStatus::no_convergence;
    r.message = e.what();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reference

struct Reference {
  SpectralField state{Grid2D(2, 2)};
  double spread = 0.0;  // max pairwise Delta_2 of averaged members
};

inline SpectralField mean_state(const std::vector<SpectralField>& members) {
  if (members.empty()) throw std::invalid_argument("mean_state: no members");
  SpectralField out(members.front().grid);
  for (const auto& m : members) {
    require_same_grid(m.grid, out.grid, "mean_state");
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] += m.coeffs[i];
  }
  const double w = 1.0 / static_cast<double>(members.size());
  for (cplx& z : out.coeffs) z *= w;
  return out;
}

inline Reference build_reference(const ExperimentPreset& p, const SpectralField& v0, CoeffCache* cache = nullptr) {
  p.validate();
  Reference ref;
  if (p.reference.kind == ReferenceKind::exact) {
    ref.state = exact_state(p, p.t_max);
    return ref;
  }
  std::vector<SpectralField> members;
  for (Scheme s : p.reference.schemes) {
    RunOptions o;
    o.cache = cache;
    LegResult r = run_leg(p, s, p.reference.nt, v0, o);
    if (r.status != LegStatus::ok)
      throw std::runtime_error(p.name + ": reference member " + to_string(s) + " failed: " + r.message);
    members.push_back(std::move(r.state));
  }
  ref.state = mean_state(members);
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j)
      ref.spread = std::max(ref.spread, error_norm(members[i], members[j], v0));
  return ref;
}

// ---------------------------------------------------------------------------
// Fitting

class InsufficientData : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FitResult {
  double a = 0.0;  // log10 D = -a log10 nt + b
  double b = 0.0;
  std::size_t points = 0;
};

/// Least squares in log-log over the points whose value lies in the window.
inline FitResult fit_slope(const std::vector<std::pair<double, double>>& points, const FitWindow& window = {}) {
  std::vector<std::pair<double, double>> xy;
  for (auto [nt, d] : points)
    if (std::isfinite(d) && d > 0.0 && nt > 0.0 && d >= window.min_delta && d <= window.max_delta)
      xy.emplace_back(std::log10(nt), std::log10(d));
  if (xy.size() < 3) throw InsufficientData("fit_slope: need at least 3 points in the window, have " + std::to_string(xy.size()));
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= xy.size();
  my /= xy.size();
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw InsufficientData("fit_slope: all points share one nt");
  const double slope = sxy / sxx;
  return {-slope, my - slope * mx, xy.size()};
}

// ---------------------------------------------------------------------------
// Report

struct ConvergenceRow {
  Scheme scheme{};
  std::size_t nt = 0;
  double delta2 = 0.0;
  double cpu_seconds = 0.0;
  double mass_test = 0.0;
  double irk_mean_iterations = 0.0;
  LegStatus status = LegStatus::ok;
  bool floor_limited = false;
};

struct SchemeSummary {
  Scheme scheme{};
  std::optional<FitResult> fit;
  std::optional<FitResult> mass_fit;  // |test(t_max)| against nt
  bool non_convergent = false;        // coarse legs diverge or fail to decrease
  std::string note;
};

/// Legs whose |test| is below this are at the roundoff floor and left out
/// of the mass-proxy fit.
inline constexpr double mass_fit_floor = 1e-12;

struct ConvergenceReport {
  std::string preset;
  double reference_spread = 0.0;
  std::vector<ConvergenceRow> rows;  // ordered by (scheme, nt)
  std::vector<SchemeSummary> summaries;

  const SchemeSummary* summary(Scheme s) const {
    for (const auto& x : summaries)
      if (x.scheme == s) return &x;
    return nullptr;
  }
};

inline SchemeSummary summarize_scheme(Scheme s, const std::vector<ConvergenceRow>& rows, const FitWindow& window) {
  SchemeSummary out;
  out.scheme = s;
  std::vector<const ConvergenceRow*> mine;
  for (const auto& r : rows)
    if (r.scheme == s) mine.push_back(&r);
  std::sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->nt < b->nt; });
  std::vector<std::pair<double, double>> pts, mpts;
  for (auto* r : mine) {
    if (r->status != LegStatus::ok || r->floor_limited) continue;
    pts.emplace_back(static_cast<double>(r->nt), r->delta2);
    if (std::abs(r->mass_test) >= mass_fit_floor) mpts.emplace_back(static_cast<double>(r->nt), std::abs(r->mass_test));
  }
  try {
    out.fit = fit_slope(pts, window);
  } catch (const InsufficientData& e) {
    out.note = e.what();
  }
  try {
    out.mass_fit = fit_slope(mpts);
  } catch (const InsufficientData&) {
  }
  // Coarse legs: the first half of the sweep, at least two.
  const std::size_t coarse = std::min(mine.size(), std::max<std::size_t>(2, (mine.size() + 1) / 2));
  for (std::size_t i = 0; i < coarse; ++i) {
    const auto* r = mine[i];
    if (r->status != LegStatus::ok || !(r->delta2 < 1.0)) out.non_convergent = true;
    if (i > 0 && mine[i - 1]->status == LegStatus::ok && r->status == LegStatus::ok && !(r->delta2 < mine[i - 1]->delta2))
      out.non_convergent = true;
  }
  return out;
}

inline std::vector<SchemeSummary> summarize(const std::vector<ConvergenceRow>& rows, const FitWindow& window) {
  std::vector<Scheme> seen;
  for (const auto& r : rows)
    if (std::find(seen.begin(), seen.end(), r.scheme) == seen.end()) seen.push_back(r.scheme);
  std::vector<SchemeSummary> out;
  for (Scheme s : seen) out.push_back(summarize_scheme(s, rows, window));
  return out;
}

inline void write_report_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "scheme,nt,delta2,cpu_seconds,mass_test,irk_mean_iterations,status,floor_limited\n";
  os.precision(17);
  for (const auto& r : rows)
    os << to_string(r.scheme) << ',' << r.nt << ',' << r.delta2 << ',' << r.cpu_seconds << ',' << r.mass_test << ','
       << r.irk_mean_iterations << ',' << to_string(r.status) << ',' << (r.floor_limited ? 1 : 0) << '\n';
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

inline std::vector<ConvergenceRow> parse_report_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("scheme,nt,delta2", 0) != 0)
    throw std::runtime_error("report CSV: missing header");
  std::vector<ConvergenceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
    if (f.size() != 8) throw std::runtime_error("report CSV: expected 8 fields in '" + line + "'");
    ConvergenceRow r;
    r.scheme = scheme_from_string(f[0]);
    r.nt = std::stoul(f[1]);
    r.delta2 = parse_double(f[2]);
    r.cpu_seconds = parse_double(f[3]);
    r.mass_test = parse_double(f[4]);
    r.irk_mean_iterations = parse_double(f[5]);
    r.status = leg_status_from_string(f[6]);
    r.floor_limited = f[7] == "1";
    rows.push_back(r);
  }
  return rows;
}

inline void write_summary_csv(std::ostream& os, const std::vector<SchemeSummary>& s) {
  os << "scheme,slope,intercept,fit_points,mass_slope,non_convergent\n";
  os.precision(17);
  for (const auto& x : s) {
    os << to_string(x.scheme) << ',';
    if (x.fit)
      os << x.fit->a << ',' << x.fit->b << ',' << x.fit->points;
    else
      os << "nan,nan,0";
    os << ',' << (x.mass_fit ? x.mass_fit->a : std::numeric_limits<double>::quiet_NaN()) << ','
       << (x.non_convergent ? 1 : 0) << '\n';
  }
}

inline std::size_t worker_count() {
  if (const char* env = std::getenv("KPDS_WORKERS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

struct ConvergenceOptions {
  std::size_t workers = 0;  // 0: KPDS_WORKERS or 1
  std::ostream* log = nullptr;
};

/// Builds the reference once, runs every (scheme, nt) leg, and fits slopes.
inline ConvergenceReport run_convergence(const ExperimentPreset& p, const ConvergenceOptions& opts = {}) {
  p.validate();
  CoeffCache cache;
  const SpectralField v0 = initial_state(p);
  std::mutex log_mutex;
  auto log = [&](const std::string& s) {
    if (!opts.log) return;
    std::lock_guard lock(log_mutex);
    *opts.log << s << std::endl;
  };
  log(p.name + ": building reference (" + to_string(p.reference) + ")");
  const Reference ref = build_reference(p, v0, &cache);

  struct Task {
    Scheme scheme;
    std::size_t nt;
  };
  std::vector<Task> tasks;
  for (Scheme s : p.schemes)
    for (std::size_t nt : p.nt_list) tasks.push_back({s, nt});
  std::vector<ConvergenceRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < tasks.size();) {
      const Task& t = tasks[i];
      RunOptions o;
      o.cache = &cache;
      const LegResult r = run_leg(p, t.scheme, t.nt, v0, o);
      ConvergenceRow& row = rows[i];
      row.scheme = t.scheme;
      row.nt = t.nt;
      row.status = r.status;
      row.cpu_seconds = r.cpu_seconds;
      row.irk_mean_iterations = r.stats.irk_mean_iterations();
      if (r.status == LegStatus::ok) {
        row.delta2 = error_norm(r.state, ref.state, v0);
        row.mass_test = r.mass_test;
        row.floor_limited = ref.spread > 0.0 && row.delta2 < 10.0 * ref.spread;
      } else {
        row.delta2 = std::numeric_limits<double>::quiet_NaN();
        row.mass_test = std::numeric_limits<double>::quiet_NaN();
      }
      std::ostringstream msg;
      msg.precision(4);
      msg << p.name << ": " << to_string(t.scheme) << " nt=" << t.nt << " delta2=" << row.delta2
          << " test=" << row.mass_test << " " << row.cpu_seconds << "s " << to_string(r.status);
      log(msg.str());
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers ? opts.workers : worker_count(), tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  ConvergenceReport report;
  report.preset = p.name;
  report.reference_spread = ref.spread;
  report.rows = std::move(rows);
  report.summaries = summarize(report.rows, p.window);
  return report;
}

}  // namespace kpds
