#pragma once

// One-mode problems with closed-form or cheaply computed solutions.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "kpds/integrators.hpp"

namespace kpds::testing {

/// v' = lambda v + g(t).
struct ForcedLinear {
  CVec L;
  std::function<cplx(double)> g;

  ForcedLinear(cplx lambda, std::function<cplx(double)> forcing) : L{lambda}, g(std::move(forcing)) {}
  std::span<const cplx> symbol() const { return L; }
  void nonlinear(std::span<const cplx>, double t, std::span<cplx> out) const { out[0] = g(t); }
};

/// v' = -v + sin t, v(0) = 1.
inline ForcedLinear damped_sine() { return {cplx(-1.0), [](double t) { return cplx(std::sin(t)); }}; }
inline cplx damped_sine_exact(double t) {
  return 1.5 * std::exp(-t) + 0.5 * (std::sin(t) - std::cos(t));
}

/// v' = -50 v + cos t, v(0) = 1.
inline ForcedLinear stiff_cosine() { return {cplx(-50.0), [](double t) { return cplx(std::cos(t)); }}; }
inline cplx stiff_cosine_exact(double t) {
  const double a = 50.0, d = a * a + 1.0;
  return (1.0 - a / d) * std::exp(-a * t) + (a * std::cos(t) + std::sin(t)) / d;
}

/// v' = i omega v + i (Re v)^2; the nonlinear part alone moves Im v at the
/// frozen rate (Re v)^2, so both halves have exact flows that do not commute.
struct RotorShear {
  CVec L;
  explicit RotorShear(double omega) : L{cplx(0.0, omega)} {}
  std::span<const cplx> symbol() const { return L; }
  void nonlinear(std::span<const cplx> v, double, std::span<cplx> out) const {
    const double a = v[0].real();
    out[0] = cplx(0.0, a * a);
  }
  void nonlinear_flow(std::span<cplx> v, double h) const {
    const double a = v[0].real();
    v[0] += cplx(0.0, a * a * h);
  }
};

/// Classical RK4 on v' = L v + N(v, t); the reduction oracle for L = 0.
template <class P>
void rk4_step(P& p, std::span<cplx> v, double t, double h) {
  const auto L = p.symbol();
  const std::size_t n = v.size();
  CVec k1(n), k2(n), k3(n), k4(n), u(n);
  auto f = [&](std::span<const cplx> x, double s, CVec& out) {
    p.nonlinear(x, s, out);
    for (std::size_t i = 0; i < n; ++i) out[i] += L[i] * x[i];
  };
  f(v, t, k1);
  for (std::size_t i = 0; i < n; ++i) u[i] = v[i] + 0.5 * h * k1[i];
  f(u, t + 0.5 * h, k2);
  for (std::size_t i = 0; i < n; ++i) u[i] = v[i] + 0.5 * h * k2[i];
  f(u, t + 0.5 * h, k3);
  for (std::size_t i = 0; i < n; ++i) u[i] = v[i] + h * k3[i];
  f(u, t + h, k4);
  for (std::size_t i = 0; i < n; ++i) v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

template <class P>
cplx rk4_solve(P& p, cplx v0, double t_max, std::size_t nt) {
  CVec v{v0};
  const double h = t_max / static_cast<double>(nt);
  for (std::size_t s = 0; s < nt; ++s) rk4_step(p, std::span<cplx>(v), s * h, h);
  return v[0];
}

/// Error |v(t_max) - exact| for each nt.
template <class P>
std::vector<std::pair<double, double>> scalar_errors(P& p, Scheme scheme, cplx v0, double t_max, cplx exact,
                                                     const std::vector<std::size_t>& nts, const StepperConfig& cfg = {}) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t nt : nts) {
    CVec v{v0};
    evolve(p, std::span<cplx>(v), scheme, nt, t_max, cfg);
    out.emplace_back(static_cast<double>(nt), std::abs(v[0] - exact));
  }
  return out;
}

/// Least-squares slope of -log(err) against log(nt).
inline double observed_order(const std::vector<std::pair<double, double>>& pts) {
  double mx = 0, my = 0;
  for (auto [n, e] : pts) {
    mx += std::log(n);
    my += std::log(e);
  }
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0, sxy = 0;
  for (auto [n, e] : pts) {
    sxx += (std::log(n) - mx) * (std::log(n) - mx);
    sxy += (std::log(n) - mx) * (std::log(e) - my);
  }
  return -sxy / sxx;
}

}  // namespace kpds::testing
