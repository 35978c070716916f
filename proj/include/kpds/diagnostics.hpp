#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "kpds/models.hpp"
#include "kpds/spectral_grid.hpp"

namespace kpds {

/// Sum |v_k|^2 scaled to the integral of |u|^2 over the torus.
inline double parseval_norm2(std::span<const cplx> v, const Grid2D& grid) {
  double s = 0.0;
  for (const cplx& z : v) s += std::norm(z);
  return grid.cell_area() / static_cast<double>(grid.size()) * s;
}

/// L2 mass: integral of |u|^2, through Parseval.
inline double mass(const SpectralField& v) { return parseval_norm2(v.coeffs, v.grid); }

/// Delta_2 = ||u_num - u_ref||_2 / ||u_0||_2.
inline double error_norm(std::span<const cplx> num, std::span<const cplx> ref, std::span<const cplx> v0,
                         const Grid2D& grid) {
  if (num.size() != grid.size() || ref.size() != grid.size() || v0.size() != grid.size())
    throw DimensionMismatch("error_norm: size does not match grid");
  double d = 0.0, n0 = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    d += std::norm(num[i] - ref[i]);
    n0 += std::norm(v0[i]);
  }
  if (n0 == 0.0) throw std::invalid_argument("error_norm: initial data has zero norm");
  return std::sqrt(d / n0);
}

inline double error_norm(const SpectralField& num, const SpectralField& ref, const SpectralField& v0) {
  require_same_grid(num.grid, ref.grid, "error_norm");
  require_same_grid(num.grid, v0.grid, "error_norm");
  return error_norm(num.coeffs, ref.coeffs, v0.coeffs, num.grid);
}

// ---------------------------------------------------------------------------
// Energies

/// (1/2) int (u_x)^2 - lambda (d_x^-1 u_y)^2 - 2 eps^2 u^3.
inline double energy_kp(const SpectralField& v, const ModelSpec& model) {
  const Grid2D& g = v.grid;
  const MultiplierTable dx = multiplier_dx(g), dy = multiplier_dy(g), inv = multiplier_inv_dx(g, model.lambda);
  SpectralField ux(g), w(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ux.coeffs[i] = dx.values[i] * v.coeffs[i];
    w.coeffs[i] = inv.values[i] * dy.values[i] * v.coeffs[i];
  }
  const RealLattice u = real_part(inverse_transform(v));
  const RealLattice a = real_part(inverse_transform(ux));
  const RealLattice b = real_part(inverse_transform(w));
  RealLattice f(g);
  const double e2 = model.epsilon * model.epsilon;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double ui = u.values[i];
    f.values[i] = a.values[i] * a.values[i] - model.lambda * b.values[i] * b.values[i] - 2.0 * e2 * ui * ui * ui;
  }
  return 0.5 * quadrature(f);
}

/// (1/2) int eps^2 |u_x|^2 - eps^2 |u_y|^2 - rho (|u|^4 - (Phi^2 + (d_x^-1 Phi_y)^2) / 2).
inline double energy_ds(const SpectralField& v, const ModelSpec& model) {
  const Grid2D& g = v.grid;
  const MultiplierTable dx = multiplier_dx(g), dy = multiplier_dy(g), inv = multiplier_inv_dx(g, 1);
  SpectralField ux(g), uy(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ux.coeffs[i] = dx.values[i] * v.coeffs[i];
    uy.coeffs[i] = dy.values[i] * v.coeffs[i];
  }
  const RealLattice phi = mean_field(v);
  SpectralField pv = forward_transform(phi, g);
  for (std::size_t i = 0; i < g.size(); ++i) pv.coeffs[i] *= inv.values[i] * dy.values[i];
  const RealLattice psi = real_part(inverse_transform(pv));
  const ComplexLattice u = inverse_transform(v), a = inverse_transform(ux), b = inverse_transform(uy);
  RealLattice f(g);
  const double e2 = model.epsilon * model.epsilon;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double m = std::norm(u.values[i]);
    const double p = phi.values[i], q = psi.values[i];
    f.values[i] = e2 * std::norm(a.values[i]) - e2 * std::norm(b.values[i]) - model.rho * (m * m - 0.5 * (p * p + q * q));
  }
  return 0.5 * quadrature(f);
}

// ---------------------------------------------------------------------------
// Mass trace

/// test = M(t)/M(0) - 1 sampled along a run.
class MassTrace {
 public:
  void record(double t, double m) {
    if (times_.empty()) {
      if (!(m > 0.0)) throw std::invalid_argument("MassTrace: initial mass must be positive");
      m0_ = m;
      times_.push_back(t);
      test_.push_back(0.0);
      return;
    }
    times_.push_back(t);
    test_.push_back(m / m0_ - 1.0);
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& test_values() const { return test_; }
  bool empty() const { return times_.empty(); }
  double final_test() const { return test_.empty() ? 0.0 : test_.back(); }

  void write_csv(std::ostream& os) const {
    os << "t,test\n";
    os.precision(17);
    for (std::size_t i = 0; i < times_.size(); ++i) os << times_[i] << ',' << test_[i] << '\n';
  }

 private:
  double m0_ = 0.0;
  std::vector<double> times_, test_;
};

// ---------------------------------------------------------------------------
// Spectral resolution

/// log10 of the largest |coefficient| on each |kx| and |ky| shell, relative
/// to the largest coefficient overall.
struct SpectrumProfile {
  std::vector<double> kx_shell, ky_shell;          // wavenumber |m|/l
  std::vector<double> kx_log10_max, ky_log10_max;  // relative, floored at -300

  /// Largest value over the outermost two shells in each direction.
  double tail_x() const { return tail(kx_log10_max); }
  double tail_y() const { return tail(ky_log10_max); }
  bool resolved(double floor) const {
    const double f = std::log10(floor);
    return tail_x() <= f && tail_y() <= f;
  }

  static void write_csv(std::ostream& os, const std::vector<double>& k, const std::vector<double>& val) {
    os << "shell_k,log10_max\n";
    os.precision(17);
    for (std::size_t i = 0; i < k.size(); ++i) os << k[i] << ',' << val[i] << '\n';
  }

 private:
  static double tail(const std::vector<double>& s) {
    if (s.size() < 2) return s.empty() ? -300.0 : s.back();
    return std::max(s[s.size() - 1], s[s.size() - 2]);
  }
};

inline SpectrumProfile spectrum_profile(const SpectralField& v) {
  const Grid2D& g = v.grid;
  const std::size_t sx = g.nx() / 2 + 1, sy = g.ny() / 2 + 1;
  std::vector<double> mx(sx, 0.0), my(sy, 0.0);
  double top = 0.0;
  for (std::size_t ix = 0; ix < g.nx(); ++ix)
    for (std::size_t iy = 0; iy < g.ny(); ++iy) {
      const double a = std::abs(v(ix, iy));
      const auto px = static_cast<std::size_t>(std::abs(g.mode_x(ix)));
      const auto py = static_cast<std::size_t>(std::abs(g.mode_y(iy)));
      mx[px] = std::max(mx[px], a);
      my[py] = std::max(my[py], a);
      top = std::max(top, a);
    }
  auto rel = [top](double a) { return top == 0.0 || a == 0.0 ? -300.0 : std::max(-300.0, std::log10(a / top)); };
  SpectrumProfile p;
  for (std::size_t m = 0; m < sx; ++m) {
    p.kx_shell.push_back(static_cast<double>(m) / g.lx());
    p.kx_log10_max.push_back(rel(mx[m]));
  }
  for (std::size_t m = 0; m < sy; ++m) {
    p.ky_shell.push_back(static_cast<double>(m) / g.ly());
    p.ky_log10_max.push_back(rel(my[m]));
  }
  return p;
}

}  // namespace kpds
