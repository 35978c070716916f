#pragma once

// Closed-form KP solutions: the Zaitsev wave (KP I) and the genus-2
// theta-function solution (KP II).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>

#include "kpds/models.hpp"
#include "kpds/spectral_grid.hpp"

namespace kpds {

// ---------------------------------------------------------------------------
// Zaitsev

struct ZaitsevParams {
  double alpha = 1.0;
  double beta = 0.5;
  double x0 = 0.0;  // position of the crest at t = 0

  double c() const { return alpha * alpha * (4.0 - beta * beta) / (1.0 - beta * beta); }
  double delta() const { return std::sqrt(3.0 / (1.0 - beta * beta)) * alpha * alpha; }

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("ZaitsevParams: alpha must be positive");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("ZaitsevParams: beta must lie in (0, 1)");
  }
};

/// u = 2 a^2 (1 - b cosh(a xi) cos(d y)) / (cosh(a xi) - b cos(d y))^2, xi = x - x0 - c t.
/// Solves u_t + 6 u u_x + u_xxx - d_x^-1 u_yy = 0 (KP I, eps = 1).
inline double zaitsev(double x, double y, double t, const ZaitsevParams& p) {
  const double xi = x - p.x0 - p.c() * t;
  const double ch = std::cosh(p.alpha * xi);
  const double cy = std::cos(p.delta() * y);
  const double den = ch - p.beta * cy;
  return 2.0 * p.alpha * p.alpha * (1.0 - p.beta * ch * cy) / (den * den);
}

/// Samples the Zaitsev wave on the grid, summing its x-periodic images
/// n = -images..images so the sampled field is smooth across the boundary.
inline RealLattice sample_zaitsev(const Grid2D& grid, double t, const ZaitsevParams& p, int images = 2) {
  p.validate();
  RealLattice u(grid);
  const double period = 2.0 * std::numbers::pi * grid.lx();
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    const double x = grid.x(ix);
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
      const double y = grid.y(iy);
      double s = 0.0;
      for (int n = -images; n <= images; ++n) s += zaitsev(x + n * period, y, t, p);
      u(ix, iy) = s;
    }
  }
  return u;
}

// ---------------------------------------------------------------------------
// Theta function

class NonConvergentTheta : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// B = [[b, b lambda_B], [b lambda_B, b lambda_B^2 + d]], phases
/// phi_j = mu_j x + nu_j y + omega_j t + phase0_j.
struct ThetaParams {
  double b = -1.0;
  double lambda_B = 0.15;
  double d = -0.9775;
  std::array<double, 2> mu{0.25, 0.25};
  std::array<double, 2> nu{0.25269207053125, -0.25269207053125};
  std::array<double, 2> omega{-1.5429032317052, -1.5429032317052};
  std::array<double, 2> phase0{0.0, 0.0};
  int truncation = 8;

  double b11() const { return b; }
  double b12() const { return b * lambda_B; }
  double b22() const { return b * lambda_B * lambda_B + d; }

  void validate() const {
    if (!(b < 0.0) || !(b11() * b22() - b12() * b12() > 0.0))
      throw NonConvergentTheta("ThetaParams: B must be negative definite");
    if (truncation < 1) throw std::invalid_argument("ThetaParams: truncation must be positive");
  }

  /// Speed of the pure x-translation when omega_1/mu_1 == omega_2/mu_2.
  double speed() const { return -omega[0] / mu[0]; }
};

/// Reference genus-2 parameters. The tabulated y-frequencies belong to the form
/// u_t + 6 u u_x + u_xxx + 3 d_x^-1 u_yy = 0; here they are scaled by sqrt(3).
/// B is negative definite with b = -1.
inline ThetaParams theta_reference_params() {
  ThetaParams p;
  const double nu = std::sqrt(3.0) * 0.25269207053125;
  p.nu = {nu, -nu};
  return p;
}

/// Smallest truncation M >= p.truncation for which every term of the first
/// dropped ring, weighted by (1 + |m.mu|)^2, is below 1e-16.
inline int theta_truncation(const ThetaParams& p) {
  p.validate();
  auto ring_max = [&](int r) {
    double worst = 0.0;
    for (int m1 = -r; m1 <= r; ++m1)
      for (int m2 = -r; m2 <= r; ++m2) {
        if (std::max(std::abs(m1), std::abs(m2)) != r) continue;
        const double q = 0.5 * (p.b11() * m1 * m1 + 2.0 * p.b12() * m1 * m2 + p.b22() * m2 * m2);
        const double w = 1.0 + std::abs(m1 * p.mu[0] + m2 * p.mu[1]);
        worst = std::max(worst, std::exp(q) * w * w);
      }
    return worst;
  };
  int m = p.truncation;
  while (ring_max(m + 1) >= 1e-16) {
    if (++m > 200) throw NonConvergentTheta("theta_truncation: series does not converge");
  }
  return m;
}

struct ThetaSeries {
  double theta, theta_x, theta_xx;
};

/// theta and its first two x-derivatives by term-wise differentiation.
inline ThetaSeries theta_series(double phi1, double phi2, const ThetaParams& p, int M) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (int m1 = -M; m1 <= M; ++m1)
    for (int m2 = -M; m2 <= M; ++m2) {
      const double q = 0.5 * (p.b11() * m1 * m1 + 2.0 * p.b12() * m1 * m2 + p.b22() * m2 * m2);
      const double e = std::exp(q);
      const double arg = m1 * phi1 + m2 * phi2;
      const double k = m1 * p.mu[0] + m2 * p.mu[1];
      const double c = std::cos(arg), s = std::sin(arg);
      s0 += e * c;
      s1 -= e * k * s;  // Re(i k e^{i arg})
      s2 -= e * k * k * c;
    }
  return {s0, s1, s2};
}

inline double theta(double phi1, double phi2, const ThetaParams& p) {
  return theta_series(phi1, phi2, p, theta_truncation(p)).theta;
}

/// u = 2 d_xx ln theta at (x, y, t).
inline double kp2_doubly_periodic(double x, double y, double t, const ThetaParams& p, int M) {
  const double phi1 = p.mu[0] * x + p.nu[0] * y + p.omega[0] * t + p.phase0[0];
  const double phi2 = p.mu[1] * x + p.nu[1] * y + p.omega[1] * t + p.phase0[1];
  const ThetaSeries s = theta_series(phi1, phi2, p, M);
  if (s.theta <= 1e-12) throw std::domain_error("kp2_doubly_periodic: theta vanishes at evaluation point");
  return 2.0 * (s.theta * s.theta_xx - s.theta_x * s.theta_x) / (s.theta * s.theta);
}

inline double kp2_doubly_periodic(double x, double y, double t, const ThetaParams& p) {
  return kp2_doubly_periodic(x, y, t, p, theta_truncation(p));
}

/// Periods of the solution in x and y, valid when both phase vectors are
/// commensurate as in the reference parameters (mu_1 = mu_2, nu_1 = -nu_2).
inline Grid2D theta_grid(std::size_t nx, std::size_t ny, const ThetaParams& p) {
  return Grid2D(nx, ny, 1.0 / p.mu[0], 1.0 / std::abs(p.nu[0]));
}

inline RealLattice sample_theta(const Grid2D& grid, double t, const ThetaParams& p) {
  const int M = theta_truncation(p);
  RealLattice u(grid);
  for (std::size_t ix = 0; ix < grid.nx(); ++ix)
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) u(ix, iy) = kp2_doubly_periodic(grid.x(ix), grid.y(iy), t, p, M);
  return u;
}

// ---------------------------------------------------------------------------
// Residual of a traveling wave in the discrete evolutionary KP

/// Zeroes the x-mean content at ky != 0, which the constraint forbids and on
/// which the regularized d_x^-1 is of size 1/delta.
inline void project_constraint(SpectralField& v) {
  for (std::size_t iy = 1; iy < v.grid.ny(); ++iy) v(0, iy) = 0.0;
}

/// ||u_t - (L v + N(v))||_2 / ||u||_2 with u_t = -speed * u_x.
inline double traveling_residual(const RealLattice& u, double speed, const ModelSpec& model) {
  const Grid2D& g = u.grid;
  SpectralField v = forward_transform(u, g);
  project_constraint(v);
  KpProblem problem(model, g);
  CVec n(g.size());
  problem.nonlinear(v.coeffs, 0.0, n);
  const auto L = problem.symbol();
  double num = 0.0, den = 0.0;
  for (std::size_t ix = 0; ix < g.nx(); ++ix) {
    const double kx = g.nyquist_x(ix) ? 0.0 : g.kx(ix);
    for (std::size_t iy = 0; iy < g.ny(); ++iy) {
      const std::size_t k = g.index(ix, iy);
      const cplx ut = cplx(0.0, -speed * kx) * v.coeffs[k];
      num += std::norm(ut - L[k] * v.coeffs[k] - n[k]);
      den += std::norm(v.coeffs[k]);
    }
  }
  return std::sqrt(num / den);
}

/// Shift of a field by distance s in x as a Fourier phase factor.
inline SpectralField shift_x(const SpectralField& v, double s) {
  SpectralField out(v.grid);
  for (std::size_t ix = 0; ix < v.grid.nx(); ++ix) {
    const double kx = v.grid.nyquist_x(ix) ? 0.0 : v.grid.kx(ix);
    const cplx f = std::polar(1.0, -kx * s);
    for (std::size_t iy = 0; iy < v.grid.ny(); ++iy) out(ix, iy) = f * v(ix, iy);
  }
  return out;
}


struct OracleCheck {
  double zaitsev_residual = 0.0;
  double theta_residual = 0.0;
  double theta_shift = 0.0;  // ||u(t) - shift(u(0), c t)|| / ||u(t)||
};

/// Residuals of both exact solutions in the discrete KP right-hand side on
/// n x n grids, and the translation check of the theta solution at t = 1.
inline OracleCheck exact_oracle_check(std::size_t n = 256) {
  OracleCheck c;
  const Grid2D gz(n, n, 5.0, 5.0);
  const ZaitsevParams zp{1.0, 0.5, -2.5};
  c.zaitsev_residual = traveling_residual(sample_zaitsev(gz, 0.0, zp), zp.c(), ModelSpec::kp1(1.0));
  const ThetaParams tp = theta_reference_params();
  const Grid2D gt = theta_grid(n, n, tp);
  c.theta_residual = traveling_residual(sample_theta(gt, 0.0, tp), tp.speed(), ModelSpec::kp2(1.0));
  const SpectralField v0 = forward_transform(sample_theta(gt, 0.0, tp), gt);
  const SpectralField v1 = forward_transform(sample_theta(gt, 1.0, tp), gt);
  const SpectralField moved = shift_x(v0, tp.speed());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    num += std::norm(moved.coeffs[i] - v1.coeffs[i]);
    den += std::norm(v1.coeffs[i]);
  }
  c.theta_shift = std::sqrt(num / den);
  return c;
}

}  // namespace kpds
