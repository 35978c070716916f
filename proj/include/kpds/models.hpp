#pragma once

// KP I/II and DS II in the Fourier-space form v_t = L v + N(v, t).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "kpds/spectral_grid.hpp"

namespace kpds {

enum class Equation { kp1, kp2, ds2 };

class NonFiniteState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  Equation equation = Equation::kp1;
  double epsilon = 1.0;
  int lambda = -1;  // KP only: KP I => -1, KP II => +1
  int rho = 1;      // DS only: -1 focusing, +1 defocusing
  double eta = 1.0; // DS initial-data anisotropy

  static ModelSpec kp1(double eps) { return {Equation::kp1, eps, -1, 1, 1.0}; }
  static ModelSpec kp2(double eps) { return {Equation::kp2, eps, 1, 1, 1.0}; }
  static ModelSpec ds2(double eps, int rho, double eta) { return {Equation::ds2, eps, 1, rho, eta}; }

  bool is_kp() const { return equation != Equation::ds2; }

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("ModelSpec: epsilon must be positive");
    if (epsilon > 1.0) throw std::invalid_argument("ModelSpec: epsilon must not exceed 1");
    if (equation == Equation::kp1 && lambda != -1) throw std::invalid_argument("ModelSpec: KP I requires lambda = -1");
    if (equation == Equation::kp2 && lambda != 1) throw std::invalid_argument("ModelSpec: KP II requires lambda = +1");
    if (equation == Equation::ds2) {
      if (rho != 1 && rho != -1) throw std::invalid_argument("ModelSpec: rho must be +1 or -1");
      if (!(eta > 0.0)) throw std::invalid_argument("ModelSpec: eta must be positive");
    }
  }

  std::string label() const {
    std::string s = equation == Equation::kp1 ? "kp1" : equation == Equation::kp2 ? "kp2"
                    : rho < 0                 ? "ds2-foc"
                                              : "ds2-def";
    return s + "/eps=" + std::to_string(epsilon) + (is_kp() ? "" : "/eta=" + std::to_string(eta));
  }
};

// ---------------------------------------------------------------------------
// Linear symbols

/// KP: i eps^2 kx^3 - i lambda ky^2 / (kx + i lambda delta); DS II: i eps (ky^2 - kx^2).
/// Odd-in-kx pieces vanish on the x-Nyquist column.
inline MultiplierTable linear_symbol(const ModelSpec& model, const Grid2D& grid) {
  model.validate();
  MultiplierTable L(grid, model.is_kp() ? "kp-linear" : "ds-linear");
  if (model.is_kp()) {
    const MultiplierTable inv = multiplier_inv_dx(grid, model.lambda);
    const double e2 = model.epsilon * model.epsilon;
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      if (grid.nyquist_x(ix)) continue;  // stays zero
      const double kx = grid.kx(ix);
      for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
        const double ky = grid.ky(iy);
        // -lambda * inv_dx * (-ky^2)
        L(ix, iy) = cplx(0.0, e2 * kx * kx * kx) + static_cast<double>(model.lambda) * ky * ky * inv(ix, iy);
      }
    }
  } else {
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      const double kx = grid.kx(ix);
      for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
        const double ky = grid.ky(iy);
        L(ix, iy) = cplx(0.0, model.epsilon * (ky * ky - kx * kx));
      }
    }
  }
  return L;
}

/// kx^2 / (kx^2 + ky^2), zero at the origin.
inline RVec mean_field_quotient(const Grid2D& grid, bool half_spectrum) {
  const std::size_t ny = half_spectrum ? grid.ny() / 2 + 1 : grid.ny();
  RVec q(grid.nx() * ny);
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    const double kx = grid.kx(ix);
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const double ky = grid.ky(iy);
      const double k2 = kx * kx + ky * ky;
      q[ix * ny + iy] = k2 == 0.0 ? 0.0 : kx * kx / k2;
    }
  }
  return q;
}

inline void check_finite(std::span<const cplx> v, const char* where) {
  for (const cplx& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw NonFiniteState(std::string(where) + ": non-finite value (blow-up or instability)");
}

// ---------------------------------------------------------------------------
// KP

/// Evolutionary KP u_t = -6 u u_x - eps^2 u_xxx - lambda d_x^-1 u_yy as a
/// semilinear problem on the full Fourier lattice. N(v) = -3 ikx F[u^2],
/// with the real products formed through half-spectrum transforms.
class KpProblem {
 public:
  KpProblem(const ModelSpec& model, const Grid2D& grid)
      : model_(model),
        grid_(grid),
        symbol_(linear_symbol(model, grid).values),
        plan_(FftPlan::get(grid.nx(), grid.ny())),
        half_(plan_->half_size()),
        real_(grid.size()),
        dx_(grid.nx()) {
    if (!model.is_kp()) throw std::invalid_argument("KpProblem: model is not KP");
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) dx_[ix] = grid.nyquist_x(ix) ? 0.0 : grid.kx(ix);
  }

  const ModelSpec& model() const { return model_; }
  const Grid2D& grid() const { return grid_; }
  std::span<const cplx> symbol() const { return symbol_; }
  std::size_t nonlinear_evaluations() const { return evaluations_; }
  std::size_t transforms() const { return 2 * evaluations_; }

  void nonlinear(std::span<const cplx> v, double /*t*/, std::span<cplx> out) {
    ++evaluations_;
    const std::size_t nx = grid_.nx(), ny = grid_.ny(), hy = ny / 2 + 1;
    for (std::size_t ix = 0; ix < nx; ++ix)
      for (std::size_t iy = 0; iy < hy; ++iy) half_[ix * hy + iy] = v[ix * ny + iy];
    plan_->c2r(half_.data(), real_.data());
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (double& u : real_) {
      const double w = u * scale;
      u = w * w;
    }
    plan_->r2c(real_.data(), half_.data());
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const cplx m(0.0, -3.0 * dx_[ix]);
      for (std::size_t iy = 0; iy < hy; ++iy) out[ix * ny + iy] = m * half_[ix * hy + iy];
    }
    // Hermitian completion of the upper half in y.
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t mx = grid_.mirror_x(ix);
      for (std::size_t iy = hy; iy < ny; ++iy) out[ix * ny + iy] = std::conj(out[mx * ny + (ny - iy)]);
    }
  }

 private:
  ModelSpec model_;
  Grid2D grid_;
  CVec symbol_;
  std::shared_ptr<const FftPlan> plan_;
  CVec half_;
  RVec real_;
  std::vector<double> dx_;
  std::size_t evaluations_ = 0;
};

/// F-space image of -6 u u_x for a Hermitian-symmetric state.
inline SpectralField nonlinear_kp(const SpectralField& v, const ModelSpec& model) {
  KpProblem p(model, v.grid);
  SpectralField out(v.grid);
  p.nonlinear(v.coeffs, 0.0, out.coeffs);
  check_finite(out.coeffs, "nonlinear_kp");
  return out;
}

// ---------------------------------------------------------------------------
// DS II

/// Phi = -2 F^-1[kx^2/(kx^2+ky^2) F[|u|^2]] for the state v.
inline RealLattice mean_field(const SpectralField& v) {
  const Grid2D& g = v.grid;
  const ComplexLattice u = inverse_transform(v);
  RealLattice density(g);
  for (std::size_t i = 0; i < g.size(); ++i) density.values[i] = std::norm(u.values[i]);
  SpectralField d = forward_transform(density, g);
  const RVec q = mean_field_quotient(g, false);
  for (std::size_t i = 0; i < g.size(); ++i) d.coeffs[i] *= -2.0 * q[i];
  return real_part(inverse_transform(d));
}

/// iDS II: v_t = i eps (ky^2 - kx^2) v + (2 i rho / eps) F[(Phi + |u|^2) u].
class DsProblem {
 public:
  DsProblem(const ModelSpec& model, const Grid2D& grid)
      : model_(model),
        grid_(grid),
        symbol_(linear_symbol(model, grid).values),
        plan_(FftPlan::get(grid.nx(), grid.ny())),
        work_(grid.size()),
        density_(grid.size()),
        half_(plan_->half_size()),
        potential_factor_(mean_field_quotient(grid, true)) {
    if (model.is_kp()) throw std::invalid_argument("DsProblem: model is not DS II");
    // Phi + |u|^2 has symbol (1 - 2 q) on F[|u|^2].
    for (double& q : potential_factor_) q = 1.0 - 2.0 * q;
  }

  const ModelSpec& model() const { return model_; }
  const Grid2D& grid() const { return grid_; }
  std::span<const cplx> symbol() const { return symbol_; }
  std::size_t nonlinear_evaluations() const { return evaluations_; }
  std::size_t transforms() const { return 4 * evaluations_ + 4 * flows_; }

  void nonlinear(std::span<const cplx> v, double /*t*/, std::span<cplx> out) {
    ++evaluations_;
    to_physical(v);
    potential();
    for (std::size_t i = 0; i < work_.size(); ++i) work_[i] *= density_[i];
    plan_->forward(work_.data());
    const cplx factor(0.0, 2.0 * model_.rho / model_.epsilon);
    for (std::size_t i = 0; i < work_.size(); ++i) out[i] = factor * work_[i];
  }

  /// Exact flow of u_t = (2 i rho/eps)(Phi + |u|^2) u over time h, applied to
  /// the Fourier state in place. |u| is invariant along this flow.
  void nonlinear_flow(std::span<cplx> v, double h) {
    ++flows_;
    to_physical(v);
    potential();
    const double c = 2.0 * model_.rho / model_.epsilon * h;
    for (std::size_t i = 0; i < work_.size(); ++i) work_[i] *= std::polar(1.0, c * density_[i]);
    plan_->forward(work_.data());
    std::copy(work_.begin(), work_.end(), v.begin());
  }

 private:
  void to_physical(std::span<const cplx> v) {
    std::copy(v.begin(), v.end(), work_.begin());
    plan_->backward(work_.data());
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (cplx& z : work_) z *= scale;
  }

  // density_ <- Phi + |u|^2 from work_ = u.
  void potential() {
    for (std::size_t i = 0; i < work_.size(); ++i) density_[i] = std::norm(work_[i]);
    plan_->r2c(density_.data(), half_.data());
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < half_.size(); ++i) half_[i] *= potential_factor_[i] * scale;
    plan_->c2r(half_.data(), density_.data());
  }

  ModelSpec model_;
  Grid2D grid_;
  CVec symbol_;
  std::shared_ptr<const FftPlan> plan_;
  CVec work_;
  RVec density_;
  CVec half_;
  RVec potential_factor_;
  std::size_t evaluations_ = 0;
  std::size_t flows_ = 0;
};

inline SpectralField nonlinear_ds(const SpectralField& v, const ModelSpec& model) {
  DsProblem p(model, v.grid);
  SpectralField out(v.grid);
  p.nonlinear(v.coeffs, 0.0, out.coeffs);
  check_finite(out.coeffs, "nonlinear_ds");
  return out;
}

/// v <- exp(L h) v.
inline SpectralField ds_split_linear_flow(const SpectralField& v, double h, const ModelSpec& model) {
  const MultiplierTable L = linear_symbol(model, v.grid);
  SpectralField out(v.grid);
  for (std::size_t i = 0; i < v.coeffs.size(); ++i) out.coeffs[i] = std::exp(h * L.values[i]) * v.coeffs[i];
  return out;
}

/// u <- u exp((2 i rho/eps)(Phi(u0) + |u0|^2) h) in physical space.
inline ComplexLattice ds_split_nonlinear_flow(const ComplexLattice& u, double h, const ModelSpec& model) {
  const SpectralField v = forward_transform(u, u.grid);
  const RealLattice phi = mean_field(v);
  ComplexLattice out(u.grid);
  const double c = 2.0 * model.rho / model.epsilon * h;
  for (std::size_t i = 0; i < u.values.size(); ++i)
    out.values[i] = u.values[i] * std::polar(1.0, c * (phi.values[i] + std::norm(u.values[i])));
  return out;
}

// ---------------------------------------------------------------------------
// Initial data, constraint, smallness

/// u0 = -d/dx sech^2(R) = 2 sech^2(R) tanh(R) x / R, R = sqrt(x^2 + y^2).
inline RealLattice initial_data_kp(const Grid2D& grid) {
  RealLattice u(grid);
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    const double x = grid.x(ix);
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
      const double y = grid.y(iy);
      const double r = std::hypot(x, y);
      if (r == 0.0) {
        u(ix, iy) = 0.0;
        continue;
      }
      const double s = 1.0 / std::cosh(r);
      u(ix, iy) = 2.0 * s * s * std::tanh(r) * x / r;
    }
  }
  return u;
}

/// u0 = exp(-(x^2 + eta y^2)).
inline RealLattice initial_data_ds(const Grid2D& grid, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("initial_data_ds: eta must be positive");
  RealLattice u(grid);
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    const double x = grid.x(ix);
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
      const double y = grid.y(iy);
      u(ix, iy) = std::exp(-(x * x + eta * y * y));
    }
  }
  return u;
}

/// max over ky of |v(kx = 0, ky)|: the x-mean content the KP constraint forbids.
inline double check_constraint(const SpectralField& v) {
  double m = 0.0;
  for (std::size_t iy = 0; iy < v.grid.ny(); ++iy) {
    if (iy == 0) continue;  // the global mean is unconstrained
    m = std::max(m, std::abs(v(0, iy)));
  }
  return m;
}

struct SungResult {
  double value;
  bool satisfied;
};

inline double sung_threshold() {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  return g * g / 8.0;
}

/// Global-existence smallness condition for u0 = exp(-x^2 - eta y^2) after
/// the eps rescaling: 1/(eps^2 eta) <= (1/8)((sqrt5 - 1)/2)^2.
inline SungResult sung_ratio(const ModelSpec& model) {
  const double value = 1.0 / (model.epsilon * model.epsilon * model.eta);
  return {value, value <= sung_threshold()};
}

}  // namespace kpds
