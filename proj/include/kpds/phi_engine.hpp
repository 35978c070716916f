#pragma once

// phi-functions of exponential integrators,
//   phi_i(z) = 1/(i-1)! * int_0^1 exp((1-s) z) s^(i-1) ds,
// evaluated per Fourier mode, and the per-scheme coefficient tables built
// from them.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>
#include <tuple>

#include "kpds/spectral_grid.hpp"

namespace kpds {

struct PhiValue {
  cplx z;
  cplx exp_z;
  cplx phi1, phi2, phi3, phi4;

  cplx phi(int i) const {
    switch (i) {
      case 0: return exp_z;
      case 1: return phi1;
      case 2: return phi2;
      case 3: return phi3;
      case 4: return phi4;
      default: throw std::out_of_range("PhiValue::phi: index must be 0..4");
    }
  }
};

namespace detail {

inline constexpr std::array<double, 5> inv_factorial{1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0};

// exp(z) - 1 without cancellation for small Re z or small Im z.
inline cplx expm1(cplx z) {
  const double x = z.real(), y = z.imag();
  const double s = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}

// Closed form with upward recurrence; accurate away from z = 0.
inline PhiValue phi_closed_form(cplx z) {
  PhiValue p;
  p.z = z;
  p.exp_z = std::exp(z);
  p.phi1 = expm1(z) / z;
  p.phi2 = (p.phi1 - inv_factorial[1]) / z;
  p.phi3 = (p.phi2 - inv_factorial[2]) / z;
  p.phi4 = (p.phi3 - inv_factorial[3]) / z;
  return p;
}

// phi_i(z) = sum_n z^n / (n+i)!; 30 terms leave a tail below 2^-53 for |z| < 1/2.
inline PhiValue phi_taylor(cplx z) {
  constexpr int terms = 30;
  PhiValue p;
  p.z = z;
  p.exp_z = std::exp(z);
  std::array<cplx, 4> acc{};
  // Horner from the highest term: sum_n z^n/(n+i)!.
  for (int i = 1; i <= 4; ++i) {
    cplx s = 0.0;
    for (int n = terms - 1; n >= 0; --n) s = s * z / static_cast<double>(n + i + 1) + 1.0;
    // s = sum_n z^n * i!/(n+i)!
    acc[static_cast<std::size_t>(i - 1)] = s * inv_factorial[static_cast<std::size_t>(i)];
  }
  p.phi1 = acc[0];
  p.phi2 = acc[1];
  p.phi3 = acc[2];
  p.phi4 = acc[3];
  return p;
}

}  // namespace detail

inline constexpr double phi_taylor_radius = 0.5;

/// Production path: Taylor series inside |z| < 1/2, closed form outside.
inline PhiValue phi_eval(cplx z) {
  if (std::abs(z) < phi_taylor_radius) return detail::phi_taylor(z);
  return detail::phi_closed_form(z);
}

/// Cauchy-integral average of the closed form over n_nodes equispaced points
/// on the unit circle around z (trapezoid rule). Independent of the Taylor
/// branch; used to cross-check phi_eval.
inline PhiValue contour_eval(cplx z, int n_nodes = 16) {
  if (n_nodes < 8) throw std::invalid_argument("contour_eval: need at least 8 nodes");
  PhiValue acc{};
  for (int j = 0; j < n_nodes; ++j) {
    const double theta = 2.0 * std::numbers::pi * (j + 0.5) / n_nodes;
    const PhiValue p = detail::phi_closed_form(z + std::polar(1.0, theta));
    acc.phi1 += p.phi1;
    acc.phi2 += p.phi2;
    acc.phi3 += p.phi3;
    acc.phi4 += p.phi4;
  }
  const double w = 1.0 / n_nodes;
  acc.z = z;
  acc.exp_z = std::exp(z);
  acc.phi1 *= w;
  acc.phi2 *= w;
  acc.phi3 *= w;
  acc.phi4 *= w;
  return acc;
}

/// Worst deviation of phi_eval from contour_eval, in units of 1 + |phi_i|.
struct PhiCheck {
  double max_deviation = 0.0;
  cplx worst_z{};
  int worst_index = 0;
  std::size_t samples = 0;
};

/// 200 points on the imaginary axis with |z| <= 1e3 and 200 in |z| < 1/2.
inline std::vector<cplx> phi_check_points() {
  std::vector<cplx> z;
  for (int j = 0; j < 200; ++j) {
    // log-spaced magnitudes 1e-3..1e3, alternating sign
    const double m = std::pow(10.0, -3.0 + 6.0 * j / 199.0);
    z.emplace_back(0.0, j % 2 ? -m : m);
  }
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int j = 0; j < 200; ++j) {
    const double r = 0.499 * std::sqrt((j + 0.5) / 200.0);
    z.push_back(std::polar(r, golden * j));
  }
  return z;
}

inline PhiCheck phi_two_path_check(const std::vector<cplx>& points = phi_check_points()) {
  PhiCheck c;
  for (const cplx& z : points) {
    const PhiValue a = phi_eval(z), b = contour_eval(z);
    for (int i = 1; i <= 4; ++i) {
      const double d = std::abs(a.phi(i) - b.phi(i)) / (1.0 + std::abs(a.phi(i)));
      if (d > c.max_deviation) {
        c.max_deviation = d;
        c.worst_z = z;
        c.worst_index = i;
      }
    }
    ++c.samples;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Scheme coefficient tables

enum class Scheme { ifrk4, etd_cm, etd_krogstad, etd_ho, dcrk, irk4, strang2, yoshida4 };

inline constexpr std::array<Scheme, 8> all_schemes{Scheme::ifrk4,  Scheme::etd_cm, Scheme::etd_krogstad,
                                                    Scheme::etd_ho, Scheme::dcrk,   Scheme::irk4,
                                                    Scheme::strang2, Scheme::yoshida4};

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::ifrk4: return "ifrk4";
    case Scheme::etd_cm: return "etd-cm";
    case Scheme::etd_krogstad: return "etd-k";
    case Scheme::etd_ho: return "etd-ho";
    case Scheme::dcrk: return "dcrk";
    case Scheme::irk4: return "irk4";
    case Scheme::strang2: return "strang2";
    case Scheme::yoshida4: return "yoshida4";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& name) {
  for (Scheme s : all_schemes)
    if (to_string(s) == name) return s;
  if (name == "if") return Scheme::ifrk4;
  if (name == "cm") return Scheme::etd_cm;
  if (name == "krogstad") return Scheme::etd_krogstad;
  if (name == "ho") return Scheme::etd_ho;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

inline bool is_splitting(Scheme s) { return s == Scheme::strang2 || s == Scheme::yoshida4; }

/// Triple-jump weights: yoshida_outer + yoshida_inner + yoshida_outer == 1.
inline const double yoshida_outer = 1.0 / (2.0 - std::cbrt(2.0));
inline const double yoshida_inner = -std::cbrt(2.0) / (2.0 - std::cbrt(2.0));

/// Implicit companion of classical RK4 used for the fast modes of DCRK:
/// four-stage ESDIRK sharing RK4's nodes and weights, third order,
/// L-stable (diagonal gamma is the root of 1/6 - 3g/2 + 3g^2 - g^3).
struct DcrkImplicitTableau {
  static constexpr double gamma = 0.43586652150845899942;
  static constexpr double a32 = 0.25;
  static constexpr double a43 = (2.0 * gamma - 12.0 * gamma * gamma + 12.0 * gamma * gamma * gamma) / a32;
  static constexpr double a42 = 2.0 - 6.0 * gamma - 2.0 * a32 - a43;
  static constexpr double a21 = 0.5 - gamma;
  static constexpr double a31 = 0.5 - gamma - a32;
  static constexpr double a41 = 1.0 - gamma - a42 - a43;

  static constexpr std::array<std::array<double, 4>, 4> a{{
      {0.0, 0.0, 0.0, 0.0},
      {a21, gamma, 0.0, 0.0},
      {a31, a32, gamma, 0.0},
      {a41, a42, a43, gamma},
  }};
};

/// Two-stage Gauss (Hammer-Hollingsworth) coefficients.
struct GaussTableau {
  static inline const double s3 = std::sqrt(3.0);
  static inline const double c1 = 0.5 - s3 / 6.0;
  static inline const double c2 = 0.5 + s3 / 6.0;
  static constexpr double a11 = 0.25;
  static constexpr double a22 = 0.25;
  static inline const double a12 = 0.25 - s3 / 6.0;
  static inline const double a21 = 0.25 + s3 / 6.0;
  static constexpr double b1 = 0.5;
  static constexpr double b2 = 0.5;
};

struct SchemeOptions {
  double dcrk_tau = 1.0;  // a mode is "fast" iff |h L| > tau
};

/// Per-mode tables for one (scheme, L, h). Only the tables the scheme uses
/// are populated.
struct SchemeCoeffs {
  Scheme scheme{};
  double h = 0.0;
  std::size_t size = 0;

  CVec e_full, e_half;                     // exp(hL), exp(hL/2)
  CVec phi1_full, phi2_full, phi3_full;    // phi_j(hL)
  CVec phi1_half, phi2_half, phi3_half;    // phi_j(hL/2)
  CVec cm_alpha, cm_beta, cm_gamma;        // Cox-Matthews weights at hL

  // DCRK: fast-mode mask and (1 - h gamma L_fast)^-1
  std::vector<unsigned char> fast;
  CVec dcrk_solve;
  std::size_t fast_count = 0;

  // IRK4: inverse of the per-mode 2x2 stage matrix I - h A L
  CVec irk_m11, irk_m12, irk_m21, irk_m22;

  // Splitting: linear sub-flows exp(c hL) for the composition
  CVec split_outer, split_join;  // Strang: outer = exp(hL/2); Yoshida: w1 h/2 and (w1+w0) h/2
};

inline CVec exp_table(std::span<const cplx> L, double factor) {
  CVec out(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) out[k] = std::exp(factor * L[k]);
  return out;
}

inline SchemeCoeffs build_coeffs(Scheme scheme, std::span<const cplx> L, double h, const SchemeOptions& opts = {}) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("build_coeffs: h must be positive");
  const std::size_t n = L.size();
  SchemeCoeffs c;
  c.scheme = scheme;
  c.h = h;
  c.size = n;

  auto need_phi_full = scheme == Scheme::etd_cm || scheme == Scheme::etd_krogstad || scheme == Scheme::etd_ho;
  auto need_phi_half = scheme == Scheme::etd_cm || scheme == Scheme::etd_krogstad || scheme == Scheme::etd_ho;

  if (scheme != Scheme::strang2 && scheme != Scheme::yoshida4 && scheme != Scheme::dcrk && scheme != Scheme::irk4) {
    c.e_full.resize(n);
    c.e_half.resize(n);
  }
  if (need_phi_half) {
    c.phi1_half.resize(n);
    c.phi2_half.resize(n);
    c.phi3_half.resize(n);
  }
  if (need_phi_full) {
    c.phi1_full.resize(n);
    c.phi2_full.resize(n);
    c.phi3_full.resize(n);
  }
  if (scheme == Scheme::etd_cm) {
    c.cm_alpha.resize(n);
    c.cm_beta.resize(n);
    c.cm_gamma.resize(n);
  }

  switch (scheme) {
    case Scheme::ifrk4:
      for (std::size_t k = 0; k < n; ++k) {
        c.e_full[k] = std::exp(h * L[k]);
        c.e_half[k] = std::exp(0.5 * h * L[k]);
      }
      break;
    case Scheme::etd_cm:
    case Scheme::etd_krogstad:
    case Scheme::etd_ho:
      for (std::size_t k = 0; k < n; ++k) {
        const PhiValue full = phi_eval(h * L[k]);
        const PhiValue half = phi_eval(0.5 * h * L[k]);
        c.e_full[k] = full.exp_z;
        c.e_half[k] = half.exp_z;
        c.phi1_full[k] = full.phi1;
        c.phi2_full[k] = full.phi2;
        c.phi3_full[k] = full.phi3;
        c.phi1_half[k] = half.phi1;
        c.phi2_half[k] = half.phi2;
        c.phi3_half[k] = half.phi3;
        if (scheme == Scheme::etd_cm) {
          c.cm_alpha[k] = full.phi1 - 3.0 * full.phi2 + 4.0 * full.phi3;
          c.cm_beta[k] = full.phi2 - 2.0 * full.phi3;
          c.cm_gamma[k] = -full.phi2 + 4.0 * full.phi3;
        }
      }
      break;
    case Scheme::dcrk:
      c.fast.assign(n, 0);
      c.dcrk_solve.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const bool fast = std::abs(h * L[k]) > opts.dcrk_tau;
        c.fast[k] = fast ? 1 : 0;
        c.fast_count += fast ? 1 : 0;
        c.dcrk_solve[k] = fast ? 1.0 / (1.0 - h * DcrkImplicitTableau::gamma * L[k]) : cplx(1.0);
      }
      break;
    case Scheme::irk4: {
      using G = GaussTableau;
      c.irk_m11.resize(n);
      c.irk_m12.resize(n);
      c.irk_m21.resize(n);
      c.irk_m22.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const cplx z = h * L[k];
        // Inverse of [[1 - a11 z, -a12 z], [-a21 z, 1 - a22 z]], written so
        // that huge |z| stays finite.
        const cplx det = 1.0 - (G::a11 + G::a22) * z + (G::a11 * G::a22 - G::a12 * G::a21) * z * z;
        c.irk_m11[k] = (1.0 - G::a22 * z) / det;
        c.irk_m12[k] = (G::a12 * z) / det;
        c.irk_m21[k] = (G::a21 * z) / det;
        c.irk_m22[k] = (1.0 - G::a11 * z) / det;
      }
      break;
    }
    case Scheme::strang2:
      c.split_outer = exp_table(L, 0.5 * h);
      c.e_full = exp_table(L, h);
      break;
    case Scheme::yoshida4:
      c.split_outer = exp_table(L, 0.5 * yoshida_outer * h);
      c.split_join = exp_table(L, 0.5 * (yoshida_outer + yoshida_inner) * h);
      break;
  }
  return c;
}

/// Coefficient tables keyed on (scheme, problem label, grid shape, h, tau);
/// each key is built once.
class CoeffCache {
 public:
  struct Key {
    Scheme scheme;
    std::string problem;
    std::size_t nx, ny;
    double lx, ly, h, tau;
    auto tie() const { return std::tie(scheme, problem, nx, ny, lx, ly, h, tau); }
    bool operator<(const Key& o) const { return tie() < o.tie(); }
  };

  std::shared_ptr<const SchemeCoeffs> get(const Key& key, std::span<const cplx> L) {
    std::lock_guard lock(mutex_);
    auto& slot = cache_[key];
    if (!slot) {
      slot = std::make_shared<const SchemeCoeffs>(build_coeffs(key.scheme, L, key.h, SchemeOptions{key.tau}));
      ++builds_;
    }
    return slot;
  }

  std::size_t builds() const {
    std::lock_guard lock(mutex_);
    return builds_;
  }

 private:
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const SchemeCoeffs>> cache_;
  std::size_t builds_ = 0;
};

}  // namespace kpds
