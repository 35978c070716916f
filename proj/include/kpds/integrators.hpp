#pragma once

// Fixed-step integrators for v_t = L v + N(v, t) with diagonal L.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "kpds/models.hpp"
#include "kpds/phi_engine.hpp"
#include "kpds/spectral_grid.hpp"

namespace kpds {

template <class P>
concept SemilinearProblem = requires(P& p, std::span<const cplx> v, double t, std::span<cplx> out) {
  { p.symbol() } -> std::convertible_to<std::span<const cplx>>;
  p.nonlinear(v, t, out);
};

/// Problems whose nonlinear part alone has an exact flow (splitting).
template <class P>
concept SplitProblem = SemilinearProblem<P> && requires(P& p, std::span<cplx> v, double h) { p.nonlinear_flow(v, h); };

class UnsupportedScheme : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(int iterations, double last_delta)
      : std::runtime_error("IRK4 fixed-point iteration did not converge after " + std::to_string(iterations) +
                           " iterations (last delta " + std::to_string(last_delta) + ")"),
        iterations_(iterations),
        last_delta_(last_delta) {}
  int iterations() const { return iterations_; }
  double last_delta() const { return last_delta_; }

 private:
  int iterations_;
  double last_delta_;
};

struct StepperConfig {
  SchemeOptions scheme_options{};
  double irk_tolerance = 1e-8;  // on max |stage change| of the unnormalized coefficients
  int irk_max_iters = 100;
};

struct StepperStats {
  std::size_t steps = 0;
  std::size_t irk_iterations = 0;  // summed over steps
  int irk_max_iterations = 0;
  double irk_last_residual = 0.0;

  double irk_mean_iterations() const { return steps == 0 ? 0.0 : static_cast<double>(irk_iterations) / steps; }
};

/// One scheme bound to one problem and step size. Owns its workspace.
template <SemilinearProblem P>
class Stepper {
 public:
  Stepper(P& problem, Scheme scheme, double h, const StepperConfig& config = {},
          std::shared_ptr<const SchemeCoeffs> coeffs = nullptr)
      : problem_(problem), scheme_(scheme), h_(h), config_(config), coeffs_(std::move(coeffs)) {
    if (is_splitting(scheme) && !SplitProblem<P>)
      throw UnsupportedScheme(to_string(scheme) + " is only available for problems with an exact nonlinear flow (DS II)");
    const auto L = problem_.symbol();
    n_ = L.size();
    if (!coeffs_) coeffs_ = std::make_shared<const SchemeCoeffs>(build_coeffs(scheme, L, h, config.scheme_options));
    if (coeffs_->scheme != scheme || coeffs_->size != n_ || coeffs_->h != h)
      throw std::invalid_argument("Stepper: coefficient tables do not match (scheme, L, h)");
    for (auto& w : work_) w.resize(n_);
    if (scheme == Scheme::dcrk)
      for (auto& w : stage_) w.resize(n_);
  }

  Scheme scheme() const { return scheme_; }
  double h() const { return h_; }
  const SchemeCoeffs& coeffs() const { return *coeffs_; }
  const StepperStats& stats() const { return stats_; }

  /// Advances v from t to t + h in place.
  void step(std::span<cplx> v, double t) {
    switch (scheme_) {
      case Scheme::ifrk4: step_ifrk4(v, t); break;
      case Scheme::etd_cm: step_etd_cm(v, t); break;
      case Scheme::etd_krogstad: step_etd_krogstad(v, t); break;
      case Scheme::etd_ho: step_etd_ho(v, t); break;
      case Scheme::dcrk: step_dcrk(v, t); break;
      case Scheme::irk4: step_irk4(v, t); break;
      case Scheme::strang2: step_strang(v); break;
      case Scheme::yoshida4: step_yoshida(v); break;
    }
    ++stats_.steps;
  }

 private:
  void nonlinear(std::span<const cplx> v, double t, CVec& out) { problem_.nonlinear(v, t, out); }

  void step_ifrk4(std::span<cplx> v, double t) {
    const auto& c = *coeffs_;
    auto [k1, k2, k3, k4, u, acc] = work_6();
    const double h = h_;
    nonlinear(v, t, k1);
    for (std::size_t i = 0; i < n_; ++i) u[i] = c.e_half[i] * (v[i] + 0.5 * h * k1[i]);
    nonlinear(u, t + 0.5 * h, k2);
    for (std::size_t i = 0; i < n_; ++i) u[i] = c.e_half[i] * v[i] + 0.5 * h * k2[i];
    nonlinear(u, t + 0.5 * h, k3);
    for (std::size_t i = 0; i < n_; ++i) u[i] = c.e_full[i] * v[i] + h * c.e_half[i] * k3[i];
    nonlinear(u, t + h, k4);
    for (std::size_t i = 0; i < n_; ++i)
      v[i] = c.e_full[i] * v[i] +
             h / 6.0 * (c.e_full[i] * k1[i] + 2.0 * c.e_half[i] * (k2[i] + k3[i]) + k4[i]);
    (void)acc;
  }

  void step_etd_cm(std::span<cplx> v, double t) {
    const auto& c = *coeffs_;
    auto [nv, na, nb, nc, a, u] = work_6();
    const double h = h_, hh = 0.5 * h_;
    nonlinear(v, t, nv);
    for (std::size_t i = 0; i < n_; ++i) a[i] = c.e_half[i] * v[i] + hh * c.phi1_half[i] * nv[i];
    nonlinear(a, t + hh, na);
    for (std::size_t i = 0; i < n_; ++i) u[i] = c.e_half[i] * v[i] + hh * c.phi1_half[i] * na[i];
    nonlinear(u, t + hh, nb);
    for (std::size_t i = 0; i < n_; ++i) u[i] = c.e_half[i] * a[i] + hh * c.phi1_half[i] * (2.0 * nb[i] - nv[i]);
    nonlinear(u, t + h, nc);
    for (std::size_t i = 0; i < n_; ++i)
      v[i] = c.e_full[i] * v[i] +
             h * (c.cm_alpha[i] * nv[i] + 2.0 * c.cm_beta[i] * (na[i] + nb[i]) + c.cm_gamma[i] * nc[i]);
  }

  void step_etd_krogstad(std::span<cplx> v, double t) {
    const auto& c = *coeffs_;
    auto [k1, k2, k3, k4, u, base] = work_6();
    const double h = h_, hh = 0.5 * h_;
    nonlinear(v, t, k1);
    for (std::size_t i = 0; i < n_; ++i) {
      base[i] = c.e_half[i] * v[i] + hh * c.phi1_half[i] * k1[i];
      u[i] = base[i];
    }
    nonlinear(u, t + hh, k2);
    for (std::size_t i = 0; i < n_; ++i) u[i] = base[i] + h * c.phi2_half[i] * (k2[i] - k1[i]);
    nonlinear(u, t + hh, k3);
    for (std::size_t i = 0; i < n_; ++i)
      u[i] = c.e_full[i] * v[i] + h * c.phi1_full[i] * k1[i] + 2.0 * h * c.phi2_full[i] * (k3[i] - k1[i]);
    nonlinear(u, t + h, k4);
    for (std::size_t i = 0; i < n_; ++i)
      v[i] = c.e_full[i] * v[i] +
             h * (c.phi1_full[i] * k1[i] + c.phi2_full[i] * (-3.0 * k1[i] + 2.0 * k2[i] + 2.0 * k3[i] - k4[i]) +
                  4.0 * c.phi3_full[i] * (k1[i] - k2[i] - k3[i] + k4[i]));
  }

  void step_etd_ho(std::span<cplx> v, double t) {
    const auto& c = *coeffs_;
    auto [n1, n2, n3, n4, u, n5] = work_6();
    const double h = h_, hh = 0.5 * h_;
    nonlinear(v, t, n1);
    for (std::size_t i = 0; i < n_; ++i) u[i] = c.e_half[i] * v[i] + hh * c.phi1_half[i] * n1[i];
    nonlinear(u, t + hh, n2);
    for (std::size_t i = 0; i < n_; ++i)
      u[i] = c.e_half[i] * v[i] +
             h * ((0.5 * c.phi1_half[i] - c.phi2_half[i]) * n1[i] + c.phi2_half[i] * n2[i]);
    nonlinear(u, t + hh, n3);
    for (std::size_t i = 0; i < n_; ++i)
      u[i] = c.e_full[i] * v[i] +
             h * ((c.phi1_full[i] - 2.0 * c.phi2_full[i]) * n1[i] + c.phi2_full[i] * (n2[i] + n3[i]));
    nonlinear(u, t + h, n4);
    for (std::size_t i = 0; i < n_; ++i) {
      const cplx a52 = 0.5 * c.phi2_half[i] - c.phi3_full[i] + 0.25 * c.phi2_full[i] - 0.5 * c.phi3_half[i];
      const cplx a54 = 0.25 * c.phi2_half[i] - a52;
      const cplx a51 = 0.5 * c.phi1_half[i] - 2.0 * a52 - a54;
      u[i] = c.e_half[i] * v[i] + h * (a51 * n1[i] + a52 * (n2[i] + n3[i]) + a54 * n4[i]);
    }
    nonlinear(u, t + hh, n5);
    for (std::size_t i = 0; i < n_; ++i)
      v[i] = c.e_full[i] * v[i] +
             h * ((c.phi1_full[i] - 3.0 * c.phi2_full[i] + 4.0 * c.phi3_full[i]) * n1[i] +
                  (-c.phi2_full[i] + 4.0 * c.phi3_full[i]) * n4[i] +
                  (4.0 * c.phi2_full[i] - 8.0 * c.phi3_full[i]) * n5[i]);
  }

  // Classical RK4 for slow modes and the nonlinearity, the implicit
  // companion tableau for the linear part of fast modes.
  void step_dcrk(std::span<cplx> v, double t) {
    static constexpr std::array<std::array<double, 4>, 4> ae{{
        {0.0, 0.0, 0.0, 0.0},
        {0.5, 0.0, 0.0, 0.0},
        {0.0, 0.5, 0.0, 0.0},
        {0.0, 0.0, 1.0, 0.0},
    }};
    static constexpr std::array<double, 4> b{1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
    static constexpr std::array<double, 4> cn{0.0, 0.5, 0.5, 1.0};
    const auto& ai = DcrkImplicitTableau::a;
    const auto& c = *coeffs_;
    const auto L = problem_.symbol();
    const double h = h_;
    CVec* g = &stage_[0];      // g[0..3] stage values
    CVec* nn = &work_[0];      // nn[0..3] stage nonlinearities
    std::copy(v.begin(), v.end(), g[0].begin());
    nonlinear(g[0], t, nn[0]);
    for (int s = 1; s < 4; ++s) {
      for (std::size_t i = 0; i < n_; ++i) {
        cplx acc = v[i];
        if (c.fast[i]) {
          for (int j = 0; j < s; ++j) acc += h * (ae[s][j] * nn[j][i] + ai[s][j] * L[i] * g[j][i]);
          g[s][i] = c.dcrk_solve[i] * acc;
        } else {
          for (int j = 0; j < s; ++j) acc += h * ae[s][j] * (L[i] * g[j][i] + nn[j][i]);
          g[s][i] = acc;
        }
      }
      nonlinear(g[s], t + cn[s] * h, nn[s]);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      cplx acc = 0.0;
      for (int j = 0; j < 4; ++j) acc += b[j] * (L[i] * g[j][i] + nn[j][i]);
      v[i] += h * acc;
    }
  }

  // Two-stage Gauss. The stage coupling through L is inverted per mode, only
  // N is iterated: Y <- (I - hAL)^-1 (v + hA N(Y)).
  void step_irk4(std::span<cplx> v, double t) {
    using G = GaussTableau;
    const auto& c = *coeffs_;
    auto [n1, n2, y1, y2, r1, r2] = work_6();
    const double h = h_;
    if (history_ == 0 || std::abs(t - history_t_) > 1e-9 * h) {
      history_ = 0;
      nonlinear(v, t, n1);
      std::copy(n1.begin(), n1.end(), n2.begin());
    } else {
      // Polynomial extrapolation of the stage nonlinearities of the last
      // one or two steps to this step's stage times.
      const int m = history_ >= 2 ? 4 : 2;
      std::array<double, 4> nodes{G::c1 - 1.0, G::c2 - 1.0, G::c1 - 2.0, G::c2 - 2.0};
      auto weights = [&](double x) {
        std::array<double, 4> w{};
        for (int j = 0; j < m; ++j) {
          w[j] = 1.0;
          for (int l = 0; l < m; ++l)
            if (l != j) w[j] *= (x - nodes[l]) / (nodes[j] - nodes[l]);
        }
        return w;
      };
      const auto w1 = weights(G::c1), w2 = weights(G::c2);
      const std::array<const CVec*, 4> src{&hist_[0], &hist_[1], &hist_[2], &hist_[3]};
      for (std::size_t i = 0; i < n_; ++i) {
        cplx a = 0.0, b = 0.0;
        for (int j = 0; j < m; ++j) {
          a += w1[j] * (*src[j])[i];
          b += w2[j] * (*src[j])[i];
        }
        n1[i] = a;
        n2[i] = b;
      }
    }
    auto solve = [&](CVec& o1, CVec& o2) {
      for (std::size_t i = 0; i < n_; ++i) {
        const cplx b1 = v[i] + h * (G::a11 * n1[i] + G::a12 * n2[i]);
        const cplx b2 = v[i] + h * (G::a21 * n1[i] + G::a22 * n2[i]);
        o1[i] = c.irk_m11[i] * b1 + c.irk_m12[i] * b2;
        o2[i] = c.irk_m21[i] * b1 + c.irk_m22[i] * b2;
      }
    };
    solve(y1, y2);
    int it = 0;
    double delta = 0.0;
    while (true) {
      nonlinear(y1, t + G::c1 * h, n1);
      nonlinear(y2, t + G::c2 * h, n2);
      ++it;
      solve(r1, r2);
      // Residual of (y1, y2) in the stage equations.
      double m = 0.0;
      for (std::size_t i = 0; i < n_; ++i) m = std::max({m, std::abs(r1[i] - y1[i]), std::abs(r2[i] - y2[i])});
      delta = m;
      if (!std::isfinite(delta)) throw NonFiniteState("IRK4: non-finite stage iterate");
      if (delta >= config_.irk_tolerance && it >= config_.irk_max_iters) throw NoConvergence(it, delta);
      // keep the newest iterate, one contraction closer than (y1, y2)
      std::swap(y1, r1);
      std::swap(y2, r2);
      if (delta < config_.irk_tolerance) break;
    }
    stats_.irk_iterations += it;
    stats_.irk_max_iterations = std::max(stats_.irk_max_iterations, it);
    stats_.irk_last_residual = delta;
    if (hist_[0].size() != n_)
      for (auto& hv : hist_) hv.resize(n_);
    std::swap(hist_[2], hist_[0]);
    std::swap(hist_[3], hist_[1]);
    std::copy(n1.begin(), n1.end(), hist_[0].begin());
    std::copy(n2.begin(), n2.end(), hist_[1].begin());
    history_ = std::min(history_ + 1, 2);
    history_t_ = t + h;
    // v + h b^T (L Y + N(Y)) rewritten through the stage equations as
    // v + b^T A^-1 (Y - v) = v + sqrt(3) (Y2 - Y1); avoids products with large L.
    const double s = std::sqrt(3.0);
    for (std::size_t i = 0; i < n_; ++i) v[i] += s * (y2[i] - y1[i]);
  }

  void step_strang(std::span<cplx> v) {
    if constexpr (SplitProblem<P>) {
      const auto& c = *coeffs_;
      for (std::size_t i = 0; i < n_; ++i) v[i] *= c.split_outer[i];
      problem_.nonlinear_flow(v, h_);
      for (std::size_t i = 0; i < n_; ++i) v[i] *= c.split_outer[i];
    }
  }

  void step_yoshida(std::span<cplx> v) {
    if constexpr (SplitProblem<P>) {
      const auto& c = *coeffs_;
      for (std::size_t i = 0; i < n_; ++i) v[i] *= c.split_outer[i];
      problem_.nonlinear_flow(v, yoshida_outer * h_);
      for (std::size_t i = 0; i < n_; ++i) v[i] *= c.split_join[i];
      problem_.nonlinear_flow(v, yoshida_inner * h_);
      for (std::size_t i = 0; i < n_; ++i) v[i] *= c.split_join[i];
      problem_.nonlinear_flow(v, yoshida_outer * h_);
      for (std::size_t i = 0; i < n_; ++i) v[i] *= c.split_outer[i];
    }
  }

  struct Six {
    CVec &a, &b, &c, &d, &e, &f;
  };
  Six work_6() { return {work_[0], work_[1], work_[2], work_[3], work_[4], work_[5]}; }

  P& problem_;
  Scheme scheme_;
  double h_;
  StepperConfig config_;
  std::shared_ptr<const SchemeCoeffs> coeffs_;
  std::size_t n_ = 0;
  std::array<CVec, 6> work_;
  std::array<CVec, 4> stage_;
  std::array<CVec, 4> hist_;  // stage N of the last step (0, 1) and the one before (2, 3)
  int history_ = 0;
  double history_t_ = 0.0;
  StepperStats stats_;
};

using Observer = std::function<void(std::size_t step, double t, std::span<const cplx> v)>;

struct EvolveResult {
  double t = 0.0;
  StepperStats stats;
};

/// nt equal steps of size t_max/nt from t = 0. The observer sees the state
/// after every `stride`-th step and after the last step.
template <SemilinearProblem P>
EvolveResult evolve(P& problem, std::span<cplx> v, Scheme scheme, std::size_t nt, double t_max,
                    const StepperConfig& config = {}, const Observer& observer = {}, std::size_t stride = 0,
                    std::shared_ptr<const SchemeCoeffs> coeffs = nullptr) {
  if (nt < 1) throw std::invalid_argument("evolve: nt must be at least 1");
  if (!(t_max > 0.0)) throw std::invalid_argument("evolve: t_max must be positive");
  const double h = t_max / static_cast<double>(nt);
  Stepper<P> stepper(problem, scheme, h, config, std::move(coeffs));
  for (std::size_t s = 0; s < nt; ++s) {
    const double t = static_cast<double>(s) * h;
    stepper.step(v, t);
    for (const cplx& z : v)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw NonFiniteState("evolve: non-finite state after step " + std::to_string(s + 1) + " of " +
                             std::to_string(nt) + " (" + to_string(scheme) + ")");
    const std::size_t done = s + 1;
    if (observer && ((stride > 0 && done % stride == 0) || done == nt))
      observer(done, static_cast<double>(done) * h, std::span<const cplx>(v.data(), v.size()));
  }
  return {t_max, stepper.stats()};
}

}  // namespace kpds
