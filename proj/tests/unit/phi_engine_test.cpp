#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kpds/models.hpp"
#include "kpds/phi_engine.hpp"

using namespace kpds;

TEST(PhiEval, AtZero) {
  const PhiValue p = phi_eval(0.0);
  EXPECT_EQ(p.exp_z, cplx(1.0));
  EXPECT_NEAR(std::abs(p.phi1 - 1.0), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(p.phi2 - 0.5), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(p.phi3 - 1.0 / 6.0), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(p.phi4 - 1.0 / 24.0), 0.0, 1e-17);
}

TEST(PhiEval, AtOne) {
  const PhiValue p = phi_eval(1.0);
  EXPECT_NEAR(p.phi1.real(), 1.718281828459045, 1e-15);
  EXPECT_NEAR(p.phi2.real(), std::exp(1.0) - 2.0, 1e-15);
  EXPECT_NEAR(p.phi3.real(), std::exp(1.0) - 2.5, 1e-15);
}

TEST(PhiEval, AgreesWithContourNearAxis) {
  const cplx z(0.0, 0.3);
  const PhiValue a = phi_eval(z), b = contour_eval(z);
  for (int i = 1; i <= 4; ++i) EXPECT_LE(std::abs(a.phi(i) - b.phi(i)), 5e-15) << "phi" << i;
}

// z phi_{i+1}(z) = phi_i(z) - 1/i!, checked without dividing by z.
TEST(PhiEval, RecurrenceInMultipliedForm) {
  const double fact[] = {1.0, 1.0, 0.5, 1.0 / 6.0};
  for (cplx z : {cplx(1e-8, 0), cplx(0.1, 0.2), cplx(0.0, 0.49), cplx(0.0, 0.51), cplx(-3.0, 1.0), cplx(0.0, 40.0),
                 cplx(-200.0, 0.0), cplx(0.0, -1000.0)}) {
    const PhiValue p = phi_eval(z);
    const cplx ph[] = {p.exp_z, p.phi1, p.phi2, p.phi3, p.phi4};
    for (int i = 0; i < 4; ++i) {
      const cplx lhs = z * ph[i + 1], rhs = ph[i] - fact[i];
      EXPECT_LE(std::abs(lhs - rhs), 1e-14 * (1.0 + std::abs(ph[i]))) << "z=" << z << " i=" << i;
    }
  }
}

TEST(PhiEval, UnimodularOnImaginaryAxis) {
  for (double y : {1e-6, 0.3, 0.5, 7.0, 123.4, 1e3}) EXPECT_NEAR(std::abs(phi_eval(cplx(0.0, y)).exp_z), 1.0, 1e-15);
}

// Both branches agree on the switching circle.
TEST(PhiEval, ContinuousAcrossTaylorRadius) {
  const double r = phi_taylor_radius;
  for (double a : {0.0, 0.7, 1.9, 3.1, 4.4, 5.9}) {
    const cplx z = std::polar(r, a);
    const PhiValue p = detail::phi_taylor(z), q = detail::phi_closed_form(z);
    for (int i = 1; i <= 4; ++i) EXPECT_LE(std::abs(p.phi(i) - q.phi(i)), 1e-14);
  }
}

TEST(PhiEval, IndexOutOfRange) { EXPECT_THROW(phi_eval(0.1).phi(5), std::out_of_range); }

TEST(ContourEval, Examples) {
  EXPECT_NEAR(std::abs(contour_eval(0.0).phi1 - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(contour_eval(1.0).phi1 - (std::exp(1.0) - 1.0)), 0.0, 1e-14);
  const cplx z(0.0, 10.0);
  const PhiValue c = contour_eval(z);
  EXPECT_NEAR(std::abs(c.phi1 - (std::exp(z) - 1.0) / z), 0.0, 1e-13);
  EXPECT_THROW(contour_eval(0.0, 4), std::invalid_argument);
}

TEST(ContourEval, TwoPathAgreement) {
  const PhiCheck c = phi_two_path_check();
  EXPECT_EQ(c.samples, 400u);
  EXPECT_LE(c.max_deviation, 5e-15) << "worst at z=" << c.worst_z << " phi" << c.worst_index;
}

TEST(Schemes, NamesRoundTrip) {
  for (Scheme s : all_schemes) EXPECT_EQ(scheme_from_string(to_string(s)), s);
  EXPECT_EQ(scheme_from_string("if"), Scheme::ifrk4);
  EXPECT_THROW(scheme_from_string("rk45"), std::invalid_argument);
  EXPECT_TRUE(is_splitting(Scheme::yoshida4));
  EXPECT_FALSE(is_splitting(Scheme::irk4));
}

TEST(Schemes, YoshidaWeights) {
  EXPECT_NEAR(yoshida_outer, 1.351207191959658, 1e-15);
  EXPECT_NEAR(yoshida_inner, -1.702414383919315, 1e-15);
  EXPECT_NEAR(2.0 * yoshida_outer + yoshida_inner, 1.0, 1e-15);
}

TEST(Schemes, DcrkImplicitTableauConditions) {
  using T = DcrkImplicitTableau;
  const double b[] = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
  const double c[] = {0.0, 0.5, 0.5, 1.0};
  const auto& a = T::a;
  double sb = 0, bc = 0, bc2 = 0, bac = 0;
  for (int i = 0; i < 4; ++i) {
    double row = 0, ac = 0;
    for (int j = 0; j < 4; ++j) {
      row += a[i][j];
      ac += a[i][j] * c[j];
    }
    EXPECT_NEAR(row, c[i], 1e-15) << "row " << i;
    sb += b[i];
    bc += b[i] * c[i];
    bc2 += b[i] * c[i] * c[i];
    bac += b[i] * ac;
  }
  EXPECT_NEAR(sb, 1.0, 1e-15);
  EXPECT_NEAR(bc, 0.5, 1e-15);
  EXPECT_NEAR(bc2, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(bac, 1.0 / 6.0, 1e-15);
  // gamma makes the stability function vanish at infinity.
  const double g = T::gamma;
  EXPECT_NEAR(1.0 / 6.0 - 1.5 * g + 3 * g * g - g * g * g, 0.0, 1e-15);
}

TEST(BuildCoeffs, ZeroSymbol) {
  const CVec L(4, cplx(0.0));
  const SchemeCoeffs c = build_coeffs(Scheme::etd_krogstad, L, 0.1);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(c.e_full[k], cplx(1.0));
    EXPECT_NEAR(std::abs(c.phi1_full[k] - 1.0), 0.0, 1e-16);
    EXPECT_NEAR(std::abs(c.phi2_full[k] - 0.5), 0.0, 1e-16);
  }
  const SchemeCoeffs cm = build_coeffs(Scheme::etd_cm, L, 0.1);
  EXPECT_NEAR(std::abs(cm.cm_alpha[0] - 1.0 / 6.0), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(cm.cm_beta[0] - 1.0 / 6.0), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(cm.cm_gamma[0] - 1.0 / 6.0), 0.0, 1e-16);
}

TEST(BuildCoeffs, SingleImaginaryMode) {
  const CVec L{cplx(0.0, 1.0)};
  const SchemeCoeffs c = build_coeffs(Scheme::ifrk4, L, 0.1);
  EXPECT_NEAR(std::abs(c.e_full[0] - std::exp(cplx(0.0, 0.1))), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(c.e_full[0]), 1.0, 1e-15);
}

TEST(BuildCoeffs, RejectsBadStep) {
  const CVec L{cplx(0.0, 1.0)};
  EXPECT_THROW(build_coeffs(Scheme::ifrk4, L, 0.0), std::invalid_argument);
  EXPECT_THROW(build_coeffs(Scheme::ifrk4, L, -1.0), std::invalid_argument);
}

// The regularized antiderivative makes L real and of size ky^2 / delta on
// the kx = 0 column, where exp(hL) vanishes; every other mode is unimodular.
TEST(BuildCoeffs, KpPropagatorModulus) {
  const Grid2D g(64, 64, 5, 5);
  const MultiplierTable L = linear_symbol(ModelSpec::kp1(1.0), g);
  const SchemeCoeffs c = build_coeffs(Scheme::etd_ho, L.values, 1e-3);
  for (std::size_t ix = 0; ix < g.nx(); ++ix)
    for (std::size_t iy = 0; iy < g.ny(); ++iy) {
      const double m = std::abs(c.e_full[g.index(ix, iy)]);
      if (ix == 0 && iy != 0)
        EXPECT_EQ(m, 0.0);
      else
        EXPECT_NEAR(m, 1.0, 1e-13);
    }
}

TEST(BuildCoeffs, DcrkPartition) {
  const CVec L{cplx(0.0, 1.0), cplx(0.0, 100.0), cplx(-1e4, 0.0)};
  SchemeOptions o;
  o.dcrk_tau = 1.0;
  const SchemeCoeffs c = build_coeffs(Scheme::dcrk, L, 0.1, o);
  EXPECT_EQ(c.fast_count, 2u);
  EXPECT_EQ(c.fast[0], 0);
  EXPECT_EQ(c.fast[1], 1);
  o.dcrk_tau = std::numeric_limits<double>::infinity();
  EXPECT_EQ(build_coeffs(Scheme::dcrk, L, 0.1, o).fast_count, 0u);
}

TEST(BuildCoeffs, IrkInverseIsInverse) {
  using G = GaussTableau;
  const CVec L{cplx(0.0, 3.0), cplx(-2.0, 1.0), cplx(0.0, 1e6)};
  const double h = 0.1;
  const SchemeCoeffs c = build_coeffs(Scheme::irk4, L, h);
  for (std::size_t k = 0; k < L.size(); ++k) {
    const cplx z = h * L[k];
    const cplx a11 = 1.0 - G::a11 * z, a12 = -G::a12 * z, a21 = -G::a21 * z, a22 = 1.0 - G::a22 * z;
    EXPECT_NEAR(std::abs(a11 * c.irk_m11[k] + a12 * c.irk_m21[k] - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(a11 * c.irk_m12[k] + a12 * c.irk_m22[k]), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(a21 * c.irk_m11[k] + a22 * c.irk_m21[k]), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(a21 * c.irk_m12[k] + a22 * c.irk_m22[k] - 1.0), 0.0, 1e-12);
  }
}

TEST(CoeffCache, BuildsEachKeyOnce) {
  CoeffCache cache;
  const CVec L{cplx(0.0, 1.0), cplx(0.0, 2.0)};
  const CoeffCache::Key k{Scheme::etd_cm, "p", 2, 1, 1.0, 1.0, 0.1, 1.0};
  auto a = cache.get(k, L), b = cache.get(k, L);
  EXPECT_EQ(a.get(), b.get());
  auto k2 = k;
  k2.h = 0.05;
  EXPECT_NE(cache.get(k2, L).get(), a.get());
  EXPECT_EQ(cache.builds(), 2u);
}
