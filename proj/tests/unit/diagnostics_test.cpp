#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "kpds/diagnostics.hpp"

using namespace kpds;
using std::numbers::pi;

namespace {

SpectralField sample(const Grid2D& g, auto f) {
  RealLattice u(g);
  for (std::size_t ix = 0; ix < g.nx(); ++ix)
    for (std::size_t iy = 0; iy < g.ny(); ++iy) u(ix, iy) = f(g.x(ix), g.y(iy));
  return forward_transform(u, g);
}

}  // namespace

TEST(Mass, ConstantAndHarmonic) {
  const Grid2D g(32, 16, 2, 3);
  const double area = 4 * pi * pi * 6;
  EXPECT_NEAR(mass(sample(g, [](double, double) { return 1.0; })), area, 1e-10);
  EXPECT_NEAR(mass(sample(g, [](double x, double) { return std::sin(x); })), area / 2, 1e-10);
  EXPECT_DOUBLE_EQ(mass(SpectralField(g)), 0.0);
}

TEST(ErrorNorm, Examples) {
  const Grid2D g(8, 8);
  SpectralField a(g), b(g), z(g);
  a(1, 1) = 3.0;
  b(1, 1) = 3.0;
  EXPECT_EQ(error_norm(a, b, a), 0.0);
  b(1, 1) = 0.0;
  EXPECT_DOUBLE_EQ(error_norm(a, b, a), 1.0);
  b(2, 0) = 4.0;
  b(1, 1) = 3.0;
  EXPECT_DOUBLE_EQ(error_norm(a, b, a), 4.0 / 3.0);
  EXPECT_THROW(error_norm(a, b, z), std::invalid_argument);
  EXPECT_THROW(error_norm(a, SpectralField(Grid2D(16, 8)), a), DimensionMismatch);
}

TEST(Energy, KpSine) {
  // u = sin x: u_x^2 = cos^2 x, no y dependence, the cubic term integrates to 0.
  const Grid2D g(32, 8, 1, 1);
  const double area = 4 * pi * pi;
  const SpectralField v = sample(g, [](double x, double) { return std::sin(x); });
  EXPECT_NEAR(energy_kp(v, ModelSpec::kp1(0.3)), 0.5 * area * 0.5, 1e-10);
  EXPECT_NEAR(energy_kp(v, ModelSpec::kp2(0.3)), 0.5 * area * 0.5, 1e-10);
}

TEST(Energy, KpCubicTerm) {
  const Grid2D g(16, 8, 1, 1);
  const double area = 4 * pi * pi;
  const SpectralField v = sample(g, [](double, double) { return 2.0; });
  EXPECT_NEAR(energy_kp(v, ModelSpec::kp1(0.5)), -0.5 * 2 * 0.25 * 8 * area, 1e-9);
}

TEST(Energy, DsConstant) {
  const Grid2D g(16, 16, 1, 1);
  SpectralField v(g);
  v(0, 0) = 0.5 * static_cast<double>(g.size());  // u = 0.5
  const double area = 4 * pi * pi;
  // phi is the mean-free part of |u|^2, zero here.
  EXPECT_NEAR(energy_ds(v, ModelSpec::ds2(0.1, 1, 1.0)), -0.5 * 0.0625 * area, 1e-10);
}

TEST(MassTrace, RelativeChange) {
  MassTrace tr;
  EXPECT_TRUE(tr.empty());
  tr.record(0.0, 2.0);
  tr.record(0.5, 2.0);
  tr.record(1.0, 2.002);
  EXPECT_EQ(tr.test_values()[0], 0.0);
  EXPECT_EQ(tr.test_values()[1], 0.0);
  EXPECT_NEAR(tr.final_test(), 1e-3, 1e-15);
  std::ostringstream os;
  tr.write_csv(os);
  EXPECT_EQ(os.str().substr(0, 7), "t,test\n");
  MassTrace bad;
  EXPECT_THROW(bad.record(0.0, 0.0), std::invalid_argument);
}

TEST(Spectrum, ShellMaxima) {
  const Grid2D g(16, 8, 2, 1);
  SpectralField v(g);
  v(0, 0) = 10.0;
  v(3, 0) = 1.0;
  v(13, 2) = 0.01;
  const SpectrumProfile p = spectrum_profile(v);
  ASSERT_EQ(p.kx_shell.size(), 9u);
  ASSERT_EQ(p.ky_shell.size(), 5u);
  EXPECT_DOUBLE_EQ(p.kx_shell[3], 1.5);
  EXPECT_DOUBLE_EQ(p.kx_log10_max[0], 0.0);
  EXPECT_NEAR(p.kx_log10_max[3], -1.0, 1e-15);
  EXPECT_NEAR(p.ky_log10_max[2], -3.0, 1e-15);
  EXPECT_EQ(p.ky_log10_max[4], -300.0);
  EXPECT_EQ(p.tail_x(), -300.0);
  EXPECT_TRUE(p.resolved(1e-10));
  v(8, 4) = 1.0;
  EXPECT_FALSE(spectrum_profile(v).resolved(1e-10));
}

TEST(Spectrum, SmoothFieldDecays) {
  const Grid2D g(64, 64, 1, 1);
  const SpectrumProfile p = spectrum_profile(sample(g, [](double x, double y) { return std::exp(std::cos(x) + std::sin(y)); }));
  EXPECT_LT(p.tail_x(), -14.0);
  EXPECT_LT(p.tail_y(), -14.0);
}
