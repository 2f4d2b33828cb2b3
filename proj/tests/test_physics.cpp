#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "synfem/physics.hpp"

using namespace synfem;

namespace {

StressParams params(double r) {
  StressParams p;
  p.law = ScalarExponentLaw::constant(r);
  return p;
}

}  // namespace

TEST(Stress, ZeroStrain) {
  EXPECT_EQ(stress(0.5, Mat2::Zero(), StressParams{}).norm(), 0.0);
}

TEST(Stress, Newtonian) {
  StressParams p = params(2.0);
  p.nu0 = 3.0;
  Mat2 d;
  d << 0.4, -1.2, -1.2, 2.0;
  EXPECT_NEAR((stress(0.0, d, p) - 3.0 * d).norm(), 0.0, 1e-14);
}

TEST(Stress, ShearThinningClosedForm) {
  Mat2 d;
  d << 1, 0, 0, -1;
  const Mat2 s = stress_with_exponent(1.5, d, StressParams{});
  EXPECT_NEAR((s - std::pow(3.0, -0.25) * d).norm(), 0.0, 1e-14);
  EXPECT_NEAR(std::pow(3.0, -0.25), 0.759836, 1e-6);
}

TEST(Flux, Basics) {
  FluxParams q;
  q.k0 = 2.0;
  q.k1 = 0.0;
  Mat2 d;
  d << 1, 2, 2, 0;
  EXPECT_EQ(flux(1.0, Vec2::Zero(), d, q).norm(), 0.0);
  EXPECT_NEAR((flux(1.0, Vec2(1, -2), d, q) - 2.0 * Vec2(1, -2)).norm(), 0.0, 1e-15);
  q.k1 = 3.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int k = 0; k < 100; ++k) {
    const Vec2 g(n(rng), n(rng));
    Mat2 du;
    du << n(rng), n(rng), n(rng), n(rng);
    du = 0.5 * (du + du.transpose()).eval();
    EXPECT_GE(flux(0.0, g, du, q).dot(g), q.k0 * g.squaredNorm() - 1e-14);
  }
}

TEST(Tangent, AtOriginAndNewtonian) {
  StressParams p;
  p.kappa1 = 2.0;
  const double r = 1.7;
  const Eigen::Matrix3d t = stress_jacobian_with_exponent(r, Mat2::Zero(), p);
  EXPECT_NEAR((t - p.nu0 * std::pow(2.0, (r - 2) / 2) * Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-14);
  Mat2 d;
  d << 0.3, 0.2, 0.2, -0.1;
  EXPECT_NEAR((stress_jacobian_with_exponent(2.0, d, p) - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-14);
}

TEST(Tangent, CentralDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  StressParams p;
  for (int k = 0; k < 50; ++k) {
    const double c = 1.0 + 0.5 * (u(rng) + 2) / 4;
    Mat2 d;
    d << u(rng), u(rng), 0, u(rng);
    d(1, 0) = d(0, 1);
    const Eigen::Matrix3d t = stress_jacobian(c, d, p);
    const Eigen::Vector3d m = to_mandel(d);
    const double h = 1e-6;
    Eigen::Matrix3d fd;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e[j] = h;
      fd.col(j) = (to_mandel(stress(c, from_mandel(m + e), p)) - to_mandel(stress(c, from_mandel(m - e), p))) / (2 * h);
    }
    EXPECT_LE((t - fd).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, t.cwiseAbs().maxCoeff()));
    EXPECT_LE((t - t.transpose()).norm(), 1e-14);
  }
}

TEST(Mandel, RoundTrip) {
  Mat2 d;
  d << 1.5, -0.25, -0.25, 3.0;
  EXPECT_NEAR((from_mandel(to_mandel(d)) - d).norm(), 0.0, 1e-15);
  EXPECT_NEAR(to_mandel(d).norm(), d.norm(), 1e-15);
}

TEST(Structural, DefaultParametersHaveNoViolations) {
  const StructuralReport r = verify_structural(StressParams{}, FluxParams{}, 10000);
  EXPECT_EQ(r.samples, 10000);
  EXPECT_EQ(r.violations(), 0) << r.first_violation;
  EXPECT_GT(r.min_monotonicity_gap, 0.0);
}

TEST(Structural, PureKappaOneGrowth) {
  StressParams p;
  p.kappa2 = 1e-300;  // effectively zero: |S| = nu0 kappa1^{(r-2)/2} |B|
  p.kappa1 = 4.0;
  p.law = ScalarExponentLaw::constant(1.5);
  Mat2 b;
  b << 2, 1, 1, 0;
  EXPECT_NEAR(stress(0.0, b, p).norm(), std::pow(4.0, -0.25) * b.norm(), 1e-12);
  const StructuralReport r = verify_structural(p, FluxParams{}, 2000);
  EXPECT_EQ(r.growth_violations, 0);
}
