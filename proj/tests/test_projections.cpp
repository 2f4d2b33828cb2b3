#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "synfem/assembly.hpp"
#include "synfem/manufacture.hpp"
#include "synfem/projections.hpp"

using namespace synfem;

namespace {

std::shared_ptr<const Mesh> square(int refine) {
  return std::make_shared<const Mesh>(refine_uniform(unit_square(), refine));
}

PointField stream_velocity() {
  const ManufacturedSolution s = default_manufactured();
  const ScalarField u1 = to_field(s.u1), u2 = to_field(s.u2);
  const ScalarField g11 = to_field(s.u1.diff(0)), g12 = to_field(s.u1.diff(1));
  const ScalarField g21 = to_field(s.u2.diff(0)), g22 = to_field(s.u2.diff(1));
  return field_from([=](const Vec2& x) { return Vec2(u1(x), u2(x)); },
                    [=](const Vec2& x) {
                      Mat2 g;
                      g << g11(x), g12(x), g21(x), g22(x);
                      return g;
                    });
}

Vector random_interior(const FESpace& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vector v(s.num_dofs());
  for (int i = 0; i < v.size(); ++i) v[i] = u(rng);
  for (int d : s.boundary_dofs()) v[d] = 0.0;
  return v;
}

}  // namespace

class ProjectionPairing : public ::testing::TestWithParam<Pairing> {};

TEST_P(ProjectionPairing, DivIsIdempotentOnVn) {
  const Spaces sp = build_spaces(square(2), GetParam());
  std::mt19937_64 rng(21);
  const FEFunction v(sp.velocity, random_interior(*sp.velocity, rng));
  const FEFunction p = project_div(field_from(v), sp);
  EXPECT_LE((p.coefficients() - v.coefficients()).lpNorm<Eigen::Infinity>(), 1e-12);
  const FEFunction zero = project_div(field_from(FEFunction(sp.velocity)), sp);
  EXPECT_EQ(zero.coefficients().lpNorm<Eigen::Infinity>(), 0.0);
}

TEST_P(ProjectionPairing, DivPreservesMomentsOfSolenoidalField) {
  for (int l = 1; l <= 3; ++l) {
    const Spaces sp = build_spaces(square(l), GetParam());
    const PointField v = stream_velocity();
    const FEFunction p = project_div(v, sp);
    EXPECT_LE(divergence_moments(p, *sp.pressure).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_LE(divergence_defect(p, v, *sp.pressure), 1e-12);
  }
}

TEST_P(ProjectionPairing, DivPreservesMomentsOfGeneralField) {
  const Spaces sp = build_spaces(square(2), GetParam());
  const PointField v = field_from(
      [](const Vec2& x) {
        const double b = x.x() * (1 - x.x()) * x.y() * (1 - x.y());
        return Vec2(b * std::exp(x.y()), b * x.x());
      },
      [](const Vec2& x) {
        const double b = x.x() * (1 - x.x()) * x.y() * (1 - x.y());
        const Vec2 g((1 - 2 * x.x()) * x.y() * (1 - x.y()), x.x() * (1 - x.x()) * (1 - 2 * x.y()));
        Mat2 m;
        m.row(0) = (std::exp(x.y()) * g + Vec2(0.0, b * std::exp(x.y()))).transpose();
        m.row(1) = (x.x() * g + Vec2(b, 0.0)).transpose();
        return m;
      });
  const FEFunction p = project_div(v, sp);
  EXPECT_LE(divergence_defect(p, v, *sp.pressure), 1e-12);
}

TEST_P(ProjectionPairing, PressureProjection) {
  const Spaces sp = build_spaces(square(2), GetParam());
  const FEFunction seven = project_Q(field_from(ScalarField([](const Vec2&) { return 7.0; })), sp.pressure);
  for (int e = 0; e < sp.pressure->mesh().num_elements(); ++e)
    EXPECT_NEAR(seven.evaluate(e, Vec2(0.2, 0.3)).value[0], 7.0, 1e-13);
  const FEFunction x1 = project_Q(field_from(ScalarField([](const Vec2& x) { return x.x(); })), sp.pressure);
  const Mesh& m = sp.pressure->mesh();
  for (int e = 0; e < m.num_elements(); ++e)
    EXPECT_NEAR(x1.evaluate(e, Vec2(1.0 / 3, 1.0 / 3)).value[0], m.centroid(e).x(), 1e-13);
}

INSTANTIATE_TEST_SUITE_P(Both, ProjectionPairing,
                         ::testing::Values(Pairing::P2_P0, Pairing::P2Bubble_P1Disc),
                         [](const auto& info) { return info.param == Pairing::P2_P0 ? "P2P0" : "CrouzeixRaviart"; });

TEST(PressureProjection, StabilityConstantAcrossExponents) {
  const ScalarField q = [](const Vec2& x) { return std::sin(5 * x.x()) + x.y() * x.y() - 0.3; };
  for (double s : {1.5, 2.0, 3.0}) {
    const ExponentField r = ExponentField::constant(s);
    std::vector<double> c;
    for (int l = 1; l <= 4; ++l) {
      const Spaces sp = build_spaces(square(l), Pairing::P2Bubble_P1Disc);
      const FEFunction pq = project_Q(field_from(q), sp.pressure);
      const double lhs = luxemburg_norm(sample_value(pq, r));
      const double rhs = luxemburg_norm(sample(sp.pressure->mesh(), r, [&](int, const Vec2&, const Vec2& x) {
        return std::abs(q(x));
      }));
      c.push_back(lhs / rhs);
    }
    for (double v : c) EXPECT_LE(v, 1.5);
  }
}

TEST(ConcentrationProjection, ReproducesZeroTraceP1AndZero) {
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  std::mt19937_64 rng(8);
  const FEFunction z(sp.concentration, random_interior(*sp.concentration, rng));
  EXPECT_LE((project_Z(field_from(z), sp.concentration).coefficients() - z.coefficients()).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_EQ(project_Z(field_from(FEFunction(sp.concentration)), sp.concentration).coefficients().lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ConcentrationProjection, ConvergesForSmoothZeroTraceFunction) {
  const double pi = std::acos(-1.0);
  const auto z = [pi](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  const auto gz = [pi](const Vec2& x) {
    return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
  };
  const ExponentField two = ExponentField::constant(2.0);
  std::vector<double> err;
  for (int l = 1; l <= 4; ++l) {
    const Spaces sp = build_spaces(square(l), Pairing::P2_P0);
    const FEFunction p = project_Z(field_from(ScalarField(z)), sp.concentration);
    const Mesh& m = sp.concentration->mesh();
    err.push_back(luxemburg_norm(sample(m, two, [&](int e, const Vec2& ref, const Vec2& x) {
                    return std::abs(p.evaluate(e, ref).value[0] - z(x));
                  })) +
                  luxemburg_norm(sample(m, two, [&](int e, const Vec2& ref, const Vec2& x) {
                    return (p.evaluate(e, ref).grad.row(0).transpose() - gz(x)).norm();
                  })));
  }
  for (std::size_t k = 1; k < err.size(); ++k) EXPECT_LT(err[k], err[k - 1]);
  EXPECT_LT(err.back(), err.front() / 4);
}

TEST(Stability, LocalConstantsAreUniform) {
  std::vector<double> c1;
  for (int l = 1; l <= 4; ++l) {
    const Spaces sp = build_spaces(square(l), Pairing::P2_P0);
    const ProjectionReport r = projection_report(sp, {stream_velocity()},
                                                 {field_from(ScalarField([](const Vec2& x) { return x.x() - 0.5; }))},
                                                 {field_from(ScalarField([](const Vec2& x) { return 1 + x.x() * x.y(); }))});
    c1.push_back(r.c1);
    EXPECT_LE(r.divergence_defect, 1e-9);
  }
  const auto [lo, hi] = std::minmax_element(c1.begin(), c1.end());
  EXPECT_LE(*hi / *lo, 2.0);
}

TEST(Stability, VariableExponent) {
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  std::mt19937_64 rng(31);
  const FEFunction v(sp.velocity, random_interior(*sp.velocity, rng));
  const ExponentField r = ExponentField::function([](const Vec2& x) { return 1.6 + 0.3 * x.x(); }, 1.6, 1.9);
  const VariableStability same = variable_exponent_stability_check(field_from(v), sp, r);
  EXPECT_NEAR(same.ratio, 1.0, 1e-10);

  std::vector<double> ratios;
  for (int l = 1; l <= 4; ++l) {
    const Spaces s = build_spaces(square(l), Pairing::P2_P0);
    ratios.push_back(variable_exponent_stability_check(stream_velocity(), s, r).ratio);
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  EXPECT_LE(*hi / *lo, 2.0);
}
