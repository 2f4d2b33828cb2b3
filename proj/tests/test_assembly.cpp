#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "synfem/assembly.hpp"
#include "synfem/manufacture.hpp"

#include "stokes_oracle.hpp"

using namespace synfem;

using synfem::testing_support::stokes_oracle;

namespace {

std::shared_ptr<const Mesh> square(int refine) {
  return std::make_shared<const Mesh>(refine_uniform(unit_square(), refine));
}

Vector random_vector(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

MomentumProblem newtonian(const Spaces& sp, const FEFunction& c, double nu0) {
  MomentumProblem prob;
  prob.spaces = &sp;
  prob.stress.law = ScalarExponentLaw::constant(2.0);
  prob.stress.nu0 = nu0;
  prob.concentration = &c;
  prob.convection = false;
  return prob;
}

}  // namespace

class PairingTest : public ::testing::TestWithParam<Pairing> {};

TEST_P(PairingTest, TrilinearSkewSymmetry) {
  const Spaces sp = build_spaces(square(2), GetParam());
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const FEFunction v(sp.velocity, random_vector(sp.velocity->num_dofs(), rng));
    const FEFunction z(sp.concentration, random_vector(sp.concentration->num_dofs(), rng));
    EXPECT_NEAR(trilinear_Bu(v, v, v), 0.0, 1e-13);
    EXPECT_NEAR(trilinear_Bc(z, v, z), 0.0, 1e-13);
  }
}

TEST_P(PairingTest, NewtonianBlocksMatchStokesOracle) {
  const Spaces sp = build_spaces(square(1), GetParam());
  const FEFunction c = interpolate(sp.concentration, ScalarField([](const Vec2&) { return 1.0; }));
  const MomentumProblem prob = newtonian(sp, c, 1.7);
  const SaddleLayout lay = saddle_layout(sp);
  const AssembledSystem sys = assemble_momentum(prob, Vector::Zero(lay.size()), Linearization::Picard);
  Eigen::MatrixXd a, b;
  stokes_oracle(sp, 1.7, a, b);
  EXPECT_LE((sys.a.to_dense() - a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((sys.b.to_dense() - b).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((assemble_divergence(*sp.velocity, *sp.pressure).to_dense() - b).cwiseAbs().maxCoeff(), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Both, PairingTest,
                         ::testing::Values(Pairing::P2_P0, Pairing::P2Bubble_P1Disc),
                         [](const auto& info) { return info.param == Pairing::P2_P0 ? "P2P0" : "CrouzeixRaviart"; });

TEST(Trilinear, ConstantFieldsGiveZero) {
  const Spaces sp = build_spaces(square(1), Pairing::P2_P0);
  std::mt19937_64 rng(2);
  const FEFunction v(sp.velocity, random_vector(sp.velocity->num_dofs(), rng));
  const FEFunction w = interpolate(sp.velocity, VectorField([](const Vec2&) { return Vec2(1.0, -2.0); }));
  EXPECT_NEAR(trilinear_Bu(v, w, w), 0.0, 1e-14);
  const FEFunction zero(sp.velocity);
  const FEFunction z(sp.concentration, random_vector(sp.concentration->num_dofs(), rng));
  EXPECT_EQ(trilinear_Bc(z, zero, z), 0.0);
}

TEST(Trilinear, ConstantConcentrationOracle) {
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  std::mt19937_64 rng(4);
  const FEFunction v(sp.velocity, random_vector(sp.velocity->num_dofs(), rng));
  const FEFunction z(sp.concentration, random_vector(sp.concentration->num_dofs(), rng));
  const FEFunction b = interpolate(sp.concentration, ScalarField([](const Vec2&) { return 3.0; }));
  // -1/2 int b v . grad z by direct quadrature.
  const Mesh& m = sp.velocity->mesh();
  const QuadratureRule rule = triangle_rule(8);
  double direct = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
    for (int q = 0; q < rule.size(); ++q) {
      const PointEval pv = v.evaluate(e, rule.points[q]);
      const PointEval pz = z.evaluate(e, rule.points[q]);
      direct += rule.weights[q] * std::abs(m.affine_map(e).determinant) * -0.5 * 3.0 *
                pv.value.dot(pz.grad.row(0).transpose());
    }
  EXPECT_NEAR(trilinear_Bc(b, v, z), direct, 1e-13);
}

TEST(Trilinear, SolenoidalFieldMatchesUnsymmetrizedForm) {
  // v = curl of a smooth stream function; both forms converge to the same value.
  const ManufacturedSolution s = default_manufactured();
  const ScalarField u1 = to_field(s.u1), u2 = to_field(s.u2);
  std::vector<double> gaps;
  for (int l = 2; l <= 4; ++l) {
    const Spaces sp = build_spaces(square(l), Pairing::P2_P0);
    const FEFunction v = interpolate(sp.velocity, VectorField([&](const Vec2& x) { return Vec2(u1(x), u2(x)); }));
    const FEFunction w = interpolate(sp.velocity, VectorField([](const Vec2& x) {
                                       return Vec2(std::sin(x.y()), x.x() * x.x());
                                     }));
    const FEFunction h = interpolate(sp.velocity, VectorField([](const Vec2& x) {
                                       return Vec2(x.x() * x.y(), std::cos(x.x()));
                                     }));
    // -int (v (x) w) : grad h
    const Mesh& m = sp.velocity->mesh();
    const QuadratureRule rule = triangle_rule(8);
    double direct = 0.0;
    for (int e = 0; e < m.num_elements(); ++e)
      for (int q = 0; q < rule.size(); ++q) {
        const PointEval pv = v.evaluate(e, rule.points[q]);
        const PointEval pw = w.evaluate(e, rule.points[q]);
        const PointEval ph = h.evaluate(e, rule.points[q]);
        direct -= rule.weights[q] * std::abs(m.affine_map(e).determinant) *
                  (pw.value * pv.value.transpose()).cwiseProduct(ph.grad).sum();
      }
    gaps.push_back(std::abs(trilinear_Bu(v, w, h) - direct));
  }
  EXPECT_LT(gaps[2], gaps[0] / 8);
}

TEST(Trilinear, BoundRatio) {
  const ExponentField r = ExponentField::constant(1.8);
  std::mt19937_64 rng(9);
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  const FEFunction zero(sp.velocity);
  const FEFunction v(sp.velocity, random_vector(sp.velocity->num_dofs(), rng));
  const FEFunction w(sp.velocity, random_vector(sp.velocity->num_dofs(), rng));
  const FEFunction h(sp.velocity, random_vector(sp.velocity->num_dofs(), rng));
  EXPECT_EQ(bu_bound_check(zero, w, h, r), 0.0);
  const double q = bu_bound_check(v, w, h, r);
  EXPECT_GT(q, 0.0);
  EXPECT_TRUE(std::isfinite(q));
  const FEFunction v2(sp.velocity, 2.0 * v.coefficients());
  EXPECT_NEAR(bu_bound_check(v2, w, h, r), q, 1e-12 * q);
}

TEST(Momentum, ZeroStateZeroForceZeroResidual) {
  const Spaces sp = build_spaces(square(1), Pairing::P2_P0);
  const FEFunction c = interpolate(sp.concentration, ScalarField([](const Vec2&) { return 1.0; }));
  MomentumProblem prob;
  prob.spaces = &sp;
  prob.concentration = &c;
  const Vector r = momentum_residual(prob, Vector::Zero(saddle_layout(sp).size()));
  EXPECT_EQ(r.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Momentum, NewtonTangentMatchesFiniteDifferences) {
  const Spaces sp = build_spaces(square(1), Pairing::P2Bubble_P1Disc);
  std::mt19937_64 rng(13);
  const FEFunction c(sp.concentration, (random_vector(sp.concentration->num_dofs(), rng).array() * 0.3 + 1.0).matrix());
  MomentumProblem prob;
  prob.spaces = &sp;
  prob.concentration = &c;
  prob.stress.range.lo = 0.7;
  prob.stress.range.hi = 1.3;
  const SaddleLayout lay = saddle_layout(sp);
  const Vector state = random_vector(lay.size(), rng);
  Vector dir = random_vector(lay.size(), rng);
  for (int d : sp.velocity->boundary_dofs()) dir[d] = 0.0;
  const AssembledSystem sys = assemble_momentum(prob, state, Linearization::Newton);
  const double h = 1e-6;
  const Vector fd = (momentum_residual(prob, state + h * dir) - momentum_residual(prob, state - h * dir)) / (2 * h);
  const Vector jd = sys.matrix * dir;
  EXPECT_LE((jd - fd).lpNorm<Eigen::Infinity>(), 1e-6 * jd.lpNorm<Eigen::Infinity>());
}

TEST(Concentration, DiffusionMatrixAndConstants) {
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  ConcentrationProblem prob;
  prob.spaces = &sp;
  prob.flux.k0 = 2.5;
  prob.flux.k1 = 0.0;
  prob.boundary = [](const Vec2&) { return 4.0; };
  const AssembledSystem sys = assemble_concentration(prob);
  const Eigen::MatrixXd k = assemble_stiffness(*sp.concentration).to_dense();
  EXPECT_LE((sys.a.to_dense() - 2.5 * k).cwiseAbs().maxCoeff(), 1e-14);
  const Vector x = solve_direct(sys.matrix, sys.rhs);
  EXPECT_LE((x.array() - 4.0).abs().maxCoeff(), 1e-12);
}

TEST(Concentration, ManufacturedLinearProfile) {
  // C = x + 1 with U = 0, k0 = 1: the forcing vanishes and P1 reproduces C.
  for (int l = 1; l <= 3; ++l) {
    const Spaces sp = build_spaces(square(l), Pairing::P2_P0);
    ConcentrationProblem prob;
    prob.spaces = &sp;
    ManufacturedSolution s;
    s.u1 = Expr(0.0);
    s.u2 = Expr(0.0);
    s.p = Expr(0.0);
    s.c = Expr::x() + Expr(1.0);
    StressParams stress;
    stress.law = ScalarExponentLaw::constant(2.0);
    const Manufactured m = manufacture(s, stress, FluxParams{});
    prob.forcing = m.concentration_forcing;
    prob.boundary = m.concentration;
    const AssembledSystem sys = assemble_concentration(prob);
    const Vector x = solve_direct(sys.matrix, sys.rhs);
    double err = 0.0;
    for (int i = 0; i < sp.concentration->num_dofs(); ++i)
      err = std::max(err, std::abs(x[i] - m.concentration(sp.concentration->dof_point(i))));
    EXPECT_LE(err, 1e-12);
  }
}

TEST(Moments, MassAndDivergence) {
  const Spaces sp = build_spaces(square(2), Pairing::P2Bubble_P1Disc);
  EXPECT_NEAR(assemble_moments(*sp.pressure).sum(), 1.0, 1e-14);
  EXPECT_NEAR(assemble_mass(*sp.concentration).to_dense().sum(), 1.0, 1e-14);
  const FEFunction v = interpolate(sp.velocity, VectorField([](const Vec2& x) { return Vec2(x.x(), 0.0); }));
  // div v = 1, so the moments equal int Q_j.
  EXPECT_LE((divergence_moments(v, *sp.pressure) - assemble_moments(*sp.pressure)).lpNorm<Eigen::Infinity>(), 1e-14);
}
