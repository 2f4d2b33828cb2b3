#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "synfem/error.hpp"
#include "synfem/manufacture.hpp"
#include "synfem/solver.hpp"

#include "stokes_oracle.hpp"

using namespace synfem;

namespace {

std::shared_ptr<const Mesh> square(int refine) {
  return std::make_shared<const Mesh>(refine_uniform(unit_square(), refine));
}

ProblemSpec quiet_problem(double cd) {
  ProblemSpec p;
  p.boundary_concentration = [cd](const Vec2&) { return cd; };
  p.stress.range.lo = cd;
  p.stress.range.hi = cd;
  return p;
}

ProblemSpec variable_problem() {
  ProblemSpec p;
  p.boundary_concentration = [](const Vec2& x) { return 1.0 + 0.5 * x.x() * x.y(); };
  p.stress.range.lo = 1.0;
  p.stress.range.hi = 1.5;
  p.force = [](const Vec2& x) { return Vec2(5 * std::sin(6.28 * x.y()), -5 * std::sin(6.28 * x.x())); };
  return p;
}

double integrate(const Mesh& m, int degree, const std::function<double(int, const Vec2&, const Vec2&)>& f) {
  const QuadratureRule rule = triangle_rule(degree);
  double s = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const AffineMap map = m.affine_map(e);
    for (int q = 0; q < rule.size(); ++q)
      s += rule.weights[q] * std::abs(map.determinant) * f(e, rule.points[q], map.to_physical(rule.points[q]));
  }
  return s;
}

}  // namespace

TEST(Coupled, ZeroForcingFixedPoint) {
  for (Pairing pairing : {Pairing::P2_P0, Pairing::P2Bubble_P1Disc}) {
    const Spaces sp = build_spaces(square(2), pairing);
    const SolveResult r = solve_coupled(sp, quiet_problem(2.0), SolverConfig{});
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.outer_iterations, 2);
    EXPECT_LE(r.u.coefficients().lpNorm<Eigen::Infinity>(), 1e-14);
    EXPECT_LE(r.p.coefficients().lpNorm<Eigen::Infinity>(), 1e-14);
    EXPECT_LE((r.c.coefficients().array() - 2.0).abs().maxCoeff(), 1e-12);
    EXPECT_EQ(r.energy.ue1, 0.0);
    EXPECT_EQ(r.energy.pressure_norm, 0.0);
  }
}

TEST(Coupled, VariableExponentConvergesMonotonically) {
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  const SolveResult r = solve_coupled(sp, variable_problem(), SolverConfig{});
  ASSERT_TRUE(r.converged);
  for (std::size_t k = 1; k < r.history.size(); ++k)
    EXPECT_LE(r.history[k].increment, r.history[k - 1].increment);
  EXPECT_LE(constraint_defect(r.u, *sp.pressure), 1e-12);
}

TEST(Coupled, PicardOnlyInnerSolveAgreesWithNewton) {
  const Spaces sp = build_spaces(square(1), Pairing::P2_P0);
  SolverConfig picard;
  picard.inner = InnerLinearization::Picard;
  picard.max_inner = 200;
  const SolveResult a = solve_coupled(sp, variable_problem(), picard);
  const SolveResult b = solve_coupled(sp, variable_problem(), SolverConfig{});
  ASSERT_TRUE(a.converged);
  ASSERT_TRUE(b.converged);
  EXPECT_LE((a.u.coefficients() - b.u.coefficients()).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Momentum, ResidualAfterSolve) {
  const Spaces sp = build_spaces(square(2), Pairing::P2Bubble_P1Disc);
  const ProblemSpec prob = variable_problem();
  const FEFunction c = interpolate(sp.concentration, prob.boundary_concentration);
  const MomentumResult res = solve_momentum(sp, prob, c, Vector(), SolverConfig{});
  ASSERT_TRUE(res.report.converged);
  MomentumProblem mp;
  mp.spaces = &sp;
  mp.stress = prob.stress;
  mp.force = prob.force;
  mp.concentration = &c;
  EXPECT_LE(residual_norm(momentum_residual(mp, res.state), sp), 1e-8);
  // Zero-mean pressure.
  const Vector m = assemble_moments(*sp.pressure);
  EXPECT_NEAR(m.dot(pressure_part(sp, res.state).coefficients()), 0.0, 1e-12);
}

TEST(Momentum, LinearStokesOracle) {
  // r = 2 without convection is linear: compare with a dense solve of the
  // oracle blocks and a separately integrated load. The force is quadratic so
  // both quadratures are exact.
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  ProblemSpec prob = quiet_problem(1.0);
  prob.stress.law = ScalarExponentLaw::constant(2.0);
  prob.stress.nu0 = 1.3;
  prob.force = [](const Vec2& x) { return Vec2(x.y() * x.y() - 2 * x.x(), 3 * x.x() * x.y()); };
  prob.convection = false;
  const FEFunction c = interpolate(sp.concentration, prob.boundary_concentration);
  const MomentumResult res = solve_momentum(sp, prob, c, Vector(), SolverConfig{});
  ASSERT_TRUE(res.report.converged);

  Eigen::MatrixXd a, b;
  synfem::testing_support::stokes_oracle(sp, 1.3, a, b);
  const FESpace& vs = *sp.velocity;
  const int nu = vs.num_dofs(), np = sp.pressure->num_dofs();
  Vector load = Vector::Zero(nu);
  const QuadratureRule rule = triangle_rule(10);
  const Mesh& mesh = vs.mesh();
  std::vector<double> val(vs.local_dofs());
  std::vector<Vec2> grad(vs.local_dofs());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const AffineMap map = mesh.affine_map(e);
    for (int q = 0; q < rule.size(); ++q) {
      reference_basis(vs.family(), rule.points[q], val.data(), grad.data());
      const Vec2 f = prob.force(map.to_physical(rule.points[q]));
      const double w = rule.weights[q] * std::abs(map.determinant);
      for (int i = 0; i < vs.local_dofs(); ++i)
        for (int c2 = 0; c2 < 2; ++c2) load[vs.dof(c2, vs.element_dofs(e)[i])] += w * f[c2] * val[i];
    }
  }
  const Vector mom = assemble_moments(*sp.pressure);
  const int n = nu + np + 1;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  Vector rhs = Vector::Zero(n);
  k.topLeftCorner(nu, nu) = a;
  k.block(0, nu, nu, np) = -b.transpose();
  k.block(nu, 0, np, nu) = -b;
  k.block(nu, nu + np, np, 1) = mom;
  k.block(nu + np, nu, 1, np) = mom.transpose();
  rhs.head(nu) = load;
  for (int d : vs.boundary_dofs()) {
    k.row(d).setZero();
    k.col(d).setZero();
    k(d, d) = 1.0;
    rhs[d] = 0.0;
  }
  const Vector x = k.fullPivLu().solve(rhs);
  EXPECT_LE((x.head(nu) - res.state.head(nu)).lpNorm<Eigen::Infinity>(), 1e-9);
  EXPECT_LE((x.segment(nu, np) - res.state.segment(nu, np)).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Momentum, EnergyIdentity) {
  // Testing with U: int S(C, DU) : DU = <f, U> since B_u[U, U, U] = 0 and U is discretely solenoidal.
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  const ProblemSpec prob = variable_problem();
  const SolveResult r = solve_coupled(sp, prob, SolverConfig{});
  ASSERT_TRUE(r.converged);
  const Mesh& m = sp.velocity->mesh();
  const int deg = momentum_degree(*sp.velocity);
  const double work = integrate(m, deg, [&](int e, const Vec2& ref, const Vec2& x) {
    return prob.force(x).dot(r.u.evaluate(e, ref).value);
  });
  const double dissipation = integrate(m, deg, [&](int e, const Vec2& ref, const Vec2&) {
    const Mat2 g = r.u.evaluate(e, ref).grad;
    const Mat2 d = 0.5 * (g + g.transpose());
    return (stress(r.c.evaluate(e, ref).value[0], d, prob.stress).array() * d.array()).sum();
  });
  EXPECT_NEAR(dissipation, work, 1e-8 * std::max(1.0, std::abs(work)));
}

TEST(Energy, NewtonianScaling) {
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  ProblemSpec prob = quiet_problem(1.0);
  prob.stress.law = ScalarExponentLaw::constant(2.0);
  prob.convection = false;
  prob.force = [](const Vec2& x) { return Vec2(std::sin(3 * x.y()), x.x()); };
  const SolveResult a = solve_coupled(sp, prob, SolverConfig{});
  prob.force = [](const Vec2& x) { return Vec2(2 * std::sin(3 * x.y()), 2 * x.x()); };
  const SolveResult b = solve_coupled(sp, prob, SolverConfig{});
  EXPECT_NEAR(b.energy.gradient_l2, 4.0 * a.energy.gradient_l2, 1e-10 * b.energy.gradient_l2);
}

TEST(Concentration, ConstantsSurviveConvection) {
  const Spaces sp = build_spaces(square(2), Pairing::P2_P0);
  const ProblemSpec prob = quiet_problem(3.0);
  const FEFunction zero(sp.velocity);
  EXPECT_LE((solve_concentration(sp, prob, zero).coefficients().array() - 3.0).abs().maxCoeff(), 1e-12);
  // Pure shear, not zero on the boundary; constants still solve the skew form.
  const FEFunction shear = interpolate(sp.velocity, VectorField([](const Vec2& x) { return Vec2(x.y(), 0.0); }));
  EXPECT_LE((solve_concentration(sp, prob, shear).coefficients().array() - 3.0).abs().maxCoeff(), 1e-12);
}

TEST(Concentration, ManufacturedNodalErrorIsSecondOrder) {
  StressParams stress;
  const ManufacturedSolution s = default_manufactured();
  std::vector<double> err;
  for (int l = 2; l <= 5; ++l) {
    const Spaces sp = build_spaces(square(l), Pairing::P2_P0);
    ManufacturedSolution cs = s;
    cs.c = Expr(1.0) + sin(Expr::x() * Expr(2.0)) * Expr::y();
    stress.range.lo = 1.0;
    stress.range.hi = 2.0;
    const Manufactured m = manufacture(cs, stress, FluxParams{});
    ProblemSpec prob;
    prob.boundary_concentration = m.concentration;
    prob.concentration_forcing = m.concentration_forcing;
    const FEFunction u = interpolate(sp.velocity, m.velocity);
    const FEFunction c = solve_concentration(sp, prob, u);
    double e = 0.0;
    for (int i = 0; i < sp.concentration->num_dofs(); ++i)
      e = std::max(e, std::abs(c.coefficients()[i] - m.concentration(sp.concentration->dof_point(i))));
    err.push_back(e);
  }
  EXPECT_GT(std::log2(err[2] / err[3]), 1.8);
}

TEST(Config, Validation) {
  SolverConfig c;
  c.validate();
  c.damping = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Serialization, RoundTrip) {
  const Spaces sp = build_spaces(square(1), Pairing::P2Bubble_P1Disc);
  const SolveResult r = solve_coupled(sp, variable_problem(), SolverConfig{});
  const std::string path = ::testing::TempDir() + "synfem_roundtrip.bin";
  write_solution(path, r, sp);
  const StoredSolution s = read_solution(path);
  std::remove(path.c_str());
  const auto header = nlohmann::json::parse(s.header);
  EXPECT_EQ(header.at("pairing"), to_string(sp.pairing));
  EXPECT_EQ(header.at("mesh").at("elements"), sp.velocity->mesh().num_elements());
  ASSERT_EQ(s.fields.size(), 3u);
  EXPECT_EQ(s.fields[0].second, r.u.coefficients());
  EXPECT_EQ(s.fields[1].second, r.p.coefficients());
  EXPECT_EQ(s.fields[2].second, r.c.coefficients());
}

TEST(Serialization, RejectsForeignFile) {
  const std::string path = ::testing::TempDir() + "synfem_bad.bin";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not a solution", f);
    std::fclose(f);
  }
  EXPECT_THROW(read_solution(path), Error);
  std::remove(path.c_str());
}

TEST(History, CsvHasOneRowPerOuterIteration) {
  const Spaces sp = build_spaces(square(1), Pairing::P2_P0);
  const SolveResult r = solve_coupled(sp, variable_problem(), SolverConfig{});
  std::ostringstream os;
  write_history_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  int lines = 0;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("outer,increment", 0), 0u);
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, static_cast<int>(r.history.size()));
}
