#include "synfem/manufacture.hpp"

#include <cmath>
#include <memory>

#include "synfem/error.hpp"

namespace synfem {

ManufacturedSolution default_manufactured() {
  const Expr x = Expr::x(), y = Expr::y();
  const Expr one(1.0);
  const Expr psi = x * x * (one - x) * (one - x) * y * y * (one - y) * (one - y);
  ManufacturedSolution s;
  s.u1 = psi.diff(1);
  s.u2 = -psi.diff(0);
  s.p = (x - Expr(0.5)) * (y - Expr(0.5));
  s.c = one + Expr(0.5) * x * y;
  return s;
}

ScalarField to_field(const Expr& e) {
  auto c = std::make_shared<CompiledExpr>(e);
  return [c](const Vec2& p) { return (*c)(p.x(), p.y()); };
}

double max_divergence(const Expr& u1, const Expr& u2, const Eigen::Vector4d& box, int n) {
  const CompiledExpr div(u1.diff(0) + u2.diff(1));
  double m = 0.0;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const double x = box[0] + (box[1] - box[0]) * i / n;
      const double y = box[2] + (box[3] - box[2]) * j / n;
      m = std::max(m, std::abs(div(x, y)));
    }
  }
  return m;
}

Manufactured manufacture(const ManufacturedSolution& sol, const StressParams& stress,
                         const FluxParams& flux, bool convection, const Eigen::Vector4d& box) {
  if (!stress.law.is_rational()) {
    throw Error("manufactured solutions need a rational exponent law");
  }
  // Scale for the solenoidal test: size of the velocity gradient.
  double scale = 0.0;
  {
    const CompiledExpr g11(sol.u1.diff(0)), g12(sol.u1.diff(1)), g21(sol.u2.diff(0)), g22(sol.u2.diff(1));
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j) {
        const double x = box[0] + (box[1] - box[0]) * i / 20.0, y = box[2] + (box[3] - box[2]) * j / 20.0;
        scale = std::max({scale, std::abs(g11(x, y)), std::abs(g12(x, y)), std::abs(g21(x, y)),
                          std::abs(g22(x, y))});
      }
  }
  const double div = max_divergence(sol.u1, sol.u2, box);
  if (div > 1e-10 * std::max(1.0, scale)) {
    throw Error("manufactured velocity is not solenoidal (max |div u| = " + std::to_string(div) + ")");
  }

  Manufactured m;
  m.exact = sol;
  const Expr& u1 = sol.u1;
  const Expr& u2 = sol.u2;
  const Expr d11 = u1.diff(0), d22 = u2.diff(1);
  const Expr d12 = Expr(0.5) * (u1.diff(1) + u2.diff(0));
  const Expr dd = d11 * d11 + Expr(2.0) * d12 * d12 + d22 * d22;
  const Expr r = Expr(stress.law.a()) + Expr(stress.law.b()) * sol.c / (Expr(1.0) + sol.c);
  const Expr phi = Expr(stress.nu0) *
                   pow(Expr(stress.kappa1) + Expr(stress.kappa2) * dd, (r - Expr(2.0)) / Expr(2.0));
  const Expr s11 = phi * d11, s12 = phi * d12, s22 = phi * d22;
  m.f1 = -(s11.diff(0) + s12.diff(1)) + sol.p.diff(0);
  m.f2 = -(s12.diff(0) + s22.diff(1)) + sol.p.diff(1);
  if (convection) {
    m.f1 = m.f1 + (u1 * u1).diff(0) + (u1 * u2).diff(1);
    m.f2 = m.f2 + (u2 * u1).diff(0) + (u2 * u2).diff(1);
  }
  Expr k(flux.k0);
  if (flux.k1 != 0.0) k = k + Expr(flux.k1) / (Expr(1.0) + sqrt(dd));
  m.g = (sol.c * u1).diff(0) + (sol.c * u2).diff(1) - (k * sol.c.diff(0)).diff(0) -
        (k * sol.c.diff(1)).diff(1);

  const ScalarField fu1 = to_field(u1), fu2 = to_field(u2);
  m.velocity = [fu1, fu2](const Vec2& x) { return Vec2(fu1(x), fu2(x)); };
  const ScalarField g11 = to_field(u1.diff(0)), g12 = to_field(u1.diff(1));
  const ScalarField g21 = to_field(u2.diff(0)), g22 = to_field(u2.diff(1));
  m.velocity_gradient = [=](const Vec2& x) {
    Mat2 g;
    g << g11(x), g12(x), g21(x), g22(x);
    return g;
  };
  m.pressure = to_field(sol.p);
  m.concentration = to_field(sol.c);
  const ScalarField cx = to_field(sol.c.diff(0)), cy = to_field(sol.c.diff(1));
  m.concentration_gradient = [cx, cy](const Vec2& x) { return Vec2(cx(x), cy(x)); };
  const ScalarField f1 = to_field(m.f1), f2 = to_field(m.f2);
  m.force = [f1, f2](const Vec2& x) { return Vec2(f1(x), f2(x)); };
  m.concentration_forcing = to_field(m.g);
  return m;
}

}  // namespace synfem
