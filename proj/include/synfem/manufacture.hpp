#pragma once

#include <functional>

#include "synfem/expr.hpp"
#include "synfem/fespace.hpp"
#include "synfem/physics.hpp"

namespace synfem {

struct ManufacturedSolution {
  Expr u1, u2;  // velocity, must be solenoidal
  Expr p;       // zero mean
  Expr c;       // concentration (its trace is c_d)
};

/// u = curl psi with psi = x^2 (1-x)^2 y^2 (1-y)^2, p = (x - 1/2)(y - 1/2),
/// c = 1 + x y / 2.
ManufacturedSolution default_manufactured();

/// Closed forms plus the forcing terms
///   f = -div S(c, Du) + div(u (x) u) + grad p
///   g = div(c u) - div(K grad c)
struct Manufactured {
  ManufacturedSolution exact;
  Expr f1, f2, g;

  VectorField velocity;
  std::function<Mat2(const Vec2&)> velocity_gradient;  // row i = grad u_i
  ScalarField pressure;
  ScalarField concentration;
  std::function<Vec2(const Vec2&)> concentration_gradient;
  VectorField force;
  ScalarField concentration_forcing;
};

/// Requires a rational exponent law. Throws when u is not solenoidal
/// (checked by sampling div u on a grid over [xmin, xmax] x [ymin, ymax]).
Manufactured manufacture(const ManufacturedSolution& sol, const StressParams& stress,
                         const FluxParams& flux, bool convection = true,
                         const Eigen::Vector4d& box = Eigen::Vector4d(0, 1, 0, 1));

/// max |div u| over a uniform grid of the box.
double max_divergence(const Expr& u1, const Expr& u2, const Eigen::Vector4d& box, int n = 41);

ScalarField to_field(const Expr& e);

}  // namespace synfem
