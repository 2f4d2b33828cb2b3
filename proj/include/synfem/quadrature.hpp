#pragma once

#include <vector>

#include "synfem/mesh.hpp"

namespace synfem {

/// Points and weights on the reference simplex {(0,0),(1,0),(0,1)}.
/// Weights are positive and sum to 1/2.
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  int degree = 0;

  int size() const { return static_cast<int>(points.size()); }
};

/// Gauss-Legendre rule with n points on [0, 1].
void gauss_legendre(int n, std::vector<double>& points, std::vector<double>& weights);

/// Collapsed (Duffy) Gauss product rule exact for polynomials of total
/// degree <= `degree` on the reference triangle.
QuadratureRule triangle_rule(int degree);

/// Gauss rule on [0, 1] exact up to `degree`.
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};
LineRule line_rule(int degree);

/// Default order for nonlinear integrands.
inline constexpr int kAssemblyDegree = 6;

}  // namespace synfem
