#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "synfem/fespace.hpp"
#include "synfem/quadrature.hpp"

namespace synfem::testing_support {

// Standalone Stokes blocks: nu0 int D(u):D(v) and int q div v, built
// element by element from the reference basis.
inline void stokes_oracle(const Spaces& sp, double nu0, Eigen::MatrixXd& a, Eigen::MatrixXd& b) {
  const FESpace& vs = *sp.velocity;
  const FESpace& ps = *sp.pressure;
  const Mesh& m = vs.mesh();
  const QuadratureRule rule = triangle_rule(6);
  a = Eigen::MatrixXd::Zero(vs.num_dofs(), vs.num_dofs());
  b = Eigen::MatrixXd::Zero(ps.num_dofs(), vs.num_dofs());
  const int nl = vs.local_dofs(), pl = ps.local_dofs();
  std::vector<double> val(nl), pval(pl);
  std::vector<Vec2> grad(nl), pgrad(pl);
  for (int e = 0; e < m.num_elements(); ++e) {
    const AffineMap map = m.affine_map(e);
    const double det = std::abs(map.determinant);
    const auto& vd = vs.element_dofs(e);
    const auto& pd = ps.element_dofs(e);
    for (int q = 0; q < rule.size(); ++q) {
      reference_basis(vs.family(), rule.points[q], val.data(), grad.data());
      reference_basis(ps.family(), rule.points[q], pval.data(), pgrad.data());
      const double w = rule.weights[q] * det;
      for (int ci = 0; ci < 2; ++ci)
        for (int i = 0; i < nl; ++i) {
          Mat2 gi = Mat2::Zero();
          gi.row(ci) = map.physical_gradient(grad[i]).transpose();
          const Mat2 di = 0.5 * (gi + gi.transpose());
          const int row = vs.dof(ci, vd[i]);
          for (int k = 0; k < pl; ++k) b(pd[k], row) += w * pval[k] * gi.trace();
          for (int cj = 0; cj < 2; ++cj)
            for (int j = 0; j < nl; ++j) {
              Mat2 gj = Mat2::Zero();
              gj.row(cj) = map.physical_gradient(grad[j]).transpose();
              const Mat2 dj = 0.5 * (gj + gj.transpose());
              a(row, vs.dof(cj, vd[j])) += w * nu0 * (di.array() * dj.array()).sum();
            }
        }
    }
  }
}

}  // namespace synfem::testing_support
