#include "synfem/projections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "synfem/assembly.hpp"
#include "synfem/error.hpp"
#include "synfem/quadrature.hpp"

namespace synfem {

namespace {

constexpr int kProjectionDegree = 10;

int min_element(const std::array<int, 2>& pair) {
  if (pair[1] < 0) return pair[0];
  return std::min(pair[0], pair[1]);
}

// Outward unit normal and length of local edge k of element e.
std::pair<Vec2, double> edge_normal(const Mesh& m, int e, int k) {
  const auto& el = m.element(e);
  const Vec2 a = m.vertex(el[(k + 1) % 3]), b = m.vertex(el[(k + 2) % 3]);
  const Vec2 t = b - a;
  const double len = t.norm();
  // Counterclockwise elements: the outward normal is the tangent turned clockwise.
  return {Vec2(t.y(), -t.x()) / len, len};
}

}  // namespace

PointField field_from(const FEFunction& f) {
  return [f](int e, const Vec2& x) {
    return f.evaluate(e, f.space().mesh().affine_map(e).to_reference(x));
  };
}

PointField field_from(const VectorField& v) {
  return [v](int, const Vec2& x) {
    PointEval p;
    p.value = v(x);
    return p;
  };
}

PointField field_from(const ScalarField& s) {
  return [s](int, const Vec2& x) {
    PointEval p;
    p.value[0] = s(x);
    return p;
  };
}

PointField field_from(const VectorField& v, const std::function<Mat2(const Vec2&)>& grad) {
  return [v, grad](int, const Vec2& x) {
    PointEval p;
    p.value = v(x);
    p.grad = grad(x);
    return p;
  };
}

FEFunction project_div(const PointField& v, const Spaces& spaces) {
  const FESpace& vs = *spaces.velocity;
  const FESpace& ps = *spaces.pressure;
  const Mesh& m = vs.mesh();
  const int nv = m.num_vertices(), ne = m.num_edges();
  const QuadratureRule rule = triangle_rule(kProjectionDegree);
  const TabulatedBasis tb = tabulate(vs.family(), rule);
  const int nl = tb.local;

  // Reference local mass matrix; the physical one is a multiple of it.
  Eigen::MatrixXd mref = Eigen::MatrixXd::Zero(nl, nl);
  for (int q = 0; q < rule.size(); ++q)
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) mref(i, j) += rule.weights[q] * tb.values[q][i] * tb.values[q][j];
  const Eigen::LDLT<Eigen::MatrixXd> mref_ldlt(mref);

  // Owner element for each scalar DOF.
  std::vector<int> owner(vs.scalar_dofs(), -1);
  for (int e = 0; e < m.num_elements(); ++e) {
    for (int s : vs.element_dofs(e))
      if (owner[s] < 0) owner[s] = e;  // elements are visited in increasing order
  }

  FEFunction out(spaces.velocity);
  Vector& a = out.coefficients();
  // Step 1: element dual-basis coefficients.
  for (int e = 0; e < m.num_elements(); ++e) {
    const AffineMap map = m.affine_map(e);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nl, 2);
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 val = v(e, map.to_physical(rule.points[q])).value;
      for (int i = 0; i < nl; ++i) {
        rhs(i, 0) += rule.weights[q] * val[0] * tb.values[q][i];
        rhs(i, 1) += rule.weights[q] * val[1] * tb.values[q][i];
      }
    }
    const Eigen::MatrixXd coef = mref_ldlt.solve(rhs);
    const auto& d = vs.element_dofs(e);
    for (int i = 0; i < nl; ++i) {
      if (owner[d[i]] != e || vs.is_boundary_scalar(d[i])) continue;
      a[vs.dof(0, d[i])] = coef(i, 0);
      a[vs.dof(1, d[i])] = coef(i, 1);
    }
  }

  // Step 2: match int_e v on interior edges with the P2 edge function,
  // whose integral over its edge is 2|e|/3. Vertex functions integrate to
  // |e|/6 each; other edge functions and the bubble vanish on e.
  const LineRule lr = line_rule(kProjectionDegree);
  for (int i = 0; i < ne; ++i) {
    if (m.is_boundary_edge(i)) continue;
    const int e = min_element(m.edge_elements(i));
    const Vec2 p0 = m.vertex(m.edge(i)[0]), p1 = m.vertex(m.edge(i)[1]);
    const double len = (p1 - p0).norm();
    Vec2 target = Vec2::Zero();
    for (std::size_t q = 0; q < lr.points.size(); ++q) {
      target += lr.weights[q] * len * v(e, p0 + lr.points[q] * (p1 - p0)).value;
    }
    const int s = nv + i;
    for (int c = 0; c < 2; ++c) {
      const double current = len / 6.0 * (a[vs.dof(c, m.edge(i)[0])] + a[vs.dof(c, m.edge(i)[1])]) +
                             2.0 * len / 3.0 * a[vs.dof(c, s)];
      a[vs.dof(c, s)] += (target[c] - current) / (2.0 * len / 3.0);
    }
  }

  // Step 3: linear divergence moments via the element bubble.
  if (ps.family() == Family::P1Disc) {
    if (vs.family() != Family::P2Bubble) throw Error("project_div: P1disc pressure needs bubbles");
    const QuadratureRule r4 = triangle_rule(kProjectionDegree);
    for (int e = 0; e < m.num_elements(); ++e) {
      const AffineMap map = m.affine_map(e);
      const double area = m.area(e);
      const Vec2 xe = m.centroid(e);
      // moment_k(w) = int_dE w.n (x - xE)_k - int_E w_k
      auto moments = [&](const std::function<Vec2(const Vec2&)>& w) {
        Vec2 mom = Vec2::Zero();
        for (int k = 0; k < 3; ++k) {
          const auto [n, len] = edge_normal(m, e, k);
          const auto& el = m.element(e);
          const Vec2 p0 = m.vertex(el[(k + 1) % 3]), p1 = m.vertex(el[(k + 2) % 3]);
          for (std::size_t q = 0; q < lr.points.size(); ++q) {
            const Vec2 x = p0 + lr.points[q] * (p1 - p0);
            mom += lr.weights[q] * len * w(x).dot(n) * (x - xe);
          }
        }
        for (int q = 0; q < r4.size(); ++q) {
          const Vec2 x = map.to_physical(r4.points[q]);
          mom -= r4.weights[q] * 2.0 * area * w(x);
        }
        return mom;
      };
      const Vec2 target = moments([&](const Vec2& x) { return v(e, x).value; });
      const Vec2 current = moments([&](const Vec2& x) { return out.evaluate(e, map.to_reference(x)).value; });
      // Adding beta e_k b_E changes moment k by -beta int b_E = -beta 9|E|/20.
      const int s = vs.element_dofs(e)[6];
      for (int c = 0; c < 2; ++c) a[vs.dof(c, s)] -= (target[c] - current[c]) / (9.0 * area / 20.0);
    }
  }
  return out;
}

FEFunction project_Q(const PointField& q, SpacePtr pressure) {
  const FESpace& ps = *pressure;
  const Mesh& m = ps.mesh();
  const QuadratureRule rule = triangle_rule(kProjectionDegree);
  const TabulatedBasis tb = tabulate(ps.family(), rule);
  const int nl = tb.local;
  Eigen::MatrixXd mref = Eigen::MatrixXd::Zero(nl, nl);
  for (int k = 0; k < rule.size(); ++k)
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j) mref(i, j) += rule.weights[k] * tb.values[k][i] * tb.values[k][j];
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(mref);
  FEFunction out(pressure);
  for (int e = 0; e < m.num_elements(); ++e) {
    const AffineMap map = m.affine_map(e);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nl);
    for (int k = 0; k < rule.size(); ++k) {
      const double val = q(e, map.to_physical(rule.points[k])).value[0];
      for (int i = 0; i < nl; ++i) rhs[i] += rule.weights[k] * val * tb.values[k][i];
    }
    const Eigen::VectorXd c = ldlt.solve(rhs);
    const auto& d = ps.element_dofs(e);
    for (int i = 0; i < nl; ++i) out.coefficients()[d[i]] = c[i];
  }
  return out;
}

FEFunction project_Z(const PointField& z, SpacePtr concentration) {
  const FESpace& zs = *concentration;
  if (zs.family() != Family::P1) throw Error("project_Z: P1 space expected");
  const Mesh& m = zs.mesh();
  const QuadratureRule rule = triangle_rule(kProjectionDegree);
  FEFunction out(concentration);
  for (int v = 0; v < m.num_vertices(); ++v) {
    if (m.is_boundary_vertex(v)) continue;
    const auto& ve = m.vertex_elements(v);
    const int e = *std::min_element(ve.begin(), ve.end());
    const auto& el = m.element(e);
    const int k = static_cast<int>(std::find(el.begin(), el.end(), v) - el.begin());
    const AffineMap map = m.affine_map(e);
    double s = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2& xi = rule.points[q];
      const double lam[3] = {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
      // |E| cancels against the Jacobian: weight 2|E| w_q, dual (12 l - 3)/|E|.
      s += rule.weights[q] * 2.0 * z(e, map.to_physical(xi)).value[0] * (12.0 * lam[k] - 3.0);
    }
    out.coefficients()[v] = s;
  }
  return out;
}

Vector divergence_targets(const PointField& v, const FESpace& ps) {
  const Mesh& m = ps.mesh();
  const QuadratureRule rule = triangle_rule(kProjectionDegree);
  const LineRule lr = line_rule(kProjectionDegree);
  Vector t = Vector::Zero(ps.num_dofs());
  const int nl = ps.local_dofs();
  double val[7];
  Vec2 grad[7];
  for (int e = 0; e < m.num_elements(); ++e) {
    const AffineMap map = m.affine_map(e);
    const Mat2 jinv_t = map.inverse.transpose();
    const auto& d = ps.element_dofs(e);
    const auto& el = m.element(e);
    for (int k = 0; k < 3; ++k) {
      const auto [n, len] = edge_normal(m, e, k);
      const Vec2 p0 = m.vertex(el[(k + 1) % 3]), p1 = m.vertex(el[(k + 2) % 3]);
      for (std::size_t q = 0; q < lr.points.size(); ++q) {
        const Vec2 x = p0 + lr.points[q] * (p1 - p0);
        reference_basis(ps.family(), map.to_reference(x), val, grad);
        const double vn = v(e, x).value.dot(n);
        for (int j = 0; j < nl; ++j) t[d[j]] += lr.weights[q] * len * vn * val[j];
      }
    }
    for (int q = 0; q < rule.size(); ++q) {
      reference_basis(ps.family(), rule.points[q], val, grad);
      const Vec2 vv = v(e, map.to_physical(rule.points[q])).value;
      for (int j = 0; j < nl; ++j) {
        t[d[j]] -= rule.weights[q] * std::abs(map.determinant) * vv.dot(jinv_t * grad[j]);
      }
    }
  }
  return t;
}

double divergence_defect(const FEFunction& projected, const PointField& v, const FESpace& ps) {
  const Vector a = divergence_moments(projected, ps);
  const Vector b = divergence_targets(v, ps);
  return (a - b).lpNorm<Eigen::Infinity>();
}

std::vector<double> local_stability_ratios(const Mesh& m, const PointField& original,
                                           const FEFunction& projected, bool patch) {
  const QuadratureRule rule = triangle_rule(kProjectionDegree);
  const int nt = m.num_elements();
  const int nc = projected.space().components();
  std::vector<double> iv(nt, 0.0), ig(nt, 0.0), pv(nt, 0.0), pg(nt, 0.0);
  for (int e = 0; e < nt; ++e) {
    const AffineMap map = m.affine_map(e);
    const double det = std::abs(map.determinant);
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 x = map.to_physical(rule.points[q]);
      const PointEval o = original(e, x);
      const PointEval p = projected.evaluate(e, rule.points[q]);
      const double w = rule.weights[q] * det;
      iv[e] += w * o.value.head(nc).norm();
      ig[e] += w * o.grad.topRows(nc).norm();
      pv[e] += w * p.value.head(nc).norm();
      pg[e] += w * p.grad.topRows(nc).norm();
    }
  }
  std::vector<double> ratios(nt, 0.0);
  const std::vector<Patch> pats = patch ? patches(m) : std::vector<Patch>{};
  for (int e = 0; e < nt; ++e) {
    const double h = m.diameter(e);
    const double num = (pv[e] + h * pg[e]) / m.area(e);
    double den = 0.0, area = 0.0;
    if (patch) {
      for (int f : pats[e].members) {
        den += iv[f] + h * ig[f];
        area += m.area(f);
      }
    } else {
      den = iv[e] + h * ig[e];
      area = m.area(e);
    }
    den /= area;
    ratios[e] = den > 1e-300 ? num / den : (num > 1e-300 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  return ratios;
}

ProjectionReport projection_report(const Spaces& spaces, const std::vector<PointField>& velocities,
                                   const std::vector<PointField>& pressures,
                                   const std::vector<PointField>& concentrations) {
  ProjectionReport rep;
  const Mesh& m = spaces.velocity->mesh();
  auto fold = [&](std::vector<double>& acc, const std::vector<double>& r) {
    if (acc.empty()) acc.assign(r.size(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) acc[i] = std::max(acc[i], r[i]);
  };
  for (const auto& v : velocities) {
    const FEFunction pv = project_div(v, spaces);
    rep.divergence_defect = std::max(rep.divergence_defect, divergence_defect(pv, v, *spaces.pressure));
    fold(rep.c1_elements, local_stability_ratios(m, v, pv, true));
  }
  for (const auto& q : pressures) {
    fold(rep.c2_elements, local_stability_ratios(m, q, project_Q(q, spaces.pressure), false));
  }
  for (const auto& z : concentrations) {
    fold(rep.c3_elements, local_stability_ratios(m, z, project_Z(z, spaces.concentration), true));
  }
  auto max_of = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  };
  rep.c1 = max_of(rep.c1_elements);
  rep.c2 = max_of(rep.c2_elements);
  rep.c3 = max_of(rep.c3_elements);
  return rep;
}

VariableStability variable_exponent_stability_check(const PointField& v, const Spaces& spaces,
                                                    const ExponentField& r) {
  const FEFunction pv = project_div(v, spaces);
  const Mesh& m = spaces.velocity->mesh();
  VariableStability out;
  out.lhs = modular(sample_gradient(pv, r));
  out.rhs = modular(sample(m, r, [&](int e, const Vec2&, const Vec2& x) { return v(e, x).grad.norm(); }));
  out.slack = std::pow(m.h_max(), 3.0);
  out.ratio = out.rhs > 0 ? out.lhs / out.rhs : 1.0;
  out.slack_ratio = out.rhs > 0 ? (out.lhs - out.slack) / out.rhs : 1.0;
  return out;
}

}  // namespace synfem
