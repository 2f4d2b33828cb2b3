#include "synfem/assembly.hpp"

#include <algorithm>
#include <cmath>

#include "synfem/error.hpp"

namespace synfem {

namespace {

void check_same_mesh(const FEFunction& a, const FEFunction& b, const char* who) {
  if (&a.space().mesh() != &b.space().mesh()) {
    throw Error(std::string(who) + ": functions live on different meshes");
  }
}

// Physical gradients of the tabulated basis at point q.
void physical_grads(const TabulatedBasis& t, int q, const Mat2& jinv_t, std::vector<Vec2>& out) {
  out.resize(t.local);
  for (int i = 0; i < t.local; ++i) out[i] = jinv_t * t.ref_grads[q][i];
}

// Value and gradient of a function given gathered local coefficients.
PointEval combine(const TabulatedBasis& t, int q, const std::vector<Vec2>& grads,
                  const std::vector<double>& local, int components) {
  PointEval p;
  for (int c = 0; c < components; ++c) {
    Vec2 g = Vec2::Zero();
    for (int i = 0; i < t.local; ++i) {
      const double a = local[c * t.local + i];
      p.value[c] += a * t.values[q][i];
      g += a * grads[i];
    }
    p.grad.row(c) = g.transpose();
  }
  return p;
}

}  // namespace

double trilinear_Bu(const FEFunction& v, const FEFunction& w, const FEFunction& h, int degree) {
  check_same_mesh(v, w, "trilinear_Bu");
  check_same_mesh(v, h, "trilinear_Bu");
  if (v.space().components() != 2 || w.space().components() != 2 || h.space().components() != 2) {
    throw Error("trilinear_Bu: vector-valued arguments required");
  }
  const Mesh& m = v.space().mesh();
  const QuadratureRule rule = triangle_rule(degree);
  double total = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const AffineMap map = m.affine_map(e);
    const double jac = std::abs(map.determinant);
    double local = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      const PointEval pv = v.evaluate(e, rule.points[q]);
      const PointEval pw = w.evaluate(e, rule.points[q]);
      const PointEval ph = h.evaluate(e, rule.points[q]);
      // (v.grad) w = grad_w v with grad rows per component.
      local += rule.weights[q] * 0.5 *
               ((pw.grad * pv.value).dot(ph.value) - (ph.grad * pv.value).dot(pw.value));
    }
    total += jac * local;
  }
  return total;
}

double trilinear_Bc(const FEFunction& b, const FEFunction& v, const FEFunction& z, int degree) {
  check_same_mesh(b, v, "trilinear_Bc");
  check_same_mesh(b, z, "trilinear_Bc");
  if (b.space().components() != 1 || z.space().components() != 1 || v.space().components() != 2) {
    throw Error("trilinear_Bc: expects (scalar, vector, scalar)");
  }
  const Mesh& m = b.space().mesh();
  const QuadratureRule rule = triangle_rule(degree);
  double total = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const double jac = std::abs(m.affine_map(e).determinant);
    double local = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      const PointEval pb = b.evaluate(e, rule.points[q]);
      const PointEval pv = v.evaluate(e, rule.points[q]);
      const PointEval pz = z.evaluate(e, rule.points[q]);
      const Vec2 gb = pb.grad.row(0).transpose(), gz = pz.grad.row(0).transpose();
      local += rule.weights[q] * 0.5 *
               (pz.value[0] * pv.value.dot(gb) - pb.value[0] * pv.value.dot(gz));
    }
    total += jac * local;
  }
  return total;
}

double bu_bound_check(const FEFunction& v, const FEFunction& w, const FEFunction& h,
                      const ExponentField& r) {
  const double nv = sobolev_norm(v, r), nw = sobolev_norm(w, r), nh = sobolev_norm(h, r);
  if (nv == 0.0 || nw == 0.0 || nh == 0.0) return 0.0;
  return std::abs(trilinear_Bu(v, w, h)) / (nv * nw * nh);
}

int momentum_degree(const FESpace& velocity) {
  return velocity.family() == Family::P2Bubble ? 8 : kAssemblyDegree;
}

SaddleLayout saddle_layout(const Spaces& s) {
  return {s.velocity->num_dofs(), s.pressure->num_dofs()};
}

namespace {

struct MomentumKernel {
  const MomentumProblem& prob;
  const FESpace& vs;
  const FESpace& ps;
  const Mesh& mesh;
  QuadratureRule rule;
  TabulatedBasis tv, tp;
  SaddleLayout lay;

  explicit MomentumKernel(const MomentumProblem& p)
      : prob(p),
        vs(*p.spaces->velocity),
        ps(*p.spaces->pressure),
        mesh(vs.mesh()),
        rule(triangle_rule(momentum_degree(vs))),
        tv(tabulate(vs.family(), rule)),
        tp(tabulate(ps.family(), rule)),
        lay(saddle_layout(*p.spaces)) {}

  double concentration(int e, const Vec2& ref) const {
    if (prob.concentration == nullptr) return prob.stress.range.lo;
    return prob.concentration->evaluate(e, ref).value[0];
  }

  // Assemble residual, and the Jacobian when `jac` is non-null.
  void run(const Vector& x, Vector& res, TripletBuffer* jac, Linearization lin) const {
    if (x.size() != lay.size()) throw Error("momentum: state has wrong length");
    res = Vector::Zero(lay.size());
    const int nl = tv.local, npl = tp.local;
    const double mu = x[lay.multiplier()];
    std::vector<double> ul(2 * nl), pl(npl);
    std::vector<Vec2> grads;
    std::vector<Eigen::Vector3d> mandel(2 * nl);
    Eigen::MatrixXd kuu(2 * nl, 2 * nl), kup(2 * nl, npl);
    Eigen::VectorXd ru(2 * nl), rp(npl), mp(npl);
    const Vec2 zero = Vec2::Zero();

    for (int e = 0; e < mesh.num_elements(); ++e) {
      const AffineMap map = mesh.affine_map(e);
      const Mat2 jinv_t = map.inverse.transpose();
      const double det = std::abs(map.determinant);
      const auto& vd = vs.element_dofs(e);
      const auto& pd = ps.element_dofs(e);
      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < nl; ++i) ul[c * nl + i] = x[vs.dof(c, vd[i])];
      for (int j = 0; j < npl; ++j) pl[j] = x[lay.pressure(pd[j])];
      kuu.setZero();
      kup.setZero();
      ru.setZero();
      rp.setZero();
      mp.setZero();

      for (int q = 0; q < rule.size(); ++q) {
        const double w = rule.weights[q] * det;
        const Vec2& xi = rule.points[q];
        const Vec2 xq = map.to_physical(xi);
        physical_grads(tv, q, jinv_t, grads);
        const PointEval u = combine(tv, q, grads, ul, 2);
        double p = 0.0;
        for (int j = 0; j < npl; ++j) p += pl[j] * tp.values[q][j];
        const Mat2 du = 0.5 * (u.grad + u.grad.transpose());
        const double r = prob.stress.exponent(concentration(e, xi));
        const double phi = viscosity(r, du.squaredNorm(), prob.stress);
        if (!std::isfinite(phi)) throw Error("momentum: viscosity overflow at element " + std::to_string(e));
        const Mat2 s = phi * du;
        const Vec2 f = prob.force ? prob.force(xq) : zero;
        const Vec2 gu_u = u.grad * u.value;  // (u.grad) u

        for (int c = 0; c < 2; ++c) {
          for (int i = 0; i < nl; ++i) {
            const int a = c * nl + i;
            const double phi_i = tv.values[q][i];
            const Vec2& g = grads[i];
            double val = s.row(c).dot(g.transpose()) - p * g[c] - f[c] * phi_i;
            if (prob.convection) val += 0.5 * (gu_u[c] * phi_i - g.dot(u.value) * u.value[c]);
            ru[a] += w * val;
            Mat2 dv = Mat2::Zero();
            dv.row(c) = g.transpose();
            mandel[a] = to_mandel(0.5 * (dv + dv.transpose()));
          }
        }
        for (int j = 0; j < npl; ++j) {
          const double qv = tp.values[q][j];
          rp[j] += w * (-qv * u.grad.trace() + mu * qv);
          mp[j] += w * qv;
        }
        if (jac == nullptr) continue;

        Eigen::Matrix3d tangent;
        if (lin == Linearization::Newton) {
          tangent = stress_jacobian_with_exponent(r, du, prob.stress);
        } else {
          tangent = phi * Eigen::Matrix3d::Identity();
        }
        for (int c = 0; c < 2; ++c) {
          for (int i = 0; i < nl; ++i) {
            const int a = c * nl + i;
            const Eigen::Vector3d tm = tangent * mandel[a];
            const double phi_i = tv.values[q][i];
            const Vec2& gi = grads[i];
            for (int d = 0; d < 2; ++d) {
              for (int k = 0; k < nl; ++k) {
                const int b = d * nl + k;
                double val = tm.dot(mandel[b]);
                if (prob.convection) {
                  const double phi_k = tv.values[q][k];
                  const Vec2& gk = grads[k];
                  double conv = 0.0;
                  if (c == d) conv += gk.dot(u.value) * phi_i - gi.dot(u.value) * phi_k;
                  if (lin == Linearization::Newton) {
                    conv += u.grad(c, d) * phi_k * phi_i - gi[d] * phi_k * u.value[c];
                  }
                  val += 0.5 * conv;
                }
                kuu(a, b) += w * val;
              }
            }
            for (int j = 0; j < npl; ++j) kup(a, j) -= w * tp.values[q][j] * gi[c];
          }
        }
      }

      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < nl; ++i) res[vs.dof(c, vd[i])] += ru[c * nl + i];
      for (int j = 0; j < npl; ++j) {
        res[lay.pressure(pd[j])] += rp[j];
        res[lay.multiplier()] += mp[j] * pl[j];
      }
      if (jac == nullptr) continue;
      for (int a = 0; a < 2 * nl; ++a) {
        const int ga = vs.dof(a / nl, vd[a % nl]);
        for (int b = 0; b < 2 * nl; ++b) jac->add(ga, vs.dof(b / nl, vd[b % nl]), kuu(a, b));
        for (int j = 0; j < npl; ++j) {
          jac->add(ga, lay.pressure(pd[j]), kup(a, j));
          jac->add(lay.pressure(pd[j]), ga, kup(a, j));
        }
      }
      for (int j = 0; j < npl; ++j) {
        jac->add(lay.pressure(pd[j]), lay.multiplier(), mp[j]);
        jac->add(lay.multiplier(), lay.pressure(pd[j]), mp[j]);
      }
    }
    // Velocity boundary rows carry U_i itself.
    for (int dof : vs.boundary_dofs()) res[dof] = x[dof];
  }
};

}  // namespace

Vector momentum_residual(const MomentumProblem& prob, const Vector& state) {
  MomentumKernel k(prob);
  Vector res;
  k.run(state, res, nullptr, Linearization::Picard);
  return res;
}

AssembledSystem assemble_momentum(const MomentumProblem& prob, const Vector& state,
                                  Linearization lin) {
  MomentumKernel k(prob);
  TripletBuffer t(k.lay.size(), k.lay.size());
  AssembledSystem sys;
  k.run(state, sys.residual, &t, lin);
  const SparseMatrix full = t.finalize();
  // Blocks for inspection.
  {
    TripletBuffer ta(k.lay.nu, k.lay.nu), tb(k.lay.np, k.lay.nu);
    for (int i = 0; i < full.rows(); ++i) {
      for (int p = full.row_ptr()[i]; p < full.row_ptr()[i + 1]; ++p) {
        const int j = full.col_idx()[p];
        if (i < k.lay.nu && j < k.lay.nu) ta.add(i, j, full.values()[p]);
        if (i >= k.lay.nu && i < k.lay.multiplier() && j < k.lay.nu) tb.add(i - k.lay.nu, j, -full.values()[p]);
      }
    }
    sys.a = ta.finalize();
    sys.b = tb.finalize();
  }
  std::map<int, double> fixed;
  sys.rhs = -sys.residual;
  for (int dof : k.vs.boundary_dofs()) fixed[dof] = sys.rhs[dof];
  sys.matrix = apply_dirichlet(k.vs, full, sys.rhs, fixed, 0);
  return sys;
}

double residual_norm(const Vector& residual, const Spaces& spaces) {
  const FESpace& vs = *spaces.velocity;
  double m = 0.0;
  for (int i = 0; i < residual.size(); ++i) {
    if (i < vs.num_dofs() && vs.is_boundary_scalar(i % vs.scalar_dofs())) continue;
    m = std::max(m, std::abs(residual[i]));
  }
  return m;
}

AssembledSystem assemble_concentration(const ConcentrationProblem& prob) {
  const FESpace& zs = *prob.spaces->concentration;
  const Mesh& mesh = zs.mesh();
  const FEFunction* u = prob.velocity;
  const QuadratureRule rule = triangle_rule(kAssemblyDegree);
  const TabulatedBasis tz = tabulate(zs.family(), rule);
  const int nl = tz.local;
  TripletBuffer t(zs.num_dofs(), zs.num_dofs());
  Vector load = Vector::Zero(zs.num_dofs());
  std::vector<Vec2> grads;
  Eigen::MatrixXd k(nl, nl);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const AffineMap map = mesh.affine_map(e);
    const Mat2 jinv_t = map.inverse.transpose();
    const double det = std::abs(map.determinant);
    const auto& d = zs.element_dofs(e);
    k.setZero();
    for (int q = 0; q < rule.size(); ++q) {
      const double w = rule.weights[q] * det;
      physical_grads(tz, q, jinv_t, grads);
      Vec2 uv = Vec2::Zero();
      Mat2 du = Mat2::Zero();
      if (u != nullptr) {
        const PointEval pu = u->evaluate(e, rule.points[q]);
        uv = pu.value;
        du = 0.5 * (pu.grad + pu.grad.transpose());
      }
      const double kc = prob.flux.coefficient(du);
      const double g = prob.forcing ? prob.forcing(map.to_physical(rule.points[q])) : 0.0;
      for (int j = 0; j < nl; ++j) {
        const double zj = tz.values[q][j];
        load[d[j]] += w * g * zj;
        for (int i = 0; i < nl; ++i) {
          const double ci = tz.values[q][i];
          k(j, i) += w * (kc * grads[i].dot(grads[j]) +
                          0.5 * (zj * uv.dot(grads[i]) - ci * uv.dot(grads[j])));
        }
      }
    }
    for (int j = 0; j < nl; ++j)
      for (int i = 0; i < nl; ++i) t.add(d[j], d[i], k(j, i));
  }
  AssembledSystem sys;
  sys.a = t.finalize();
  sys.rhs = load;
  std::map<int, double> fixed;
  for (int s : zs.boundary_scalar_dofs()) {
    fixed[s] = prob.boundary ? prob.boundary(zs.dof_point(s)) : 0.0;
  }
  sys.matrix = apply_dirichlet(zs, sys.a, sys.rhs, fixed);
  return sys;
}

SparseMatrix assemble_vector_laplacian(const FESpace& vs) {
  const Mesh& mesh = vs.mesh();
  const QuadratureRule rule = triangle_rule(std::max(2, momentum_degree(vs) - 2));
  const TabulatedBasis tv = tabulate(vs.family(), rule);
  const int nl = tv.local;
  TripletBuffer t(vs.num_dofs(), vs.num_dofs());
  std::vector<Vec2> grads;
  Eigen::MatrixXd k(nl, nl);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const AffineMap map = mesh.affine_map(e);
    const Mat2 jinv_t = map.inverse.transpose();
    const double det = std::abs(map.determinant);
    k.setZero();
    for (int q = 0; q < rule.size(); ++q) {
      physical_grads(tv, q, jinv_t, grads);
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j) k(i, j) += rule.weights[q] * det * grads[i].dot(grads[j]);
    }
    const auto& d = vs.element_dofs(e);
    for (int c = 0; c < vs.components(); ++c)
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j) t.add(vs.dof(c, d[i]), vs.dof(c, d[j]), k(i, j));
  }
  return t.finalize();
}

SparseMatrix assemble_divergence(const FESpace& vs, const FESpace& ps) {
  const Mesh& mesh = vs.mesh();
  const QuadratureRule rule = triangle_rule(4);
  const TabulatedBasis tv = tabulate(vs.family(), rule), tp = tabulate(ps.family(), rule);
  TripletBuffer t(ps.num_dofs(), vs.num_dofs());
  std::vector<Vec2> grads;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const AffineMap map = mesh.affine_map(e);
    const Mat2 jinv_t = map.inverse.transpose();
    const double det = std::abs(map.determinant);
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(tp.local, 2 * tv.local);
    for (int q = 0; q < rule.size(); ++q) {
      physical_grads(tv, q, jinv_t, grads);
      for (int j = 0; j < tp.local; ++j)
        for (int c = 0; c < 2; ++c)
          for (int i = 0; i < tv.local; ++i)
            k(j, c * tv.local + i) += rule.weights[q] * det * tp.values[q][j] * grads[i][c];
    }
    const auto& vd = vs.element_dofs(e);
    const auto& pd = ps.element_dofs(e);
    for (int j = 0; j < tp.local; ++j)
      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < tv.local; ++i) t.add(pd[j], vs.dof(c, vd[i]), k(j, c * tv.local + i));
  }
  return t.finalize();
}

SparseMatrix assemble_mass(const FESpace& s) {
  const Mesh& mesh = s.mesh();
  const QuadratureRule rule = triangle_rule(6);
  const TabulatedBasis tb = tabulate(s.family(), rule);
  TripletBuffer t(s.scalar_dofs(), s.scalar_dofs());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const double det = std::abs(mesh.affine_map(e).determinant);
    const auto& d = s.element_dofs(e);
    for (int i = 0; i < tb.local; ++i) {
      for (int j = 0; j < tb.local; ++j) {
        double v = 0.0;
        for (int q = 0; q < rule.size(); ++q) v += rule.weights[q] * tb.values[q][i] * tb.values[q][j];
        t.add(d[i], d[j], v * det);
      }
    }
  }
  return t.finalize();
}

SparseMatrix assemble_stiffness(const FESpace& s) {
  if (s.components() != 1) throw Error("assemble_stiffness: scalar space expected");
  return assemble_vector_laplacian(s);
}

Vector assemble_moments(const FESpace& s) {
  const Mesh& mesh = s.mesh();
  const QuadratureRule rule = triangle_rule(3);
  const TabulatedBasis tb = tabulate(s.family(), rule);
  Vector m = Vector::Zero(s.scalar_dofs());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const double det = std::abs(mesh.affine_map(e).determinant);
    const auto& d = s.element_dofs(e);
    for (int q = 0; q < rule.size(); ++q)
      for (int i = 0; i < tb.local; ++i) m[d[i]] += rule.weights[q] * det * tb.values[q][i];
  }
  return m;
}

Vector divergence_moments(const FEFunction& v, const FESpace& ps) {
  return assemble_divergence(v.space(), ps) * v.coefficients();
}

}  // namespace synfem
