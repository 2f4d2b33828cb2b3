#include "synfem/fespace.hpp"

#include <algorithm>
#include <set>

#include "synfem/error.hpp"

namespace synfem {

Pairing parse_pairing(const std::string& name) {
  if (name == "p2p0" || name == "P2_P0") return Pairing::P2_P0;
  if (name == "crouzeix-raviart" || name == "P2bubble_P1disc" || name == "P2Bubble_P1Disc") {
    return Pairing::P2Bubble_P1Disc;
  }
  throw Error("unknown pairing '" + name + "' (expected p2p0 or crouzeix-raviart)");
}

std::string to_string(Pairing p) {
  return p == Pairing::P2_P0 ? "p2p0" : "crouzeix-raviart";
}

std::string to_string(Family f) {
  switch (f) {
    case Family::P1: return "P1";
    case Family::P2: return "P2";
    case Family::P2Bubble: return "P2bubble";
    case Family::P0Disc: return "P0disc";
    case Family::P1Disc: return "P1disc";
  }
  return "?";
}

int local_dof_count(Family f) {
  switch (f) {
    case Family::P1: return 3;
    case Family::P2: return 6;
    case Family::P2Bubble: return 7;
    case Family::P0Disc: return 1;
    case Family::P1Disc: return 3;
  }
  return 0;
}

bool is_continuous(Family f) {
  return f == Family::P1 || f == Family::P2 || f == Family::P2Bubble;
}

void reference_basis(Family f, const Vec2& xi, double* v, Vec2* g) {
  const double l[3] = {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
  const Vec2 dl[3] = {Vec2(-1.0, -1.0), Vec2(1.0, 0.0), Vec2(0.0, 1.0)};
  switch (f) {
    case Family::P0Disc:
      v[0] = 1.0;
      g[0] = Vec2::Zero();
      return;
    case Family::P1:
    case Family::P1Disc:
      for (int i = 0; i < 3; ++i) {
        v[i] = l[i];
        g[i] = dl[i];
      }
      return;
    case Family::P2:
    case Family::P2Bubble:
      for (int i = 0; i < 3; ++i) {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
        g[i] = (4.0 * l[i] - 1.0) * dl[i];
      }
      for (int k = 0; k < 3; ++k) {
        const int a = (k + 1) % 3, b = (k + 2) % 3;
        v[3 + k] = 4.0 * l[a] * l[b];
        g[3 + k] = 4.0 * (l[a] * dl[b] + l[b] * dl[a]);
      }
      if (f == Family::P2Bubble) {
        v[6] = 27.0 * l[0] * l[1] * l[2];
        g[6] = 27.0 * (l[1] * l[2] * dl[0] + l[0] * l[2] * dl[1] + l[0] * l[1] * dl[2]);
      }
      return;
  }
}

TabulatedBasis tabulate(Family f, const QuadratureRule& rule) {
  TabulatedBasis t;
  t.local = local_dof_count(f);
  t.values.assign(rule.size(), std::vector<double>(t.local));
  t.ref_grads.assign(rule.size(), std::vector<Vec2>(t.local));
  for (int q = 0; q < rule.size(); ++q) {
    reference_basis(f, rule.points[q], t.values[q].data(), t.ref_grads[q].data());
  }
  return t;
}

FESpace::FESpace(std::shared_ptr<const Mesh> mesh, Family family, int components)
    : mesh_(std::move(mesh)), family_(family), components_(components) {
  if (!mesh_) throw Error("FESpace: null mesh");
  if (components < 1 || components > 2) throw Error("FESpace: 1 or 2 components supported");
  const Mesh& m = *mesh_;
  const int nv = m.num_vertices(), ne = m.num_edges(), nt = m.num_elements();
  local_dofs_ = local_dof_count(family);
  element_dofs_.assign(nt, {});
  switch (family) {
    case Family::P0Disc: scalar_dofs_ = nt; break;
    case Family::P1Disc: scalar_dofs_ = 3 * nt; break;
    case Family::P1: scalar_dofs_ = nv; break;
    case Family::P2: scalar_dofs_ = nv + ne; break;
    case Family::P2Bubble: scalar_dofs_ = nv + ne + nt; break;
  }
  points_.assign(scalar_dofs_, Vec2::Zero());
  is_boundary_.assign(scalar_dofs_, 0);
  for (int e = 0; e < nt; ++e) {
    const auto& el = m.element(e);
    auto& d = element_dofs_[e];
    if (family == Family::P0Disc) {
      d = {e};
      points_[e] = m.centroid(e);
      continue;
    }
    if (family == Family::P1Disc) {
      d = {3 * e, 3 * e + 1, 3 * e + 2};
      for (int k = 0; k < 3; ++k) points_[3 * e + k] = m.vertex(el[k]);
      continue;
    }
    d = {el[0], el[1], el[2]};
    for (int k = 0; k < 3; ++k) points_[el[k]] = m.vertex(el[k]);
    if (family == Family::P1) continue;
    for (int k = 0; k < 3; ++k) {
      const int edge = m.element_edges(e)[k];
      d.push_back(nv + edge);
      points_[nv + edge] = 0.5 * (m.vertex(m.edge(edge)[0]) + m.vertex(m.edge(edge)[1]));
    }
    if (family == Family::P2Bubble) {
      d.push_back(nv + ne + e);
      points_[nv + ne + e] = m.centroid(e);
    }
  }
  if (is_continuous(family)) {
    for (int v = 0; v < nv; ++v) is_boundary_[v] = m.is_boundary_vertex(v) ? 1 : 0;
    if (family != Family::P1) {
      for (int i = 0; i < ne; ++i) is_boundary_[nv + i] = m.is_boundary_edge(i) ? 1 : 0;
    }
    for (int s = 0; s < scalar_dofs_; ++s)
      if (is_boundary_[s]) boundary_.push_back(s);
  }
}

std::vector<int> FESpace::boundary_dofs() const {
  std::vector<int> out;
  for (int c = 0; c < components_; ++c)
    for (int s : boundary_) out.push_back(dof(c, s));
  return out;
}

std::string FESpace::tag() const {
  return to_string(family_) + (components_ == 2 ? "^2" : "");
}

Spaces build_spaces(std::shared_ptr<const Mesh> mesh, Pairing pairing) {
  Spaces s;
  s.pairing = pairing;
  if (pairing == Pairing::P2_P0) {
    s.velocity = std::make_shared<FESpace>(mesh, Family::P2, 2);
    s.pressure = std::make_shared<FESpace>(mesh, Family::P0Disc, 1);
  } else {
    s.velocity = std::make_shared<FESpace>(mesh, Family::P2Bubble, 2);
    s.pressure = std::make_shared<FESpace>(mesh, Family::P1Disc, 1);
  }
  s.concentration = std::make_shared<FESpace>(mesh, Family::P1, 1);
  return s;
}

FEFunction::FEFunction(SpacePtr space) : space_(std::move(space)) {
  coeffs_ = Vector::Zero(space_->num_dofs());
}

FEFunction::FEFunction(SpacePtr space, Vector coefficients)
    : space_(std::move(space)), coeffs_(std::move(coefficients)) {
  if (coeffs_.size() != space_->num_dofs()) throw Error("FEFunction: coefficient length mismatch");
}

void FEFunction::gather(int element, std::vector<double>& local) const {
  const auto& d = space_->element_dofs(element);
  const int n = static_cast<int>(d.size());
  local.resize(space_->components() * n);
  for (int c = 0; c < space_->components(); ++c)
    for (int i = 0; i < n; ++i) local[c * n + i] = coeffs_[space_->dof(c, d[i])];
}

PointEval FEFunction::evaluate(int element, const Vec2& ref_point) const {
  const Mesh& m = space_->mesh();
  if (element < 0 || element >= m.num_elements()) {
    throw Error("evaluate: element " + std::to_string(element) + " out of range");
  }
  double v[7];
  Vec2 g[7];
  reference_basis(space_->family(), ref_point, v, g);
  const Mat2 jinv_t = m.affine_map(element).inverse.transpose();
  const auto& d = space_->element_dofs(element);
  PointEval out;
  for (int c = 0; c < space_->components(); ++c) {
    Vec2 grad_ref = Vec2::Zero();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double a = coeffs_[space_->dof(c, d[i])];
      out.value[c] += a * v[i];
      grad_ref += a * g[i];
    }
    out.grad.row(c) = (jinv_t * grad_ref).transpose();
  }
  return out;
}

namespace {

template <typename Sample>
FEFunction interpolate_impl(SpacePtr space, int components, Sample sample) {
  if (space->components() != components) throw Error("interpolate: component count mismatch");
  FEFunction u(space);
  Vector& a = u.coefficients();
  const FESpace& s = *space;
  const Mesh& m = s.mesh();
  for (int i = 0; i < s.scalar_dofs(); ++i) {
    const Vec2 val = sample(s.dof_point(i));
    for (int c = 0; c < components; ++c) a[s.dof(c, i)] = val[c];
  }
  if (s.family() == Family::P2Bubble) {
    // Bubble coefficient: match the centroid value. The P2 part contributes
    // -1/9 per vertex and 4/9 per edge there; the bubble equals 1.
    for (int e = 0; e < m.num_elements(); ++e) {
      const auto& d = s.element_dofs(e);
      const Vec2 val = sample(m.centroid(e));
      for (int c = 0; c < components; ++c) {
        double p2 = 0.0;
        for (int k = 0; k < 3; ++k) p2 += -a[s.dof(c, d[k])] / 9.0 + 4.0 * a[s.dof(c, d[3 + k])] / 9.0;
        a[s.dof(c, d[6])] = val[c] - p2;
      }
    }
  }
  return u;
}

}  // namespace

FEFunction interpolate(SpacePtr space, const ScalarField& g) {
  return interpolate_impl(std::move(space), 1, [&](const Vec2& x) { return Vec2(g(x), 0.0); });
}

FEFunction interpolate(SpacePtr space, const VectorField& g) {
  return interpolate_impl(std::move(space), 2, g);
}

SparseMatrix apply_dirichlet(const FESpace& space, const SparseMatrix& a, Vector& rhs,
                             const std::map<int, double>& values, int offset) {
  if (a.rows() != a.cols() || a.rows() != rhs.size()) throw Error("apply_dirichlet: size mismatch");
  std::vector<char> fixed(a.rows(), 0);
  Vector g = Vector::Zero(a.rows());
  for (const auto& [dof, value] : values) {
    if (dof < 0 || dof >= space.num_dofs() || !space.is_boundary_scalar(dof % space.scalar_dofs())) {
      throw Error("apply_dirichlet: DOF " + std::to_string(dof) + " is not a boundary DOF");
    }
    fixed[offset + dof] = 1;
    g[offset + dof] = value;
  }
  TripletBuffer t(a.rows(), a.cols());
  t.reserve(a.nonzeros());
  for (int i = 0; i < a.rows(); ++i) {
    if (fixed[i]) {
      t.add(i, i, 1.0);
      continue;
    }
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
      const int j = a.col_idx()[k];
      if (fixed[j]) {
        rhs[i] -= a.values()[k] * g[j];
      } else {
        t.add(i, j, a.values()[k]);
      }
    }
  }
  for (int i = 0; i < a.rows(); ++i)
    if (fixed[i]) rhs[i] = g[i];
  return t.finalize();
}

}  // namespace synfem
