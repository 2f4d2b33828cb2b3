#include "synfem/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "synfem/assembly.hpp"
#include "synfem/error.hpp"
#include "synfem/projections.hpp"
#include "synfem/solver.hpp"

namespace synfem {

// ---------------------------------------------------------------------------
// maximal function

GradientGrid::GradientGrid(const FEFunction& v, double cell) {
  const Mesh& mesh = v.space().mesh();
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Vec2& p = mesh.vertex(i);
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  if (cell <= 0.0) {
    double rmin = 1e300;
    for (int e = 0; e < mesh.num_elements(); ++e) rmin = std::min(rmin, mesh.inradius(e));
    cell = 0.25 * rmin;
  }
  cell_ = cell;
  x0_ = xmin;
  y0_ = ymin;
  nx_ = std::max(1, static_cast<int>(std::ceil((xmax - xmin) / cell)));
  ny_ = std::max(1, static_cast<int>(std::ceil((ymax - ymin) / cell)));
  std::vector<double> mass(static_cast<std::size_t>(nx_) * ny_, 0.0);
  std::vector<char> filled(mass.size(), 0);
  const int nc = v.space().components();
  const double area = cell * cell;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& tri = mesh.element(e);
    double bx0 = 1e300, bx1 = -1e300, by0 = 1e300, by1 = -1e300;
    for (int k = 0; k < 3; ++k) {
      const Vec2& p = mesh.vertex(tri[k]);
      bx0 = std::min(bx0, p.x());
      bx1 = std::max(bx1, p.x());
      by0 = std::min(by0, p.y());
      by1 = std::max(by1, p.y());
    }
    const AffineMap map = mesh.affine_map(e);
    const int i0 = std::max(0, static_cast<int>(std::floor((bx0 - x0_) / cell - 0.5)));
    const int i1 = std::min(nx_ - 1, static_cast<int>(std::ceil((bx1 - x0_) / cell - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor((by0 - y0_) / cell - 0.5)));
    const int j1 = std::min(ny_ - 1, static_cast<int>(std::ceil((by1 - y0_) / cell - 0.5)));
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const std::size_t idx = static_cast<std::size_t>(j) * nx_ + i;
        if (filled[idx]) continue;
        const Vec2 x(x0_ + (i + 0.5) * cell, y0_ + (j + 0.5) * cell);
        const Vec2 xi = map.to_reference(x);
        const double tol = -1e-12;
        if (xi.x() < tol || xi.y() < tol || 1.0 - xi.x() - xi.y() < tol) continue;
        filled[idx] = 1;
        mass[idx] = v.evaluate(e, xi).grad.topRows(nc).norm() * area;
      }
    }
  }
  prefix_.assign(static_cast<std::size_t>(nx_ + 1) * ny_, 0.0);
  for (int j = 0; j < ny_; ++j) {
    double* row = &prefix_[static_cast<std::size_t>(j) * (nx_ + 1)];
    for (int i = 0; i < nx_; ++i) row[i + 1] = row[i] + mass[static_cast<std::size_t>(j) * nx_ + i];
  }
}

double GradientGrid::ball_average(const Vec2& x, double r) const {
  const double s = cell_;
  const int jlo = static_cast<int>(std::floor((x.y() - r - y0_) / s - 0.5));
  const int jhi = static_cast<int>(std::ceil((x.y() + r - y0_) / s - 0.5));
  double m = 0.0;
  long count = 0;
  for (int j = jlo; j <= jhi; ++j) {
    const double dy = y0_ + (j + 0.5) * s - x.y();
    if (std::abs(dy) > r) continue;
    const double w = std::sqrt(r * r - dy * dy);
    const long ilo = static_cast<long>(std::ceil((x.x() - w - x0_) / s - 0.5));
    const long ihi = static_cast<long>(std::floor((x.x() + w - x0_) / s - 0.5));
    if (ihi < ilo) continue;
    count += ihi - ilo + 1;
    if (j < 0 || j >= ny_) continue;
    const long a = std::max(0L, ilo), b = std::min<long>(nx_ - 1, ihi);
    if (b < a) continue;
    const double* row = &prefix_[static_cast<std::size_t>(j) * (nx_ + 1)];
    m += row[b + 1] - row[a];
  }
  if (count == 0) {
    // Ball smaller than one cell: use the cell holding x.
    const int i = static_cast<int>(std::floor((x.x() - x0_) / s));
    const int j = static_cast<int>(std::floor((x.y() - y0_) / s));
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return 0.0;
    const double* row = &prefix_[static_cast<std::size_t>(j) * (nx_ + 1)];
    return (row[i + 1] - row[i]) / (s * s);
  }
  return m / (static_cast<double>(count) * s * s);
}

namespace {

double element_average_gradient(const FEFunction& v, int e, const QuadratureRule& rule) {
  const int nc = v.space().components();
  double sum = 0.0, w = 0.0;
  for (int q = 0; q < rule.size(); ++q) {
    sum += rule.weights[q] * v.evaluate(e, rule.points[q]).grad.topRows(nc).norm();
    w += rule.weights[q];
  }
  return sum / w;
}

}  // namespace

std::vector<double> maximal_function(const FEFunction& v, const GradientGrid& grid) {
  const Mesh& mesh = v.space().mesh();
  const double diam = mesh.domain_diameter();
  const QuadratureRule rule = triangle_rule(4);
  std::vector<double> out(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    double m = element_average_gradient(v, e, rule);
    const Vec2 c = mesh.centroid(e);
    double r = mesh.diameter(e);
    while (true) {
      m = std::max(m, grid.ball_average(c, r));
      if (r >= diam) break;
      r = std::min(2.0 * r, diam);
    }
    out[e] = m;
  }
  return out;
}

std::vector<double> maximal_function(const FEFunction& v) {
  return maximal_function(v, GradientGrid(v));
}

// ---------------------------------------------------------------------------
// Lipschitz truncation

namespace {

// Ascending list of elements touching each scalar DOF.
std::vector<std::vector<int>> dof_elements(const FESpace& s) {
  std::vector<std::vector<int>> out(s.scalar_dofs());
  for (int e = 0; e < s.mesh().num_elements(); ++e)
    for (int d : s.element_dofs(e)) out[d].push_back(e);
  return out;
}

double gradient_sup(const FEFunction& f) {
  const Mesh& mesh = f.space().mesh();
  const int nc = f.space().components();
  QuadratureRule rule = triangle_rule(4);
  std::vector<Vec2> pts = rule.points;
  pts.push_back(Vec2(0, 0));
  pts.push_back(Vec2(1, 0));
  pts.push_back(Vec2(0, 1));
  double m = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (const Vec2& xi : pts) m = std::max(m, f.evaluate(e, xi).grad.topRows(nc).norm());
  return m;
}

double coefficient_scale(const FEFunction& v) {
  return std::max(1e-300, v.coefficients().cwiseAbs().maxCoeff());
}

// max over local DOFs of |a - b| on element e.
double element_difference(const FEFunction& a, const FEFunction& b, int e) {
  const FESpace& s = a.space();
  double d = 0.0;
  for (int c = 0; c < s.components(); ++c)
    for (int l : s.element_dofs(e)) {
      const int k = s.dof(c, l);
      d = std::max(d, std::abs(a.coefficients()[k] - b.coefficients()[k]));
    }
  return d;
}

std::vector<char> inflate(const Mesh& mesh, const std::vector<char>& bad) {
  std::vector<char> out(mesh.num_elements(), 0);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!bad[e]) continue;
    for (int v : mesh.element(e))
      for (int f : mesh.vertex_elements(v)) out[f] = 1;
  }
  return out;
}

}  // namespace

TruncationReport lipschitz_truncate(const FEFunction& v, double lambda,
                                    const std::vector<double>& maximal) {
  if (!(lambda > 0)) throw Error("lipschitz_truncate: lambda must be positive");
  const FESpace& vs = v.space();
  const Mesh& mesh = vs.mesh();
  const int ne = mesh.num_elements();
  const std::vector<double> m = maximal.empty() ? maximal_function(v) : maximal;
  if (static_cast<int>(m.size()) != ne) throw Error("lipschitz_truncate: maximal function size mismatch");

  TruncationReport rep;
  rep.lambda = lambda;
  rep.bad.assign(ne, 0);
  int good_count = 0;
  for (int e = 0; e < ne; ++e) {
    rep.bad[e] = m[e] > lambda;
    good_count += !rep.bad[e];
  }
  rep.inflated = inflate(mesh, rep.bad);
  rep.kappa = 1.0;
  for (int e = 0; e < ne; ++e) {
    if (rep.bad[e] && !rep.inflated[e]) rep.bad_in_inflated = false;
    if (rep.inflated[e]) rep.kappa = std::min(rep.kappa, m[e] / lambda);
  }
  for (int e = 0; e < ne; ++e)
    if (rep.inflated[e] && m[e] < rep.kappa * lambda) rep.inflated_in_kappa_set = false;

  if (good_count == 0) {
    rep.empty_good_set = true;
    rep.warnings.push_back("good set is empty; truncation is the zero function");
    rep.truncated = FEFunction(v.space_ptr());
    rep.mcshane_a = 0.0;
    rep.sup_ratio = 0.0;
    return rep;
  }

  const int ns = vs.scalar_dofs();
  const bool bubble = vs.family() == Family::P2Bubble;
  const auto owners = dof_elements(vs);
  std::vector<char> good(ns, 0), is_bubble(ns, 0);
  for (int e = 0; e < ne; ++e) {
    const auto& d = vs.element_dofs(e);
    if (bubble) is_bubble[d.back()] = 1;
    if (!rep.bad[e])
      for (int s : d) good[s] = 1;
  }
  for (int s : vs.boundary_scalar_dofs()) good[s] = 1;

  // Good sample points with their values.
  std::vector<Vec2> pts;
  std::vector<Vec2> vals;
  for (int s = 0; s < ns; ++s) {
    if (!good[s]) continue;
    if (is_bubble[s]) {
      pts.push_back(vs.dof_point(s));
      vals.push_back(v.evaluate(owners[s][0], Vec2(1.0 / 3.0, 1.0 / 3.0)).value);
    } else {
      pts.push_back(vs.dof_point(s));
      vals.push_back(vs.is_boundary_scalar(s)
                         ? Vec2::Zero()
                         : Vec2(v.coefficients()[vs.dof(0, s)], v.coefficients()[vs.dof(1, s)]));
    }
  }

  // Smallest A = 2^k >= 2 making the extension exact at interface nodes.
  double a_req = 0.0;
  for (int s = 0; s < ns; ++s) {
    if (!good[s] || is_bubble[s]) continue;
    bool interface = false;
    for (int e : owners[s]) interface |= rep.bad[e] != 0;
    if (!interface) continue;
    const Vec2& y = vs.dof_point(s);
    const Vec2 vy = vs.is_boundary_scalar(s)
                        ? Vec2::Zero()
                        : Vec2(v.coefficients()[vs.dof(0, s)], v.coefficients()[vs.dof(1, s)]);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double dist = (pts[k] - y).norm();
      if (dist == 0.0) continue;
      for (int c = 0; c < 2; ++c) a_req = std::max(a_req, (vy[c] - vals[k][c]) / (lambda * dist));
    }
  }
  double a = 2.0;
  while (a < a_req * (1.0 + 1e-12) && a < 1e300) a *= 2.0;
  rep.mcshane_a = a;

  auto extension = [&](const Vec2& x) {
    Vec2 best(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double cone = a * lambda * (pts[k] - x).norm();
      best[0] = std::min(best[0], vals[k][0] + cone);
      best[1] = std::min(best[1], vals[k][1] + cone);
    }
    return best;
  };

  Vector coef = v.coefficients();
  for (int s = 0; s < ns; ++s) {
    if (good[s] || is_bubble[s]) continue;
    const Vec2 val = extension(vs.dof_point(s));
    coef[vs.dof(0, s)] = val[0];
    coef[vs.dof(1, s)] = val[1];
  }
  if (bubble) {
    // Bubble coefficient matching the extension at the centroid.
    for (int e = 0; e < ne; ++e) {
      if (!rep.bad[e]) continue;
      const auto& d = vs.element_dofs(e);
      const Vec2 target = extension(mesh.centroid(e));
      for (int c = 0; c < 2; ++c) {
        double p2 = 0.0;
        for (int k = 0; k < 3; ++k) p2 += -coef[vs.dof(c, d[k])] / 9.0;
        for (int k = 3; k < 6; ++k) p2 += 4.0 * coef[vs.dof(c, d[k])] / 9.0;
        coef[vs.dof(c, d[6])] = target[c] - p2;
      }
    }
  }
  rep.truncated = FEFunction(v.space_ptr(), coef);
  for (int e = 0; e < ne; ++e)
    if (!rep.bad[e]) rep.equality_defect = std::max(rep.equality_defect, element_difference(v, rep.truncated, e));
  rep.equality_defect /= coefficient_scale(v);
  rep.sup_ratio = gradient_sup(rep.truncated) / lambda;
  return rep;
}

TruncationReport discrete_lipschitz_truncate(const FEFunction& v, const Spaces& spaces, double lambda,
                                             const ExponentField* r, const std::vector<double>& maximal) {
  TruncationReport rep = lipschitz_truncate(v, lambda, maximal);
  const Mesh& mesh = v.space().mesh();
  const int ne = mesh.num_elements();
  rep.discrete = rep.empty_good_set ? FEFunction(v.space_ptr())
                                    : project_div(field_from(rep.truncated), spaces);
  const double scale = coefficient_scale(v);
  rep.difference.assign(ne, 0);
  std::vector<int> diff;
  for (int e = 0; e < ne; ++e) {
    const double d = element_difference(v, rep.discrete, e) / scale;
    if (d > 1e-12) {
      rep.difference[e] = 1;
      diff.push_back(e);
      if (!rep.inflated[e]) rep.difference_in_inflated = false;
    }
    if (!rep.inflated[e]) rep.discrete_equality_defect = std::max(rep.discrete_equality_defect, d);
  }
  rep.discrete_sup_ratio = gradient_sup(rep.discrete) / lambda;
  const ExponentField two = ExponentField::constant(2.0);
  const ExponentField& rr = r ? *r : two;
  if (!diff.empty()) {
    const int nc = rep.discrete.space().components();
    rep.difference_modular = modular(sample(mesh, diff, rr, [&](int e, const Vec2& ref, const Vec2&) {
      return rep.discrete.evaluate(e, ref).grad.topRows(nc).norm();
    }));
  }
  return rep;
}

bool LambdaChoice::bound_holds() const {
  const long lo = static_cast<long>(j) * (1L << j);
  const long hi = static_cast<long>(j + 1) * (1L << (j + 1));
  return log2_lambda == static_cast<long>(j) * i && log2_lambda >= lo && log2_lambda < hi;
}

LambdaChoice select_lambda(const std::vector<double>& maximal, const Mesh& mesh,
                           const ExponentField& r, int j, double kappa) {
  if (j < 1 || j > 4) throw Error("select_lambda: level j must lie in [1, 4]");
  if (!(kappa > 0 && kappa <= 1)) throw Error("select_lambda: kappa must lie in (0, 1]");
  const QuadratureRule rule = triangle_rule(4);
  const int ne = mesh.num_elements();
  std::vector<double> contrib(ne, 0.0);
  LambdaChoice out;
  out.j = j;
  out.kappa = kappa;
  for (int e = 0; e < ne; ++e) {
    if (maximal[e] <= 0.0) continue;
    const AffineMap map = mesh.affine_map(e);
    const double det = std::abs(map.determinant);
    for (int q = 0; q < rule.size(); ++q) {
      const double p = r(e, rule.points[q], map.to_physical(rule.points[q]));
      contrib[e] += rule.weights[q] * det * std::pow(maximal[e], p);
    }
    out.total_modular += contrib[e];
  }
  const int first = 1 << j, last = (1 << (j + 1)) - 1;
  const double budget = out.total_modular / static_cast<double>(1 << j);
  int chosen = -1;
  double best = std::numeric_limits<double>::infinity();
  int best_i = first;
  for (int i = first; i <= last; ++i) {
    const double lo = std::ldexp(kappa, j * i), hi = std::ldexp(kappa, j * (i + 1));
    double layer = 0.0;
    for (int e = 0; e < ne; ++e)
      if (maximal[e] > lo && maximal[e] <= hi) layer += contrib[e];
    out.layer_modulars.push_back(layer);
    if (chosen < 0 && layer <= budget) chosen = i;
    if (layer < best) {
      best = layer;
      best_i = i;
    }
  }
  out.i = chosen >= 0 ? chosen : best_i;
  out.log2_lambda = j * out.i;
  out.lambda = std::ldexp(1.0, out.log2_lambda);
  return out;
}

SmallnessResult smallness_check(const FEFunction& v, const Spaces& spaces, const ExponentField& r, int j) {
  const std::vector<double> m = maximal_function(v);
  SmallnessResult res;
  double kappa = 1.0;
  for (int round = 0; round < 30; ++round) {
    res.choice = select_lambda(m, v.space().mesh(), r, j, kappa);
    res.truncation = discrete_lipschitz_truncate(v, spaces, res.choice.lambda, &r, m);
    if (res.truncation.kappa >= kappa) break;
    // Slightly below the witness so the layer boundaries stay strict.
    kappa = res.truncation.kappa * (1.0 - 1e-9);
  }
  res.modular = res.truncation.difference_modular;
  res.scaled = res.choice.total_modular > 0.0
                   ? std::ldexp(res.modular, j) / res.choice.total_modular
                   : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// Bogovskii and inf-sup

namespace {

PointField scalar_point_field(const FEFunction& f) {
  return [&f](int e, const Vec2& x) {
    PointEval pe = f.evaluate(e, f.space().mesh().affine_map(e).to_reference(x));
    return pe;
  };
}

// Vector Laplacian with identity rows and columns on the velocity boundary.
SparseMatrix dirichlet_laplacian(const FESpace& vs) {
  SparseMatrix a = assemble_vector_laplacian(vs);
  Vector rhs = Vector::Zero(vs.num_dofs());
  std::map<int, double> zeros;
  for (int d : vs.boundary_dofs()) zeros[d] = 0.0;
  return apply_dirichlet(vs, a, rhs, zeros);
}

std::vector<char> boundary_mask(const FESpace& vs) {
  std::vector<char> mask(vs.num_dofs(), 0);
  for (int d : vs.boundary_dofs()) mask[d] = 1;
  return mask;
}

// B^T q with boundary rows removed.
Vector divergence_adjoint(const SparseMatrix& bt, const std::vector<char>& bmask, const Vector& q) {
  Vector out = bt * q;
  for (int i = 0; i < out.size(); ++i)
    if (bmask[i]) out[i] = 0.0;
  return out;
}

}  // namespace

BogovskiiReport discrete_bogovskii(const FEFunction& h, const Spaces& spaces, const ExponentField& r) {
  const FESpace& vs = *spaces.velocity;
  const FESpace& ps = *spaces.pressure;
  if (h.space_ptr().get() != spaces.pressure.get() && h.space().tag() != ps.tag()) {
    throw Error("discrete_bogovskii: H must live in the pressure space");
  }
  const Vector moments = assemble_moments(ps);
  const SparseMatrix mp = assemble_mass(ps);
  const Vector t = mp * h.coefficients();
  const double mean = moments.dot(h.coefficients());
  const double mscale = moments.cwiseProduct(h.coefficients()).cwiseAbs().sum();
  if (std::abs(mean) > 1e-10 * std::max(1.0, mscale)) {
    throw Error("discrete_bogovskii: H must have zero mean");
  }
  const int nv = vs.num_dofs(), np = ps.num_dofs();
  const SparseMatrix a = dirichlet_laplacian(vs);
  const SparseMatrix b = assemble_divergence(vs, ps);
  const auto bmask = boundary_mask(vs);
  TripletBuffer tb(nv + np + 1, nv + np + 1);
  for (int i = 0; i < nv; ++i)
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) tb.add(i, a.col_idx()[k], a.values()[k]);
  for (int j = 0; j < np; ++j) {
    for (int k = b.row_ptr()[j]; k < b.row_ptr()[j + 1]; ++k) {
      const int col = b.col_idx()[k];
      if (bmask[col]) continue;
      tb.add(nv + j, col, b.values()[k]);
      tb.add(col, nv + j, b.values()[k]);
    }
    tb.add(nv + j, nv + np, moments[j]);
    tb.add(nv + np, nv + j, moments[j]);
  }
  Vector rhs = Vector::Zero(nv + np + 1);
  rhs.segment(nv, np) = t;
  SaddleLayout lay;
  lay.nu = nv;
  lay.np = np;
  const Vector x = solve_saddle(tb.finalize(), rhs, lay, moments);

  BogovskiiReport rep;
  rep.velocity = FEFunction(spaces.velocity, x.head(nv));
  rep.divergence_mismatch = (b * rep.velocity.coefficients() - t).lpNorm<Eigen::Infinity>();
  rep.gradient_norm = luxemburg_norm(sample_gradient(rep.velocity, r));

  // Dual norm from below: H itself and the projected duality map.
  const ExponentField rc = r.conjugate();
  double dual = 0.0;
  const double hnorm = luxemburg_norm(sample_value(h, rc));
  if (hnorm > 0.0) dual = std::max(dual, t.dot(h.coefficients()) / hnorm);
  const PointField hp = scalar_point_field(h);
  const FEFunction q = project_Q(
      [&](int e, const Vec2& x) {
        PointEval pe;
        const double hv = hp(e, x).value[0];
        const Vec2 ref = h.space().mesh().affine_map(e).to_reference(x);
        const double p = r(e, ref, x);
        pe.value[0] = (hv < 0 ? -1.0 : 1.0) * std::pow(std::abs(hv), p - 1.0);
        return pe;
      },
      spaces.pressure);
  const double qnorm = luxemburg_norm(sample_value(q, rc));
  if (qnorm > 0.0) dual = std::max(dual, t.dot(q.coefficients()) / qnorm);
  rep.dual_norm = dual;
  rep.ratio = dual > 0.0 ? rep.gradient_norm / dual : 0.0;
  return rep;
}

namespace {

std::string describe_exponent(const ExponentField& r) {
  std::ostringstream os;
  if (r.is_constant()) {
    os << "constant " << r.lower();
  } else {
    os << "variable [" << r.lower() << ", " << r.upper() << "]";
  }
  return os.str();
}

// Zero-mean pressure modes: low cosine modes, a sign checkerboard and a few
// seeded random coefficient vectors.
std::vector<Vector> pressure_dictionary(const Spaces& spaces, const Vector& moments) {
  const FESpace& ps = *spaces.pressure;
  const Mesh& mesh = ps.mesh();
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    xmin = std::min(xmin, mesh.vertex(i).x());
    xmax = std::max(xmax, mesh.vertex(i).x());
    ymin = std::min(ymin, mesh.vertex(i).y());
    ymax = std::max(ymax, mesh.vertex(i).y());
  }
  const double lx = xmax - xmin, ly = ymax - ymin;
  std::vector<Vector> modes;
  auto add_field = [&](const std::function<double(const Vec2&)>& g) {
    const FEFunction q = project_Q(
        [&](int, const Vec2& x) {
          PointEval pe;
          pe.value[0] = g(x);
          return pe;
        },
        spaces.pressure);
    modes.push_back(q.coefficients());
  };
  const double pi = std::acos(-1.0);
  for (int k = 0; k <= 3; ++k)
    for (int l = 0; l <= 3; ++l) {
      if (k == 0 && l == 0) continue;
      add_field([=](const Vec2& x) {
        return std::cos(k * pi * (x.x() - xmin) / lx) * std::cos(l * pi * (x.y() - ymin) / ly);
      });
    }
  const double n = std::max(1.0, std::round(1.0 / mesh.h_max()));
  add_field([=](const Vec2& x) {
    const double s = std::sin(n * pi * (x.x() - xmin) / lx) * std::sin(n * pi * (x.y() - ymin) / ly);
    return s >= 0 ? 1.0 : -1.0;
  });
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int k = 0; k < 8; ++k) {
    Vector q(ps.num_dofs());
    for (int i = 0; i < q.size(); ++i) q[i] = uni(rng);
    modes.push_back(q);
  }
  // Constant functions have all coefficients equal in both pressure families.
  const double area = moments.sum();
  for (Vector& q : modes) q.array() -= moments.dot(q) / area;
  return modes;
}

}  // namespace

InfSupReport infsup_constant(const Spaces& spaces, const ExponentField& r, bool dictionary) {
  const FESpace& vs = *spaces.velocity;
  const FESpace& ps = *spaces.pressure;
  InfSupReport rep;
  rep.pairing = to_string(spaces.pairing);
  rep.exponent = describe_exponent(r);
  const int np = ps.num_dofs();
  if (np <= 1) {
    rep.gamma = std::numeric_limits<double>::infinity();
    rep.beta = 0.0;
    return rep;
  }
  const Vector moments = assemble_moments(ps);
  const bool quadratic = r.is_constant() && r.lower() == 2.0 && !dictionary;
  if (vs.free_dofs() == 0) {
    rep.gamma = 0.0;
    rep.beta = std::numeric_limits<double>::infinity();
    rep.unstable = true;
    rep.eigenvalue = quadratic;
    return rep;
  }
  const DirectSolver lu(dirichlet_laplacian(vs));
  const SparseMatrix b = assemble_divergence(vs, ps);
  const SparseMatrix bt = b.transpose();
  const auto bmask = boundary_mask(vs);

  if (quadratic) {
    if (np > 3000) throw Error("infsup_constant: dense Schur complement limited to 3000 pressure DOFs");
    Eigen::MatrixXd s(np, np);
    for (int k = 0; k < np; ++k) {
      Vector ek = Vector::Zero(np);
      ek[k] = 1.0;
      s.col(k) = b * lu.solve(divergence_adjoint(bt, bmask, ek));
    }
    s = 0.5 * (s + s.transpose()).eval();
    const Eigen::MatrixXd m = assemble_mass(ps).to_dense();
    // Lift the constant mode far above the spectrum (which lies in [0, 2]).
    const double shift = 10.0;
    s += shift * moments * moments.transpose() / moments.sum();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(s, m, Eigen::EigenvaluesOnly);
    if (ges.info() != Eigen::Success) throw Error("infsup_constant: eigensolver failed");
    const double sigma = std::max(0.0, ges.eigenvalues()[0]);
    rep.gamma = std::sqrt(sigma);
    rep.eigenvalue = true;
  } else {
    rep.eigenvalue = false;
    const ExponentField rc = r.conjugate();
    double gamma = std::numeric_limits<double>::infinity();
    for (const Vector& q : pressure_dictionary(spaces, moments)) {
      if (q.lpNorm<Eigen::Infinity>() < 1e-14) continue;
      const Vector u = lu.solve(divergence_adjoint(bt, bmask, q));
      const double num = q.dot(b * u);
      const FEFunction uf(spaces.velocity, u), qf(spaces.pressure, q);
      const double den = luxemburg_norm(sample_gradient(uf, r)) * luxemburg_norm(sample_value(qf, rc));
      if (den <= 0.0) {
        gamma = 0.0;
        continue;
      }
      gamma = std::min(gamma, std::abs(num) / den);
    }
    rep.gamma = gamma;
  }
  rep.unstable = rep.gamma < 1e-10;
  rep.beta = rep.gamma > 0.0 ? 1.0 / rep.gamma : std::numeric_limits<double>::infinity();
  return rep;
}

// ---------------------------------------------------------------------------
// Holder monitor

HolderReport holder_quotient(const FEFunction& c, double alpha, int max_vertices) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("holder_quotient: alpha must lie in (0, 1)");
  const Mesh& mesh = c.space().mesh();
  const int nv = mesh.num_vertices();
  static const Vec2 ref[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  std::vector<double> val(nv, 0.0);
  for (int v = 0; v < nv; ++v) {
    const int e = mesh.vertex_elements(v).front();
    const auto& tri = mesh.element(e);
    const int k = static_cast<int>(std::find(tri.begin(), tri.end(), v) - tri.begin());
    val[v] = c.evaluate(e, ref[k]).value[0];
  }
  HolderReport rep;
  rep.alpha = alpha;
  for (double x : val) rep.sup_norm = std::max(rep.sup_norm, std::abs(x));
  const int stride = nv > max_vertices ? (nv + max_vertices - 1) / max_vertices : 1;
  std::vector<int> ids;
  for (int v = 0; v < nv; v += stride) ids.push_back(v);
  for (std::size_t a = 0; a < ids.size(); ++a) {
    const Vec2& xa = mesh.vertex(ids[a]);
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      const double d = (mesh.vertex(ids[b]) - xa).norm();
      if (d <= 0.0) continue;
      rep.quotient = std::max(rep.quotient, std::abs(val[ids[a]] - val[ids[b]]) / std::pow(d, alpha));
      ++rep.pairs;
    }
  }
  return rep;
}

}  // namespace synfem
