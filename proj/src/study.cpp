#include "synfem/study.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "synfem/error.hpp"

namespace synfem {

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    xmin = std::min(xmin, mesh.vertex(i).x());
    xmax = std::max(xmax, mesh.vertex(i).x());
    ymin = std::min(ymin, mesh.vertex(i).y());
    ymax = std::max(ymax, mesh.vertex(i).y());
  }
  const int n = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_elements()))));
  cell_ = std::max(xmax - xmin, ymax - ymin) / n * (1.0 + 1e-12);
  if (!(cell_ > 0)) cell_ = 1.0;
  x0_ = xmin;
  y0_ = ymin;
  nx_ = std::max(1, static_cast<int>(std::ceil((xmax - xmin) / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil((ymax - ymin) / cell_)));
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (int e = 0; e < mesh.num_elements(); ++e) {
    double bx0 = 1e300, bx1 = -1e300, by0 = 1e300, by1 = -1e300;
    for (int v : mesh.element(e)) {
      bx0 = std::min(bx0, mesh.vertex(v).x());
      bx1 = std::max(bx1, mesh.vertex(v).x());
      by0 = std::min(by0, mesh.vertex(v).y());
      by1 = std::max(by1, mesh.vertex(v).y());
    }
    const int i0 = std::clamp(static_cast<int>((bx0 - x0_) / cell_), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((bx1 - x0_) / cell_), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((by0 - y0_) / cell_), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((by1 - y0_) / cell_), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(e);
  }
}

int PointLocator::locate(const Vec2& x, Vec2& ref) const {
  const int i = static_cast<int>(std::floor((x.x() - x0_) / cell_));
  const int j = static_cast<int>(std::floor((x.y() - y0_) / cell_));
  int best = -1;
  double best_violation = std::numeric_limits<double>::infinity();
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
      for (int e : buckets_[static_cast<std::size_t>(jj) * nx_ + ii]) {
        const Vec2 xi = mesh_->affine_map(e).to_reference(x);
        const double violation = std::max({0.0, -xi.x(), -xi.y(), xi.x() + xi.y() - 1.0});
        if (violation < best_violation) {
          best_violation = violation;
          best = e;
          ref = xi;
          if (violation == 0.0) return e;
        }
      }
    }
  return best_violation < 1e-10 ? best : -1;
}

namespace {

double order(double coarse, double fine) {
  if (!(coarse > 0) || !(fine > 0)) return std::numeric_limits<double>::quiet_NaN();
  return std::log2(coarse / fine);
}

// ||g||_{r} with g sampled at quadrature points of the mesh.
double norm_of(const Mesh& mesh, const ExponentField& r, const ElementFunction& g) {
  return luxemburg_norm(sample(mesh, r, g));
}

struct LevelData {
  std::shared_ptr<const Mesh> mesh;
  Spaces spaces;
  SolveResult result;
};

// Evaluates an FE function at a physical point of another (nested) mesh.
PointEval eval_at(const FEFunction& f, const PointLocator& loc, const Vec2& x) {
  Vec2 ref;
  const int e = loc.locate(x, ref);
  if (e < 0) throw Error("point outside the mesh during error evaluation");
  return f.evaluate(e, ref);
}

}  // namespace

ConvergenceTable convergence_study(const ExperimentConfig& cfg, const StudyOptions& opts,
                                   const LevelCallback& on_level) {
  const int levels = opts.levels > 0 ? opts.levels : cfg.levels;
  if (levels < 1) throw Error("convergence_study: need at least one level");
  ConvergenceTable table;
  std::shared_ptr<const Mesh> mesh = base_mesh(cfg);
  const Experiment ex = build_experiment(cfg, *mesh);
  table.manufactured = ex.mms.has_value();
  const ExponentField two = ExponentField::constant(2.0);

  std::vector<LevelData> data;
  for (int level = 0; level < levels; ++level) {
    if (level > 0) mesh = std::make_shared<const Mesh>(refine_uniform(*mesh));
    const auto t0 = std::chrono::steady_clock::now();
    LevelData d;
    d.mesh = mesh;
    d.spaces = build_spaces(mesh, cfg.pairing);
    d.result = solve_coupled(d.spaces, ex.problem, cfg.solver);
    const auto t1 = std::chrono::steady_clock::now();

    ConvergenceRow row;
    row.level = level;
    row.h_max = mesh->h_max();
    row.elements = mesh->num_elements();
    row.velocity_dofs = d.spaces.velocity->num_dofs();
    row.pressure_dofs = d.spaces.pressure->num_dofs();
    row.concentration_dofs = d.spaces.concentration->num_dofs();
    row.energy = d.result.energy;
    row.constraint_defect = constraint_defect(d.result.u, *d.spaces.pressure);
    row.outer_iterations = d.result.outer_iterations;
    row.converged = d.result.converged;
    row.holder = holder_quotient(d.result.c, opts.alpha).quotient;
    if (opts.infsup) row.gamma = infsup_constant(d.spaces, two).gamma;
    row.seconds = std::chrono::duration<double>(t1 - t0).count();

    if (ex.mms) {
      const Manufactured& m = *ex.mms;
      const SolveResult& s = d.result;
      const StressParams sp = ex.problem.stress;
      const auto [rlo, rhi] = sp.exponent_bounds();
      const ExponentField rexact(
          [&](int, const Vec2&, const Vec2& x) { return sp.exponent(m.concentration(x)); }, rlo, rhi,
          rlo == rhi);
      const double ev = norm_of(*mesh, rexact, [&](int e, const Vec2& ref, const Vec2& x) {
        return (m.velocity(x) - s.u.evaluate(e, ref).value).norm();
      });
      const double eg_r = norm_of(*mesh, rexact, [&](int e, const Vec2& ref, const Vec2& x) {
        return (m.velocity_gradient(x) - s.u.evaluate(e, ref).grad).norm();
      });
      row.velocity_1r = ev + eg_r;
      row.velocity_h1 = norm_of(*mesh, two, [&](int e, const Vec2& ref, const Vec2& x) {
        return (m.velocity_gradient(x) - s.u.evaluate(e, ref).grad).norm();
      });
      row.pressure_l2 = norm_of(*mesh, two, [&](int e, const Vec2& ref, const Vec2& x) {
        return std::abs(m.pressure(x) - s.p.evaluate(e, ref).value[0]);
      });
      row.concentration_h1 =
          norm_of(*mesh, two, [&](int e, const Vec2& ref, const Vec2& x) {
            return std::abs(m.concentration(x) - s.c.evaluate(e, ref).value[0]);
          }) +
          norm_of(*mesh, two, [&](int e, const Vec2& ref, const Vec2& x) {
            return (m.concentration_gradient(x) - s.c.evaluate(e, ref).grad.row(0).transpose()).norm();
          });
    }
    table.rows.push_back(row);
    if (on_level) on_level(level, d.spaces, d.result);
    data.push_back(std::move(d));
  }

  if (!ex.mms && levels > 1) {
    // Reference mode: integrate differences on the finest mesh.
    const LevelData& fine = data.back();
    const Mesh& fm = *fine.mesh;
    const SolveResult& fr = fine.result;
    const ExponentField rf = ExponentField::concentration(ex.problem.stress.law, fr.c, ex.problem.stress.range);
    for (int level = 0; level + 1 < levels; ++level) {
      const LevelData& d = data[level];
      const PointLocator loc(*d.mesh);
      ConvergenceRow& row = table.rows[level];
      const auto du = [&](int e, const Vec2& ref, const Vec2& x) {
        return (fr.u.evaluate(e, ref).value - eval_at(d.result.u, loc, x).value).norm();
      };
      const auto dg = [&](int e, const Vec2& ref, const Vec2& x) {
        return (fr.u.evaluate(e, ref).grad - eval_at(d.result.u, loc, x).grad).norm();
      };
      row.velocity_1r = norm_of(fm, rf, du) + norm_of(fm, rf, dg);
      row.velocity_h1 = norm_of(fm, two, dg);
      row.pressure_l2 = norm_of(fm, two, [&](int e, const Vec2& ref, const Vec2& x) {
        return std::abs(fr.p.evaluate(e, ref).value[0] - eval_at(d.result.p, loc, x).value[0]);
      });
      row.concentration_h1 =
          norm_of(fm, two, [&](int e, const Vec2& ref, const Vec2& x) {
            return std::abs(fr.c.evaluate(e, ref).value[0] - eval_at(d.result.c, loc, x).value[0]);
          }) +
          norm_of(fm, two, [&](int e, const Vec2& ref, const Vec2& x) {
            return (fr.c.evaluate(e, ref).grad.row(0) - eval_at(d.result.c, loc, x).grad.row(0)).norm();
          });
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    ConvergenceRow& row = table.rows[k];
    if (k == 0) {
      row.order_velocity_1r = row.order_velocity_h1 = row.order_pressure = row.order_concentration = nan;
      continue;
    }
    const ConvergenceRow& prev = table.rows[k - 1];
    row.order_velocity_1r = order(prev.velocity_1r, row.velocity_1r);
    row.order_velocity_h1 = order(prev.velocity_h1, row.velocity_h1);
    row.order_pressure = order(prev.pressure_l2, row.pressure_l2);
    row.order_concentration = order(prev.concentration_h1, row.concentration_h1);
  }
  return table;
}

void write_table_csv(std::ostream& out, const ConvergenceTable& t) {
  out << "level,h_max,elements,velocity_dofs,pressure_dofs,concentration_dofs,"
         "err_velocity_1r,err_velocity_h1,err_pressure_l2,err_concentration_h1,"
         "order_velocity_1r,order_velocity_h1,order_pressure,order_concentration,"
         "ue1,ue2,pressure_norm,gradient_l2,constraint_defect,gamma,holder,outer_iterations,"
         "converged,mode\n";
  out.precision(10);
  auto num = [&](double v) -> std::ostream& {
    if (std::isnan(v)) return out;
    return out << v;
  };
  for (const auto& r : t.rows) {
    out << r.level << ',' << r.h_max << ',' << r.elements << ',' << r.velocity_dofs << ','
        << r.pressure_dofs << ',' << r.concentration_dofs << ',';
    num(r.velocity_1r) << ',';
    num(r.velocity_h1) << ',';
    num(r.pressure_l2) << ',';
    num(r.concentration_h1) << ',';
    num(r.order_velocity_1r) << ',';
    num(r.order_velocity_h1) << ',';
    num(r.order_pressure) << ',';
    num(r.order_concentration) << ',';
    out << r.energy.ue1 << ',' << r.energy.ue2 << ',' << r.energy.pressure_norm << ','
        << r.energy.gradient_l2 << ',' << r.constraint_defect << ',' << r.gamma << ',' << r.holder
        << ',' << r.outer_iterations << ',' << (r.converged ? 1 : 0) << ','
        << (t.manufactured ? "manufactured" : "reference") << '\n';
  }
}

}  // namespace synfem
