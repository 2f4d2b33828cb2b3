#include "synfem/solver.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <ostream>

#include "json.hpp"

#include "synfem/error.hpp"
#include "synfem/varexp.hpp"

namespace synfem {

void SolverConfig::validate() const {
  if (!(picard_tol > 0)) throw Error("solver: picard_tol must be positive");
  if (!(linear_tol > 0)) throw Error("solver: linear_tol must be positive");
  if (max_outer < 1) throw Error("solver: max_outer must be >= 1");
  if (max_inner < 1) throw Error("solver: max_inner must be >= 1");
  if (!(damping > 0 && damping <= 1)) throw Error("solver: damping must lie in (0, 1]");
}

FEFunction velocity_part(const Spaces& spaces, const Vector& state) {
  return FEFunction(spaces.velocity, state.head(spaces.velocity->num_dofs()));
}

FEFunction pressure_part(const Spaces& spaces, const Vector& state) {
  return FEFunction(spaces.pressure,
                    state.segment(spaces.velocity->num_dofs(), spaces.pressure->num_dofs()));
}

Vector solve_saddle(const SparseMatrix& a, const Vector& rhs, const SaddleLayout& lay,
                    const Vector& moments, const Vector& state) {
  const int n = lay.size();
  const int pin = lay.pressure(0), mu = lay.multiplier();
  TripletBuffer t(n, n);
  t.reserve(a.values().size());
  Vector b = rhs;
  for (int i = 0; i < n; ++i) {
    if (i == pin || i == mu) {
      t.add(i, i, 1.0);
      b[i] = 0.0;
      continue;
    }
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
      const int j = a.col_idx()[k];
      if (j != pin && j != mu) t.add(i, j, a.values()[k]);
    }
  }
  Vector x = solve_direct(t.finalize(), b);
  auto dp = x.segment(lay.nu, lay.np);
  double mean = moments.dot(dp);
  if (state.size() == n) mean += moments.dot(state.segment(lay.nu, lay.np));
  dp.array() -= mean / moments.sum();
  x[mu] = state.size() == n ? -state[mu] : 0.0;
  return x;
}

MomentumResult solve_momentum(const Spaces& spaces, const ProblemSpec& prob,
                              const FEFunction& concentration, const Vector& initial,
                              const SolverConfig& cfg) {
  cfg.validate();
  MomentumProblem mp;
  mp.spaces = &spaces;
  mp.stress = prob.stress;
  mp.force = prob.force;
  mp.concentration = &concentration;
  mp.convection = prob.convection;
  const SaddleLayout lay = saddle_layout(spaces);
  const Vector moments = assemble_moments(*spaces.pressure);

  MomentumResult out;
  out.state = initial.size() == lay.size() ? initial : Vector::Zero(lay.size());
  for (int dof : spaces.velocity->boundary_dofs()) out.state[dof] = 0.0;
  InnerReport& rep = out.report;
  double res = residual_norm(momentum_residual(mp, out.state), spaces);
  rep.history.push_back(res);

  for (int it = 0; it < cfg.max_inner; ++it) {
    if (res <= cfg.linear_tol) break;
    const bool newton = cfg.inner == InnerLinearization::NewtonAfterPicard && res < cfg.newton_switch;
    const AssembledSystem sys =
        assemble_momentum(mp, out.state, newton ? Linearization::Newton : Linearization::Picard);
    const Vector delta = solve_saddle(sys.matrix, sys.rhs, lay, moments, out.state);
    double step = cfg.damping;
    Vector trial;
    double trial_res = 0.0;
    for (int halving = 0; halving <= 5; ++halving) {
      trial = out.state + step * delta;
      trial_res = residual_norm(momentum_residual(mp, trial), spaces);
      if (trial_res < res) break;
      step *= 0.5;
    }
    out.state = trial;
    res = trial_res;
    rep.iterations = it + 1;
    if (newton) ++rep.newton_steps;
    rep.history.push_back(res);
    const std::size_t n = rep.history.size();
    if (n > 5 && res > 0.99 * rep.history[n - 6] && res > cfg.linear_tol) {
      rep.stagnated = true;
      break;
    }
  }
  rep.residual = res;
  rep.converged = res <= cfg.linear_tol;
  return out;
}

FEFunction solve_concentration(const Spaces& spaces, const ProblemSpec& prob,
                               const FEFunction& velocity) {
  ConcentrationProblem cp;
  cp.spaces = &spaces;
  cp.flux = prob.flux;
  cp.velocity = &velocity;
  cp.forcing = prob.concentration_forcing;
  cp.boundary = prob.boundary_concentration;
  const AssembledSystem sys = assemble_concentration(cp);
  return FEFunction(spaces.concentration, solve_direct(sys.matrix, sys.rhs));
}

SolveResult solve_coupled(const Spaces& spaces, const ProblemSpec& prob, const SolverConfig& cfg) {
  cfg.validate();
  const SaddleLayout lay = saddle_layout(spaces);
  SolveResult result;
  FEFunction c = prob.boundary_concentration
                     ? interpolate(spaces.concentration, prob.boundary_concentration)
                     : FEFunction(spaces.concentration);
  Vector state = Vector::Zero(lay.size());
  FEFunction u_prev(spaces.velocity);
  const ExponentField r_minus = ExponentField::constant(prob.stress.exponent_bounds().first);
  const ExponentField two = ExponentField::constant(2.0);

  for (int k = 1; k <= cfg.max_outer; ++k) {
    const MomentumResult mom = solve_momentum(spaces, prob, c, state, cfg);
    state = mom.state;
    const FEFunction u = velocity_part(spaces, state);
    const FEFunction c_next = solve_concentration(spaces, prob, u);

    IterationRecord rec;
    rec.outer = k;
    rec.velocity_increment =
        sobolev_norm(FEFunction(spaces.velocity, u.coefficients() - u_prev.coefficients()), r_minus);
    rec.concentration_increment = sobolev_norm(
        FEFunction(spaces.concentration, c_next.coefficients() - c.coefficients()), two);
    rec.increment = rec.velocity_increment + rec.concentration_increment;
    rec.momentum_residual = mom.report.residual;
    rec.inner_iterations = mom.report.iterations;
    rec.c_min = c_next.coefficients().minCoeff();
    rec.c_max = c_next.coefficients().maxCoeff();
    const double d = prob.stress.range.delta();
    rec.out_of_range = rec.c_min < prob.stress.range.lo - d || rec.c_max > prob.stress.range.hi + d;
    result.history.push_back(rec);

    u_prev = u;
    c = c_next;
    result.outer_iterations = k;
    if (rec.increment <= cfg.picard_tol && mom.report.converged) {
      result.converged = true;
      break;
    }
  }
  result.u = u_prev;
  result.p = pressure_part(spaces, state);
  result.c = c;
  result.multiplier = state[lay.multiplier()];
  result.energy = energy_report(result.u, result.p, result.c, prob.stress, prob.flux);
  return result;
}

EnergyReport energy_report(const FEFunction& u, const FEFunction& p, const FEFunction& c,
                           const StressParams& sp, const FluxParams& fp) {
  EnergyReport rep;
  const Mesh& mesh = u.space().mesh();
  const ExponentField r = ExponentField::concentration(sp.law, c, sp.range);
  const ExponentField rc = r.conjugate();
  rep.velocity_modular = modular(sample_gradient(u, r));
  rep.stress_modular = modular(sample(mesh, rc, [&](int e, const Vec2& ref, const Vec2&) {
    const PointEval pu = u.evaluate(e, ref);
    const double cv = c.evaluate(e, ref).value[0];
    const Mat2 du = 0.5 * (pu.grad + pu.grad.transpose());
    return stress(cv, du, sp).norm();
  }));
  rep.ue1 = rep.velocity_modular + rep.stress_modular;
  const ExponentField two = ExponentField::constant(2.0);
  rep.ue2 = modular(sample(mesh, two, [&](int e, const Vec2& ref, const Vec2&) {
    const PointEval pu = u.evaluate(e, ref);
    const Vec2 g = c.evaluate(e, ref).grad.row(0).transpose();
    const Mat2 du = 0.5 * (pu.grad + pu.grad.transpose());
    const Vec2 q = flux(0.0, g, du, fp);
    return std::sqrt(g.squaredNorm() + q.squaredNorm());
  }));
  rep.pressure_norm = luxemburg_norm(sample_value(p, rc));
  rep.gradient_l2 = modular(sample_gradient(u, two));
  return rep;
}

double constraint_defect(const FEFunction& u, const FESpace& pressure) {
  return divergence_moments(u, pressure).lpNorm<Eigen::Infinity>();
}

namespace {

constexpr char kMagic[9] = "SYNFEM01";

}  // namespace

void write_solution(const std::string& path, const SolveResult& r, const Spaces& spaces) {
  nlohmann::json h;
  h["format"] = "synfem-solution";
  h["version"] = 1;
  h["pairing"] = to_string(spaces.pairing);
  h["mesh"] = {{"vertices", spaces.velocity->mesh().num_vertices()},
               {"elements", spaces.velocity->mesh().num_elements()}};
  h["converged"] = r.converged;
  h["outer_iterations"] = r.outer_iterations;
  h["multiplier"] = r.multiplier;
  std::vector<std::pair<std::string, const FEFunction*>> fields = {
      {"velocity", &r.u}, {"pressure", &r.p}, {"concentration", &r.c}};
  std::uint64_t offset = 0;
  for (const auto& [name, f] : fields) {
    h["fields"].push_back({{"name", name},
                           {"space", f->space().tag()},
                           {"dofs", f->coefficients().size()},
                           {"offset", offset}});
    offset += static_cast<std::uint64_t>(f->coefficients().size());
  }
  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(kMagic, 8);
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, f] : fields) {
    out.write(reinterpret_cast<const char*>(f->coefficients().data()),
              static_cast<std::streamsize>(f->coefficients().size() * sizeof(double)));
  }
  if (!out) throw Error("write failed for " + path);
}

StoredSolution read_solution(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw Error(path + ": not a solution container");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  StoredSolution s;
  s.header.resize(len);
  in.read(s.header.data(), static_cast<std::streamsize>(len));
  const auto h = nlohmann::json::parse(s.header);
  for (const auto& f : h.at("fields")) {
    Vector v(f.at("dofs").get<long>());
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    s.fields.emplace_back(f.at("name").get<std::string>(), std::move(v));
  }
  if (!in) throw Error(path + ": truncated solution container");
  return s;
}

void write_history_csv(std::ostream& out, const SolveResult& r) {
  out << "outer,increment,velocity_increment,concentration_increment,momentum_residual,"
         "inner_iterations,c_min,c_max,out_of_range\n";
  out.precision(10);
  for (const auto& h : r.history) {
    out << h.outer << ',' << h.increment << ',' << h.velocity_increment << ','
        << h.concentration_increment << ',' << h.momentum_residual << ',' << h.inner_iterations
        << ',' << h.c_min << ',' << h.c_max << ',' << (h.out_of_range ? 1 : 0) << '\n';
  }
}

}  // namespace synfem
