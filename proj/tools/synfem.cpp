// synfem command line driver.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "synfem/assembly.hpp"
#include "synfem/config.hpp"
#include "synfem/diagnostics.hpp"
#include "synfem/error.hpp"
#include "synfem/manufacture.hpp"
#include "synfem/projections.hpp"
#include "synfem/solver.hpp"
#include "synfem/study.hpp"

namespace fs = std::filesystem;
using namespace synfem;

namespace {

struct Common {
  std::string config;
  std::string pairing;
  std::string out;
  int levels = 0;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (!c.pairing.empty()) {
    try {
      cfg.pairing = parse_pairing(c.pairing);
    } catch (const Error& e) {
      throw ConfigError("/pairing", e.what());
    }
  }
  if (c.levels > 0) cfg.levels = c.levels;
  if (!c.out.empty()) cfg.output.directory = c.out;
  fs::create_directories(cfg.output.directory);
  return cfg;
}

std::string path_in(const ExperimentConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output.directory) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  return f;
}

void write_mask(const std::string& path, const std::vector<char>& mask) {
  auto f = open_out(path);
  f << "element,value\n";
  for (std::size_t e = 0; e < mask.size(); ++e) f << e << ',' << (mask[e] ? 1 : 0) << '\n';
}

void write_level_artifacts(const ExperimentConfig& cfg, const Experiment& ex, int level,
                           const Spaces& spaces, const SolveResult& res) {
  const std::string tag = "_L" + std::to_string(level);
  write_solution(path_in(cfg, "solution" + tag + ".bin"), res, spaces);
  {
    auto f = open_out(path_in(cfg, "history" + tag + ".csv"));
    write_history_csv(f, res);
  }
  if (cfg.output.matrix_market) {
    MomentumProblem mp;
    mp.spaces = &spaces;
    mp.stress = ex.problem.stress;
    mp.force = ex.problem.force;
    mp.concentration = &res.c;
    mp.convection = ex.problem.convection;
    Vector state(saddle_layout(spaces).size());
    state << res.u.coefficients(), res.p.coefficients(), res.multiplier;
    const AssembledSystem sys = assemble_momentum(mp, state, Linearization::Newton);
    auto f = open_out(path_in(cfg, "jacobian" + tag + ".mtx"));
    write_matrix_market(f, sys.matrix);
  }
  std::cout << "level " << level << ": outer " << res.outer_iterations
            << (res.converged ? " converged" : " NOT converged") << ", UE1 " << res.energy.ue1
            << ", UE2 " << res.energy.ue2 << '\n';
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const auto mesh0 = base_mesh(cfg);
  const Experiment ex = build_experiment(cfg, *mesh0);
  if (ex.mms) std::cout << "manufactured mode: concentration equation carries a forcing term\n";
  bool all_converged = true;
  const ConvergenceTable t = convergence_study(
      cfg, {}, [&](int level, const Spaces& spaces, const SolveResult& res) {
        all_converged &= res.converged;
        write_level_artifacts(cfg, ex, level, spaces, res);
      });
  auto f = open_out(path_in(cfg, "report.csv"));
  write_table_csv(f, t);
  std::cout << "wrote " << cfg.output.directory << '\n';
  return all_converged ? 0 : 3;
}

int cmd_study(const Common& c, bool infsup) {
  const ExperimentConfig cfg = load(c);
  StudyOptions opts;
  opts.levels = cfg.levels;
  opts.infsup = infsup;
  opts.alpha = cfg.diagnostics.alpha;
  const ConvergenceTable t = convergence_study(cfg, opts);
  auto f = open_out(path_in(cfg, "study.csv"));
  write_table_csv(f, t);
  write_table_csv(std::cout, t);
  return 0;
}

// Smooth reference fields for the projection suite.
struct ReferenceFields {
  std::vector<PointField> velocity, pressure, concentration;
};

ReferenceFields reference_fields() {
  const ManufacturedSolution s = default_manufactured();
  ReferenceFields r;
  const ScalarField u1 = to_field(s.u1), u2 = to_field(s.u2);
  const ScalarField g11 = to_field(s.u1.diff(0)), g12 = to_field(s.u1.diff(1));
  const ScalarField g21 = to_field(s.u2.diff(0)), g22 = to_field(s.u2.diff(1));
  r.velocity.push_back(field_from([=](const Vec2& x) { return Vec2(u1(x), u2(x)); },
                                  [=](const Vec2& x) {
                                    Mat2 g;
                                    g << g11(x), g12(x), g21(x), g22(x);
                                    return g;
                                  }));
  r.pressure.push_back(field_from(to_field(s.p)));
  r.pressure.push_back(field_from(ScalarField([](const Vec2& x) { return std::sin(3.0 * x.x()) * x.y(); })));
  r.concentration.push_back(field_from(to_field(s.c)));
  return r;
}

int cmd_diagnose(const Common& c, const std::string& which) {
  const ExperimentConfig cfg = load(c);
  std::shared_ptr<const Mesh> mesh = base_mesh(cfg);
  const Experiment ex = build_experiment(cfg, *mesh);
  const ExponentField two = ExponentField::constant(2.0);
  auto csv = open_out(path_in(cfg, "diagnose_" + which + ".csv"));
  csv.precision(10);
  std::cout.precision(6);
  const bool needs_solution = which == "truncation" || which == "holder" || which == "bogovskii";

  if (which == "infsup") {
    csv << "level,h_max,pressure_dofs,gamma_r2,beta_r2,gamma_variable,beta_variable,unstable\n";
  } else if (which == "truncation") {
    csv << "level,h_max,j,lambda,mcshane_a,kappa,bad,inflated,difference,equality_defect,"
           "discrete_equality_defect,sup_ratio,discrete_sup_ratio,difference_modular,scaled_modular\n";
  } else if (which == "bogovskii") {
    csv << "level,h_max,divergence_mismatch,gradient_norm,dual_norm,ratio\n";
  } else if (which == "projections") {
    csv << "level,h_max,c1,c2,c3,divergence_defect\n";
  } else if (which == "holder") {
    csv << "level,h_max,alpha,quotient,sup_norm,pairs\n";
  } else {
    throw ConfigError("/which", "expected infsup, truncation, bogovskii, projections or holder");
  }

  for (int level = 0; level < cfg.levels; ++level) {
    if (level > 0) mesh = std::make_shared<const Mesh>(refine_uniform(*mesh));
    const Spaces spaces = build_spaces(mesh, cfg.pairing);
    SolveResult res;
    if (needs_solution) res = solve_coupled(spaces, ex.problem, cfg.solver);
    const std::string tag = "_L" + std::to_string(level);
    csv << level << ',' << mesh->h_max() << ',';
    if (which == "infsup") {
      const InfSupReport a = infsup_constant(spaces, two);
      const FEFunction cd = interpolate(spaces.concentration, ex.problem.boundary_concentration);
      const InfSupReport b =
          infsup_constant(spaces, ExponentField::concentration(ex.problem.stress.law, cd, ex.problem.stress.range));
      csv << spaces.pressure->num_dofs() << ',' << a.gamma << ',' << a.beta << ',' << b.gamma << ','
          << b.beta << ',' << ((a.unstable || b.unstable) ? 1 : 0) << '\n';
      std::cout << "level " << level << ": gamma(r=2) " << a.gamma << ", gamma(r(c_d)) " << b.gamma << '\n';
    } else if (which == "truncation") {
      const ExponentField r = ExponentField::concentration(ex.problem.stress.law, res.c, ex.problem.stress.range);
      const int j = cfg.diagnostics.lambda_level;
      TruncationReport t;
      double scaled = 0.0;
      if (cfg.diagnostics.lambda > 0) {
        t = discrete_lipschitz_truncate(res.u, spaces, cfg.diagnostics.lambda, &r);
      } else {
        const SmallnessResult s = smallness_check(res.u, spaces, r, j);
        t = s.truncation;
        scaled = s.scaled;
      }
      auto count = [](const std::vector<char>& m) { return std::count(m.begin(), m.end(), 1); };
      csv << j << ',' << t.lambda << ',' << t.mcshane_a << ',' << t.kappa << ',' << count(t.bad) << ','
          << count(t.inflated) << ',' << count(t.difference) << ',' << t.equality_defect << ','
          << t.discrete_equality_defect << ',' << t.sup_ratio << ',' << t.discrete_sup_ratio << ','
          << t.difference_modular << ',' << scaled << '\n';
      for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
      if (cfg.output.masks) {
        write_mask(path_in(cfg, "mask_bad" + tag + ".csv"), t.bad);
        write_mask(path_in(cfg, "mask_inflated" + tag + ".csv"), t.inflated);
        write_mask(path_in(cfg, "mask_difference" + tag + ".csv"), t.difference);
      }
      std::cout << "level " << level << ": lambda " << t.lambda << ", bad " << count(t.bad)
                << ", sup ratio " << t.discrete_sup_ratio << '\n';
    } else if (which == "bogovskii") {
      // H: the discrete pressure, or a fixed mode when the pressure vanishes.
      FEFunction h = res.p;
      if (h.coefficients().lpNorm<Eigen::Infinity>() < 1e-14) {
        h = project_Q(field_from(ScalarField([](const Vec2& x) {
                        return std::cos(std::acos(-1.0) * x.x()) * std::cos(std::acos(-1.0) * x.y());
                      })),
                      spaces.pressure);
      }
      const Vector m = assemble_moments(*spaces.pressure);
      h.coefficients().array() -= m.dot(h.coefficients()) / m.sum();
      const ExponentField r = ExponentField::concentration(ex.problem.stress.law, res.c, ex.problem.stress.range);
      const BogovskiiReport b = discrete_bogovskii(h, spaces, r);
      csv << b.divergence_mismatch << ',' << b.gradient_norm << ',' << b.dual_norm << ',' << b.ratio << '\n';
      std::cout << "level " << level << ": mismatch " << b.divergence_mismatch << ", ratio " << b.ratio << '\n';
    } else if (which == "projections") {
      const ReferenceFields f = reference_fields();
      const ProjectionReport p = projection_report(spaces, f.velocity, f.pressure, f.concentration);
      csv << p.c1 << ',' << p.c2 << ',' << p.c3 << ',' << p.divergence_defect << '\n';
      auto el = open_out(path_in(cfg, "projections_elements" + tag + ".csv"));
      el << "element,c1,c2,c3\n";
      for (std::size_t e = 0; e < p.c1_elements.size(); ++e) {
        el << e << ',' << p.c1_elements[e] << ',' << p.c2_elements[e] << ',' << p.c3_elements[e] << '\n';
      }
      std::cout << "level " << level << ": c1 " << p.c1 << ", c2 " << p.c2 << ", c3 " << p.c3
                << ", defect " << p.divergence_defect << '\n';
    } else {
      const HolderReport h = holder_quotient(res.c, cfg.diagnostics.alpha);
      csv << h.alpha << ',' << h.quotient << ',' << h.sup_norm << ',' << h.pairs << '\n';
      std::cout << "level " << level << ": quotient " << h.quotient << '\n';
    }
  }
  return 0;
}

int cmd_mesh_info(const std::string& path) {
  const Mesh m = load_mesh(path);
  nlohmann::json j;
  j["vertices"] = m.num_vertices();
  j["elements"] = m.num_elements();
  j["edges"] = m.num_edges();
  j["boundary_edges"] = m.boundary_edges().size();
  j["h_max"] = m.h_max();
  j["area"] = m.total_area();
  j["diameter"] = m.domain_diameter();
  j["shape_regularity"] = shape_regularity(m);
  std::cout << j.dump(2) << '\n';
  return 0;
}

void report_error(const std::string& kind, const std::string& message, const std::string* pointer) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  if (pointer) j["pointer"] = *pointer;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synfem: finite element solver for a concentration-dependent power-law fluid"};
  app.require_subcommand(1);
  Common common;
  std::string which, mesh_file;
  bool infsup = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--pairing", common.pairing, "p2p0 or crouzeix-raviart");
    sub->add_option("--out", common.out, "output directory (overrides the config)");
  };
  CLI::App* run = app.add_subcommand("run", "solve on every configured level and write artifacts");
  add_common(run);
  CLI::App* study = app.add_subcommand("study", "convergence table over uniform refinements");
  add_common(study);
  study->add_option("--levels", common.levels, "number of levels")->check(CLI::PositiveNumber);
  study->add_flag("--infsup", infsup, "also compute the discrete inf-sup constant per level");
  CLI::App* diag = app.add_subcommand("diagnose", "analysis diagnostics per level");
  add_common(diag);
  diag->add_option("--levels", common.levels, "number of levels")->check(CLI::PositiveNumber);
  diag->add_option("--which", which, "diagnostic to run")
      ->required()
      ->check(CLI::IsMember({"infsup", "truncation", "bogovskii", "projections", "holder"}));
  CLI::App* info = app.add_subcommand("mesh-info", "print mesh statistics as JSON");
  info->add_option("mesh", mesh_file, "mesh file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(common);
    if (study->parsed()) return cmd_study(common, infsup);
    if (diag->parsed()) return cmd_diagnose(common, which);
    if (info->parsed()) return cmd_mesh_info(mesh_file);
  } catch (const ConfigError& e) {
    report_error("config", e.what(), &e.pointer());
    return 2;
  } catch (const ParseError& e) {
    report_error("parse", e.what(), nullptr);
    return 2;
  } catch (const Error& e) {
    report_error("runtime", e.what(), nullptr);
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what(), nullptr);
    return 1;
  }
  return 0;
}
