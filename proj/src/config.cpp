#include "synfem/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "synfem/error.hpp"
#include "synfem/expr.hpp"

namespace synfem {

namespace {

using nlohmann::json;

std::string child(const std::string& ptr, const std::string& key) {
  std::string esc;
  for (char ch : key) {
    if (ch == '~') {
      esc += "~0";
    } else if (ch == '/') {
      esc += "~1";
    } else {
      esc += ch;
    }
  }
  return ptr + "/" + esc;
}

void require_object(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
      throw ConfigError(child(ptr, k), "unknown key");
    }
  }
}

double get_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
  return v;
}

int get_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw ConfigError(ptr, "expected an integer");
  return j.get<int>();
}

bool get_bool(const json& j, const std::string& ptr) {
  if (!j.is_boolean()) throw ConfigError(ptr, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw ConfigError(ptr, "expected a string");
  return j.get<std::string>();
}

// Expression given as a string or a number; validated by parsing.
std::string get_expression(const json& j, const std::string& ptr) {
  std::string text;
  if (j.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << get_number(j, ptr);
    text = os.str();
  } else {
    text = get_string(j, ptr);
  }
  try {
    (void)parse_expr(text);
  } catch (const Error& e) {
    throw ConfigError(ptr, std::string("bad expression: ") + e.what());
  }
  return text;
}

template <class F>
void optional_field(const json& obj, const std::string& ptr, const char* key, F&& f) {
  if (obj.contains(key)) f(obj.at(key), child(ptr, key));
}

double positive(double v, const std::string& ptr) {
  if (!(v > 0)) throw ConfigError(ptr, "must be positive");
  return v;
}

ScalarExponentLaw parse_law(const json& j, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
  if (!j.contains("type")) throw ConfigError(child(ptr, "type"), "missing");
  const std::string type = get_string(j.at("type"), child(ptr, "type"));
  try {
    if (type == "rational") {
      require_object(j, ptr, {"type", "a", "b"});
      double a = 1.6, b = 0.3;
      optional_field(j, ptr, "a", [&](const json& v, const std::string& p) { a = get_number(v, p); });
      optional_field(j, ptr, "b", [&](const json& v, const std::string& p) { b = get_number(v, p); });
      return ScalarExponentLaw::rational(a, b);
    }
    if (type == "table") {
      require_object(j, ptr, {"type", "points"});
      const std::string pp = child(ptr, "points");
      if (!j.contains("points")) throw ConfigError(pp, "missing");
      const json& pts = j.at("points");
      if (!pts.is_array()) throw ConfigError(pp, "expected an array of [c, r] pairs");
      std::vector<std::pair<double, double>> points;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::string ip = pp + "/" + std::to_string(i);
        if (!pts[i].is_array() || pts[i].size() != 2) throw ConfigError(ip, "expected [c, r]");
        points.emplace_back(get_number(pts[i][0], ip + "/0"), get_number(pts[i][1], ip + "/1"));
      }
      return ScalarExponentLaw::table(points);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(ptr, e.what());
  }
  throw ConfigError(child(ptr, "type"), "expected \"rational\" or \"table\"");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  const std::string r;
  require_object(root, r,
                 {"mesh", "levels", "pairing", "physics", "exponent", "c_range", "concentration",
                  "force", "convection", "solver", "output", "diagnostics"});
  ExperimentConfig cfg;

  optional_field(root, r, "mesh", [&](const json& j, const std::string& p) {
    if (j.is_string()) {
      cfg.mesh_path = get_string(j, p);
    } else {
      require_object(j, p, {"file", "builtin", "refine"});
      if (j.contains("file") == j.contains("builtin")) {
        throw ConfigError(p, "give exactly one of \"file\" and \"builtin\"");
      }
      optional_field(j, p, "file", [&](const json& v, const std::string& q) { cfg.mesh_path = get_string(v, q); });
      optional_field(j, p, "builtin", [&](const json& v, const std::string& q) {
        cfg.builtin = get_string(v, q);
        if (cfg.builtin != "unit_square" && cfg.builtin != "criss_cross") {
          throw ConfigError(q, "expected \"unit_square\" or \"criss_cross\"");
        }
      });
      optional_field(j, p, "refine", [&](const json& v, const std::string& q) {
        cfg.initial_refinements = get_int(v, q);
        if (cfg.initial_refinements < 0) throw ConfigError(q, "must be >= 0");
      });
    }
    if (!cfg.mesh_path.empty()) {
      std::filesystem::path mp(cfg.mesh_path);
      if (mp.is_relative()) mp = std::filesystem::path(base_dir) / mp;
      if (!std::filesystem::exists(mp)) throw ConfigError(p, "mesh file not found: " + mp.string());
      cfg.mesh_path = mp.string();
    }
  });
  optional_field(root, r, "levels", [&](const json& j, const std::string& p) {
    cfg.levels = get_int(j, p);
    if (cfg.levels < 1) throw ConfigError(p, "must be >= 1");
  });
  optional_field(root, r, "pairing", [&](const json& j, const std::string& p) {
    try {
      cfg.pairing = parse_pairing(get_string(j, p));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(p, e.what());
    }
  });
  optional_field(root, r, "physics", [&](const json& j, const std::string& p) {
    require_object(j, p, {"nu0", "kappa1", "kappa2", "k0", "k1"});
    optional_field(j, p, "nu0", [&](const json& v, const std::string& q) { cfg.stress.nu0 = positive(get_number(v, q), q); });
    optional_field(j, p, "kappa1", [&](const json& v, const std::string& q) { cfg.stress.kappa1 = positive(get_number(v, q), q); });
    optional_field(j, p, "kappa2", [&](const json& v, const std::string& q) { cfg.stress.kappa2 = positive(get_number(v, q), q); });
    optional_field(j, p, "k0", [&](const json& v, const std::string& q) { cfg.flux.k0 = positive(get_number(v, q), q); });
    optional_field(j, p, "k1", [&](const json& v, const std::string& q) {
      cfg.flux.k1 = get_number(v, q);
      if (cfg.flux.k1 < 0) throw ConfigError(q, "must be >= 0");
    });
  });
  optional_field(root, r, "exponent", [&](const json& j, const std::string& p) { cfg.stress.law = parse_law(j, p); });
  optional_field(root, r, "c_range", [&](const json& j, const std::string& p) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(p, "expected [lo, hi]");
    const double lo = get_number(j[0], p + "/0"), hi = get_number(j[1], p + "/1");
    if (!(hi >= lo)) throw ConfigError(p, "need lo <= hi");
    cfg.c_range = std::make_pair(lo, hi);
  });
  optional_field(root, r, "concentration", [&](const json& j, const std::string& p) {
    if (j.is_object()) {
      require_object(j, p, {"boundary"});
      optional_field(j, p, "boundary", [&](const json& v, const std::string& q) {
        cfg.boundary_concentration = get_expression(v, q);
      });
    } else {
      cfg.boundary_concentration = get_expression(j, p);
    }
  });
  optional_field(root, r, "force", [&](const json& j, const std::string& p) {
    if (!j.is_object()) throw ConfigError(p, "expected an object");
    if (!j.contains("type")) throw ConfigError(child(p, "type"), "missing");
    const std::string type = get_string(j.at("type"), child(p, "type"));
    if (type == "zero") {
      require_object(j, p, {"type"});
      cfg.force.kind = ForceKind::Zero;
    } else if (type == "expression") {
      require_object(j, p, {"type", "x", "y"});
      cfg.force.kind = ForceKind::Expression;
      optional_field(j, p, "x", [&](const json& v, const std::string& q) { cfg.force.fx = get_expression(v, q); });
      optional_field(j, p, "y", [&](const json& v, const std::string& q) { cfg.force.fy = get_expression(v, q); });
    } else if (type == "manufactured") {
      require_object(j, p, {"type", "u1", "u2", "p", "c"});
      cfg.force.kind = ForceKind::Manufactured;
      optional_field(j, p, "u1", [&](const json& v, const std::string& q) { cfg.force.u1 = get_expression(v, q); });
      optional_field(j, p, "u2", [&](const json& v, const std::string& q) { cfg.force.u2 = get_expression(v, q); });
      optional_field(j, p, "p", [&](const json& v, const std::string& q) { cfg.force.p = get_expression(v, q); });
      optional_field(j, p, "c", [&](const json& v, const std::string& q) { cfg.force.c = get_expression(v, q); });
      if (cfg.force.u1.empty() != cfg.force.u2.empty()) {
        throw ConfigError(p, "give both u1 and u2 or neither");
      }
    } else {
      throw ConfigError(child(p, "type"), "expected \"zero\", \"expression\" or \"manufactured\"");
    }
  });
  if (cfg.force.kind == ForceKind::Manufactured) {
    if (root.contains("concentration")) {
      throw ConfigError("/concentration", "boundary data comes from the manufactured c");
    }
    if (!cfg.stress.law.is_rational()) {
      throw ConfigError("/exponent/type", "manufactured forcing needs a rational law");
    }
  }
  optional_field(root, r, "convection", [&](const json& j, const std::string& p) { cfg.convection = get_bool(j, p); });
  optional_field(root, r, "solver", [&](const json& j, const std::string& p) {
    require_object(j, p, {"picard_tol", "max_outer", "inner", "damping", "linear_tol", "max_inner", "newton_switch"});
    SolverConfig& s = cfg.solver;
    optional_field(j, p, "picard_tol", [&](const json& v, const std::string& q) { s.picard_tol = positive(get_number(v, q), q); });
    optional_field(j, p, "linear_tol", [&](const json& v, const std::string& q) { s.linear_tol = positive(get_number(v, q), q); });
    optional_field(j, p, "newton_switch", [&](const json& v, const std::string& q) { s.newton_switch = get_number(v, q); });
    optional_field(j, p, "max_outer", [&](const json& v, const std::string& q) {
      s.max_outer = get_int(v, q);
      if (s.max_outer < 1) throw ConfigError(q, "must be >= 1");
    });
    optional_field(j, p, "max_inner", [&](const json& v, const std::string& q) {
      s.max_inner = get_int(v, q);
      if (s.max_inner < 1) throw ConfigError(q, "must be >= 1");
    });
    optional_field(j, p, "damping", [&](const json& v, const std::string& q) {
      s.damping = get_number(v, q);
      if (!(s.damping > 0 && s.damping <= 1)) throw ConfigError(q, "must lie in (0, 1]");
    });
    optional_field(j, p, "inner", [&](const json& v, const std::string& q) {
      const std::string t = get_string(v, q);
      if (t == "picard") {
        s.inner = InnerLinearization::Picard;
      } else if (t == "newton-after-picard") {
        s.inner = InnerLinearization::NewtonAfterPicard;
      } else {
        throw ConfigError(q, "expected \"picard\" or \"newton-after-picard\"");
      }
    });
  });
  optional_field(root, r, "output", [&](const json& j, const std::string& p) {
    require_object(j, p, {"directory", "matrix_market", "masks"});
    optional_field(j, p, "directory", [&](const json& v, const std::string& q) { cfg.output.directory = get_string(v, q); });
    optional_field(j, p, "matrix_market", [&](const json& v, const std::string& q) { cfg.output.matrix_market = get_bool(v, q); });
    optional_field(j, p, "masks", [&](const json& v, const std::string& q) { cfg.output.masks = get_bool(v, q); });
  });
  optional_field(root, r, "diagnostics", [&](const json& j, const std::string& p) {
    require_object(j, p, {"alpha", "lambda_level", "lambda"});
    optional_field(j, p, "alpha", [&](const json& v, const std::string& q) {
      cfg.diagnostics.alpha = get_number(v, q);
      if (!(cfg.diagnostics.alpha > 0 && cfg.diagnostics.alpha < 1)) throw ConfigError(q, "must lie in (0, 1)");
    });
    optional_field(j, p, "lambda_level", [&](const json& v, const std::string& q) {
      cfg.diagnostics.lambda_level = get_int(v, q);
      if (cfg.diagnostics.lambda_level < 1 || cfg.diagnostics.lambda_level > 4) {
        throw ConfigError(q, "must lie in [1, 4]");
      }
    });
    optional_field(j, p, "lambda", [&](const json& v, const std::string& q) {
      cfg.diagnostics.lambda = positive(get_number(v, q), q);
    });
  });
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

std::shared_ptr<const Mesh> base_mesh(const ExperimentConfig& cfg) {
  Mesh m = !cfg.mesh_path.empty() ? load_mesh(cfg.mesh_path)
           : cfg.builtin == "criss_cross" ? criss_cross_square()
                                          : unit_square();
  if (cfg.initial_refinements > 0) m = refine_uniform(m, cfg.initial_refinements);
  return std::make_shared<const Mesh>(std::move(m));
}

namespace {

std::pair<double, double> sample_range(const ScalarField& f, const Mesh& mesh) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    xmin = std::min(xmin, mesh.vertex(i).x());
    xmax = std::max(xmax, mesh.vertex(i).x());
    ymin = std::min(ymin, mesh.vertex(i).y());
    ymax = std::max(ymax, mesh.vertex(i).y());
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  const int n = 100;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const double v = f(Vec2(xmin + (xmax - xmin) * i / n, ymin + (ymax - ymin) * j / n));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  return {lo, hi};
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& cfg, const Mesh& mesh) {
  Experiment ex;
  ProblemSpec& pr = ex.problem;
  pr.stress = cfg.stress;
  pr.flux = cfg.flux;
  pr.convection = cfg.convection;
  switch (cfg.force.kind) {
    case ForceKind::Zero:
      break;
    case ForceKind::Expression: {
      const ScalarField fx = to_field(parse_expr(cfg.force.fx));
      const ScalarField fy = to_field(parse_expr(cfg.force.fy));
      pr.force = [fx, fy](const Vec2& x) { return Vec2(fx(x), fy(x)); };
      break;
    }
    case ForceKind::Manufactured:
      break;
  }
  if (cfg.force.kind == ForceKind::Manufactured) {
    ManufacturedSolution sol = default_manufactured();
    if (!cfg.force.u1.empty()) {
      sol.u1 = parse_expr(cfg.force.u1);
      sol.u2 = parse_expr(cfg.force.u2);
    }
    if (!cfg.force.p.empty()) sol.p = parse_expr(cfg.force.p);
    if (!cfg.force.c.empty()) sol.c = parse_expr(cfg.force.c);
    const ScalarField cs = to_field(sol.c);
    const auto [lo, hi] = cfg.c_range ? *cfg.c_range : sample_range(cs, mesh);
    pr.stress.range.lo = lo;
    pr.stress.range.hi = hi;
    ex.mms = manufacture(sol, pr.stress, pr.flux, cfg.convection);
    pr.force = ex.mms->force;
    pr.boundary_concentration = ex.mms->concentration;
    pr.concentration_forcing = ex.mms->concentration_forcing;
  } else {
    pr.boundary_concentration = to_field(parse_expr(cfg.boundary_concentration));
    const auto [lo, hi] = cfg.c_range ? *cfg.c_range : sample_range(pr.boundary_concentration, mesh);
    pr.stress.range.lo = lo;
    pr.stress.range.hi = hi;
  }
  return ex;
}

}  // namespace synfem
