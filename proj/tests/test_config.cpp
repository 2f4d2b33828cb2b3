#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "synfem/config.hpp"
#include "synfem/error.hpp"
#include "synfem/expr.hpp"
#include "synfem/study.hpp"

using namespace synfem;

namespace {

std::string pointer_of(const std::string& json_text) {
  try {
    parse_config(json_text);
  } catch (const ConfigError& e) {
    return e.pointer();
  }
  return "<accepted>";
}

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path d = fs::path(::testing::TempDir()) / ("synfem_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SYNFEM_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(ConfigParse, DefaultsAndValues) {
  const ExperimentConfig c = parse_config(R"({"levels": 3, "pairing": "crouzeix-raviart",
      "physics": {"nu0": 2.0, "k1": 0}, "exponent": {"type": "rational", "a": 1.5, "b": 0.2},
      "solver": {"inner": "picard", "max_outer": 7}})");
  EXPECT_EQ(c.levels, 3);
  EXPECT_EQ(c.pairing, Pairing::P2Bubble_P1Disc);
  EXPECT_EQ(c.stress.nu0, 2.0);
  EXPECT_EQ(c.flux.k1, 0.0);
  EXPECT_EQ(c.solver.inner, InnerLinearization::Picard);
  EXPECT_EQ(c.solver.max_outer, 7);
  EXPECT_EQ(c.force.kind, ForceKind::Zero);
}

TEST(ConfigParse, ErrorPointers) {
  EXPECT_EQ(pointer_of(R"({"levls": 2})"), "/levls");
  EXPECT_EQ(pointer_of(R"({"physics": {"nu0": -1}})"), "/physics/nu0");
  EXPECT_EQ(pointer_of(R"({"physics": {"nu0": "fast"}})"), "/physics/nu0");
  EXPECT_EQ(pointer_of(R"({"levels": 0})"), "/levels");
  EXPECT_EQ(pointer_of(R"({"pairing": "taylor-hood"})"), "/pairing");
  EXPECT_EQ(pointer_of(R"json({"force": {"type": "expression", "x": "sin(("}})json"), "/force/x");
  EXPECT_EQ(pointer_of(R"({"force": {"kind": "zero"}})"), "/force/type");
  EXPECT_EQ(pointer_of(R"({"c_range": [2, 1]})"), "/c_range");
  EXPECT_EQ(pointer_of(R"({"mesh": {"builtin": "disc"}})"), "/mesh/builtin");
  EXPECT_EQ(pointer_of(R"({"mesh": "no_such_file.msh"})"), "/mesh");
  EXPECT_EQ(pointer_of(R"({"solver": {"damping": 1.5}})"), "/solver/damping");
  EXPECT_EQ(pointer_of(R"({"diagnostics": {"alpha": 1}})"), "/diagnostics/alpha");
  EXPECT_EQ(pointer_of(R"({"force": {"type": "manufactured"}, "concentration": "1"})"), "/concentration");
  EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(ConfigParse, ExperimentRangeFromBoundaryData) {
  const ExperimentConfig c = parse_config(R"({"concentration": "1 + 0.5*x*y"})");
  const auto mesh = base_mesh(c);
  const Experiment e = build_experiment(c, *mesh);
  EXPECT_NEAR(e.problem.stress.range.lo, 1.0, 1e-12);
  EXPECT_NEAR(e.problem.stress.range.hi, 1.5, 1e-12);
  EXPECT_FALSE(e.mms.has_value());
}

TEST(Expressions, ParseEvaluateDifferentiate) {
  const double pi = std::acos(-1.0);
  const Expr e = parse_expr("sin(pi*x)*y^2 - 3");
  EXPECT_NEAR(e(0.5, 2.0), 1.0, 1e-14);
  EXPECT_NEAR(e.diff(0)(0.25, 2.0), 4 * pi * std::cos(pi / 4), 1e-13);
  EXPECT_NEAR(e.diff(1)(0.5, 3.0), 6.0, 1e-14);
  EXPECT_NEAR(parse_expr("-2^2")(0, 0), -4.0, 0.0);
  EXPECT_NEAR(parse_expr("exp(log(x)) + sqrt(y)")(2.0, 9.0), 5.0, 1e-14);
  const CompiledExpr c(e);
  EXPECT_EQ(c(0.3, 0.7), e(0.3, 0.7));
  EXPECT_THROW(parse_expr("x +"), Error);
  EXPECT_THROW(parse_expr("foo(x)"), Error);
}

TEST(Locator, FindsElementsAndRejectsOutside) {
  const Mesh m = refine_uniform(criss_cross_square(), 2);
  const PointLocator loc(m);
  Vec2 ref;
  for (const Vec2& x : {Vec2(0.1, 0.2), Vec2(0.5, 0.5), Vec2(0.99, 0.01), Vec2(1.0, 1.0)}) {
    const int e = loc.locate(x, ref);
    ASSERT_GE(e, 0);
    EXPECT_LE((m.affine_map(e).to_physical(ref) - x).norm(), 1e-14);
  }
  EXPECT_EQ(loc.locate(Vec2(1.5, 0.5), ref), -1);
}

TEST(Cli, MalformedConfigReportsPointer) {
  const fs::path d = scratch("bad");
  write_file(d / "cfg.json", R"({"physics": {"nu0": -1}})");
  EXPECT_EQ(run_cli("run --config " + (d / "cfg.json").string(), d / "log.txt"), 2);
  const std::string log = read_file(d / "log.txt");
  const auto j = nlohmann::json::parse(log);
  EXPECT_EQ(j.at("pointer"), "/physics/nu0");
}

TEST(Cli, MeshInfo) {
  const fs::path d = scratch("mesh");
  write_file(d / "square.msh", "4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0 1\n1 2\n2 3\n3 0\n");
  ASSERT_EQ(run_cli("mesh-info " + (d / "square.msh").string(), d / "log.txt"), 0);
  const auto j = nlohmann::json::parse(read_file(d / "log.txt"));
  EXPECT_EQ(j.at("elements"), 2);
  EXPECT_EQ(j.at("vertices"), 4);
  EXPECT_NEAR(j.at("area").get<double>(), 1.0, 1e-15);
}

TEST(Cli, RunWritesArtifacts) {
  const fs::path d = scratch("run");
  write_file(d / "cfg.json", R"json({"mesh": {"builtin": "unit_square", "refine": 1},
      "concentration": "1 + 0.5*x*y",
      "force": {"type": "expression", "x": "sin(2*pi*y)", "y": "0"},
      "output": {"matrix_market": true}})json");
  ASSERT_EQ(run_cli("run --config " + (d / "cfg.json").string() + " --out " + (d / "out").string(),
                    d / "log.txt"),
            0)
      << read_file(d / "log.txt");
  bool solution = false, history = false, matrix = false;
  for (const auto& f : fs::directory_iterator(d / "out")) {
    const std::string n = f.path().filename().string();
    solution = solution || n.rfind("solution", 0) == 0;
    history = history || n.rfind("history", 0) == 0;
    matrix = matrix || f.path().extension() == ".mtx";
  }
  EXPECT_TRUE(solution);
  EXPECT_TRUE(history);
  EXPECT_TRUE(matrix);
  EXPECT_TRUE(fs::exists(d / "out" / "report.csv"));
}

TEST(Cli, DiagnoseWritesCsv) {
  const fs::path d = scratch("diag");
  write_file(d / "cfg.json", R"({"mesh": {"builtin": "unit_square", "refine": 1}, "levels": 2})");
  ASSERT_EQ(run_cli("diagnose --which holder --config " + (d / "cfg.json").string() + " --out " +
                        (d / "out").string(),
                    d / "log.txt"),
            0)
      << read_file(d / "log.txt");
  EXPECT_TRUE(fs::exists(d / "out" / "diagnose_holder.csv"));
}

TEST(Cli, UnknownDiagnosticIsRejected) {
  const fs::path d = scratch("which");
  write_file(d / "cfg.json", "{}");
  EXPECT_NE(run_cli("diagnose --which nothing --config " + (d / "cfg.json").string(), d / "log.txt"), 0);
}
