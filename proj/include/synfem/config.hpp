#pragma once

#include <memory>
#include <optional>
#include <string>

#include "synfem/fespace.hpp"
#include "synfem/manufacture.hpp"
#include "synfem/mesh.hpp"
#include "synfem/physics.hpp"
#include "synfem/solver.hpp"

namespace synfem {

enum class ForceKind { Zero, Expression, Manufactured };

struct ForceSpec {
  ForceKind kind = ForceKind::Zero;
  std::string fx = "0", fy = "0";
  // Manufactured closed forms; empty strings select the default solution.
  std::string u1, u2, p, c;
};

struct OutputSpec {
  std::string directory = "synfem_out";
  bool matrix_market = false;
  bool masks = false;
};

struct DiagnosticsSpec {
  double alpha = 0.25;
  int lambda_level = 1;
  double lambda = 0.0;  // explicit truncation level, 0 selects by level
};

struct ExperimentConfig {
  std::string mesh_path;               // empty: built-in domain
  std::string builtin = "unit_square"; // or "criss_cross"
  int initial_refinements = 0;
  int levels = 1;
  Pairing pairing = Pairing::P2_P0;
  StressParams stress;
  FluxParams flux;
  std::string boundary_concentration = "1";
  std::optional<std::pair<double, double>> c_range;
  ForceSpec force;
  bool convection = true;
  SolverConfig solver;
  OutputSpec output;
  DiagnosticsSpec diagnostics;
};

/// Throws ConfigError carrying the JSON pointer of the offending value.
/// Relative mesh paths are resolved against base_dir.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Mesh of level 0 (after the initial refinements).
std::shared_ptr<const Mesh> base_mesh(const ExperimentConfig& cfg);

struct Experiment {
  ProblemSpec problem;
  std::optional<Manufactured> mms;
};

/// Forcing, boundary data and the admissible concentration range. The
/// range is taken from the config when given, otherwise from c_d (or the
/// manufactured c) sampled on a 101 x 101 grid over the mesh bounding box.
Experiment build_experiment(const ExperimentConfig& cfg, const Mesh& mesh);

}  // namespace synfem
