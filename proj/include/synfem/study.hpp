#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "synfem/config.hpp"
#include "synfem/diagnostics.hpp"
#include "synfem/solver.hpp"

namespace synfem {

struct ConvergenceRow {
  int level = 0;
  double h_max = 0.0;
  int elements = 0;
  int velocity_dofs = 0, pressure_dofs = 0, concentration_dofs = 0;

  // Errors against the manufactured solution, or against the finest level.
  double velocity_1r = 0.0;     // ||u - U||_{1,r(c)} (Luxemburg)
  double velocity_h1 = 0.0;     // |u - U|_{H1}
  double pressure_l2 = 0.0;
  double concentration_h1 = 0.0;
  // log2 of consecutive error ratios; NaN on the first row.
  double order_velocity_1r = 0.0, order_velocity_h1 = 0.0;
  double order_pressure = 0.0, order_concentration = 0.0;

  EnergyReport energy;
  double constraint_defect = 0.0;
  double gamma = 0.0;        // discrete inf-sup constant (0 when not computed)
  double holder = 0.0;       // vertex-pair Holder quotient of C
  int outer_iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

struct ConvergenceTable {
  bool manufactured = false;
  std::vector<ConvergenceRow> rows;
};

struct StudyOptions {
  int levels = 0;           // 0 uses the config value
  bool infsup = false;      // compute gamma per level
  double alpha = 0.25;      // Holder exponent
};

using LevelCallback = std::function<void(int level, const Spaces&, const SolveResult&)>;

/// Solves on successively refined meshes. With manufactured forcing the
/// errors are exact; otherwise they are measured against the finest level.
ConvergenceTable convergence_study(const ExperimentConfig& cfg, const StudyOptions& opts = {},
                                   const LevelCallback& on_level = {});

void write_table_csv(std::ostream& out, const ConvergenceTable& t);

/// Locates points of the domain in a fixed mesh (uniform bucket grid).
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);
  /// Element containing x and its reference coordinates; -1 when outside.
  int locate(const Vec2& x, Vec2& ref) const;

 private:
  const Mesh* mesh_;
  double x0_ = 0, y0_ = 0, cell_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace synfem
