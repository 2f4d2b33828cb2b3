#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "synfem/assembly.hpp"
#include "synfem/fespace.hpp"
#include "synfem/physics.hpp"

namespace synfem {

enum class InnerLinearization { Picard, NewtonAfterPicard };

struct SolverConfig {
  double picard_tol = 1e-8;         // combined outer increment
  int max_outer = 50;
  InnerLinearization inner = InnerLinearization::NewtonAfterPicard;
  double damping = 1.0;             // first trial step length
  double linear_tol = 1e-10;        // momentum residual (max-abs) target
  int max_inner = 100;
  double newton_switch = 1e-3;      // residual below which Newton takes over

  void validate() const;
};

/// Everything the coupled problem needs besides the mesh.
struct ProblemSpec {
  StressParams stress;
  FluxParams flux;
  VectorField force;                   // f, empty for zero
  ScalarField boundary_concentration;  // c_d
  ScalarField concentration_forcing;   // manufactured mode only
  bool convection = true;
};

struct InnerReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  bool stagnated = false;
  int newton_steps = 0;
  std::vector<double> history;
};

struct MomentumResult {
  Vector state;  // [U | P | mu]
  InnerReport report;
};

/// Solves a [U | P | mu] system with the dense mean row removed: the first
/// pressure DOF is pinned, then the pressure part is shifted so that the
/// updated pressure state + dP has zero mean (dmu = -mu). An empty state
/// shifts dP itself. Valid because constants lie in the kernel of B^T.
Vector solve_saddle(const SparseMatrix& a, const Vector& rhs, const SaddleLayout& layout,
                    const Vector& moments, const Vector& state = Vector());

/// Damped Picard (then Newton) iteration for the saddle problem with C fixed.
MomentumResult solve_momentum(const Spaces& spaces, const ProblemSpec& prob,
                              const FEFunction& concentration, const Vector& initial,
                              const SolverConfig& cfg);

FEFunction solve_concentration(const Spaces& spaces, const ProblemSpec& prob,
                               const FEFunction& velocity);

struct EnergyReport {
  double velocity_modular = 0.0;   // int |grad U|^{r(C)}
  double stress_modular = 0.0;     // int |S|^{r'(C)}
  double ue1 = 0.0;                // sum of the two
  double ue2 = 0.0;                // int |grad C|^2 + |q|^2
  double pressure_norm = 0.0;      // ||P||_{r'(C)}
  double gradient_l2 = 0.0;        // int |grad U|^2
};

struct IterationRecord {
  int outer = 0;
  double increment = 0.0;
  double velocity_increment = 0.0;
  double concentration_increment = 0.0;
  double momentum_residual = 0.0;
  int inner_iterations = 0;
  double c_min = 0.0, c_max = 0.0;
  bool out_of_range = false;
};

struct SolveResult {
  FEFunction u, p, c;
  double multiplier = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
  EnergyReport energy;
};

SolveResult solve_coupled(const Spaces& spaces, const ProblemSpec& prob, const SolverConfig& cfg);

/// Split of a monolithic state into FE functions.
FEFunction velocity_part(const Spaces& spaces, const Vector& state);
FEFunction pressure_part(const Spaces& spaces, const Vector& state);

EnergyReport energy_report(const FEFunction& u, const FEFunction& p, const FEFunction& c,
                           const StressParams& stress, const FluxParams& flux);

/// max_j |<div U, Q_j>|
double constraint_defect(const FEFunction& u, const FESpace& pressure);

/// Binary container: "SYNFEM01", uint64 header length, JSON header, then
/// little-endian doubles of the fields named in the header.
void write_solution(const std::string& path, const SolveResult& r, const Spaces& spaces);
struct StoredSolution {
  std::string header;  // JSON text
  std::vector<std::pair<std::string, Vector>> fields;
};
StoredSolution read_solution(const std::string& path);

void write_history_csv(std::ostream& out, const SolveResult& r);

}  // namespace synfem
