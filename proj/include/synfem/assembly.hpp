#pragma once

#include "synfem/fespace.hpp"
#include "synfem/linalg.hpp"
#include "synfem/physics.hpp"
#include "synfem/varexp.hpp"

namespace synfem {

/// Rule exact for the trilinear forms on every shipped family.
inline constexpr int kTrilinearDegree = 8;

/// B_u[v,w,h] = 1/2 int ((v.grad) w . h - (v.grad) h . w)
double trilinear_Bu(const FEFunction& v, const FEFunction& w, const FEFunction& h,
                    int degree = kTrilinearDegree);
/// B_c[b,v,z] = 1/2 int (z v.grad b - b v.grad z)
double trilinear_Bc(const FEFunction& b, const FEFunction& v, const FEFunction& z,
                    int degree = kTrilinearDegree);
/// |B_u[v,w,h]| / (|v|_{1,r} |w|_{1,r} |h|_{1,r}); 0 when an argument is 0.
double bu_bound_check(const FEFunction& v, const FEFunction& w, const FEFunction& h,
                      const ExponentField& r);

/// Quadrature degree used for the momentum forms of a velocity space.
int momentum_degree(const FESpace& velocity);

/// Layout of the monolithic momentum unknown [U | P | mu]; mu multiplies
/// the zero-mean pressure constraint.
struct SaddleLayout {
  int nu = 0;
  int np = 0;
  int size() const { return nu + np + 1; }
  int pressure(int j) const { return nu + j; }
  int multiplier() const { return nu + np; }
};
SaddleLayout saddle_layout(const Spaces& spaces);

enum class Linearization { Picard, Newton };

struct AssembledSystem {
  SparseMatrix matrix;  // full system, constraints applied
  Vector rhs;           // right-hand side; for momentum the correction rhs -R
  Vector residual;      // nonlinear residual R (momentum only)
  SparseMatrix a;       // velocity-velocity (or scalar) block before constraints
  SparseMatrix b;       // B_ji = int Q_j div V_i
};

/// Inputs of the momentum equation with C frozen.
struct MomentumProblem {
  const Spaces* spaces = nullptr;
  StressParams stress;
  VectorField force;            // f; empty means zero
  const FEFunction* concentration = nullptr;
  bool convection = true;       // include B_u
};

/// Residual of [U | P | mu]:
///   R_V = int S(C,DU):DV + B_u[U,U,V] - int P div V - <f,V>
///   R_Q = -int Q div U + mu int Q
///   R_mu = int P
/// Velocity boundary rows hold U_i.
Vector momentum_residual(const MomentumProblem& prob, const Vector& state);

/// Jacobian (Picard: frozen viscosity and Oseen transport; Newton: exact
/// tangent) plus residual at `state`; boundary rows are identity rows.
AssembledSystem assemble_momentum(const MomentumProblem& prob, const Vector& state,
                                  Linearization lin);

/// Dual-norm proxy: max |R_i| over non-boundary rows.
double residual_norm(const Vector& residual, const Spaces& spaces);

struct ConcentrationProblem {
  const Spaces* spaces = nullptr;
  FluxParams flux;
  const FEFunction* velocity = nullptr;
  ScalarField forcing;   // manufactured right-hand side; empty for the physical problem
  ScalarField boundary;  // c_d
};

/// int K grad C . grad z + B_c[C,U,z] = int g z with C = c_d on the boundary.
/// `a` holds the unconstrained matrix.
AssembledSystem assemble_concentration(const ConcentrationProblem& prob);

/// Plain operators.
SparseMatrix assemble_vector_laplacian(const FESpace& velocity);
SparseMatrix assemble_divergence(const FESpace& velocity, const FESpace& pressure);
SparseMatrix assemble_mass(const FESpace& scalar);
SparseMatrix assemble_stiffness(const FESpace& scalar);
/// int Q_j
Vector assemble_moments(const FESpace& scalar);
/// <div v, Q_j> for a velocity function.
Vector divergence_moments(const FEFunction& v, const FESpace& pressure);

}  // namespace synfem
