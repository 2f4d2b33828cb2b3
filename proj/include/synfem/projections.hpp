#pragma once

#include <functional>
#include <vector>

#include "synfem/fespace.hpp"
#include "synfem/varexp.hpp"

namespace synfem {

/// Point evaluation with element context: value and gradient at physical
/// point x seen from element e. Scalars use component 0.
using PointField = std::function<PointEval(int element, const Vec2& x)>;

PointField field_from(const FEFunction& f);
/// Closed form without gradient information (gradient reported as zero).
PointField field_from(const VectorField& v);
PointField field_from(const ScalarField& s);
PointField field_from(const VectorField& v, const std::function<Mat2(const Vec2&)>& grad);

/// Fortin operator onto V^n: element dual-basis averaging at the nodes
/// (boundary nodes zeroed), edge-bubble correction of int_e v on interior
/// edges and, for P1disc pressures, element-bubble correction of the
/// linear divergence moments. Idempotent on V^n.
FEFunction project_div(const PointField& v, const Spaces& spaces);

/// Element-local L2 projection onto the pressure space.
FEFunction project_Q(const PointField& q, SpacePtr pressure);

/// P1 quasi-interpolant: element dual basis (12 l_i - 3) / |E| on the
/// lowest-numbered element at each vertex, boundary values zeroed.
FEFunction project_Z(const PointField& z, SpacePtr concentration);

/// <div v, Q_j> computed as int_{dE} v.n Q_j - int_E v.grad Q_j.
Vector divergence_targets(const PointField& v, const FESpace& pressure);
/// max_j |<div P v, Q_j> - <div v, Q_j>|.
double divergence_defect(const FEFunction& projected, const PointField& v, const FESpace& pressure);

struct ProjectionReport {
  std::vector<double> c1_elements, c2_elements, c3_elements;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double divergence_defect = 0.0;
};

/// Local ratio max_E avg_E(|P v| + h_E |grad P v|) / avg_{S_E}(|v| + h_E |grad v|).
std::vector<double> local_stability_ratios(const Mesh& mesh, const PointField& original,
                                           const FEFunction& projected, bool patch);

/// Runs the three projectors on the given inputs and collects witnesses.
ProjectionReport projection_report(const Spaces& spaces, const std::vector<PointField>& velocities,
                                   const std::vector<PointField>& pressures,
                                   const std::vector<PointField>& concentrations);

struct VariableStability {
  double lhs = 0.0;    // int |grad P v|^r
  double rhs = 0.0;    // int |grad v|^r
  double slack = 0.0;  // max h_E^3
  double ratio = 0.0;          // lhs / rhs, or 1 when rhs vanishes
  double slack_ratio = 0.0;    // (lhs - slack) / rhs
};
VariableStability variable_exponent_stability_check(const PointField& v, const Spaces& spaces,
                                                    const ExponentField& r);

}  // namespace synfem
