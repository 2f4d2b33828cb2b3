#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "synfem/linalg.hpp"
#include "synfem/mesh.hpp"
#include "synfem/quadrature.hpp"

namespace synfem {

/// Scalar element families. Vector spaces use the same family per component.
enum class Family {
  P1,        // continuous linear
  P2,        // continuous quadratic
  P2Bubble,  // P2 enriched by the cubic bubble 27 l0 l1 l2
  P0Disc,    // piecewise constant
  P1Disc,    // discontinuous linear
};

enum class Pairing { P2_P0, P2Bubble_P1Disc };

/// Accepts "p2p0" and "crouzeix-raviart" (plus the enum spellings).
Pairing parse_pairing(const std::string& name);
std::string to_string(Pairing p);
std::string to_string(Family f);

int local_dof_count(Family f);
bool is_continuous(Family f);

/// Reference basis values and gradients at xi. Local order: vertex
/// functions, then edge functions (local edge k opposite vertex k), then the
/// bubble.
void reference_basis(Family f, const Vec2& xi, double* values, Vec2* grads);

/// Basis tabulated at the points of a quadrature rule.
struct TabulatedBasis {
  int local = 0;
  std::vector<std::vector<double>> values;    // [q][i]
  std::vector<std::vector<Vec2>> ref_grads;   // [q][i]
};
TabulatedBasis tabulate(Family f, const QuadratureRule& rule);

class FESpace {
 public:
  FESpace(std::shared_ptr<const Mesh> mesh, Family family, int components);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  Family family() const { return family_; }
  int components() const { return components_; }
  bool continuous() const { return is_continuous(family_); }

  int scalar_dofs() const { return scalar_dofs_; }
  int num_dofs() const { return components_ * scalar_dofs_; }
  /// Dimension of the subspace with zero boundary trace.
  int free_dofs() const {
    return components_ * (scalar_dofs_ - static_cast<int>(boundary_.size()));
  }
  int local_dofs() const { return local_dofs_; }

  /// Scalar DOF ids of element e in local order.
  const std::vector<int>& element_dofs(int e) const { return element_dofs_[e]; }
  int dof(int component, int scalar) const { return component * scalar_dofs_ + scalar; }

  /// Scalar boundary DOFs (empty for discontinuous families).
  const std::vector<int>& boundary_scalar_dofs() const { return boundary_; }
  bool is_boundary_scalar(int s) const { return is_boundary_[s] != 0; }
  /// All component DOFs on the boundary, sorted.
  std::vector<int> boundary_dofs() const;

  /// Nodal point of a scalar DOF (centroid for bubbles and P0).
  const Vec2& dof_point(int s) const { return points_[s]; }

  std::string tag() const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  Family family_;
  int components_;
  int scalar_dofs_ = 0;
  int local_dofs_ = 0;
  std::vector<std::vector<int>> element_dofs_;
  std::vector<int> boundary_;
  std::vector<char> is_boundary_;
  std::vector<Vec2> points_;
};

using SpacePtr = std::shared_ptr<const FESpace>;

struct Spaces {
  Pairing pairing;
  SpacePtr velocity;       // vector valued, 2 components
  SpacePtr pressure;       // discontinuous
  SpacePtr concentration;  // continuous P1
};

Spaces build_spaces(std::shared_ptr<const Mesh> mesh, Pairing pairing);

/// Value and gradient at a point. grad.row(c) is the gradient of component c;
/// scalar functions use index 0 only.
struct PointEval {
  Vec2 value = Vec2::Zero();
  Mat2 grad = Mat2::Zero();
};

class FEFunction {
 public:
  FEFunction() = default;
  explicit FEFunction(SpacePtr space);
  FEFunction(SpacePtr space, Vector coefficients);

  const FESpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  const Vector& coefficients() const { return coeffs_; }
  Vector& coefficients() { return coeffs_; }

  /// Throws on an element id out of range.
  PointEval evaluate(int element, const Vec2& ref_point) const;
  /// Coefficients of element e gathered as [component][local].
  void gather(int element, std::vector<double>& local) const;

 private:
  SpacePtr space_;
  Vector coeffs_;
};

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

/// Nodal interpolant. For P2Bubble the bubble coefficient also matches the
/// value at the centroid.
FEFunction interpolate(SpacePtr space, const ScalarField& g);
FEFunction interpolate(SpacePtr space, const VectorField& g);

/// Replaces constrained rows by identity rows carrying the prescribed
/// value and eliminates the matching columns into the right-hand side.
/// `values` is keyed by DOFs of `space`; `offset` locates the space inside a
/// block system. Throws on a key that is not a boundary DOF.
SparseMatrix apply_dirichlet(const FESpace& space, const SparseMatrix& system, Vector& rhs,
                             const std::map<int, double>& values, int offset = 0);

}  // namespace synfem
