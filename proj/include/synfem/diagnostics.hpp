#pragma once

#include <limits>
#include <string>
#include <vector>

#include "synfem/fespace.hpp"
#include "synfem/varexp.hpp"

namespace synfem {

/// |grad V| rasterized on a uniform grid of cell centres (midpoint rule),
/// zero outside the domain. Answers ball averages in O(r / cell) time.
class GradientGrid {
 public:
  /// cell <= 0 picks a quarter of the smallest element inradius.
  explicit GradientGrid(const FEFunction& v, double cell = 0.0);

  /// Average of |grad V| over the disc B_r(x), V extended by zero.
  double ball_average(const Vec2& x, double r) const;
  double cell() const { return cell_; }

 private:
  double cell_ = 0.0;
  double x0_ = 0.0, y0_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<double> prefix_;  // per-row prefix sums, (nx + 1) per row
};

/// Element values of the maximal function at barycentres: the element
/// average of |grad V| together with ball averages over radii h_E, 2h_E, ...
/// up to the domain diameter.
std::vector<double> maximal_function(const FEFunction& v);
std::vector<double> maximal_function(const FEFunction& v, const GradientGrid& grid);

struct TruncationReport {
  double lambda = 0.0;
  double mcshane_a = 0.0;   // final A in V(y) + A lambda |x - y|
  bool empty_good_set = false;
  std::vector<char> bad;        // M(grad V) > lambda
  std::vector<char> inflated;   // elements sharing a vertex with a bad one
  std::vector<char> difference; // discrete truncation differs from V
  double kappa = 1.0;           // min over the inflated set of M / lambda, capped at 1
  bool bad_in_inflated = true;
  bool difference_in_inflated = true;
  bool inflated_in_kappa_set = true;
  double equality_defect = 0.0;           // continuous truncation vs V on good elements
  double discrete_equality_defect = 0.0;  // discrete truncation vs V off the inflated set
  double sup_ratio = 0.0;                 // |grad V_lambda|_inf / lambda
  double discrete_sup_ratio = 0.0;        // same for the discrete truncation
  double difference_modular = 0.0;        // int over the difference set of |grad V^n_lambda|^r
  FEFunction truncated;
  FEFunction discrete;
  std::vector<std::string> warnings;
};

/// McShane-type truncation re-interpolated into the velocity family.
/// Good nodes keep V; the rest take min_y V(y) + A lambda |x - y| per
/// component over good nodes y (boundary nodes count as good with value 0).
/// A starts at 2 and doubles until the extension reproduces V at every
/// interface node. `maximal` may be passed to avoid recomputation.
TruncationReport lipschitz_truncate(const FEFunction& v, double lambda,
                                    const std::vector<double>& maximal = {});

/// lipschitz_truncate followed by project_div, plus the set bookkeeping.
/// The difference-set modular is measured with exponent r when given.
TruncationReport discrete_lipschitz_truncate(const FEFunction& v, const Spaces& spaces, double lambda,
                                             const ExponentField* r = nullptr,
                                             const std::vector<double>& maximal = {});

/// lambda = (2^j)^i with i in [2^j, 2^{j+1}).
struct LambdaChoice {
  int j = 0;
  int i = 0;
  int log2_lambda = 0;  // j * i
  double lambda = 0.0;
  double kappa = 1.0;
  double total_modular = 0.0;  // int M^r over the domain
  std::vector<double> layer_modulars;
  bool bound_holds() const;    // integer check of the level bound
};

/// Pigeonhole choice: first layer kappa theta_i < M <= kappa theta_{i+1}
/// with modular at most total / 2^j.
LambdaChoice select_lambda(const std::vector<double>& maximal, const Mesh& mesh,
                           const ExponentField& r, int j, double kappa = 1.0);

struct SmallnessResult {
  LambdaChoice choice;
  TruncationReport truncation;
  double modular = 0.0;  // int over {V_j != V} of |grad V_j|^r
  double scaled = 0.0;   // 2^j * modular / total_modular
};

/// select_lambda and truncate, shrinking kappa to the measured witness until
/// the layers and the containment agree.
SmallnessResult smallness_check(const FEFunction& v, const Spaces& spaces, const ExponentField& r,
                                int j);

struct BogovskiiReport {
  FEFunction velocity;
  double divergence_mismatch = 0.0;  // max_j |<div B H, Q_j> - <H, Q_j>|
  double gradient_norm = 0.0;        // ||grad B H||_r
  double dual_norm = 0.0;            // dictionary estimate of sup <H, Q> / ||Q||_{r'}
  double ratio = 0.0;                // gradient_norm / dual_norm
};

/// Minimal H1-seminorm velocity with <div V, Q> = <H, Q> for all Q
/// (a Stokes solve). H is a pressure-space function with zero mean.
BogovskiiReport discrete_bogovskii(const FEFunction& h, const Spaces& spaces, const ExponentField& r);

struct InfSupReport {
  std::string pairing;
  double gamma = 0.0;  // inf_Q sup_V <div V, Q> / (|V|_1 ||Q||)
  double beta = 0.0;   // 1 / gamma
  std::string exponent;
  bool eigenvalue = true;  // false for the dictionary route
  bool unstable = false;   // gamma below 1e-10
};

/// r == 2: smallest generalized eigenvalue of B A^{-1} B^T against the
/// pressure mass matrix on zero-mean pressures (dense). Otherwise a
/// dictionary of pressure modes, each tested against its Stokes velocity
/// with Luxemburg norms. gamma = +inf when the zero-mean pressure space is
/// trivial. `dictionary` forces the dictionary route for any exponent.
InfSupReport infsup_constant(const Spaces& spaces, const ExponentField& r, bool dictionary = false);

struct HolderReport {
  double alpha = 0.0;
  double quotient = 0.0;  // max |C(x) - C(y)| / |x - y|^alpha over vertex pairs
  double sup_norm = 0.0;
  double norm() const { return quotient + sup_norm; }
  long pairs = 0;
};

/// All vertex pairs up to max_vertices; beyond that a fixed-stride subset.
HolderReport holder_quotient(const FEFunction& c, double alpha, int max_vertices = 4000);

}  // namespace synfem
