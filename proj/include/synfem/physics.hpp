#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "synfem/mesh.hpp"
#include "synfem/varexp.hpp"

namespace synfem {

struct StressParams {
  double nu0 = 1.0;
  double kappa1 = 1.0;
  double kappa2 = 1.0;
  ScalarExponentLaw law = ScalarExponentLaw::rational(1.6, 0.3);
  ConcentrationRange range;

  /// r(clamp(c)).
  double exponent(double c) const { return law(range.clamp(c)); }
  /// Bounds of r over the clamped concentration interval.
  std::pair<double, double> exponent_bounds() const;
};

/// K(|Du|) = k0 + k1 / (1 + |Du|).
struct FluxParams {
  double k0 = 1.0;
  double k1 = 0.0;

  double coefficient(const Mat2& du) const { return k0 + k1 / (1.0 + du.norm()); }
};

/// nu0 (kappa1 + kappa2 |D|^2)^{(r-2)/2}
double viscosity(double r, double d2, const StressParams& p);

/// S = nu0 (kappa1 + kappa2 |D|^2)^{(r-2)/2} D with |.| the Frobenius norm.
Mat2 stress_with_exponent(double r, const Mat2& du, const StressParams& p);
Mat2 stress(double c, const Mat2& du, const StressParams& p);

Vec2 flux(double c, const Vec2& g, const Mat2& du, const FluxParams& p);

/// dS/dD in Mandel notation (D11, D22, sqrt2 D12); symmetric.
Eigen::Matrix3d stress_jacobian_with_exponent(double r, const Mat2& du, const StressParams& p);
Eigen::Matrix3d stress_jacobian(double c, const Mat2& du, const StressParams& p);

Eigen::Vector3d to_mandel(const Mat2& sym);
Mat2 from_mandel(const Eigen::Vector3d& m);

struct StructuralReport {
  long samples = 0;
  long growth_violations = 0;
  long monotonicity_violations = 0;
  long coercivity_violations = 0;
  long flux_violations = 0;
  double c1 = 0.0;  // growth
  double c2 = 0.0;  // coercivity factor
  double c3 = 0.0;  // coercivity offset
  double c4 = 0.0;  // flux bound
  double c5 = 0.0;  // flux coercivity
  double min_monotonicity_gap = 0.0;  // min of gap / |B1 - B2|^2
  std::string first_violation;

  long violations() const {
    return growth_violations + monotonicity_violations + coercivity_violations + flux_violations;
  }
};

/// Samples (c, B, B1, B2, g) and checks growth, strict monotonicity,
/// coercivity of S and the two flux bounds.
StructuralReport verify_structural(const StressParams& p, const FluxParams& q, long samples,
                                   std::uint64_t seed = 20240601);

}  // namespace synfem
