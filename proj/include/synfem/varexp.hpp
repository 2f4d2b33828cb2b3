#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "synfem/fespace.hpp"
#include "synfem/mesh.hpp"
#include "synfem/quadrature.hpp"

namespace synfem {

/// r(c) as a scalar law: either a + b c / (1 + c) or a monotone table
/// interpolated linearly (constant extension outside the table).
class ScalarExponentLaw {
 public:
  static ScalarExponentLaw rational(double a, double b);
  static ScalarExponentLaw table(std::vector<std::pair<double, double>> points);
  static ScalarExponentLaw constant(double r) { return rational(r, 0.0); }

  double operator()(double c) const;
  /// Range of r over [cmin, cmax].
  std::pair<double, double> range(double cmin, double cmax) const;
  /// Lipschitz constant on [cmin, cmax] (Hoelder with exponent 1).
  double lipschitz(double cmin, double cmax) const;

  bool is_rational() const { return rational_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const std::vector<std::pair<double, double>>& points() const { return points_; }
  std::string describe() const;

 private:
  bool rational_ = true;
  double a_ = 2.0, b_ = 0.0;
  std::vector<std::pair<double, double>> points_;
};

/// Admissible concentration interval; values are clamped to
/// [lo - delta, hi + delta], delta = 0.01 (hi - lo), before entering r(c).
struct ConcentrationRange {
  double lo = 0.0, hi = 1.0;
  double delta() const { return 0.01 * (hi - lo); }
  double clamp(double c) const;
};

/// x -> r(x) evaluated per element (so piecewise constant fields are exact).
class ExponentField {
 public:
  using Eval = std::function<double(int element, const Vec2& ref, const Vec2& x)>;

  ExponentField(Eval eval, double lower, double upper, bool constant = false);

  static ExponentField constant(double p);
  static ExponentField function(const std::function<double(const Vec2&)>& f, double lower,
                                double upper);
  /// r(x) = law(clamp(C(x))).
  static ExponentField concentration(const ScalarExponentLaw& law, const FEFunction& c,
                                     const ConcentrationRange& range);
  static ExponentField piecewise_constant(std::vector<double> values);

  /// Throws ExponentRangeError when the value leaves [lower, upper] or (1, inf).
  double operator()(int element, const Vec2& ref, const Vec2& x) const;
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  bool is_constant() const { return constant_; }

  /// r / (r - 1); bounds swap roles.
  ExponentField conjugate() const;

 private:
  Eval eval_;
  double lower_, upper_;
  bool constant_;
};

/// Weighted point samples of a nonnegative field with its exponent.
struct Samples {
  std::vector<double> weights;
  std::vector<double> values;
  std::vector<double> exponents;

  double measure() const;
  void append(const Samples& other);
};

using ElementFunction = std::function<double(int element, const Vec2& ref, const Vec2& x)>;

Samples sample(const Mesh& mesh, const ExponentField& r, const ElementFunction& f,
               int degree = kAssemblyDegree);
/// Same, restricted to the listed elements.
Samples sample(const Mesh& mesh, const std::vector<int>& elements, const ExponentField& r,
               const ElementFunction& f, int degree = kAssemblyDegree);
/// |f| (Euclidean for vectors).
Samples sample_value(const FEFunction& f, const ExponentField& r, int degree = kAssemblyDegree);
/// |grad f| (Frobenius for vectors).
Samples sample_gradient(const FEFunction& f, const ExponentField& r, int degree = kAssemblyDegree);

/// sum w |f / scale|^r
double modular(const Samples& s, double scale = 1.0);
/// inf { l > 0 : modular(f / l) <= 1 } by bisection; 0 for f = 0.
double luxemburg_norm(const Samples& s);

/// ||f||_{r} + ||grad f||_{r}
double sobolev_norm(const FEFunction& f, const ExponentField& r, int degree = kAssemblyDegree);

/// Lower witness for C_log: max over vertex/centroid pairs with
/// 0 < |x - y| <= 1/2 of |r(x) - r(y)| (-log |x - y|).
double log_holder_estimate(const ExponentField& r, const Mesh& mesh);
/// Same over explicit samples (point, value) for monotonicity tests.
double log_holder_estimate(const std::vector<std::pair<Vec2, double>>& samples);

/// Smallest c with (avg |f|)^{r(x)} <= c (avg |f|^{r(y)} + |Q|^m) for every
/// sample x of Q. `s` holds the samples of f over Q. Throws when
/// avg |f| > |Q|^{-m}.
double key_estimate_witness(const Samples& s, double m);

/// Element-wise minimum of r over vertices and quadrature points.
ExponentField local_exponent(const ExponentField& r, const Mesh& mesh,
                             int degree = kAssemblyDegree);
std::vector<double> local_exponent_values(const ExponentField& r, const Mesh& mesh,
                                          int degree = kAssemblyDegree);

}  // namespace synfem
