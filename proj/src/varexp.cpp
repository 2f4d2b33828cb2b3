#include "synfem/varexp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "synfem/error.hpp"

namespace synfem {

ScalarExponentLaw ScalarExponentLaw::rational(double a, double b) {
  if (!(a > 1.0)) throw ExponentRangeError("exponent law: need a > 1");
  if (!(b >= 0.0)) throw ExponentRangeError("exponent law: need b >= 0");
  ScalarExponentLaw law;
  law.rational_ = true;
  law.a_ = a;
  law.b_ = b;
  return law;
}

ScalarExponentLaw ScalarExponentLaw::table(std::vector<std::pair<double, double>> points) {
  if (points.size() < 2) throw ExponentRangeError("exponent table: need at least two points");
  int sign = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].second > 1.0) || !std::isfinite(points[i].second)) {
      throw ExponentRangeError("exponent table: r must lie in (1, inf)");
    }
    if (i == 0) continue;
    if (!(points[i].first > points[i - 1].first)) {
      throw ExponentRangeError("exponent table: c values must increase");
    }
    const double d = points[i].second - points[i - 1].second;
    const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (s != 0 && sign != 0 && s != sign) throw ExponentRangeError("exponent table: r must be monotone");
    if (s != 0) sign = s;
  }
  ScalarExponentLaw law;
  law.rational_ = false;
  law.points_ = std::move(points);
  return law;
}

double ScalarExponentLaw::operator()(double c) const {
  if (rational_) {
    if (!(c > -1.0)) throw ExponentRangeError("exponent law evaluated at c <= -1");
    return a_ + b_ * c / (1.0 + c);
  }
  if (c <= points_.front().first) return points_.front().second;
  if (c >= points_.back().first) return points_.back().second;
  auto it = std::upper_bound(points_.begin(), points_.end(), c,
                             [](double v, const auto& p) { return v < p.first; });
  const auto& [c1, r1] = *it;
  const auto& [c0, r0] = *(it - 1);
  return r0 + (r1 - r0) * (c - c0) / (c1 - c0);
}

std::pair<double, double> ScalarExponentLaw::range(double cmin, double cmax) const {
  // Both families are monotone, so the extremes sit at the endpoints.
  const double r0 = (*this)(cmin), r1 = (*this)(cmax);
  return {std::min(r0, r1), std::max(r0, r1)};
}

double ScalarExponentLaw::lipschitz(double cmin, double cmax) const {
  if (rational_) return b_ / ((1.0 + cmin) * (1.0 + cmin));
  double l = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const auto& [c0, r0] = points_[i - 1];
    const auto& [c1, r1] = points_[i];
    if (c1 < cmin || c0 > cmax) continue;
    l = std::max(l, std::abs(r1 - r0) / (c1 - c0));
  }
  return l;
}

std::string ScalarExponentLaw::describe() const {
  std::ostringstream os;
  if (rational_) {
    os << "rational(a=" << a_ << ", b=" << b_ << ")";
  } else {
    os << "table(" << points_.size() << " points)";
  }
  return os.str();
}

double ConcentrationRange::clamp(double c) const {
  return std::clamp(c, lo - delta(), hi + delta());
}

ExponentField::ExponentField(Eval eval, double lower, double upper, bool constant)
    : eval_(std::move(eval)), lower_(lower), upper_(upper), constant_(constant) {
  if (!(lower > 1.0) || !(upper >= lower) || !std::isfinite(upper)) {
    throw ExponentRangeError("exponent bounds must satisfy 1 < r- <= r+ < inf");
  }
}

ExponentField ExponentField::constant(double p) {
  return ExponentField([p](int, const Vec2&, const Vec2&) { return p; }, p, p, true);
}

ExponentField ExponentField::function(const std::function<double(const Vec2&)>& f, double lower,
                                      double upper) {
  return ExponentField([f](int, const Vec2&, const Vec2& x) { return f(x); }, lower, upper);
}

ExponentField ExponentField::concentration(const ScalarExponentLaw& law, const FEFunction& c,
                                           const ConcentrationRange& range) {
  const auto [lo, hi] = law.range(range.lo - range.delta(), range.hi + range.delta());
  return ExponentField(
      [law, c, range](int e, const Vec2& ref, const Vec2&) {
        return law(range.clamp(c.evaluate(e, ref).value[0]));
      },
      lo, hi, lo == hi);
}

ExponentField ExponentField::piecewise_constant(std::vector<double> values) {
  if (values.empty()) throw ExponentRangeError("piecewise constant exponent: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double l = *lo, h = *hi;
  auto shared = std::make_shared<std::vector<double>>(std::move(values));
  return ExponentField([shared](int e, const Vec2&, const Vec2&) { return (*shared)[e]; }, l, h,
                       l == h);
}

double ExponentField::operator()(int element, const Vec2& ref, const Vec2& x) const {
  const double r = eval_(element, ref, x);
  const double slack = 1e-12 * upper_;
  if (!(r > 1.0) || r < lower_ - slack || r > upper_ + slack || !std::isfinite(r)) {
    std::ostringstream os;
    os << "exponent " << r << " outside [" << lower_ << ", " << upper_ << "] at (" << x.x()
       << ", " << x.y() << ")";
    throw ExponentRangeError(os.str());
  }
  return r;
}

ExponentField ExponentField::conjugate() const {
  const Eval inner = eval_;
  const double lo = upper_ / (upper_ - 1.0), hi = lower_ / (lower_ - 1.0);
  return ExponentField(
      [inner](int e, const Vec2& ref, const Vec2& x) {
        const double r = inner(e, ref, x);
        return r / (r - 1.0);
      },
      lo, hi, constant_);
}

double Samples::measure() const {
  double m = 0.0;
  for (double w : weights) m += w;
  return m;
}

void Samples::append(const Samples& o) {
  weights.insert(weights.end(), o.weights.begin(), o.weights.end());
  values.insert(values.end(), o.values.begin(), o.values.end());
  exponents.insert(exponents.end(), o.exponents.begin(), o.exponents.end());
}

Samples sample(const Mesh& mesh, const std::vector<int>& elements, const ExponentField& r,
               const ElementFunction& f, int degree) {
  const QuadratureRule rule = triangle_rule(degree);
  Samples s;
  s.weights.reserve(elements.size() * rule.size());
  s.values.reserve(elements.size() * rule.size());
  s.exponents.reserve(elements.size() * rule.size());
  for (int e : elements) {
    const AffineMap map = mesh.affine_map(e);
    const double jac = std::abs(map.determinant);
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2& xi = rule.points[q];
      const Vec2 x = map.to_physical(xi);
      s.weights.push_back(rule.weights[q] * jac);
      s.values.push_back(std::abs(f(e, xi, x)));
      s.exponents.push_back(r(e, xi, x));
    }
  }
  return s;
}

Samples sample(const Mesh& mesh, const ExponentField& r, const ElementFunction& f, int degree) {
  std::vector<int> all(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) all[e] = e;
  return sample(mesh, all, r, f, degree);
}

Samples sample_value(const FEFunction& f, const ExponentField& r, int degree) {
  const int nc = f.space().components();
  return sample(
      f.space().mesh(), r,
      [&](int e, const Vec2& ref, const Vec2&) { return f.evaluate(e, ref).value.head(nc).norm(); },
      degree);
}

Samples sample_gradient(const FEFunction& f, const ExponentField& r, int degree) {
  const int nc = f.space().components();
  return sample(
      f.space().mesh(), r,
      [&](int e, const Vec2& ref, const Vec2&) {
        return f.evaluate(e, ref).grad.topRows(nc).norm();
      },
      degree);
}

double modular(const Samples& s, double scale) {
  if (!(scale > 0)) throw Error("modular: scale must be positive");
  double m = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (s.values[i] == 0.0) continue;
    m += s.weights[i] * std::pow(s.values[i] / scale, s.exponents[i]);
  }
  return m;
}

double luxemburg_norm(const Samples& s) {
  double fmax = 0.0;
  for (double v : s.values) fmax = std::max(fmax, v);
  if (fmax == 0.0) return 0.0;
  // Work with f / fmax to keep powers in range; the norm is homogeneous.
  double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
  for (double p : s.exponents) {
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
  }
  const double rho = modular(s, fmax);
  if (!std::isfinite(rho)) throw Error("luxemburg_norm: modular is not finite");
  if (rho == 0.0) return 0.0;
  if (pmin == pmax) return fmax * std::pow(rho, 1.0 / pmin);
  // rho <= 1: rho^{1/p-} <= |f| <= rho^{1/p+}; rho >= 1 the other way.
  double lo = rho <= 1.0 ? std::pow(rho, 1.0 / pmin) : std::pow(rho, 1.0 / pmax);
  double hi = rho <= 1.0 ? std::pow(rho, 1.0 / pmax) : std::pow(rho, 1.0 / pmin);
  lo *= 1.0 - 1e-12;
  hi *= 1.0 + 1e-12;
  if (!(modular(s, fmax * lo) >= 1.0) || !(modular(s, fmax * hi) <= 1.0)) {
    throw Error("luxemburg_norm: bisection bracket failure");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double m = modular(s, fmax * mid);
    if (std::abs(m - 1.0) <= 1e-13) return fmax * mid;
    (m > 1.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-16 * hi) break;
  }
  return fmax * std::sqrt(lo * hi);
}

double sobolev_norm(const FEFunction& f, const ExponentField& r, int degree) {
  return luxemburg_norm(sample_value(f, r, degree)) + luxemburg_norm(sample_gradient(f, r, degree));
}

double log_holder_estimate(const std::vector<std::pair<Vec2, double>>& pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i].first - pts[j].first).norm();
      if (d <= 0.0 || d > 0.5) continue;
      best = std::max(best, std::abs(pts[i].second - pts[j].second) * (-std::log(d)));
    }
  }
  return best;
}

double log_holder_estimate(const ExponentField& r, const Mesh& mesh) {
  std::vector<std::pair<Vec2, double>> pts;
  const Vec2 corners[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const int e = mesh.vertex_elements(v).front();
    const auto& el = mesh.element(e);
    const int k = static_cast<int>(std::find(el.begin(), el.end(), v) - el.begin());
    pts.emplace_back(mesh.vertex(v), r(e, corners[k], mesh.vertex(v)));
  }
  const Vec2 bary(1.0 / 3.0, 1.0 / 3.0);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    pts.emplace_back(mesh.centroid(e), r(e, bary, mesh.centroid(e)));
  }
  return log_holder_estimate(pts);
}

double key_estimate_witness(const Samples& s, double m) {
  const double measure = s.measure();
  if (!(measure > 0)) throw Error("key_estimate_witness: empty sample set");
  double mean = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) mean += s.weights[i] * s.values[i];
  mean /= measure;
  if (mean > std::pow(measure, -m)) {
    throw Error("key_estimate_witness: mean of |f| exceeds |Q|^{-m}");
  }
  const double rhs = modular(s) / measure + std::pow(measure, m);
  double witness = 0.0;
  for (double rx : s.exponents) witness = std::max(witness, std::pow(mean, rx) / rhs);
  return witness;
}

std::vector<double> local_exponent_values(const ExponentField& r, const Mesh& mesh, int degree) {
  const QuadratureRule rule = triangle_rule(degree);
  const Vec2 corners[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  std::vector<double> out(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const AffineMap map = mesh.affine_map(e);
    double rmin = std::numeric_limits<double>::infinity();
    for (const Vec2& c : corners) rmin = std::min(rmin, r(e, c, map.to_physical(c)));
    for (const Vec2& q : rule.points) rmin = std::min(rmin, r(e, q, map.to_physical(q)));
    out[e] = rmin;
  }
  return out;
}

ExponentField local_exponent(const ExponentField& r, const Mesh& mesh, int degree) {
  if (r.is_constant()) return r;
  return ExponentField::piecewise_constant(local_exponent_values(r, mesh, degree));
}

}  // namespace synfem
