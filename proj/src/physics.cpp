#include "synfem/physics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace synfem {

std::pair<double, double> StressParams::exponent_bounds() const {
  return law.range(range.lo - range.delta(), range.hi + range.delta());
}

double viscosity(double r, double d2, const StressParams& p) {
  return p.nu0 * std::pow(p.kappa1 + p.kappa2 * d2, 0.5 * (r - 2.0));
}

Mat2 stress_with_exponent(double r, const Mat2& du, const StressParams& p) {
  return viscosity(r, du.squaredNorm(), p) * du;
}

Mat2 stress(double c, const Mat2& du, const StressParams& p) {
  return stress_with_exponent(p.exponent(c), du, p);
}

Vec2 flux(double, const Vec2& g, const Mat2& du, const FluxParams& p) {
  return p.coefficient(du) * g;
}

Eigen::Vector3d to_mandel(const Mat2& s) {
  return {s(0, 0), s(1, 1), std::sqrt(2.0) * 0.5 * (s(0, 1) + s(1, 0))};
}

Mat2 from_mandel(const Eigen::Vector3d& m) {
  Mat2 s;
  const double off = m[2] / std::sqrt(2.0);
  s << m[0], off, off, m[1];
  return s;
}

Eigen::Matrix3d stress_jacobian_with_exponent(double r, const Mat2& du, const StressParams& p) {
  // S = nu0 psi^e D, psi = kappa1 + kappa2 m.m, e = (r-2)/2. In Mandel
  // coordinates m.m = |D|^2, so dS/dm = nu0 psi^e I + nu0 (r-2) kappa2 psi^{e-1} m m^T.
  const Eigen::Vector3d m = to_mandel(du);
  const double psi = p.kappa1 + p.kappa2 * m.squaredNorm();
  const double e = 0.5 * (r - 2.0);
  Eigen::Matrix3d t = p.nu0 * std::pow(psi, e) * Eigen::Matrix3d::Identity();
  t += p.nu0 * (r - 2.0) * p.kappa2 * std::pow(psi, e - 1.0) * (m * m.transpose());
  return t;
}

Eigen::Matrix3d stress_jacobian(double c, const Mat2& du, const StressParams& p) {
  return stress_jacobian_with_exponent(p.exponent(c), du, p);
}

namespace {

// a_r = nu0 kappa2^{(r-2)/2}: the large-|B| stress amplitude.
double amplitude(double r, const StressParams& p) {
  return p.nu0 * std::pow(p.kappa2, 0.5 * (r - 2.0));
}

double growth_constant(double r, const StressParams& p) {
  if (r < 2.0) return amplitude(r, p);
  return p.nu0 * std::pow(p.kappa1 + p.kappa2, 0.5 * (r - 2.0));
}

std::vector<double> exponent_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(lo + (hi - lo) * i / n);
  return g;
}

Mat2 random_sym(std::mt19937_64& rng, double magnitude) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat2 b;
  const double off = n(rng);
  b << n(rng), off, off, n(rng);
  const double norm = b.norm();
  return norm > 0 ? Mat2(b * (magnitude / norm)) : b;
}

}  // namespace

StructuralReport verify_structural(const StressParams& p, const FluxParams& q, long samples,
                                   std::uint64_t seed) {
  StructuralReport rep;
  rep.samples = samples;
  const auto [rlo, rhi] = p.exponent_bounds();
  const auto grid = exponent_grid(rlo, rhi, 32);

  for (double r : grid) rep.c1 = std::max(rep.c1, growth_constant(r, p));
  rep.c2 = std::numeric_limits<double>::infinity();
  for (double r : grid) {
    const double a = amplitude(r, p);
    const double rc = r / (r - 1.0);
    rep.c2 = std::min(rep.c2, 0.5 * a / (1.0 + std::pow(a, rc)));
  }
  // The stress is isotropic, so coercivity reduces to a scan in t = |B|.
  for (double r : grid) {
    const double rc = r / (r - 1.0);
    for (int i = 0; i <= 4000; ++i) {
      const double t = i == 0 ? 0.0 : std::pow(10.0, -6.0 + 12.0 * i / 4000.0);
      const double phi = viscosity(r, t * t, p);
      const double s = phi * t;
      rep.c3 = std::max(rep.c3, rep.c2 * (std::pow(t, r) + std::pow(s, rc)) - phi * t * t);
    }
  }
  rep.c3 = 1.1 * rep.c3 + 1e-12;
  rep.c4 = q.k0 + q.k1;
  rep.c5 = q.k0;
  rep.min_monotonicity_gap = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uc(p.range.lo - p.range.delta(), p.range.hi + p.range.delta());
  std::uniform_real_distribution<double> ulog(-3.0, 3.0);
  std::normal_distribution<double> n(0.0, 1.0);
  auto note = [&](const std::string& what, double c, const Mat2& b) {
    if (!rep.first_violation.empty()) return;
    std::ostringstream os;
    os << what << " at c=" << c << " B=[" << b(0, 0) << "," << b(0, 1) << ";" << b(1, 0) << ","
       << b(1, 1) << "]";
    rep.first_violation = os.str();
  };

  for (long k = 0; k < samples; ++k) {
    const double c = uc(rng);
    const double r = p.exponent(c);
    const double rc = r / (r - 1.0);
    const Mat2 b = random_sym(rng, std::pow(10.0, ulog(rng)));
    const Mat2 s = stress(c, b, p);
    const double bn = b.norm(), sn = s.norm();
    if (sn > rep.c1 * (std::pow(bn, r - 1.0) + 1.0) * (1.0 + 1e-12)) {
      ++rep.growth_violations;
      note("growth", c, b);
    }
    const double sb = (s.array() * b.array()).sum();
    if (sb < rep.c2 * (std::pow(bn, r) + std::pow(sn, rc)) - rep.c3) {
      ++rep.coercivity_violations;
      note("coercivity", c, b);
    }
    const Mat2 b1 = random_sym(rng, std::pow(10.0, ulog(rng)));
    const Mat2 b2 = random_sym(rng, std::pow(10.0, ulog(rng)));
    const Mat2 db = b1 - b2;
    if (db.norm() >= 1e-8) {
      const double gap = ((stress(c, b1, p) - stress(c, b2, p)).array() * db.array()).sum();
      rep.min_monotonicity_gap = std::min(rep.min_monotonicity_gap, gap / db.squaredNorm());
      if (!(gap > 0.0)) {
        ++rep.monotonicity_violations;
        note("monotonicity", c, b1);
      }
    }
    const Vec2 g(n(rng), n(rng));
    const Vec2 fl = flux(c, g, b, q);
    if (fl.norm() > rep.c4 * g.norm() * (1.0 + 1e-12) ||
        fl.dot(g) < rep.c5 * g.squaredNorm() * (1.0 - 1e-12)) {
      ++rep.flux_violations;
      note("flux", c, b);
    }
  }
  return rep;
}

}  // namespace synfem
