#include "synfem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SparseLU>

#include "synfem/error.hpp"

namespace synfem {

SparseMatrix::SparseMatrix(int rows, int cols, std::vector<int> row_ptr,
                           std::vector<int> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (static_cast<int>(row_ptr_.size()) != rows_ + 1 || col_idx_.size() != values_.size() ||
      row_ptr_.back() != static_cast<int>(values_.size())) {
    throw Error("SparseMatrix: inconsistent CSR arrays");
  }
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (col_idx_[k] < 0 || col_idx_[k] >= cols_) throw Error("SparseMatrix: column out of range");
      if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1]) {
        throw Error("SparseMatrix: columns not sorted/unique in row " + std::to_string(i));
      }
    }
  }
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<int> ptr(n + 1), idx(n);
  std::iota(ptr.begin(), ptr.end(), 0);
  std::iota(idx.begin(), idx.end(), 0);
  return SparseMatrix(n, n, std::move(ptr), std::move(idx), std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::from_dense(const Eigen::MatrixXd& dense, double drop_tol) {
  std::vector<int> ptr{0}, idx;
  std::vector<double> val;
  for (int i = 0; i < dense.rows(); ++i) {
    for (int j = 0; j < dense.cols(); ++j) {
      if (std::abs(dense(i, j)) > drop_tol || (drop_tol == 0.0 && dense(i, j) != 0.0) || i == j) {
        idx.push_back(j);
        val.push_back(dense(i, j));
      }
    }
    ptr.push_back(static_cast<int>(idx.size()));
  }
  return SparseMatrix(static_cast<int>(dense.rows()), static_cast<int>(dense.cols()),
                      std::move(ptr), std::move(idx), std::move(val));
}

double SparseMatrix::coeff(int i, int j) const {
  auto first = col_idx_.begin() + row_ptr_[i];
  auto last = col_idx_.begin() + row_ptr_[i + 1];
  auto it = std::lower_bound(first, last, j);
  if (it != last && *it == j) return values_[it - col_idx_.begin()];
  return 0.0;
}

Vector SparseMatrix::multiply(const Vector& x) const {
  if (x.size() != cols_) throw Error("SparseMatrix::multiply: size mismatch");
  Vector y = Vector::Zero(rows_);
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    y[i] = s;
  }
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<int> count(cols_ + 1, 0);
  for (int c : col_idx_) ++count[c + 1];
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<int> idx(values_.size());
  std::vector<double> val(values_.size());
  std::vector<int> fill(count.begin(), count.end() - 1);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const int pos = fill[col_idx_[k]]++;
      idx[pos] = i;
      val[pos] = values_[k];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(count), std::move(idx), std::move(val));
}

double SparseMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  const double scale = tol * std::max(1.0, frobenius_norm());
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (std::abs(values_[k] - coeff(col_idx_[k], i)) > scale) return false;
    }
  }
  return true;
}

Eigen::SparseMatrix<double> SparseMatrix::to_eigen() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(values_.size());
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.emplace_back(i, col_idx_[k], values_[k]);
  }
  Eigen::SparseMatrix<double> m(rows_, cols_);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) d(i, col_idx_[k]) = values_[k];
  }
  return d;
}

void TripletBuffer::merge(const TripletBuffer& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) throw Error("TripletBuffer::merge: shape mismatch");
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

SparseMatrix TripletBuffer::finalize() const {
  std::vector<int> count(rows_ + 1, 0);
  for (const auto& e : entries_) {
    if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_) {
      throw Error("TripletBuffer: entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                  ") out of range");
    }
    ++count[e.row + 1];
  }
  std::partial_sum(count.begin(), count.end(), count.begin());
  // Bucket by row, keeping insertion order, then stable sort by column.
  std::vector<int> order(entries_.size());
  std::vector<int> fill(count.begin(), count.end() - 1);
  for (std::size_t k = 0; k < entries_.size(); ++k) order[fill[entries_[k].row]++] = static_cast<int>(k);
  std::vector<int> ptr{0}, idx;
  std::vector<double> val;
  idx.reserve(entries_.size());
  val.reserve(entries_.size());
  for (int i = 0; i < rows_; ++i) {
    auto first = order.begin() + count[i];
    auto last = order.begin() + count[i + 1];
    std::stable_sort(first, last, [&](int a, int b) { return entries_[a].col < entries_[b].col; });
    for (auto it = first; it != last; ++it) {
      const auto& e = entries_[*it];
      if (!idx.empty() && static_cast<int>(idx.size()) > ptr.back() && idx.back() == e.col) {
        val.back() += e.value;
      } else {
        idx.push_back(e.col);
        val.push_back(e.value);
      }
    }
    ptr.push_back(static_cast<int>(idx.size()));
  }
  return SparseMatrix(rows_, cols_, std::move(ptr), std::move(idx), std::move(val));
}

struct DirectSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  SparseMatrix a;
};

DirectSolver::DirectSolver() = default;
DirectSolver::~DirectSolver() = default;
DirectSolver::DirectSolver(DirectSolver&&) noexcept = default;
DirectSolver& DirectSolver::operator=(DirectSolver&&) noexcept = default;
DirectSolver::DirectSolver(const SparseMatrix& a) { factor(a); }

void DirectSolver::factor(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw Error("solve_direct: matrix is not square");
  for (int i = 0; i < a.rows(); ++i) {
    bool nonzero = false;
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) nonzero |= a.values()[k] != 0.0;
    if (!nonzero) throw SingularMatrixError("singular matrix: row " + std::to_string(i) + " is zero", i);
  }
  impl_ = std::make_unique<Impl>();
  impl_->a = a;
  const auto m = a.to_eigen();
  impl_->lu.analyzePattern(m);
  impl_->lu.factorize(m);
  if (impl_->lu.info() != Eigen::Success) {
    const std::string msg = impl_->lu.lastErrorMessage();
    long index = -1;
    const auto pos = msg.find_last_not_of("0123456789");
    if (pos != std::string::npos && pos + 1 < msg.size()) index = std::stol(msg.substr(pos + 1));
    impl_.reset();
    throw SingularMatrixError("singular pivot in LU factorization: " + msg, index);
  }
}

Vector DirectSolver::solve(const Vector& b) const {
  if (!impl_) throw Error("DirectSolver: no factorization");
  if (b.size() != impl_->a.rows()) throw Error("DirectSolver: rhs size mismatch");
  Vector x = impl_->lu.solve(b);
  const double anorm = impl_->a.frobenius_norm();
  auto bound = [&](const Vector& xx) { return 1e-10 * (anorm * xx.norm() + b.norm()); };
  Vector r = b - impl_->a * x;
  for (int step = 0; step < 2 && r.norm() > 1e-3 * bound(x); ++step) {
    x += impl_->lu.solve(r);
    r = b - impl_->a * x;
  }
  if (!x.allFinite() || r.norm() > bound(x)) {
    throw SingularMatrixError("direct solve did not reach backward error bound (residual " +
                                  std::to_string(r.norm()) + ")",
                              -1);
  }
  return x;
}

Vector solve_direct(const SparseMatrix& a, const Vector& b) {
  return DirectSolver(a).solve(b);
}

namespace {

Vector jacobi_inverse(const SparseMatrix& a) {
  Vector d(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double aii = a.coeff(i, i);
    d[i] = aii != 0.0 ? 1.0 / aii : 1.0;
  }
  return d;
}

std::pair<Vector, LinearSolveReport> conjugate_gradient(const SparseMatrix& a, const Vector& b,
                                                        double tol, int max_it) {
  LinearSolveReport rep;
  const double bnorm = b.norm();
  Vector x = Vector::Zero(b.size());
  if (bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const Vector dinv = jacobi_inverse(a);
  Vector r = b;
  Vector z = dinv.cwiseProduct(r);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_it; ++it) {
    const Vector ap = a * p;
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) {
      rep.iterations = it;
      break;
    }
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    rep.iterations = it;
    rep.residual_norm = r.norm() / bnorm;
    if (rep.residual_norm <= tol) {
      // Confirm with the true residual.
      rep.residual_norm = (b - a * x).norm() / bnorm;
      if (rep.residual_norm <= tol) {
        rep.converged = true;
        return {x, rep};
      }
    }
    z = dinv.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  rep.residual_norm = (b - a * x).norm() / bnorm;
  rep.converged = rep.residual_norm <= tol;
  return {x, rep};
}

std::pair<Vector, LinearSolveReport> gmres(const SparseMatrix& a, const Vector& b, double tol,
                                           int max_it, int restart) {
  LinearSolveReport rep;
  const int n = static_cast<int>(b.size());
  const double bnorm = b.norm();
  Vector x = Vector::Zero(n);
  if (bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const Vector dinv = jacobi_inverse(a);  // right preconditioner
  int total = 0;
  while (total < max_it) {
    Vector r = b - a * x;
    double beta = r.norm();
    rep.residual_norm = beta / bnorm;
    if (rep.residual_norm <= tol) {
      rep.converged = true;
      break;
    }
    const int m = std::min(restart, max_it - total);
    Eigen::MatrixXd v(n, m + 1);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
    Vector cs = Vector::Zero(m), sn = Vector::Zero(m), g = Vector::Zero(m + 1);
    v.col(0) = r / beta;
    g[0] = beta;
    int k = 0;
    for (; k < m; ++k) {
      Vector w = a * dinv.cwiseProduct(v.col(k));
      for (int j = 0; j <= k; ++j) {
        h(j, k) = w.dot(v.col(j));
        w -= h(j, k) * v.col(j);
      }
      h(k + 1, k) = w.norm();
      if (h(k + 1, k) > 0) v.col(k + 1) = w / h(k + 1, k);
      for (int j = 0; j < k; ++j) {
        const double t = cs[j] * h(j, k) + sn[j] * h(j + 1, k);
        h(j + 1, k) = -sn[j] * h(j, k) + cs[j] * h(j + 1, k);
        h(j, k) = t;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      cs[k] = denom > 0 ? h(k, k) / denom : 1.0;
      sn[k] = denom > 0 ? h(k + 1, k) / denom : 0.0;
      h(k, k) = denom;
      h(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++total;
      if (std::abs(g[k + 1]) / bnorm <= tol || denom == 0.0) {
        ++k;
        break;
      }
    }
    // Back substitution on the k x k triangle.
    Vector y = Vector::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int j = i + 1; j < k; ++j) s -= h(i, j) * y[j];
      y[i] = h(i, i) != 0.0 ? s / h(i, i) : 0.0;
    }
    Vector dx = v.leftCols(k) * y;
    x += dinv.cwiseProduct(dx);
    const double rn = (b - a * x).norm();
    if (rn >= beta * (1.0 - 1e-14)) {
      // No progress over a whole cycle: stagnation.
      rep.residual_norm = rn / bnorm;
      break;
    }
  }
  rep.iterations = total;
  rep.residual_norm = (b - a * x).norm() / bnorm;
  rep.converged = rep.residual_norm <= tol;
  return {x, rep};
}

}  // namespace

std::pair<Vector, LinearSolveReport> solve_iterative(const SparseMatrix& a, const Vector& b,
                                                     double tol, const IterativeOptions& opts) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw Error("solve_iterative: size mismatch");
  if (!(tol > 0)) throw Error("solve_iterative: tolerance must be positive");
  KrylovMethod method = opts.method;
  if (method == KrylovMethod::Auto) {
    method = a.is_symmetric(1e-14) ? KrylovMethod::ConjugateGradient : KrylovMethod::Gmres;
  }
  if (method == KrylovMethod::ConjugateGradient) return conjugate_gradient(a, b, tol, opts.max_iterations);
  return gmres(a, b, tol, opts.max_iterations, std::max(1, opts.restart));
}

namespace {

// Generic block inverse iteration; `solve` applies (A - shift M)^{-1}.
template <typename ApplyA, typename ApplyM, typename Solve>
double block_inverse_iteration(int n, ApplyA apply_a, ApplyM apply_m, Solve solve,
                               const EigenOptions& opts) {
  const int k = std::max(1, std::min(opts.block_size, n));
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd x(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) x(i, j) = dist(rng);

  double lambda_prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iterations; ++it) {
    Eigen::MatrixXd y(n, k);
    for (int j = 0; j < k; ++j) y.col(j) = solve(apply_m(Vector(x.col(j))));
    // M-orthonormalize (modified Gram-Schmidt, twice).
    Eigen::MatrixXd my(n, k);
    int kept = 0;
    for (int j = 0; j < k; ++j) {
      Vector v = y.col(j);
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i < kept; ++i) v -= my.col(i).dot(v) * y.col(i);
      }
      Vector mv = apply_m(v);
      const double nrm = std::sqrt(std::max(0.0, v.dot(mv)));
      if (nrm <= 1e-13 * std::max(1.0, y.col(j).norm())) continue;
      y.col(kept) = v / nrm;
      my.col(kept) = mv / nrm;
      ++kept;
    }
    if (kept == 0) throw Error("smallest_generalized_eig: iteration collapsed");
    Eigen::MatrixXd ay(n, kept);
    for (int j = 0; j < kept; ++j) ay.col(j) = apply_a(Vector(y.col(j)));
    Eigen::MatrixXd ar = y.leftCols(kept).transpose() * ay;
    ar = 0.5 * (ar + ar.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ar);
    const Eigen::MatrixXd& vecs = es.eigenvectors();
    const double lambda = es.eigenvalues()[0];
    x.leftCols(kept) = y.leftCols(kept) * vecs;
    for (int j = kept; j < k; ++j) x.col(j) = Vector::NullaryExpr(n, [&]() { return dist(rng); });

    const Vector v0 = x.col(0);
    const Vector av = ay * vecs.col(0);
    const Vector mv = my.leftCols(kept) * vecs.col(0);
    const double res = (av - lambda * mv).norm() / std::max(1e-300, av.norm() + std::abs(lambda) * mv.norm());
    (void)v0;
    if (std::abs(lambda - lambda_prev) <= opts.tolerance * 1e-2 * std::abs(lambda) &&
        res <= std::sqrt(opts.tolerance)) {
      return lambda;
    }
    if (lambda == 0.0 && res <= opts.tolerance) return lambda;
    lambda_prev = lambda;
  }
  throw Error("smallest_generalized_eig: inverse iteration did not converge");
}

}  // namespace

double smallest_generalized_eig(const SparseMatrix& a, const SparseMatrix& m,
                                const EigenOptions& opts) {
  if (a.rows() != a.cols() || m.rows() != m.cols() || a.rows() != m.rows()) {
    throw Error("smallest_generalized_eig: dimension mismatch");
  }
  // A - shift * M
  TripletBuffer t(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) t.add(i, a.col_idx()[k], a.values()[k]);
    for (int k = m.row_ptr()[i]; k < m.row_ptr()[i + 1]; ++k)
      t.add(i, m.col_idx()[k], -opts.shift * m.values()[k]);
  }
  const DirectSolver lu(t.finalize());
  return block_inverse_iteration(
      a.rows(), [&](const Vector& v) { return a * v; }, [&](const Vector& v) { return m * v; },
      [&](const Vector& v) { return lu.solve(v); }, opts);
}

double smallest_generalized_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m,
                                const EigenOptions& opts) {
  if (a.rows() != a.cols() || m.rows() != m.cols() || a.rows() != m.rows()) {
    throw Error("smallest_generalized_eig: dimension mismatch");
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a - opts.shift * m);
  if (!std::isfinite(lu.rcond()) || lu.rcond() < 1e-15) {
    throw SingularMatrixError("smallest_generalized_eig: shifted matrix is singular", -1);
  }
  return block_inverse_iteration(
      static_cast<int>(a.rows()), [&](const Vector& v) { return Vector(a * v); },
      [&](const Vector& v) { return Vector(m * v); }, [&](const Vector& v) { return Vector(lu.solve(v)); },
      opts);
}

void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonzeros() << '\n';
  out.precision(17);
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
      out << i + 1 << ' ' << a.col_idx()[k] + 1 << ' ' << a.values()[k] << '\n';
    }
  }
}

}  // namespace synfem
