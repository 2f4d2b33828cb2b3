#pragma once

#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace synfem {

using Vector = Eigen::VectorXd;

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and unique. Immutable apart from value updates on the existing pattern.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx,
               std::vector<double> values);

  static SparseMatrix identity(int n);
  static SparseMatrix from_dense(const Eigen::MatrixXd& dense, double drop_tol = 0.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nonzeros() const { return static_cast<int>(values_.size()); }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Entry (i, j), zero if not stored.
  double coeff(int i, int j) const;
  Vector multiply(const Vector& x) const;
  Vector operator*(const Vector& x) const { return multiply(x); }
  SparseMatrix transpose() const;
  double frobenius_norm() const;
  bool is_symmetric(double tol = 0.0) const;

  Eigen::SparseMatrix<double> to_eigen() const;
  Eigen::MatrixXd to_dense() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// Coordinate-format accumulation buffer. Duplicates are summed in
/// finalize(); summation order is the insertion order, so assembly is
/// deterministic.
class TripletBuffer {
 public:
  TripletBuffer(int rows, int cols) : rows_(rows), cols_(cols) {}

  void add(int i, int j, double v) { entries_.push_back({i, j, v}); }
  void reserve(std::size_t n) { entries_.reserve(n); }
  /// Appends another buffer of the same shape (per-worker merge).
  void merge(const TripletBuffer& other);
  SparseMatrix finalize() const;

  int rows() const { return rows_; }
  int cols() const { return cols_; }

 private:
  struct Entry {
    int row, col;
    double value;
  };
  int rows_, cols_;
  std::vector<Entry> entries_;
};

struct LinearSolveReport {
  int iterations = 0;
  double residual_norm = 0.0;  // relative: |b - Ax| / |b|
  bool converged = false;
};

/// LU factorization that can be reused for several right-hand sides.
class DirectSolver {
 public:
  DirectSolver();
  ~DirectSolver();
  DirectSolver(DirectSolver&&) noexcept;
  DirectSolver& operator=(DirectSolver&&) noexcept;

  explicit DirectSolver(const SparseMatrix& a);
  /// Throws SingularMatrixError naming the offending row when available.
  void factor(const SparseMatrix& a);
  /// Solves with up to two steps of iterative refinement; throws when the
  /// backward error exceeds 1e-10 (|A|_F |x| + |b|).
  Vector solve(const Vector& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Vector solve_direct(const SparseMatrix& a, const Vector& b);

enum class KrylovMethod { Auto, ConjugateGradient, Gmres };

struct IterativeOptions {
  KrylovMethod method = KrylovMethod::Auto;
  int max_iterations = 2000;
  int restart = 60;
};

/// CG for symmetric matrices (Auto picks it when A is symmetric), restarted
/// GMRES otherwise. Jacobi preconditioning. Never throws on non-convergence.
std::pair<Vector, LinearSolveReport> solve_iterative(const SparseMatrix& a, const Vector& b,
                                                     double tol,
                                                     const IterativeOptions& opts = {});

struct EigenOptions {
  double shift = 0.0;
  double tolerance = 1e-8;
  int max_iterations = 500;
  int block_size = 6;
};

/// Smallest lambda with A x = lambda M x, A symmetric positive
/// semidefinite and M symmetric positive definite. Block inverse iteration
/// with shift and Rayleigh-Ritz; throws when it does not converge.
double smallest_generalized_eig(const SparseMatrix& a, const SparseMatrix& m,
                                const EigenOptions& opts = {});
double smallest_generalized_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m,
                                const EigenOptions& opts = {});

/// MatrixMarket coordinate real general.
void write_matrix_market(std::ostream& out, const SparseMatrix& a);

}  // namespace synfem
