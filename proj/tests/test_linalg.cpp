#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "synfem/assembly.hpp"
#include "synfem/error.hpp"
#include "synfem/linalg.hpp"

using namespace synfem;

namespace {

// Gaussian elimination with partial pivoting, the dense oracle.
Vector dense_solve(Eigen::MatrixXd a, Vector b) {
  const int n = static_cast<int>(a.rows());
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    a.row(k).swap(a.row(piv));
    std::swap(b[k], b[piv]);
    for (int i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (int j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

SparseMatrix laplacian_5pt(int m) {
  TripletBuffer t(m * m, m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const int k = i * m + j;
      t.add(k, k, 4.0);
      if (i > 0) t.add(k, k - m, -1.0);
      if (i + 1 < m) t.add(k, k + m, -1.0);
      if (j > 0) t.add(k, k - 1, -1.0);
      if (j + 1 < m) t.add(k, k + 1, -1.0);
    }
  return t.finalize();
}

}  // namespace

TEST(Triplets, DuplicatesAreSummed) {
  TripletBuffer t(2, 2);
  t.add(0, 0, 1.0);
  t.add(0, 0, 2.0);
  t.add(1, 0, -1.0);
  const SparseMatrix a = t.finalize();
  EXPECT_EQ(a.nonzeros(), 2);
  EXPECT_EQ(a.coeff(0, 0), 3.0);
  EXPECT_EQ(a.coeff(1, 0), -1.0);
  EXPECT_EQ(a.coeff(0, 1), 0.0);
}

TEST(Triplets, MergeMatchesSingleBuffer) {
  TripletBuffer a(3, 3), b(3, 3), all(3, 3);
  a.add(0, 1, 1.5);
  b.add(0, 1, 2.5);
  b.add(2, 2, 1.0);
  all.add(0, 1, 1.5);
  all.add(0, 1, 2.5);
  all.add(2, 2, 1.0);
  a.merge(b);
  EXPECT_EQ(a.finalize().to_dense(), all.finalize().to_dense());
}

TEST(Sparse, TransposeAndMultiply) {
  Eigen::MatrixXd d(2, 3);
  d << 1, 0, 2, 0, 3, 0;
  const SparseMatrix a = SparseMatrix::from_dense(d);
  Vector x(3);
  x << 1, 2, 3;
  EXPECT_TRUE((a * x).isApprox(d * x));
  EXPECT_EQ(a.transpose().to_dense(), d.transpose());
  EXPECT_FALSE(a.is_symmetric());
}

TEST(DirectSolve, Identity) {
  Vector b = Vector::LinSpaced(5, 1, 5);
  EXPECT_TRUE(solve_direct(SparseMatrix::identity(5), b).isApprox(b));
}

TEST(DirectSolve, Diagonal) {
  Eigen::MatrixXd d(2, 2);
  d << 2, 0, 0, 4;
  Vector b(2);
  b << 2, 4;
  const Vector x = solve_direct(SparseMatrix::from_dense(d), b);
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 1.0, 1e-15);
}

TEST(DirectSolve, RandomSpdAgainstDenseOracle) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(50, 50);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) g(i, j) = n01(rng);
  const Eigen::MatrixXd a = g * g.transpose() + 50 * Eigen::MatrixXd::Identity(50, 50);
  Vector b(50);
  for (int i = 0; i < 50; ++i) b[i] = n01(rng);
  const Vector x = solve_direct(SparseMatrix::from_dense(a), b);
  EXPECT_LE((x - dense_solve(a, b)).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(DirectSolve, SingularMatrixThrows) {
  Eigen::MatrixXd d(2, 2);
  d << 1, 1, 1, 1;
  EXPECT_THROW(solve_direct(SparseMatrix::from_dense(d), Vector::Ones(2)), SingularMatrixError);
}

TEST(DirectSolver, ReusesFactorization) {
  const SparseMatrix a = laplacian_5pt(8);
  DirectSolver s(a);
  for (int k = 0; k < 3; ++k) {
    const Vector b = Vector::Constant(64, k + 1.0);
    EXPECT_LE((a * s.solve(b) - b).norm(), 1e-12 * b.norm());
  }
}

TEST(Iterative, IdentityInOneIteration) {
  const auto [x, rep] = solve_iterative(SparseMatrix::identity(4), Vector::Ones(4), 1e-12);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.iterations, 1);
  EXPECT_TRUE(x.isApprox(Vector::Ones(4)));
}

TEST(Iterative, LaplacianMatchesDirect) {
  const SparseMatrix a = laplacian_5pt(32);
  const Vector b = Vector::LinSpaced(a.rows(), -1, 1);
  const Vector xd = solve_direct(a, b);
  for (KrylovMethod m : {KrylovMethod::ConjugateGradient, KrylovMethod::Gmres}) {
    IterativeOptions o;
    o.method = m;
    o.max_iterations = 5000;
    const auto [x, rep] = solve_iterative(a, b, 1e-10, o);
    EXPECT_TRUE(rep.converged);
    EXPECT_LE((x - xd).norm(), 1e-7 * xd.norm());
  }
}

TEST(Iterative, ZeroRowDoesNotConverge) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(3, 3);
  d(1, 1) = 0.0;
  const auto [x, rep] = solve_iterative(SparseMatrix::from_dense(d), Vector::Ones(3), 1e-10);
  EXPECT_FALSE(rep.converged);
}

TEST(Eigen, MassAgainstItself) {
  const SparseMatrix m = laplacian_5pt(5);
  EXPECT_NEAR(smallest_generalized_eig(m, m), 1.0, 1e-8);
}

TEST(Eigen, Diagonal) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a.diagonal() << 1, 2, 3;
  EXPECT_NEAR(smallest_generalized_eig(SparseMatrix::from_dense(a), SparseMatrix::identity(3)), 1.0, 1e-8);
}

TEST(Eigen, StokesSchurPairAgainstDenseOracle) {
  auto mesh = std::make_shared<const Mesh>(refine_uniform(unit_square(), 1));
  const Spaces sp = build_spaces(mesh, Pairing::P2Bubble_P1Disc);
  const FESpace& vs = *sp.velocity;
  Eigen::MatrixXd a = assemble_vector_laplacian(vs).to_dense();
  Eigen::MatrixXd b = assemble_divergence(vs, *sp.pressure).to_dense();
  // Homogeneous Dirichlet data: keep the free velocity DOFs only.
  std::vector<int> free;
  for (int i = 0; i < vs.num_dofs(); ++i)
    if (!vs.is_boundary_scalar(i % vs.scalar_dofs())) free.push_back(i);
  const int nf = static_cast<int>(free.size());
  Eigen::MatrixXd af(nf, nf), bf(b.rows(), nf);
  for (int i = 0; i < nf; ++i) {
    bf.col(i) = b.col(free[i]);
    for (int j = 0; j < nf; ++j) af(i, j) = a(free[i], free[j]);
  }
  const Eigen::MatrixXd s = bf * af.ldlt().solve(bf.transpose());
  const Eigen::MatrixXd m = assemble_mass(*sp.pressure).to_dense();
  // Zero-mean pressures: project with a basis of the orthogonal complement of 1 in the M inner product.
  const Vector ones = Vector::Ones(m.rows());
  const Vector mo = m * ones;
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(m.rows(), m.rows()) - ones * mo.transpose() / ones.dot(mo);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.rows() - 1);
  const Eigen::MatrixXd sr = q.transpose() * s * q, mr = q.transpose() * m * q;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> oracle(sr, mr);
  const double expect = oracle.eigenvalues().minCoeff();
  EXPECT_NEAR(smallest_generalized_eig(sr, mr), expect, 1e-8);
}

TEST(MatrixMarket, Header) {
  std::ostringstream os;
  write_matrix_market(os, SparseMatrix::identity(2));
  EXPECT_EQ(os.str().rfind("%%MatrixMarket matrix coordinate real general", 0), 0u);
  EXPECT_NE(os.str().find("2 2 2"), std::string::npos);
}
