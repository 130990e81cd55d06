#pragma once

// SPD solvers for the reduced Laplacian: Jacobi-preconditioned CG, sparse LDLT and
// dense LLT. All three accept a CSR matrix and a column-major block of right-hand sides.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <span>
#include <vector>

#include "rwnoise/errors.hpp"

namespace rwnoise {

enum class SolverKind { automatic, conjugate_gradient, sparse_direct, dense_direct };

struct SolverOptions {
  SolverKind kind = SolverKind::automatic;
  double tolerance = 1e-12;    // relative residual for CG
  long max_iterations = 0;     // 0 -> 10 * unknowns
  long direct_threshold = 4096;
  int threads = 1;             // label solves run concurrently
};

struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> cols;
  std::vector<double> vals;

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += vals[p] * x[cols[p]];
      y[i] = s;
    }
  }

  double diagonal(int i) const {
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
      if (cols[p] == i) return vals[p];
    return 0.0;
  }

  Eigen::SparseMatrix<double> to_eigen() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(vals.size());
    for (int i = 0; i < n; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) t.emplace_back(i, cols[p], vals[p]);
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) m(i, cols[p]) = vals[p];
    return m;
  }
};

struct CgReport {
  long iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradient; x holds the initial guess on entry.
/// Throws SolverError when the relative residual does not reach `tolerance`.
inline CgReport conjugate_gradient(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                                   double tolerance, long max_iterations) {
  const int n = a.n;
  if (max_iterations <= 0) max_iterations = 10L * n;
  std::vector<double> r(n), z(n), p(n), q(n), inv_diag(n);
  for (int i = 0; i < n; ++i) {
    const double d = a.diagonal(i);
    if (!(d > 0.0)) throw SolverError("matrix diagonal is not positive", 0.0, 0);
    inv_diag[i] = 1.0 / d;
  }
  double b_norm = 0.0;
  for (double v : b) b_norm += v * v;
  b_norm = std::sqrt(b_norm);
  if (b_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {0, 0.0};
  }
  a.multiply(x, q);
  double r_norm = 0.0;
  for (int i = 0; i < n; ++i) {
    r[i] = b[i] - q[i];
    r_norm += r[i] * r[i];
  }
  r_norm = std::sqrt(r_norm);
  if (r_norm / b_norm <= tolerance) return {0, r_norm / b_norm};

  double rz = 0.0;
  for (int i = 0; i < n; ++i) {
    z[i] = inv_diag[i] * r[i];
    p[i] = z[i];
    rz += r[i] * z[i];
  }
  for (long it = 1; it <= max_iterations; ++it) {
    a.multiply(p, q);
    double pq = 0.0;
    for (int i = 0; i < n; ++i) pq += p[i] * q[i];
    if (!(pq > 0.0)) throw SolverError("matrix is not positive definite", r_norm / b_norm, it);
    const double alpha = rz / pq;
    r_norm = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      r_norm += r[i] * r[i];
    }
    r_norm = std::sqrt(r_norm);
    if (r_norm / b_norm <= tolerance) return {it, r_norm / b_norm};
    double rz_next = 0.0;
    for (int i = 0; i < n; ++i) {
      z[i] = inv_diag[i] * r[i];
      rz_next += r[i] * z[i];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("conjugate gradient did not converge", r_norm / b_norm, max_iterations);
}

inline Eigen::MatrixXd solve_dense_direct(const CsrMatrix& a, const Eigen::MatrixXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(a.to_dense());
  if (llt.info() != Eigen::Success) throw SolverError("dense Cholesky failed: matrix is not SPD", 0.0, 0);
  return llt.solve(rhs);
}

inline Eigen::MatrixXd solve_sparse_direct(const CsrMatrix& a, const Eigen::MatrixXd& rhs) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a.to_eigen());
  if (ldlt.info() != Eigen::Success) throw SolverError("sparse LDLT factorization failed", 0.0, 0);
  Eigen::MatrixXd out = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success) throw SolverError("sparse LDLT solve failed", 0.0, 0);
  return out;
}

inline const char* solver_name(SolverKind k) {
  switch (k) {
    case SolverKind::automatic: return "auto";
    case SolverKind::conjugate_gradient: return "cg";
    case SolverKind::sparse_direct: return "sparse";
    case SolverKind::dense_direct: return "dense";
  }
  return "auto";
}

inline SolverKind resolve_solver(const SolverOptions& opt, long unknowns) {
  if (opt.kind != SolverKind::automatic) return opt.kind;
  return unknowns < opt.direct_threshold ? SolverKind::sparse_direct : SolverKind::conjugate_gradient;
}

}  // namespace rwnoise
