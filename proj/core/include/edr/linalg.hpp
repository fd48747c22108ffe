#pragma once

#include <functional>
#include <random>

#include "edr/common.hpp"

namespace edr::linalg {

/// Matrix-free operator: writes A*x into the returned vector.
using LinearOperator = std::function<Vector(const Vector&)>;

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradient for symmetric positive definite operators. Stops when
/// ||b - A x|| <= rel_tol * ||b||. A zero right-hand side returns x = 0.
CgResult conjugate_gradient(const LinearOperator& apply, const Vector& rhs,
                            double rel_tol, int max_iterations);

/// Cholesky solve of a symmetric positive definite system with iterative
/// refinement until ||A x - b|| <= rel_tol * ||b|| (or refinement stalls).
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const Matrix& a);

  void compute(const Matrix& a);
  Vector solve(const Vector& b, double rel_tol = 1e-12,
               int max_refinements = 4) const;
  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
  Eigen::LLT<Matrix> llt_;
  Eigen::LDLT<Matrix> ldlt_;
  bool use_ldlt_ = false;
};

/// Thin QR with the sign convention diag(R) > 0, returning the D x K Q factor.
Matrix qr_orthonormalize(const Matrix& y);

/// Uniform random point on the Stiefel manifold: QR of an iid N(0,1) matrix.
Matrix random_stiefel(Index rows, Index cols, std::mt19937_64& rng);

/// ||A^T A - I||_F
double orthonormality_error(const Matrix& a);

/// Median of pairwise Euclidean distances between rows. Rows beyond
/// max_points are subsampled deterministically (evenly strided).
double median_pairwise_distance(const Matrix& points, Index max_points = 1000);

/// Principal angles (radians) between the column spans of two matrices with
/// orthonormal columns.
Vector principal_angles(const Matrix& a, const Matrix& b);

}  // namespace edr::linalg
