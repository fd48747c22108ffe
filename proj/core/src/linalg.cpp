#include "edr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace edr::linalg {

CgResult conjugate_gradient(const LinearOperator& apply, const Vector& rhs,
                            double rel_tol, int max_iterations) {
  CgResult out;
  out.x = Vector::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    out.converged = true;
    return out;
  }

  Vector r = rhs;
  Vector p = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < max_iterations; ++it) {
    const Vector ap = apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;  // not positive definite along p
    const double step = rr / pap;
    out.x += step * p;
    r -= step * ap;
    out.iterations = it + 1;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= rel_tol * rhs_norm) {
      rr = rr_new;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  // Recompute the true residual; the recursive one drifts.
  out.relative_residual = (rhs - apply(out.x)).norm() / rhs_norm;
  out.converged = out.relative_residual <= rel_tol;
  return out;
}

SpdSolver::SpdSolver(const Matrix& a) { compute(a); }

void SpdSolver::compute(const Matrix& a) {
  a_ = a;
  llt_.compute(a_);
  use_ldlt_ = llt_.info() != Eigen::Success;
  if (use_ldlt_) ldlt_.compute(a_);
}

Vector SpdSolver::solve(const Vector& b, double rel_tol,
                        int max_refinements) const {
  auto base = [&](const Vector& rhs) -> Vector {
    return use_ldlt_ ? Vector(ldlt_.solve(rhs)) : Vector(llt_.solve(rhs));
  };
  Vector x = base(b);
  const double b_norm = b.norm();
  if (b_norm == 0.0) return x;
  double res = (b - a_ * x).norm();
  for (int k = 0; k < max_refinements && res > rel_tol * b_norm; ++k) {
    const Vector r = b - a_ * x;
    const Vector candidate = x + base(r);
    const double res_new = (b - a_ * candidate).norm();
    if (!(res_new < res)) break;
    x = candidate;
    res = res_new;
  }
  return x;
}

Matrix qr_orthonormalize(const Matrix& y) {
  const Index d = y.rows();
  const Index k = y.cols();
  Eigen::HouseholderQR<Matrix> qr(y);
  Matrix q = qr.householderQ() * Matrix::Identity(d, k);
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Matrix random_stiefel(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return qr_orthonormalize(g);
}

double orthonormality_error(const Matrix& a) {
  return (a.transpose() * a - Matrix::Identity(a.cols(), a.cols())).norm();
}

double median_pairwise_distance(const Matrix& points, Index max_points) {
  const Index n_all = points.rows();
  require(n_all >= 2, "median_pairwise_distance: need at least two points");
  std::vector<Index> rows;
  if (n_all <= max_points) {
    rows.resize(static_cast<std::size_t>(n_all));
    for (Index i = 0; i < n_all; ++i) rows[static_cast<std::size_t>(i)] = i;
  } else {
    for (Index i = 0; i < max_points; ++i)
      rows.push_back(i * n_all / max_points);
  }
  std::vector<double> dists;
  dists.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      dists.push_back((points.row(rows[i]) - points.row(rows[j])).norm());
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double med = *mid;
  if (dists.size() % 2 == 0) {
    const double lower = *std::max_element(dists.begin(), mid);
    med = 0.5 * (med + lower);
  }
  return med;
}

Vector principal_angles(const Matrix& a, const Matrix& b) {
  // sin(theta) from the residual of b after projecting onto span(a); acos of
  // the cosines is inaccurate for small angles.
  const Matrix residual = b - a * (a.transpose() * b);
  Eigen::JacobiSVD<Matrix> svd(residual);
  Vector s = svd.singularValues();
  Vector angles(s.size());
  for (Index i = 0; i < s.size(); ++i)
    angles(i) = std::asin(std::clamp(s(i), 0.0, 1.0));
  return angles;
}

}  // namespace edr::linalg
