#pragma once

#include <cstdint>
#include <vector>

#include "edr/common.hpp"
#include "edr/linalg.hpp"

/// Gaussian-kernel uLSIF density-ratio estimation and effective sample size.
///
/// The ratio model is w(x) = max(alpha^T phi(x), 0) with
/// phi_m(x) = exp(-||x - c_m||^2 / (2 sigma^2)) and centers c_m drawn from the
/// test sample. alpha is the stationary point of
///
///   1/2 alpha^T H alpha - h^T alpha + penalty(alpha),
///   H = (1/N_tr) sum phi(x_tr) phi(x_tr)^T,   h = (1/N_te) sum phi(x_te),
///
/// where the penalty is either the ridge (gamma/2)||alpha||^2 (kQuadratic, the
/// default) or the linear term gamma 1^T alpha (kLinear). A relative ridge
/// eps = 1e-9 trace(H) / M is always added to H so the system is nonsingular.
namespace edr::ratio {

enum class Penalty { kQuadratic, kLinear };

inline constexpr double kRelativeRidge = 1e-9;
inline constexpr Index kDefaultMaxCenters = 100;

struct KernelBasis {
  Matrix centers;  // M x K, one center per row
  double sigma = 1.0;

  Index size() const { return centers.rows(); }
  Index dimension() const { return centers.cols(); }
  void validate() const;
};

struct RatioModel {
  KernelBasis basis;
  Vector alpha;
  double gamma = 0.0;
  Penalty penalty = Penalty::kQuadratic;
  double ridge = 0.0;  // eps actually added to H
};

struct WeightVector {
  Vector w;
  double ess = 0.0;
};

/// phi(x) for a single point.
Vector kernel_features(const Vector& x, const KernelBasis& basis);

/// Row i holds phi(points.row(i)); N x M.
Matrix kernel_feature_matrix(const Matrix& points, const KernelBasis& basis);

/// Assembled uLSIF normal equations for one basis. Kept around by the
/// subspace search, which differentiates through every piece of it.
struct UlsifSystem {
  Matrix phi_train;  // N_tr x M
  Matrix phi_test;   // N_te x M
  Matrix h_matrix;   // H
  Vector h_vector;   // h
  double ridge = 0.0;
  double gamma = 0.0;
  Penalty penalty = Penalty::kQuadratic;
  Vector rhs;        // h - gamma 1 (linear) or h (quadratic)
  linalg::SpdSolver solver;  // factorization of H + (eps [+ gamma]) I
  Vector alpha;

  double diagonal_shift() const {
    return ridge + (penalty == Penalty::kQuadratic ? gamma : 0.0);
  }
};

/// Solves for alpha given H and h directly.
Vector solve_coefficients(const Matrix& h_matrix, const Vector& h_vector,
                          double gamma, Penalty penalty);

UlsifSystem build_system(const Matrix& proj_train, const Matrix& proj_test,
                         const KernelBasis& basis, double gamma,
                         Penalty penalty);

/// Uniformly random subset of min(n_centers, n_test) row indices, sorted.
std::vector<Index> choose_center_rows(Index n_test, Index n_centers,
                                      std::uint64_t seed);

RatioModel ulsif_fit_with_centers(const Matrix& proj_train,
                                  const Matrix& proj_test,
                                  const std::vector<Index>& center_rows,
                                  double gamma, double sigma,
                                  Penalty penalty = Penalty::kQuadratic);

RatioModel ulsif_fit(const Matrix& proj_train, const Matrix& proj_test,
                     double gamma, double sigma, Index n_centers,
                     std::uint64_t seed,
                     Penalty penalty = Penalty::kQuadratic);

/// alpha^T phi(x) without the clamp.
Vector raw_ratio(const RatioModel& model, const Matrix& points);

WeightVector predict_weights(const RatioModel& model, const Matrix& points);

/// Kish effective sample size (sum w)^2 / sum w^2, which equals N for
/// uniform weights and 1 when all mass sits on one sample. Returns 0 for an
/// all-zero vector; throws on negative entries.
double effective_sample_size(const Vector& w);

/// Held-out uLSIF criterion 1/2 mean(r(x_tr)^2) - mean(r(x_te)), r unclamped.
double ulsif_criterion(const RatioModel& model, const Matrix& proj_train,
                       const Matrix& proj_test);

struct RatioCvResult {
  double sigma = 0.0;
  double gamma = 0.0;
  double score = 0.0;
  Matrix scores;  // sigma_grid x gamma_grid, mean held-out criterion
};

RatioCvResult ratio_cv(const Matrix& proj_train, const Matrix& proj_test,
                       const std::vector<double>& sigma_grid,
                       const std::vector<double>& gamma_grid, int folds,
                       std::uint64_t seed,
                       Penalty penalty = Penalty::kQuadratic,
                       Index max_centers = kDefaultMaxCenters);

/// {0.1, 0.25, 0.5, 1, 2, 4} x median pairwise distance of the pooled sample.
std::vector<double> default_sigma_grid(const Matrix& proj_train,
                                       const Matrix& proj_test);
std::vector<double> default_gamma_grid();

/// w / mean(w). All-zero input comes back unchanged.
Vector normalize_mean_one(const Vector& w);

struct TunedWeights {
  RatioModel model;
  RatioCvResult cv;
  WeightVector weights;  // on proj_train, rescaled to mean one
};

/// ratio_cv over the default grids followed by a fit with the chosen
/// (sigma, gamma); the usual full pipeline for a fixed representation.
TunedWeights tuned_weights(const Matrix& proj_train, const Matrix& proj_test,
                           int folds, std::uint64_t seed,
                           Penalty penalty = Penalty::kQuadratic,
                           Index max_centers = kDefaultMaxCenters);

}  // namespace edr::ratio
