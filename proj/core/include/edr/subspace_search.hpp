#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edr/common.hpp"
#include "edr/data.hpp"
#include "edr/density_ratio.hpp"
#include "edr/weighted_model.hpp"

/// Search over orthonormal projections for a low-dimensional subspace in
/// which importance-weighted learning is both predictive and low-variance.
///
/// For a D x K matrix A with orthonormal columns the objective is
///
///   G(A) = Lhat(b*; A, w^A) + lambda * sum_i (w_i^A)^2
///
/// where w^A are clamped uLSIF weights fitted on the projected train/test
/// covariates and b* minimizes the weighted loss plus c ||b||^2 on the
/// projected training data. Both b* and the uLSIF coefficients are argmins,
/// so dG/dA is obtained by implicit differentiation: one linear solve per
/// argmin (conjugate gradient with Hessian-vector products for b*, the
/// factored uLSIF system for alpha), then a pullback through the kernel
/// features to A.
namespace edr::search {

class Projection {
 public:
  /// Validates orthonormal columns (||A^T A - I||_F <= tol) and 1 <= K < D.
  static Projection from_matrix(Matrix a, double tol = 1e-8);

  const Matrix& matrix() const { return a_; }
  Index input_dimension() const { return a_.rows(); }
  Index target_dimension() const { return a_.cols(); }

 private:
  explicit Projection(Matrix a) : a_(std::move(a)) {}
  Matrix a_;
};

struct Hyper {
  double c = 1e-3;       // ridge on the linear model
  double gamma = 1e-2;   // uLSIF regularizer
  double sigma = 1.0;    // kernel bandwidth in the projected space
  double lambda = 0.0;   // weight on sum of squared weights
};

/// Everything about the objective that stays fixed while A moves.
struct ObjectiveSettings {
  model::LossSpec loss = model::LossSpec::regression();
  ratio::Penalty penalty = ratio::Penalty::kQuadratic;
  std::vector<Index> center_rows;  // rows of x_test whose projections are centers
  model::FitOptions fit;
  // Rescale the clamped weights to mean one over the training set, so that
  // sum w^2 = N^2 / ESS. Without it, projections that separate train from
  // test drive every weight (and G) to zero.
  bool normalize_weights = true;
};

ObjectiveSettings make_objective_settings(
    const TrainTestPair& data, const model::LossSpec& loss, std::uint64_t seed,
    Index max_centers = ratio::kDefaultMaxCenters,
    ratio::Penalty penalty = ratio::Penalty::kQuadratic);

struct ObjectiveState {
  Matrix a;  // the evaluated projection (not necessarily orthonormal)
  Hyper hyper;
  ratio::RatioModel ratio;
  ratio::WeightVector weights;
  model::LinearModel model;
  double objective_value = 0.0;
  double utility_term = 0.0;
  double ess_penalty_term = 0.0;  // sum of squared weights; G = U + lambda * this

  // Intermediates reused by the gradient.
  Matrix u_train;
  Matrix u_test;
  ratio::UlsifSystem system;
  Vector raw_weights;         // alpha^T phi(u_train), before the clamp
  double weight_scale = 1.0;  // divisor applied after the clamp
};

/// Runs project -> uLSIF -> clamp -> weighted fit -> assemble G.
ObjectiveState evaluate_objective(const Projection& a, const TrainTestPair& data,
                                  const Hyper& hyper,
                                  const ObjectiveSettings& settings);

/// Same pipeline at an arbitrary D x K matrix; used for finite differences.
ObjectiveState evaluate_objective_at(const Matrix& a, const TrainTestPair& data,
                                     const Hyper& hyper,
                                     const ObjectiveSettings& settings);

// --- hypergradients -------------------------------------------------------

struct FitContext {
  const Matrix& u;
  const Vector& y;
  const Vector& w;
  const model::LinearModel& model;
  model::LossSpec loss;
};

struct InnerAdjoint {
  Vector d_weights;   // -(d/dw grad_b f)^T v, length N
  Matrix d_features;  // -(d/du grad_b f)^T v, N x K
  Vector v;           // solution of (Hessian of f) v = dG/db*
  int cg_iterations = 0;
  double cg_relative_residual = 0.0;
  bool used_fallback = false;
};

/// Reverse-mode step through b* = argmin f(b; w, u). Solves Hess(f) v = dG/db*
/// by conjugate gradient on Hessian-vector products; falls back to a dense
/// solve if CG has not converged after 10 * dim iterations.
InnerAdjoint hypergrad_b(const Vector& dG_db, const FitContext& ctx);

struct RatioContext {
  const Matrix& x_train;
  const Matrix& x_test;
  const Matrix& u_train;
  const Matrix& u_test;
  const std::vector<Index>& center_rows;
  const ratio::UlsifSystem& system;
  double sigma;
};

/// Pulls adjoints on the two kernel feature matrices back to A (D x K),
/// including the motion of the centers.
Matrix kernel_pullback(const Matrix& d_phi_train, const Matrix* d_phi_test,
                       const RatioContext& ctx);

/// Reverse-mode step through alpha* = argmin of the uLSIF objective: solves
/// the uLSIF system against dG/dalpha and propagates through H, h and the
/// trace-relative ridge to A. Returns the D x K contribution.
Matrix hypergrad_alpha(const Vector& dG_dalpha, const RatioContext& ctx);

/// dG/dA (Euclidean) at the state's A.
Matrix total_gradient(const ObjectiveState& state, const TrainTestPair& data,
                      const ObjectiveSettings& settings);

// --- manifold ---------------------------------------------------------------

/// G - A sym(A^T G)
Matrix riemannian_gradient(const Matrix& a, const Matrix& euclidean_grad);

/// QR retraction of A - step * riemannian_gradient, diag(R) > 0.
Projection stiefel_step(const Projection& a, const Matrix& euclidean_grad,
                        double step);

// --- search -----------------------------------------------------------------

enum class StepRule { kBacktracking, kFixed };

struct SearchConfig {
  Index k = 1;
  std::vector<double> lambda_grid{1e-5, 3e-5, 1e-4, 3e-4, 1e-3};
  int restarts = 5;
  int max_iters = 200;
  StepRule step_rule = StepRule::kBacktracking;
  double initial_step = 1.0;
  double max_step = 100.0;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int inline_cv_period = 10;
  int cv_folds = 5;
  double gradient_tolerance = 1e-6;
  double relative_tolerance = 1e-10;
  // Stop when the largest principal angle between the projections at two
  // consecutive hyperparameter refreshes is below this (radians).
  double subspace_tolerance = 1e-2;
  std::uint64_t seed = 0;

  model::LossSpec loss = model::LossSpec::regression();
  ratio::Penalty penalty = ratio::Penalty::kQuadratic;
  Index max_centers = ratio::kDefaultMaxCenters;
  // No 0.1 factor here: with A free, kernels that narrow let the search fit
  // the training sample through a few heavy points.
  std::vector<double> sigma_factors{0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> gamma_grid = ratio::default_gamma_grid();
  std::vector<double> c_grid = model::default_ridge_grid();
  model::FitOptions fit;
  bool normalize_weights = true;
  // Refit the final model by importance weighting in the found subspace with
  // (sigma, gamma) and c chosen by cross-validation, and compare lambdas on
  // those refits. When off, the weights and model optimized jointly with A
  // are used as they are.
  bool downstream_refit = true;
  bool record_trace = false;

  void validate(Index input_dimension) const;
};

struct DescentTrace {
  std::vector<double> objective;       // after every accepted step
  std::vector<double> stiefel_error;   // ||A^T A - I||_F per iterate
  std::vector<std::size_t> refreshes;  // trace indices where hyperparameters changed
};

struct RestartResult {
  std::optional<ObjectiveState> state;
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
  double max_stiefel_error = 0.0;
  std::string error;  // nonempty when the restart failed
  DescentTrace trace;
};

/// Importance-weighted fit on u = x A with the ratio model and ridge chosen
/// by cross-validation, A held fixed.
struct Downstream {
  Matrix a;
  ratio::TunedWeights ratio;  // weights rescaled to mean one
  model::LinearModel model;
  double c = 0.0;
};

Downstream downstream_fit(const Matrix& a, const TrainTestPair& data, const SearchConfig& config,
                          std::uint64_t seed);

struct LambdaResult {
  double lambda = 0.0;
  std::vector<RestartResult> restarts;
  std::optional<std::size_t> best_restart;
  std::optional<Downstream> downstream;  // of the best restart, when refitting
  double iwcv_score = 0.0;
};

struct SearchResult {
  ObjectiveState best;
  std::optional<Downstream> downstream;  // set when config.downstream_refit
  Projection projection = Projection::from_matrix(Matrix::Identity(2, 1));
  std::size_t lambda_index = 0;
  std::size_t restart_index = 0;
  int iterations = 0;
  std::uint64_t seed = 0;
  double max_stiefel_error = 0.0;
  std::vector<LambdaResult> per_lambda;
};

/// Re-selects (sigma, gamma) by uLSIF cross-validation and c by weighted
/// cross-validation with A frozen.
Hyper inline_cv(const Matrix& a, const TrainTestPair& data, const SearchConfig& config,
                const ObjectiveSettings& settings, double lambda, std::uint64_t seed);

/// One descent from a0 with lambda fixed.
RestartResult descend(const TrainTestPair& data, const SearchConfig& config,
                      const ObjectiveSettings& settings, double lambda,
                      const Matrix& a0, std::uint64_t seed);

/// Full search: restarts for every lambda, per-lambda winner by final
/// objective, lambda chosen by importance-weighted cross-validation (of the
/// downstream fits when refitting).
SearchResult search(const TrainTestPair& data, const SearchConfig& config);

// --- gradient audit -----------------------------------------------------------

struct GradcheckResult {
  Matrix analytic;
  Matrix numeric;
  double max_relative_error = 0.0;  // ||analytic - numeric||_inf / ||numeric||_inf
  double max_abs_error = 0.0;
};

/// Central differences of G over every entry of A (no retraction).
Matrix finite_difference_gradient(const Matrix& a, const TrainTestPair& data,
                                  const Hyper& hyper,
                                  const ObjectiveSettings& settings,
                                  double step = 1e-6);

GradcheckResult gradcheck(const Matrix& a, const TrainTestPair& data,
                          const Hyper& hyper, const ObjectiveSettings& settings,
                          double step = 1e-6);

/// Small seeded instance (D <= 6, K <= 2, N <= 60) with fixed hyperparameters.
struct GradcheckInstance {
  TrainTestPair data;
  Matrix a;
  Hyper hyper;
  ObjectiveSettings settings;
};
GradcheckInstance make_gradcheck_instance(std::uint64_t seed);

}  // namespace edr::search
