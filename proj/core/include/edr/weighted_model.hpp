#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "edr/common.hpp"

namespace edr::model {

enum class Task { kRegression, kClassification };
enum class TrainLoss { kSquared, kLogistic };
enum class EvalLoss { kAbsoluteError, kZeroOne };

struct LossSpec {
  TrainLoss train = TrainLoss::kSquared;
  EvalLoss eval = EvalLoss::kAbsoluteError;

  static LossSpec regression() { return {TrainLoss::kSquared, EvalLoss::kAbsoluteError}; }
  static LossSpec classification() { return {TrainLoss::kLogistic, EvalLoss::kZeroOne}; }
  static LossSpec for_task(Task t) {
    return t == Task::kRegression ? regression() : classification();
  }

  Task task() const {
    return train == TrainLoss::kSquared ? Task::kRegression : Task::kClassification;
  }
  void validate() const;
};

// Per-sample training loss and its first two derivatives in the score p.
// Squared: (p - y)^2. Logistic (y in {0, 1}): log(1 + e^p) - y p.
double loss_value(TrainLoss loss, double p, double y);
double loss_d1(TrainLoss loss, double p, double y);
double loss_d2(TrainLoss loss, double p, double y);
double eval_value(EvalLoss loss, double score, double y);

struct FitOptions {
  bool intercept = true;     // appended ones column, never penalized
  bool force_newton = false; // use Newton even for squared loss
  double tolerance = 1e-8;   // on the gradient norm of the fit objective
  int max_newton_iterations = 100;
};

struct LinearModel {
  Vector b;  // K coefficients, then the intercept when present
  Task task = Task::kRegression;
  double ridge = 0.0;
  bool intercept = true;
  bool degenerate = false;  // every weight was zero; b is zero
  double gradient_norm = 0.0;
  int newton_iterations = 0;

  Index dimension() const { return b.size() - (intercept ? 1 : 0); }
  Vector scores(const Matrix& u) const;
};

/// Rows of u with a ones column appended when intercept is set.
Matrix design_matrix(const Matrix& u, bool intercept);

/// Gradient of (1/N) sum w_i l(b^T z_i, y_i) + c ||b_K||^2 at b.
Vector fit_gradient(const Vector& b, const Matrix& z, const Vector& y,
                    const Vector& w, double c, TrainLoss loss, bool intercept);

/// Objective value matching fit_gradient.
double fit_objective(const Vector& b, const Matrix& z, const Vector& y,
                     const Vector& w, double c, TrainLoss loss, bool intercept);

/// b* = argmin (1/N) sum w_i l(b^T z_i, y_i) + c ||b||^2 (intercept
/// unpenalized). Squared loss is solved in closed form, logistic by damped
/// Newton.
LinearModel weighted_fit(const Matrix& u, const Vector& y, const Vector& w,
                         double c, const LossSpec& loss,
                         const FitOptions& options = {});

/// (1/N) sum w_i l(b^T z_i, y_i) with the training loss.
double weighted_loss(const LinearModel& model, const Matrix& u, const Vector& y,
                     const Vector& w, const LossSpec& loss);

/// Unweighted mean evaluation loss on a holdout set. Classification scores
/// are thresholded at 0.
double eval_loss(const LinearModel& model, const Matrix& u_holdout,
                 const Vector& y_holdout, const LossSpec& loss);

/// Area under the ROC curve of scores against binary labels (rank statistic,
/// ties counted half).
double auc(const Vector& scores, const Vector& labels);

/// Deterministic fold labels 0..folds-1 for n samples.
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

/// One entry of an importance-weighted cross-validation comparison: the
/// (projected) training features, the weights produced by that candidate's
/// ratio model, its ridge constant, and the lambda it was searched with.
struct IwcvCandidate {
  Matrix features;
  Vector weights;
  double c = 1e-3;
  double lambda = 0.0;
};

/// Mean over folds of (1/|fold|) sum_{i in fold} w_i l_eval(pred_i, y_i),
/// with the model refit on the remaining folds using the same weights. Folds
/// whose training part has all-zero weights fall back to an unweighted fit.
double iwcv_score(const IwcvCandidate& candidate, const Vector& y,
                  const LossSpec& loss, const std::vector<int>& folds,
                  const FitOptions& options = {});

struct IwcvResult {
  std::size_t best = 0;
  std::vector<double> scores;
};

/// Minimizer of iwcv_score; ties go to the smaller lambda.
IwcvResult iwcv_select(std::span<const IwcvCandidate> candidates,
                       const Vector& y, const LossSpec& loss, int folds,
                       std::uint64_t seed, const FitOptions& options = {});

/// Ridge constant chosen by weighted cross-validation on fixed features and
/// weights.
double select_ridge(const Matrix& features, const Vector& weights,
                    const Vector& y, const LossSpec& loss,
                    const std::vector<double>& c_grid, int folds,
                    std::uint64_t seed, const FitOptions& options = {});

std::vector<double> default_ridge_grid();

}  // namespace edr::model
