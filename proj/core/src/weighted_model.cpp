#include "edr/weighted_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

namespace edr::model {

namespace {

double sigmoid(double p) {
  if (p >= 0.0) return 1.0 / (1.0 + std::exp(-p));
  const double e = std::exp(p);
  return e / (1.0 + e);
}

Vector penalty_mask(Index dim, bool intercept) {
  Vector mask = Vector::Ones(dim);
  if (intercept) mask(dim - 1) = 0.0;
  return mask;
}

Matrix fit_hessian(const Vector& b, const Matrix& z, const Vector& y,
                   const Vector& w, double c, TrainLoss loss, bool intercept) {
  const double n = static_cast<double>(z.rows());
  const Vector p = z * b;
  Vector curv(z.rows());
  for (Index i = 0; i < z.rows(); ++i)
    curv(i) = w(i) * loss_d2(loss, p(i), y(i)) / n;
  Matrix h = z.transpose() * curv.asDiagonal() * z;
  h.diagonal() += 2.0 * c * penalty_mask(z.cols(), intercept);
  return h;
}

void validate_fit_inputs(const Matrix& u, const Vector& y, const Vector& w,
                         double c, const LossSpec& loss) {
  loss.validate();
  require(u.rows() >= 1, "weighted_fit: need at least one sample");
  require(y.size() == u.rows() && w.size() == u.rows(),
          "weighted_fit: inconsistent sample counts");
  require(c >= 0.0 && std::isfinite(c), "weighted_fit: ridge must be nonnegative");
  require(u.allFinite() && y.allFinite() && w.allFinite(),
          "weighted_fit: non-finite input");
  require((w.array() >= 0.0).all(), "weighted_fit: negative weight");
  if (loss.train == TrainLoss::kLogistic) {
    require(((y.array() == 0.0) || (y.array() == 1.0)).all(),
            "weighted_fit: logistic labels must be 0 or 1");
  }
}

}  // namespace

void LossSpec::validate() const {
  const bool ok = (train == TrainLoss::kSquared && eval == EvalLoss::kAbsoluteError) ||
                  (train == TrainLoss::kLogistic && eval == EvalLoss::kZeroOne);
  require(ok, "LossSpec: squared pairs with absolute error, logistic with 0-1");
}

double loss_value(TrainLoss loss, double p, double y) {
  if (loss == TrainLoss::kSquared) return (p - y) * (p - y);
  // log(1 + e^p) computed without overflow
  const double softplus = p > 0.0 ? p + std::log1p(std::exp(-p)) : std::log1p(std::exp(p));
  return softplus - y * p;
}

double loss_d1(TrainLoss loss, double p, double y) {
  if (loss == TrainLoss::kSquared) return 2.0 * (p - y);
  return sigmoid(p) - y;
}

double loss_d2(TrainLoss loss, double p, double /*y*/) {
  if (loss == TrainLoss::kSquared) return 2.0;
  const double s = sigmoid(p);
  return s * (1.0 - s);
}

double eval_value(EvalLoss loss, double score, double y) {
  if (loss == EvalLoss::kAbsoluteError) return std::abs(score - y);
  const double predicted = score > 0.0 ? 1.0 : 0.0;
  return predicted == y ? 0.0 : 1.0;
}

Vector LinearModel::scores(const Matrix& u) const {
  require(u.cols() == dimension(), "LinearModel::scores: dimension mismatch");
  return design_matrix(u, intercept) * b;
}

Matrix design_matrix(const Matrix& u, bool intercept) {
  if (!intercept) return u;
  Matrix z(u.rows(), u.cols() + 1);
  z << u, Vector::Ones(u.rows());
  return z;
}

Vector fit_gradient(const Vector& b, const Matrix& z, const Vector& y,
                    const Vector& w, double c, TrainLoss loss, bool intercept) {
  const double n = static_cast<double>(z.rows());
  const Vector p = z * b;
  Vector r(z.rows());
  for (Index i = 0; i < z.rows(); ++i) r(i) = w(i) * loss_d1(loss, p(i), y(i)) / n;
  Vector g = z.transpose() * r;
  g += 2.0 * c * penalty_mask(z.cols(), intercept).cwiseProduct(b);
  return g;
}

double fit_objective(const Vector& b, const Matrix& z, const Vector& y,
                     const Vector& w, double c, TrainLoss loss, bool intercept) {
  const Vector p = z * b;
  double total = 0.0;
  for (Index i = 0; i < z.rows(); ++i) total += w(i) * loss_value(loss, p(i), y(i));
  total /= static_cast<double>(z.rows());
  return total + c * penalty_mask(z.cols(), intercept).cwiseProduct(b).squaredNorm();
}

LinearModel weighted_fit(const Matrix& u, const Vector& y, const Vector& w,
                         double c, const LossSpec& loss,
                         const FitOptions& options) {
  validate_fit_inputs(u, y, w, c, loss);
  const Matrix z = design_matrix(u, options.intercept);
  const Index dim = z.cols();

  LinearModel model;
  model.task = loss.task();
  model.ridge = c;
  model.intercept = options.intercept;
  model.b = Vector::Zero(dim);

  if ((w.array() == 0.0).all()) {
    model.degenerate = true;
    return model;
  }

  auto newton_step = [&](const Vector& b) -> Vector {
    const Vector g = fit_gradient(b, z, y, w, c, loss.train, options.intercept);
    const Matrix h = fit_hessian(b, z, y, w, c, loss.train, options.intercept);
    return h.ldlt().solve(g);
  };

  if (loss.train == TrainLoss::kSquared && !options.force_newton) {
    const double n = static_cast<double>(z.rows());
    Matrix lhs = z.transpose() * w.asDiagonal() * z / n;
    lhs.diagonal() += c * penalty_mask(dim, options.intercept);
    const Vector rhs = z.transpose() * w.cwiseProduct(y) / n;
    model.b = lhs.ldlt().solve(rhs);
    // A couple of refinement passes keep the stationarity residual tiny even
    // when the weighted Gram matrix is poorly conditioned.
    for (int k = 0; k < 3; ++k) {
      const double gn =
          fit_gradient(model.b, z, y, w, c, loss.train, options.intercept).norm();
      if (gn <= options.tolerance) break;
      model.b -= newton_step(model.b);
    }
  } else {
    Vector b = Vector::Zero(dim);
    double f = fit_objective(b, z, y, w, c, loss.train, options.intercept);
    int it = 0;
    for (; it < options.max_newton_iterations; ++it) {
      const Vector g = fit_gradient(b, z, y, w, c, loss.train, options.intercept);
      if (g.norm() <= options.tolerance) break;
      const Matrix h = fit_hessian(b, z, y, w, c, loss.train, options.intercept);
      const Vector step = h.ldlt().solve(g);
      const double slope = -g.dot(step);
      double t = 1.0;
      Vector trial = b - step;
      double f_trial = fit_objective(trial, z, y, w, c, loss.train, options.intercept);
      // Once the predicted decrease is below rounding in f, Armijo cannot be
      // evaluated reliably; Newton is in its quadratic regime, so take the full step.
      const bool tail = -slope <= 1e-12 * (1.0 + std::abs(f));
      while (!tail && !(f_trial <= f + 1e-4 * t * slope) && t > 1e-10) {
        t *= 0.5;
        trial = b - t * step;
        f_trial = fit_objective(trial, z, y, w, c, loss.train, options.intercept);
      }
      if (!tail && !(f_trial <= f)) {
        // Line search cannot improve further at machine precision.
        if (t <= 1e-10) break;
      }
      b = trial;
      f = f_trial;
    }
    model.b = b;
    model.newton_iterations = it;
  }
  model.gradient_norm =
      fit_gradient(model.b, z, y, w, c, loss.train, options.intercept).norm();
  if (!model.b.allFinite()) throw NumericalError("weighted_fit: non-finite coefficients");
  return model;
}

double weighted_loss(const LinearModel& model, const Matrix& u, const Vector& y,
                     const Vector& w, const LossSpec& loss) {
  require(y.size() == u.rows() && w.size() == u.rows(),
          "weighted_loss: inconsistent sample counts");
  require(u.rows() > 0, "weighted_loss: empty sample");
  const Vector p = model.scores(u);
  double total = 0.0;
  for (Index i = 0; i < u.rows(); ++i) total += w(i) * loss_value(loss.train, p(i), y(i));
  return total / static_cast<double>(u.rows());
}

double eval_loss(const LinearModel& model, const Matrix& u_holdout,
                 const Vector& y_holdout, const LossSpec& loss) {
  require(u_holdout.rows() > 0, "eval_loss: empty holdout");
  require(y_holdout.size() == u_holdout.rows(), "eval_loss: label count mismatch");
  const Vector p = model.scores(u_holdout);
  double total = 0.0;
  for (Index i = 0; i < p.size(); ++i) total += eval_value(loss.eval, p(i), y_holdout(i));
  return total / static_cast<double>(p.size());
}

double auc(const Vector& scores, const Vector& labels) {
  require(scores.size() == labels.size(), "auc: size mismatch");
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return scores(a) < scores(b); });
  // Average ranks over ties.
  std::vector<double> rank(static_cast<std::size_t>(n));
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && scores(order[static_cast<std::size_t>(j + 1)]) ==
                            scores(order[static_cast<std::size_t>(i)]))
      ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = r;
    i = j + 1;
  }
  double pos = 0.0, rank_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (labels(i) == 1.0) {
      pos += 1.0;
      rank_sum += rank[static_cast<std::size_t>(i)];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  require(pos > 0.0 && neg > 0.0, "auc: need both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed) {
  require(folds >= 2, "fold_assignment: need at least two folds");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Index k = std::min<Index>(folds, n);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    out[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = static_cast<int>(i % k);
  return out;
}

double iwcv_score(const IwcvCandidate& candidate, const Vector& y,
                  const LossSpec& loss, const std::vector<int>& folds,
                  const FitOptions& options) {
  const Index n = candidate.features.rows();
  require(y.size() == n && candidate.weights.size() == n &&
              static_cast<Index>(folds.size()) == n,
          "iwcv_score: inconsistent sample counts");
  if (candidate.weights.sum() <= 0.0) return std::numeric_limits<double>::infinity();

  const int n_folds = folds.empty() ? 0 : *std::max_element(folds.begin(), folds.end()) + 1;
  double total = 0.0;
  int used = 0;
  for (int f = 0; f < n_folds; ++f) {
    std::vector<Index> fit_rows, hold_rows;
    for (Index i = 0; i < n; ++i)
      (folds[static_cast<std::size_t>(i)] == f ? hold_rows : fit_rows).push_back(i);
    if (hold_rows.empty() || fit_rows.empty()) continue;

    Matrix u_fit(static_cast<Index>(fit_rows.size()), candidate.features.cols());
    Vector y_fit(u_fit.rows()), w_fit(u_fit.rows());
    for (std::size_t r = 0; r < fit_rows.size(); ++r) {
      u_fit.row(static_cast<Index>(r)) = candidate.features.row(fit_rows[r]);
      y_fit(static_cast<Index>(r)) = y(fit_rows[r]);
      w_fit(static_cast<Index>(r)) = candidate.weights(fit_rows[r]);
    }
    if ((w_fit.array() == 0.0).all()) {
      spdlog::warn("iwcv: fold {} has all-zero training weights; fitting unweighted", f);
      w_fit.setOnes();
    }
    const LinearModel m = weighted_fit(u_fit, y_fit, w_fit, candidate.c, loss, options);
    double fold_loss = 0.0;
    for (Index i : hold_rows) {
      const double score = m.scores(candidate.features.row(i)).value();
      fold_loss += candidate.weights(i) * eval_value(loss.eval, score, y(i));
    }
    total += fold_loss / static_cast<double>(hold_rows.size());
    ++used;
  }
  if (used == 0) throw InputError("iwcv_score: no usable folds");
  return total / static_cast<double>(used);
}

IwcvResult iwcv_select(std::span<const IwcvCandidate> candidates,
                       const Vector& y, const LossSpec& loss, int folds,
                       std::uint64_t seed, const FitOptions& options) {
  require(!candidates.empty(), "iwcv_select: no candidates");
  require(folds >= 2, "iwcv_select: need at least two folds");
  const auto assignment = fold_assignment(y.size(), folds, seed);
  IwcvResult out;
  out.scores.reserve(candidates.size());
  for (const auto& c : candidates)
    out.scores.push_back(iwcv_score(c, y, loss, assignment, options));
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double best = out.scores[out.best];
    const double s = out.scores[i];
    if (s < best || (s == best && candidates[i].lambda < candidates[out.best].lambda))
      out.best = i;
  }
  return out;
}

double select_ridge(const Matrix& features, const Vector& weights,
                    const Vector& y, const LossSpec& loss,
                    const std::vector<double>& c_grid, int folds,
                    std::uint64_t seed, const FitOptions& options) {
  require(!c_grid.empty(), "select_ridge: empty grid");
  const auto assignment = fold_assignment(y.size(), folds, seed);
  Vector w = weights;
  if (w.sum() <= 0.0) w.setOnes();
  double best_c = c_grid.front();
  double best = std::numeric_limits<double>::infinity();
  for (double c : c_grid) {
    const double s = iwcv_score({features, w, c, 0.0}, y, loss, assignment, options);
    if (s < best) {
      best = s;
      best_c = c;
    }
  }
  return best_c;
}

std::vector<double> default_ridge_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1.0}; }

}  // namespace edr::model
