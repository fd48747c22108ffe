#include "edr/baselines.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "edr/linalg.hpp"

namespace edr::baselines {

namespace {

constexpr double kWhiteningRidge = 1e-8;
constexpr std::uint64_t kProjectionStream = 0x52;
constexpr std::uint64_t kRatioStream = 0x1f;
constexpr std::uint64_t kRidgeStream = 0xc0;

// Top-k eigen-directions of the slice-mean covariance for the given slice
// membership (slice ids 0..n_slices-1).
SirResult sir_from_slices(const Matrix& x, const std::vector<int>& slice, int n_slices,
                          Index k) {
  const Index n = x.rows();
  const Index d = x.cols();
  require(k >= 1 && k <= d, "sir: need 1 <= K <= D");

  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Matrix centered = x.rowwise() - mu;
  Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  cov.diagonal().array() += kWhiteningRidge;
  Eigen::SelfAdjointEigenSolver<Matrix> ecov(cov);
  const Matrix whiten = ecov.eigenvectors() *
                        ecov.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                        ecov.eigenvectors().transpose();
  const Matrix z = centered * whiten;

  Matrix means = Matrix::Zero(n_slices, d);
  Vector counts = Vector::Zero(n_slices);
  for (Index i = 0; i < n; ++i) {
    means.row(slice[static_cast<std::size_t>(i)]) += z.row(i);
    counts(slice[static_cast<std::size_t>(i)]) += 1.0;
  }
  Matrix between = Matrix::Zero(d, d);
  for (int h = 0; h < n_slices; ++h) {
    if (counts(h) == 0.0) continue;
    const Vector m = means.row(h).transpose() / counts(h);
    between += (counts(h) / static_cast<double>(n)) * m * m.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eb(between);

  SirResult out;
  out.eigenvalues = eb.eigenvalues().reverse();
  const Matrix top = eb.eigenvectors().rightCols(k).rowwise().reverse();
  out.directions = linalg::qr_orthonormalize(whiten * top);
  return out;
}

}  // namespace

std::string to_string(Kind kind) {
  switch (kind) {
    case Kind::kUW: return "UW";
    case Kind::kIW: return "IW";
    case Kind::kRP: return "RP";
    case Kind::kSIR: return "SIR";
  }
  return "?";
}

void BaselineSpec::validate(Index input_dimension) const {
  const bool projected = kind == Kind::kRP || kind == Kind::kSIR;
  if (projected != k.has_value())
    throw InputError("BaselineSpec: K must be given for RP/SIR and only for them");
  if (k) require(*k >= 1 && *k <= input_dimension, "BaselineSpec: need 1 <= K <= D");
}

std::string BaselineSpec::label() const {
  std::string s = to_string(kind);
  if (k) s += "(" + std::to_string(*k) + ")";
  return s;
}

Vector FitResult::scores(const Matrix& x) const { return model.scores(x * projection); }

double holdout_loss(const FitResult& fit, const TrainTestPair& data,
                    const model::LossSpec& loss) {
  require(data.x_holdout.rows() > 0, "holdout_loss: empty holdout");
  return model::eval_loss(fit.model, data.x_holdout * fit.projection, data.y_holdout, loss);
}

model::LinearModel fit_selected(const Matrix& features, const Vector& y, const Vector& weights,
                                const BaselineOptions& options, std::uint64_t seed,
                                double* chosen_c) {
  const double c = model::select_ridge(features, weights, y, options.loss, options.c_grid,
                                       options.folds, seed, options.fit);
  if (chosen_c != nullptr) *chosen_c = c;
  return model::weighted_fit(features, y, weights, c, options.loss, options.fit);
}

FitResult importance_weighted_fit(const Matrix& projection, const TrainTestPair& data,
                                  const BaselineOptions& options, std::uint64_t seed) {
  const Matrix u_tr = data.x_train * projection;
  const Matrix u_te = data.x_test * projection;
  const auto tuned = ratio::tuned_weights(u_tr, u_te, options.folds,
                                          derive_seed(seed, kRatioStream), options.penalty,
                                          options.max_centers);
  FitResult out;
  out.projection = projection;
  out.weights = tuned.weights.w;
  out.ess = tuned.weights.ess;
  out.sigma = tuned.cv.sigma;
  out.gamma = tuned.cv.gamma;
  // All-zero weights leave nothing to fit; treat as no correction.
  const Vector w = out.weights.sum() > 0.0 ? out.weights : Vector::Ones(u_tr.rows());
  out.model = fit_selected(u_tr, data.y_train, w, options, derive_seed(seed, kRidgeStream),
                           &out.c);
  return out;
}

FitResult run_baseline(const BaselineSpec& spec, const TrainTestPair& data,
                       const BaselineOptions& options) {
  data.validate();
  spec.validate(data.dimension());
  options.loss.validate();
  const Index d = data.dimension();

  FitResult out;
  switch (spec.kind) {
    case Kind::kUW: {
      out.projection = Matrix::Identity(d, d);
      out.weights = Vector::Ones(data.x_train.rows());
      out.ess = static_cast<double>(data.x_train.rows());
      out.model = fit_selected(data.x_train, data.y_train, out.weights, options,
                               derive_seed(spec.seed, kRidgeStream), &out.c);
      break;
    }
    case Kind::kIW:
      out = importance_weighted_fit(Matrix::Identity(d, d), data, options, spec.seed);
      break;
    case Kind::kRP: {
      std::mt19937_64 rng(derive_seed(spec.seed, kProjectionStream));
      out = importance_weighted_fit(linalg::random_stiefel(d, *spec.k, rng), data, options,
                                    spec.seed);
      break;
    }
    case Kind::kSIR: {
      const Matrix dirs = options.loss.task() == model::Task::kClassification
                              ? sir_by_class(data.x_train, data.y_train, *spec.k).directions
                              : sir_directions(data.x_train, data.y_train, *spec.k,
                                               options.n_slices);
      out = importance_weighted_fit(dirs, data, options, spec.seed);
      break;
    }
  }
  out.method = spec.label();
  return out;
}

SirResult sir(const Matrix& x, const Vector& y, Index k, int n_slices) {
  const Index n = x.rows();
  require(y.size() == n, "sir: y length mismatch");
  require(n_slices >= 2, "sir: need n_slices >= 2");
  require(n >= n_slices, "sir: need N >= n_slices");
  require(x.allFinite() && y.allFinite(), "sir: non-finite input");
  if (y.maxCoeff() == y.minCoeff()) throw InputError("sir: y is constant; slicing undefined");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return y(a) < y(b); });
  std::vector<int> slice(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r)
    slice[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] =
        static_cast<int>(r * n_slices / n);
  return sir_from_slices(x, slice, n_slices, k);
}

SirResult sir_by_class(const Matrix& x, const Vector& y, Index k) {
  require(y.size() == x.rows(), "sir_by_class: y length mismatch");
  std::map<double, int> ids;
  for (Index i = 0; i < y.size(); ++i) ids.emplace(y(i), 0);
  if (ids.size() < 2) throw InputError("sir_by_class: need at least two classes");
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  std::vector<int> slice(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) slice[static_cast<std::size_t>(i)] = ids.at(y(i));
  return sir_from_slices(x, slice, next, k);
}

Matrix sir_directions(const Matrix& x, const Vector& y, Index k, int n_slices) {
  return sir(x, y, k, n_slices).directions;
}

}  // namespace edr::baselines
