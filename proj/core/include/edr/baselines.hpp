#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edr/common.hpp"
#include "edr/data.hpp"
#include "edr/density_ratio.hpp"
#include "edr/weighted_model.hpp"

/// Comparison methods: unweighted (UW), full-dimensional importance weighting
/// (IW), random projection (RP) and sliced inverse regression (SIR) followed
/// by importance weighting.
namespace edr::baselines {

enum class Kind { kUW, kIW, kRP, kSIR };

std::string to_string(Kind kind);

struct BaselineSpec {
  Kind kind = Kind::kUW;
  std::optional<Index> k;  // present iff kind is RP or SIR
  std::uint64_t seed = 0;

  void validate(Index input_dimension) const;
  /// "UW", "IW", "RP(2)", "SIR(1)".
  std::string label() const;
};

struct BaselineOptions {
  model::LossSpec loss = model::LossSpec::regression();
  int folds = 5;
  int n_slices = 10;  // SIR, regression only; classification slices by class
  ratio::Penalty penalty = ratio::Penalty::kQuadratic;
  Index max_centers = ratio::kDefaultMaxCenters;
  std::vector<double> c_grid = model::default_ridge_grid();
  model::FitOptions fit;
};

/// A fitted method: the projection applied before the linear model (D x D
/// identity when there is none), the model, and the training weights it was
/// fitted with.
struct FitResult {
  std::string method;
  Matrix projection;
  model::LinearModel model;
  Vector weights;
  double ess = 0.0;
  double c = 0.0;
  double sigma = 0.0;  // 0 when no ratio model was fitted
  double gamma = 0.0;

  /// Predicted scores for raw covariates.
  Vector scores(const Matrix& x) const;
};

/// Mean evaluation loss of the fit on the labeled holdout.
double holdout_loss(const FitResult& fit, const TrainTestPair& data,
                    const model::LossSpec& loss);

/// Ridge chosen by weighted CV, then a weighted fit on the features.
model::LinearModel fit_selected(const Matrix& features, const Vector& y,
                                const Vector& weights,
                                const BaselineOptions& options,
                                std::uint64_t seed, double* chosen_c = nullptr);

/// uLSIF (tuned by ratio_cv) on the projected covariates followed by
/// fit_selected with the resulting mean-one weights.
FitResult importance_weighted_fit(const Matrix& projection, const TrainTestPair& data,
                                  const BaselineOptions& options, std::uint64_t seed);

FitResult run_baseline(const BaselineSpec& spec, const TrainTestPair& data,
                       const BaselineOptions& options = {});

struct SirResult {
  Matrix directions;   // D x K, orthonormal columns
  Vector eigenvalues;  // all D eigenvalues of the whitened slice-mean covariance, descending
};

/// Sliced inverse regression with n_slices equal-count slices on y.
SirResult sir(const Matrix& x, const Vector& y, Index k, int n_slices);

/// As sir, with one slice per distinct label.
SirResult sir_by_class(const Matrix& x, const Vector& y, Index k);

Matrix sir_directions(const Matrix& x, const Vector& y, Index k, int n_slices);

}  // namespace edr::baselines
