#pragma once

#include <cstdint>
#include <random>

#include "edr/common.hpp"
#include "edr/data.hpp"

/// Simulation generators and Monte-Carlo checks with closed-form ratios.
namespace edr::synthetic {

inline constexpr Index kExampleDimension = 12;
inline constexpr double kExampleNoiseStd = 0.1;  // variance 0.01

/// Twelve covariates; y | x ~ N(0.2|x1| + |x2|, 0.01).
///   train: x1, x2 ~ U(-1, 1); x3..x12 ~ 0.9 U(-1, 0) + 0.1 U(0, 1)
///   test:  x1, x2 ~ U(0, 1);  x3..x12 ~ 0.1 U(-1, 0) + 0.9 U(0, 1)
/// N training rows and N test rows, of which N/3 form the labeled holdout.
TrainTestPair gen_example1(Index n, std::uint64_t seed);

/// As gen_example1, except x2 = +-x1 (fair coin) on the training side.
TrainTestPair gen_example2(Index n, std::uint64_t seed);

/// Mean of y given x for the examples.
double example_regression_mean(const Eigen::Ref<const Eigen::RowVectorXd>& x);

struct GaussianShiftSpec {
  Vector train_mean;
  Matrix train_cov;
  Vector test_mean;
  Matrix test_cov;

  Index dimension() const { return train_mean.size(); }
  void validate() const;
  /// Marginal spec of u = A^T x.
  GaussianShiftSpec project(const Matrix& a) const;
};

double gaussian_log_density(const Vector& x, const Vector& mean, const Matrix& cov);

/// p_test(x) / p_train(x).
double analytic_ratio(const GaussianShiftSpec& spec, const Vector& x);

/// n draws from the training (or test) Gaussian, one per row.
Matrix sample_gaussian(const Vector& mean, const Matrix& cov, Index n,
                       std::mt19937_64& rng);

struct Lemma1Trial {
  double full = 0.0;       // mean of w(x)^2
  double projected = 0.0;  // mean of w^A(A^T x)^2
  double se = 0.0;         // standard error of (full - projected)
  bool holds = false;      // projected <= full + 2 se
};

struct Lemma1Report {
  std::vector<Lemma1Trial> trials;
  double mean_full = 0.0;
  double mean_projected = 0.0;
  bool all_hold = false;
};

/// Monte-Carlo estimate of E_tr[w(X)^2] against E_tr[w^A(A^T X)^2] using exact
/// Gaussian ratios, repeated over independent trials of n draws each.
Lemma1Report lemma1_mc_check(const GaussianShiftSpec& spec, const Matrix& a,
                             Index n, int trials, std::uint64_t seed);

}  // namespace edr::synthetic
