#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "edr/common.hpp"
#include "edr/data.hpp"

/// Turning a labeled table into covariate-shift benchmarks: directional
/// biased subsampling along a predictive vector, and the subgroup split
/// (train on everything, test on the subgroup).
namespace edr::shift {

struct ShiftSpec {
  int n_candidate_vectors = 100;
  double alpha = 0.8;           // position of the acceptance mean between min and max
  double c = 0.1;               // acceptance variance in units of sigma^2
  double train_fraction = 0.5;
  double holdout_fraction = 1.0 / 3.0;
  bool standardize = true;      // search and project in standardized coordinates
  double bandwidth_scale = 1.0; // multiplies Silverman's rule
  std::uint64_t seed = 0;

  void validate() const;
};

/// Column means and standard deviations (1 for constant columns).
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Matrix& x);
  static Standardizer identity(Index d);
  Matrix apply(const Matrix& x) const;
};

/// Standardizer::fit if spec.standardize, else identity.
Standardizer standardizer_for(const Matrix& x, const ShiftSpec& spec);

/// 0.9 min(sd, IQR / 1.34) n^(-1/5).
double silverman_bandwidth(const Vector& t);

/// In-sample mean squared error of Nadaraya-Watson regression of y on the
/// scalar t (Gaussian kernel with the given bandwidth; every point, including
/// i itself, contributes to its own fit).
double nadaraya_watson_error(const Vector& t, const Vector& y, double bandwidth);

struct VectorChoice {
  Vector vector;        // unit length, in the (possibly standardized) coordinates
  std::size_t index = 0;
  std::vector<double> errors;  // one per candidate
};

/// Scores the given candidate directions (columns, any nonzero length).
VectorChoice pick_predictive_vector(const Matrix& x, const Vector& y, const Matrix& candidates,
                                    const ShiftSpec& spec);

/// Draws spec.n_candidate_vectors normalized Gaussian directions and scores them.
VectorChoice pick_predictive_vector(const Matrix& x, const Vector& y, const ShiftSpec& spec);

struct InducedShift {
  TrainTestPair data;
  Vector vector;
  Vector projections;          // every row of X
  double t0 = 0.0;             // min projection
  double t1 = 0.0;             // max projection
  double sigma = 0.0;          // std of projections over the remainder
  double center = 0.0;         // t0 + alpha (t1 - t0)
  std::vector<Index> remainder_rows;
  Vector acceptance;           // per remainder row, max-normalized to 1
};

/// Uniform training sample; the remainder is accepted with probability
/// proportional to N(center, c sigma^2) at each projected value; accepted
/// rows are split into unlabeled test and holdout.
InducedShift induce_shift(const Matrix& x, const Vector& y, const Vector& vector,
                          const ShiftSpec& spec);

struct SubgroupSpec {
  double holdout_fraction = 1.0 / 3.0;
  std::uint64_t seed = 0;
};

/// Test distribution = rows with group == 1. A random holdout_fraction of the
/// subgroup is held aside with labels; every other row trains.
TrainTestPair subgroup_split(const Matrix& x, const Vector& y, const Vector& group,
                             const SubgroupSpec& spec);

nlohmann::json to_json(const ShiftSpec& spec);
nlohmann::json manifest(const InducedShift& shift, const ShiftSpec& spec);
nlohmann::json manifest(const TrainTestPair& split, const SubgroupSpec& spec);

}  // namespace edr::shift
