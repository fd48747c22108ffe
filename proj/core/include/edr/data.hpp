#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edr/common.hpp"

namespace edr {

/// A covariate-shift problem instance: labeled training rows, unlabeled test
/// covariates, and a labeled test holdout used only for evaluation.
struct TrainTestPair {
  Matrix x_train;
  Vector y_train;
  Matrix x_test;  // unlabeled
  Matrix x_holdout;
  Vector y_holdout;

  std::string generator;  // "example1", "csv", ...
  std::uint64_t seed = 0;

  // Source row ids when the pair was carved out of a tabular dataset; empty
  // for synthetic data.
  std::vector<Index> train_rows;
  std::vector<Index> test_rows;
  std::vector<Index> holdout_rows;

  Index dimension() const { return x_train.cols(); }

  /// Throws InputError on NaNs or inconsistent shapes.
  void validate() const;
};

}  // namespace edr
