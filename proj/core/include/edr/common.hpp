#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace edr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised for malformed arguments: dimension mismatches, NaNs, empty grids,
/// violated preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces non-finite values or fails to converge
/// in a way that cannot be recovered locally.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer. Used to derive independent child seeds from a base
/// seed and a counter so that parallel work is reproducible.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix_seed(mix_seed(base ^ mix_seed(stream)) + index);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

}  // namespace edr
