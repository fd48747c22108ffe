#include <gtest/gtest.h>

#include <cmath>

#include "edr/baselines.hpp"
#include "edr/linalg.hpp"
#include "edr/synthetic.hpp"
#include "test_util.hpp"

using namespace edr;
using namespace edr::baselines;

namespace {

BaselineSpec spec_of(Kind kind, std::optional<Index> k = std::nullopt, std::uint64_t seed = 1) {
  BaselineSpec s;
  s.kind = kind;
  s.k = k;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(BaselineSpec, KPresentExactlyForProjections) {
  EXPECT_NO_THROW(spec_of(Kind::kUW).validate(4));
  EXPECT_THROW(spec_of(Kind::kUW, 1).validate(4), InputError);
  EXPECT_THROW(spec_of(Kind::kRP).validate(4), InputError);
  EXPECT_THROW(spec_of(Kind::kSIR, 5).validate(4), InputError);
  EXPECT_EQ(spec_of(Kind::kRP, 2).label(), "RP(2)");
  EXPECT_EQ(spec_of(Kind::kIW).label(), "IW");
}

TEST(RunBaseline, UnitWeightFitMatchesUwAtEqualRidge) {
  const auto data = synthetic::gen_example1(150, 3);
  const auto uw = run_baseline(spec_of(Kind::kUW), data);
  const auto forced = model::weighted_fit(data.x_train, data.y_train,
                                          Vector::Ones(data.x_train.rows()), uw.c,
                                          model::LossSpec::regression());
  EXPECT_EQ(uw.model.b, forced.b);
  EXPECT_EQ(uw.ess, 150.0);
}

TEST(RunBaseline, UwIgnoresTestCovariates) {
  auto data = synthetic::gen_example1(120, 4);
  const auto a = run_baseline(spec_of(Kind::kUW), data);
  data.x_test.array() += 3.0;
  const auto b = run_baseline(spec_of(Kind::kUW), data);
  EXPECT_EQ(a.model.b, b.model.b);
}

TEST(RunBaseline, UwLossOnExample1) {
  // Averaged over a handful of replicates at N = 200; the population level is about 0.25.
  double total = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto data = synthetic::gen_example1(200, 100 + s);
    total += holdout_loss(run_baseline(spec_of(Kind::kUW), data), data,
                          model::LossSpec::regression());
  }
  EXPECT_NEAR(total / 10.0, 0.25, 0.04);
}

TEST(RunBaseline, ProjectionsAreOrthonormalAndWeightsNonnegative) {
  const auto data = synthetic::gen_example1(120, 5);
  for (const auto& s : {spec_of(Kind::kRP, 1), spec_of(Kind::kRP, 3), spec_of(Kind::kSIR, 1),
                        spec_of(Kind::kSIR, 2)}) {
    const auto r = run_baseline(s, data);
    EXPECT_EQ(r.projection.cols(), *s.k) << s.label();
    EXPECT_LE(linalg::orthonormality_error(r.projection), 1e-8) << s.label();
    EXPECT_GE(r.weights.minCoeff(), 0.0) << s.label();
    EXPECT_GT(r.ess, 0.0);
    EXPECT_LE(r.ess, 120.0 + 1e-9);
  }
}

TEST(RunBaseline, SeededAndDeterministic) {
  const auto data = synthetic::gen_example1(100, 6);
  const auto a = run_baseline(spec_of(Kind::kRP, 2, 7), data);
  const auto b = run_baseline(spec_of(Kind::kRP, 2, 7), data);
  const auto c = run_baseline(spec_of(Kind::kRP, 2, 8), data);
  EXPECT_EQ(a.projection, b.projection);
  EXPECT_EQ(a.model.b, b.model.b);
  EXPECT_NE(a.projection, c.projection);
}

TEST(Sir, SingleIndexDirectionRecovered) {
  std::mt19937_64 rng(11);
  const Matrix x = testutil::gaussian_matrix(1000, 6, rng);
  Vector beta(6);
  beta << 1.0, -2.0, 0.5, 0.0, 0.0, 1.0;
  const Vector y = x * beta;
  const Matrix dir = sir_directions(x, y, 1, 10);
  EXPECT_GE(std::abs(dir.col(0).dot(beta.normalized())), 0.99);
}

TEST(Sir, NullEigenvaluesAreSmall) {
  std::mt19937_64 rng(12);
  const Matrix x = testutil::gaussian_matrix(1000, 5, rng);
  const Vector y = testutil::gaussian_matrix(1000, 1, rng).col(0);
  const auto r = sir(x, y, 2, 10);
  EXPECT_LT(r.eigenvalues.cwiseAbs().maxCoeff(), 0.1);
}

TEST(Sir, FullMinusOneDirectionsOrthonormal) {
  std::mt19937_64 rng(13);
  const Matrix x = testutil::gaussian_matrix(200, 5, rng);
  const Vector y = x.col(0).array().square() + x.col(1).array();
  const Matrix dir = sir_directions(x, y, 4, 10);
  EXPECT_EQ(dir.cols(), 4);
  EXPECT_LE(linalg::orthonormality_error(dir), 1e-10);
}

TEST(Sir, AffineReparameterizationKeepsTheSubspace) {
  std::mt19937_64 rng(14);
  const Matrix x = testutil::gaussian_matrix(500, 4, rng);
  Vector beta(4);
  beta << 0.3, 1.0, -0.7, 0.2;
  const Vector y = x * beta;  // noiseless

  Matrix m = testutil::gaussian_matrix(4, 4, rng) + 3.0 * Matrix::Identity(4, 4);
  const Eigen::RowVectorXd shift = Eigen::RowVectorXd::LinSpaced(4, -1.0, 2.0);
  const Matrix z = (x * m).rowwise() + shift;

  const Matrix dx = sir_directions(x, y, 1, 10);
  const Matrix dz = sir_directions(z, y, 1, 10);
  // Directions for z live in the z coordinates; the x-space equivalent is M dz.
  const Matrix mapped = linalg::qr_orthonormalize(m * dz);
  EXPECT_LE(linalg::principal_angles(dx, mapped).maxCoeff(), 1e-6);
}

TEST(Sir, ConstantResponseThrows) {
  std::mt19937_64 rng(15);
  const Matrix x = testutil::gaussian_matrix(50, 3, rng);
  EXPECT_THROW(sir_directions(x, Vector::Ones(50), 1, 5), InputError);
}

TEST(Sir, ClassificationSlicesByClass) {
  std::mt19937_64 rng(16);
  const Matrix x = testutil::gaussian_matrix(600, 4, rng);
  Vector y(600);
  for (Index i = 0; i < 600; ++i) y(i) = x(i, 2) > 0.0 ? 1.0 : 0.0;
  const auto r = sir_by_class(x, y, 1);
  EXPECT_GE(std::abs(r.directions(2, 0)), 0.95);
}
