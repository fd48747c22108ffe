#include <gtest/gtest.h>

#include <cmath>

#include "edr/density_ratio.hpp"
#include "test_util.hpp"

using namespace edr;
using namespace edr::ratio;

namespace {

KernelBasis basis_1d(std::initializer_list<double> centers, double sigma) {
  KernelBasis b;
  b.centers.resize(static_cast<Index>(centers.size()), 1);
  Index i = 0;
  for (const double c : centers) b.centers(i++, 0) = c;
  b.sigma = sigma;
  return b;
}

Matrix normal_column(Index n, double mean, std::mt19937_64& rng) {
  std::normal_distribution<double> d(mean, 1.0);
  Matrix x(n, 1);
  for (Index i = 0; i < n; ++i) x(i, 0) = d(rng);
  return x;
}

// Mean squared error of the clamped ratio estimate against e^{0.5x - 0.125}
// (test N(0.5, 1) over train N(0, 1)) on the training points.
double gaussian_pair_mse(Index n, std::uint64_t seed, Penalty penalty) {
  std::mt19937_64 rng(seed);
  const Matrix tr = normal_column(n, 0.0, rng);
  const Matrix te = normal_column(n, 0.5, rng);
  const TunedWeights tw = tuned_weights(tr, te, 5, seed, penalty);
  const Vector w = predict_weights(tw.model, tr).w;
  double mse = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double truth = std::exp(0.5 * tr(i, 0) - 0.125);
    mse += (w(i) - truth) * (w(i) - truth);
  }
  return mse / static_cast<double>(n);
}

}  // namespace

TEST(KernelFeatures, OneAtTheCenter) {
  const auto b = basis_1d({0.3, 2.0}, 0.7);
  EXPECT_DOUBLE_EQ(kernel_features(Vector::Constant(1, 0.3), b)(0), 1.0);
}

TEST(KernelFeatures, InverseEAtSigmaRootTwo) {
  const double sigma = 1.3;
  const auto b = basis_1d({0.0}, sigma);
  EXPECT_NEAR(kernel_features(Vector::Constant(1, sigma * std::sqrt(2.0)), b)(0), std::exp(-1.0),
              1e-15);
}

TEST(KernelFeatures, TwoCenterExample) {
  const auto b = basis_1d({1.0, -2.0}, 1.0);
  const Vector phi = kernel_features(Vector::Zero(1), b);
  EXPECT_NEAR(phi(0), 0.6065306597126334, 1e-15);
  EXPECT_NEAR(phi(1), 0.1353352832366127, 1e-15);
}

TEST(KernelFeatures, MatrixMatchesPointwise) {
  std::mt19937_64 rng(2);
  KernelBasis b;
  b.centers = testutil::gaussian_matrix(6, 3, rng);
  b.sigma = 0.8;
  const Matrix pts = testutil::gaussian_matrix(10, 3, rng);
  const Matrix phi = kernel_feature_matrix(pts, b);
  for (Index i = 0; i < pts.rows(); ++i)
    EXPECT_LE((phi.row(i).transpose() - kernel_features(pts.row(i).transpose(), b)).norm(), 1e-14);
}

TEST(SolveCoefficients, IdentityLinearPenalty) {
  const Vector a = solve_coefficients(Matrix::Identity(2, 2), Vector::Ones(2), 0.5, Penalty::kLinear);
  EXPECT_NEAR(a(0), 0.5, 1e-8);
  EXPECT_NEAR(a(1), 0.5, 1e-8);
}

TEST(SolveCoefficients, IdentityQuadraticPenalty) {
  const Vector a =
      solve_coefficients(Matrix::Identity(2, 2), Vector::Ones(2), 0.5, Penalty::kQuadratic);
  EXPECT_NEAR(a(0), 2.0 / 3.0, 1e-8);
  EXPECT_NEAR(a(1), 2.0 / 3.0, 1e-8);
}

TEST(SolveCoefficients, LinearPenaltyEqualToRhsGivesExactZero) {
  std::mt19937_64 rng(4);
  const Matrix b = testutil::gaussian_matrix(5, 5, rng);
  const Matrix h = b.transpose() * b;
  for (const double gamma : {0.1, 0.2, 0.4}) {
    const Vector a = solve_coefficients(h, Vector::Constant(5, gamma), gamma, Penalty::kLinear);
    EXPECT_EQ(a.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(UlsifFit, SameSampleWeightsAverageOne) {
  std::mt19937_64 rng(11);
  const Matrix x = normal_column(500, 0.0, rng);
  const RatioModel m = ulsif_fit(x, x, 1e-3, 0.5, 100, 1);
  const Vector w = predict_weights(m, x).w;
  EXPECT_NEAR(w.mean(), 1.0, 0.15);
}

TEST(UlsifFit, CentersAreTestPoints) {
  std::mt19937_64 rng(12);
  const Matrix tr = normal_column(50, 0.0, rng);
  const Matrix te = normal_column(30, 1.0, rng);
  const auto rows = choose_center_rows(30, 100, 5);
  EXPECT_EQ(rows.size(), 30u);  // min(100, N_te)
  const RatioModel m = ulsif_fit_with_centers(tr, te, rows, 0.1, 1.0);
  for (Index i = 0; i < m.basis.size(); ++i)
    EXPECT_EQ(m.basis.centers(i, 0), te(rows[static_cast<std::size_t>(i)], 0));
}

TEST(UlsifFit, SolverResidualIsTiny) {
  std::mt19937_64 rng(13);
  const Matrix tr = testutil::gaussian_matrix(80, 2, rng);
  const Matrix te = testutil::gaussian_matrix(60, 2, rng).array() + 0.5;
  KernelBasis b;
  b.centers = te.topRows(40);
  b.sigma = 0.6;
  for (const Penalty p : {Penalty::kQuadratic, Penalty::kLinear}) {
    for (const double gamma : {1e-3, 1e-1, 1.0}) {
      const UlsifSystem s = build_system(tr, te, b, gamma, p);
      const Matrix lhs = s.h_matrix + s.diagonal_shift() * Matrix::Identity(40, 40);
      const Vector rhs = p == Penalty::kLinear ? Vector(s.h_vector.array() - gamma) : s.h_vector;
      EXPECT_LE((lhs * s.alpha - rhs).norm(), 1e-8 * rhs.norm()) << "gamma " << gamma;
      EXPECT_NEAR(s.ridge, kRelativeRidge * s.h_matrix.trace() / 40.0, 1e-24);
    }
  }
}

TEST(PredictWeights, ZeroAlphaGivesZeroWeightsAndZeroEss) {
  RatioModel m;
  m.basis = basis_1d({0.0, 1.0}, 1.0);
  m.alpha = Vector::Zero(2);
  Matrix pts(3, 1);
  pts << -1, 0, 2;
  const WeightVector w = predict_weights(m, pts);
  EXPECT_EQ(w.w.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(w.ess, 0.0);
}

TEST(PredictWeights, NegativeOutputClampedToExactlyZero) {
  RatioModel m;
  m.basis = basis_1d({0.0, 3.0}, 1.0);
  m.alpha = Vector(2);
  m.alpha << 1.0, -2.0;
  Matrix pts(2, 1);
  pts << 0.0, 3.0;
  const Vector raw = raw_ratio(m, pts);
  ASSERT_LT(raw(1), 0.0);
  const WeightVector w = predict_weights(m, pts);
  EXPECT_GT(w.w(0), 0.0);
  EXPECT_EQ(w.w(1), 0.0);
}

TEST(PredictWeights, NonNegativeForRandomModels) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    RatioModel m;
    m.basis.centers = testutil::gaussian_matrix(8, 2, rng);
    m.basis.sigma = 0.3 + 0.1 * t;
    m.alpha = Vector(8);
    for (Index i = 0; i < 8; ++i) m.alpha(i) = n(rng);
    const Vector w = predict_weights(m, testutil::gaussian_matrix(40, 2, rng)).w;
    EXPECT_GE(w.minCoeff(), 0.0);
  }
}

TEST(EffectiveSampleSize, Examples) {
  EXPECT_DOUBLE_EQ(effective_sample_size(Vector::Ones(4)), 4.0);
  Vector w(4);
  w << 2, 0, 0, 0;
  EXPECT_DOUBLE_EQ(effective_sample_size(w), 1.0);
  Vector v(3);
  v << 1, 2, 3;
  // (1 + 2 + 3)^2 / (1 + 4 + 9)
  EXPECT_NEAR(effective_sample_size(v), 36.0 / 14.0, 1e-15);
  EXPECT_EQ(effective_sample_size(Vector::Zero(3)), 0.0);
  Vector neg(2);
  neg << 1, -1;
  EXPECT_THROW(effective_sample_size(neg), InputError);
}

TEST(EffectiveSampleSize, BoundedByNAndAttainedOnlyByEqualWeights) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 20;
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = u(rng);
    if (t % 3 == 0) w(0) = 0.0;
    const double ess = effective_sample_size(w);
    EXPECT_GT(ess, 0.0);
    EXPECT_LT(ess, static_cast<double>(n));
    EXPECT_NEAR(effective_sample_size(Vector::Constant(n, u(rng) + 0.1)), static_cast<double>(n),
                1e-12 * static_cast<double>(n));
  }
}

TEST(EffectiveSampleSize, ScaleInvariant) {
  Vector w(4);
  w << 0.3, 1.2, 0.0, 2.5;
  EXPECT_NEAR(effective_sample_size(w), effective_sample_size(7.0 * w), 1e-12);
}

TEST(RatioCv, SingleElementGridsReturnThatPair) {
  std::mt19937_64 rng(41);
  const Matrix tr = normal_column(60, 0.0, rng);
  const Matrix te = normal_column(60, 0.5, rng);
  const auto r = ratio_cv(tr, te, {0.7}, {0.01}, 5, 1);
  EXPECT_EQ(r.sigma, 0.7);
  EXPECT_EQ(r.gamma, 0.01);
}

TEST(RatioCv, SelectsTheBestGridPoint) {
  // Test sample nested in the training sample; a wide kernel represents the ratio well.
  std::mt19937_64 rng(42);
  const Matrix tr = normal_column(200, 0.0, rng);
  const Matrix te = tr.topRows(100) * 0.5;
  const std::vector<double> sigmas{0.05, 0.3, 1.0, 3.0};
  const std::vector<double> gammas{1e-3, 1e-1};
  const auto r = ratio_cv(tr, te, sigmas, gammas, 5, 2);
  EXPECT_DOUBLE_EQ(r.score, r.scores.minCoeff());
  EXPECT_LT(r.score, r.scores.maxCoeff());
  // On fresh draws the chosen pair beats the narrowest kernel, which overfits.
  const RatioModel chosen = ulsif_fit(tr, te, r.gamma, r.sigma, 100, 3);
  const RatioModel narrow = ulsif_fit(tr, te, 1e-3, 0.05, 100, 3);
  const Matrix tr2 = normal_column(2000, 0.0, rng);
  const Matrix te2 = normal_column(2000, 0.0, rng) * 0.5;
  EXPECT_LT(ulsif_criterion(chosen, tr2, te2), ulsif_criterion(narrow, tr2, te2));
}

TEST(RatioCv, LeaveOneOutOnTinyData) {
  std::mt19937_64 rng(43);
  const Matrix tr = normal_column(8, 0.0, rng);
  const Matrix te = normal_column(8, 0.3, rng);
  EXPECT_NO_THROW(ratio_cv(tr, te, {0.5, 1.0}, {0.01, 0.1}, 8, 4));
}

TEST(RatioCv, RejectsEmptyGrids) {
  const Matrix x = Matrix::Ones(10, 1);
  EXPECT_THROW(ratio_cv(x, x, {}, {0.1}, 5, 1), InputError);
  EXPECT_THROW(ratio_cv(x, x, {1.0}, {}, 5, 1), InputError);
}

TEST(DefaultGrids, SigmaScalesWithMedianDistance) {
  std::mt19937_64 rng(44);
  const Matrix tr = normal_column(50, 0.0, rng);
  const Matrix te = normal_column(50, 0.0, rng);
  const auto g1 = default_sigma_grid(tr, te);
  const auto g2 = default_sigma_grid(3.0 * tr, 3.0 * te);
  ASSERT_EQ(g1.size(), 6u);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g2[i], 3.0 * g1[i], 1e-12);
  EXPECT_EQ(default_gamma_grid(), (std::vector<double>{1e-3, 1e-2, 1e-1, 1.0}));
}

TEST(NormalizeMeanOne, MeanIsOne) {
  Vector w(3);
  w << 1, 2, 6;
  EXPECT_NEAR(normalize_mean_one(w).mean(), 1.0, 1e-15);
  EXPECT_EQ(normalize_mean_one(Vector::Zero(3)), Vector::Zero(3));
}

// The estimate improves with sample size on a pair with a closed-form ratio.
TEST(UlsifOracle, GaussianPairMseDecreasesWithN) {
  int improved = 0;
  double mean200 = 0.0, mean500 = 0.0, mean2000 = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double m200 = gaussian_pair_mse(200, seed, Penalty::kQuadratic);
    const double m500 = gaussian_pair_mse(500, seed, Penalty::kQuadratic);
    const double m2000 = gaussian_pair_mse(2000, seed, Penalty::kQuadratic);
    improved += (m2000 < m200);
    mean200 += m200 / 10;
    mean500 += m500 / 10;
    mean2000 += m2000 / 10;
  }
  EXPECT_GE(improved, 8);
  // Single seeds are noisy near the floor; the average falls at every step.
  EXPECT_GT(mean200, mean500);
  EXPECT_GT(mean500, mean2000);
}
