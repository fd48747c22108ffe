#include <gtest/gtest.h>

#include <cmath>

#include "edr/weighted_model.hpp"
#include "test_util.hpp"

using namespace edr;
using namespace edr::model;

namespace {

struct Problem {
  Matrix u;
  Vector y;
  Vector w;
};

Problem random_problem(Index n, Index k, std::uint64_t seed, bool classification) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.2, 2.0);
  Problem p;
  p.u = testutil::gaussian_matrix(n, k, rng);
  p.y.resize(n);
  p.w.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double s = p.u.row(i).sum() + 0.5 * nd(rng);
    p.y(i) = classification ? (s > 0 ? 1.0 : 0.0) : s;
    p.w(i) = ud(rng);
  }
  return p;
}

}  // namespace

TEST(WeightedFit, SingleSampleInterpolates) {
  Matrix u(1, 1);
  u << 1.0;
  const Vector y = Vector::Constant(1, 2.0);
  FitOptions opt;
  opt.intercept = false;
  const auto m = weighted_fit(u, y, Vector::Ones(1), 1e-12, LossSpec::regression(), opt);
  EXPECT_NEAR(m.b(0), 2.0, 1e-9);
}

TEST(WeightedFit, ZeroWeightsGiveDegenerateZeroModel) {
  const auto p = random_problem(20, 2, 1, false);
  const auto m = weighted_fit(p.u, p.y, Vector::Zero(20), 0.1, LossSpec::regression());
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.b.cwiseAbs().maxCoeff(), 0.0);
}

TEST(WeightedFit, RecoversSlopeOfLinearData) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.01);
  Matrix u = testutil::gaussian_matrix(200, 1, rng);
  Vector y(200);
  for (Index i = 0; i < 200; ++i) y(i) = 3.0 * u(i, 0) + noise(rng);
  const auto m = weighted_fit(u, y, Vector::Ones(200), 1e-6, LossSpec::regression());
  EXPECT_GE(m.b(0), 2.9);
  EXPECT_LE(m.b(0), 3.1);
}

TEST(WeightedFit, InterceptIsNotPenalized) {
  Matrix u = Matrix::Zero(10, 1);
  const Vector y = Vector::Constant(10, 5.0);
  const auto m = weighted_fit(u, y, Vector::Ones(10), 100.0, LossSpec::regression());
  EXPECT_NEAR(m.b(1), 5.0, 1e-9);
}

TEST(WeightedFit, NewtonAgreesWithClosedForm) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = random_problem(60, 3, s, false);
    FitOptions newton;
    newton.force_newton = true;
    newton.tolerance = 1e-12;
    const auto a = weighted_fit(p.u, p.y, p.w, 0.01, LossSpec::regression());
    const auto b = weighted_fit(p.u, p.y, p.w, 0.01, LossSpec::regression(), newton);
    EXPECT_LE((a.b - b.b).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(WeightedFit, LocalMinimalityCertificate) {
  std::mt19937_64 rng(9);
  for (const bool cls : {false, true}) {
    const auto p = random_problem(80, 2, 4, cls);
    const LossSpec loss = cls ? LossSpec::classification() : LossSpec::regression();
    const auto m = weighted_fit(p.u, p.y, p.w, 0.05, loss);
    const Matrix z = design_matrix(p.u, true);
    const double f0 = fit_objective(m.b, z, p.y, p.w, 0.05, loss.train, true);
    for (int t = 0; t < 20; ++t) {
      Vector d = testutil::gaussian_matrix(m.b.size(), 1, rng).col(0);
      d *= 1e-2 / d.norm();
      EXPECT_LE(f0, fit_objective(m.b + d, z, p.y, p.w, 0.05, loss.train, true) + 1e-15);
    }
    EXPECT_LE(m.gradient_norm, 1e-8);
  }
}

TEST(WeightedFit, ScalingWeightsAndRidgeTogetherKeepsArgmin) {
  const auto p = random_problem(50, 2, 5, false);
  const auto a = weighted_fit(p.u, p.y, p.w, 0.02, LossSpec::regression());
  const auto b = weighted_fit(p.u, p.y, 3.0 * p.w, 0.06, LossSpec::regression());
  EXPECT_LE((a.b - b.b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(WeightedFit, RejectsBadInputs) {
  const auto p = random_problem(10, 2, 6, false);
  EXPECT_THROW(weighted_fit(p.u, p.y.head(9), p.w, 0.1, LossSpec::regression()), InputError);
  EXPECT_THROW(weighted_fit(p.u, p.y, -p.w, 0.1, LossSpec::regression()), InputError);
  Vector y = p.y;
  y(0) = std::nan("");
  EXPECT_THROW(weighted_fit(p.u, y, p.w, 0.1, LossSpec::regression()), InputError);
}

TEST(WeightedLoss, PerfectPredictionsAreFree) {
  Matrix u(3, 1);
  u << 1, 2, 3;
  LinearModel m;
  m.b = Vector(2);
  m.b << 2.0, 1.0;
  const Vector y = (2.0 * u.col(0)).array() + 1.0;
  EXPECT_EQ(weighted_loss(m, u, y, Vector::Ones(3), LossSpec::regression()), 0.0);
}

TEST(WeightedLoss, SingleWeightedSample) {
  Matrix u(1, 1);
  u << 0.0;
  LinearModel m;
  m.b = Vector::Zero(2);
  const Vector y = Vector::Constant(1, std::sqrt(0.5));  // squared error 0.5
  EXPECT_NEAR(weighted_loss(m, u, y, Vector::Constant(1, 2.0), LossSpec::regression()), 1.0,
              1e-15);
}

TEST(WeightedLoss, MatchesDirectSummation) {
  for (const bool cls : {false, true}) {
    const auto p = random_problem(40, 3, 7, cls);
    const LossSpec loss = cls ? LossSpec::classification() : LossSpec::regression();
    const auto m = weighted_fit(p.u, p.y, p.w, 0.1, loss);
    double direct = 0.0;
    for (Index i = 0; i < 40; ++i) {
      const double s = p.u.row(i).dot(m.b.head(3)) + m.b(3);
      direct += p.w(i) * (cls ? std::log1p(std::exp(s)) - p.y(i) * s
                              : (s - p.y(i)) * (s - p.y(i)));
    }
    EXPECT_NEAR(weighted_loss(m, p.u, p.y, p.w, loss), direct / 40.0, 1e-12);
  }
}

TEST(WeightedLoss, LinearInWeights) {
  const auto p = random_problem(30, 2, 8, false);
  const auto m = weighted_fit(p.u, p.y, p.w, 0.1, LossSpec::regression());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector w1(30);
  for (Index i = 0; i < 30; ++i) w1(i) = u(rng) * p.w(i);
  const Vector w2 = p.w - w1;
  const auto L = [&](const Vector& w) { return weighted_loss(m, p.u, p.y, w, LossSpec::regression()); };
  EXPECT_NEAR(L(p.w), L(w1) + L(w2), 1e-12);
  EXPECT_NEAR(L(2.5 * p.w), 2.5 * L(p.w), 1e-12);
}

TEST(EvalLoss, Examples) {
  LinearModel m;
  m.b = Vector(2);
  m.b << 1.0, 0.0;
  Matrix u(1, 1);
  u << 0.5;
  EXPECT_NEAR(eval_loss(m, u, Vector::Constant(1, 0.7), LossSpec::regression()), 0.2, 1e-15);
  EXPECT_EQ(eval_loss(m, u, Vector::Constant(1, 0.5), LossSpec::regression()), 0.0);

  // Every holdout point on the wrong side of zero.
  LinearModel c;
  c.task = Task::kClassification;
  c.b = Vector(2);
  c.b << 1.0, 0.0;
  Matrix uc(4, 1);
  uc << 1, 2, -1, -2;
  Vector yc(4);
  yc << 0, 0, 1, 1;
  EXPECT_EQ(eval_loss(c, uc, yc, LossSpec::classification()), 1.0);
}

TEST(Auc, RankStatistic) {
  Vector s(4), y(4);
  s << 0.1, 0.4, 0.35, 0.8;
  y << 0, 0, 1, 1;
  EXPECT_DOUBLE_EQ(auc(s, y), 0.75);
  s << 1, 1, 1, 1;
  EXPECT_DOUBLE_EQ(auc(s, y), 0.5);
}

TEST(FoldAssignment, BalancedAndSeeded) {
  const auto a = fold_assignment(23, 5, 3);
  EXPECT_EQ(a, fold_assignment(23, 5, 3));
  std::vector<int> counts(5, 0);
  for (const int f : a) ++counts[static_cast<std::size_t>(f)];
  for (const int c : counts) EXPECT_TRUE(c == 4 || c == 5);
}

TEST(IwcvSelect, SingleCandidate) {
  const auto p = random_problem(30, 2, 9, false);
  const std::vector<IwcvCandidate> c{{p.u, p.w, 0.1, 0.0}};
  EXPECT_EQ(iwcv_select(c, p.y, LossSpec::regression(), 5, 1).best, 0u);
}

TEST(IwcvSelect, DominatingCandidateWins) {
  // Same weights; one candidate sees the true signal, the other noise.
  const auto p = random_problem(60, 2, 10, false);
  std::mt19937_64 rng(3);
  const Matrix junk = testutil::gaussian_matrix(60, 2, rng);
  const std::vector<IwcvCandidate> c{{junk, p.w, 0.1, 0.0}, {p.u, p.w, 0.1, 1.0}};
  const auto folds = fold_assignment(60, 5, 2);
  const auto r = iwcv_select(c, p.y, LossSpec::regression(), 5, 2);
  EXPECT_EQ(r.best, 1u);
  EXPECT_LT(r.scores[1], r.scores[0]);
  EXPECT_DOUBLE_EQ(r.scores[1], iwcv_score(c[1], p.y, LossSpec::regression(), folds));
}

TEST(IwcvSelect, TiesGoToTheSmallerLambda) {
  const auto p = random_problem(30, 2, 11, false);
  const std::vector<IwcvCandidate> c{{p.u, p.w, 0.1, 2.0}, {p.u, p.w, 0.1, 1.0}};
  EXPECT_EQ(iwcv_select(c, p.y, LossSpec::regression(), 5, 1).best, 1u);
}

TEST(IwcvScore, ZeroWeightFoldFallsBackToUnweighted) {
  const auto p = random_problem(20, 1, 12, false);
  const auto folds = fold_assignment(20, 2, 1);
  Vector w = Vector::Zero(20);
  for (Index i = 0; i < 20; ++i)
    if (folds[static_cast<std::size_t>(i)] == 0) w(i) = 1.0;
  EXPECT_TRUE(std::isfinite(iwcv_score({p.u, w, 0.1, 0.0}, p.y, LossSpec::regression(), folds)));
}

TEST(SelectRidge, PrefersSmallRidgeOnCleanLinearData) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0.0, 0.01);
  const Matrix u = testutil::gaussian_matrix(100, 2, rng);
  Vector y = 2.0 * u.col(0) - u.col(1);
  for (Index i = 0; i < 100; ++i) y(i) += noise(rng);
  const double c = select_ridge(u, Vector::Ones(100), y, LossSpec::regression(),
                                default_ridge_grid(), 5, 1);
  EXPECT_LE(c, 1e-2);
}
