#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "edr/baselines.hpp"
#include "edr/shift_induction.hpp"
#include "test_util.hpp"

using namespace edr;
using namespace edr::shift;

namespace {

struct Table {
  Matrix x;
  Vector y;
};

// y = sin(v^T x) + small noise, Gaussian covariates.
Table single_index(Index n, Index d, const Vector& v, std::uint64_t seed, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  Table t{testutil::gaussian_matrix(n, d, rng), Vector(n)};
  std::normal_distribution<double> e(0.0, noise);
  for (Index i = 0; i < n; ++i) t.y(i) = std::sin(t.x.row(i).dot(v)) + e(rng);
  return t;
}

double mean_of(const Vector& v) { return v.mean(); }

double full_iw_ess_fraction(const TrainTestPair& d) {
  baselines::BaselineSpec s;
  s.kind = baselines::Kind::kIW;
  s.seed = 3;
  const auto fit = baselines::run_baseline(s, d);
  return fit.ess / static_cast<double>(d.x_train.rows());
}

}  // namespace

TEST(Silverman, MatchesFormula) {
  Vector t = Vector::LinSpaced(101, -1.0, 1.0);
  const double sd = std::sqrt((t.array() - t.mean()).square().sum() / 100.0);
  const double iqr = 1.0;  // quartiles at -0.5 and 0.5
  EXPECT_NEAR(silverman_bandwidth(t), 0.9 * std::min(sd, iqr / 1.34) * std::pow(101.0, -0.2), 1e-12);
}

TEST(NadarayaWatson, PerfectOnConstantResponse) {
  const Vector t = Vector::LinSpaced(30, 0.0, 1.0);
  EXPECT_NEAR(nadaraya_watson_error(t, Vector::Constant(30, 2.0), 0.1), 0.0, 1e-24);
}

TEST(PickPredictiveVector, TrueDirectionIsChosenAmongCandidates) {
  Vector beta(4);
  beta << 1.0, -1.0, 0.5, 0.0;
  std::mt19937_64 rng(1);
  const Matrix x = testutil::gaussian_matrix(300, 4, rng);
  const Vector y = x * beta;
  ShiftSpec spec;
  spec.standardize = false;
  Matrix cands = testutil::gaussian_matrix(4, 20, rng);
  cands.col(13) = 3.0 * beta;
  const auto c = pick_predictive_vector(x, y, cands, spec);
  EXPECT_EQ(c.index, 13u);
  EXPECT_LE((c.vector - beta.normalized()).norm(), 1e-12);
  EXPECT_EQ(c.errors.size(), 20u);
}

TEST(PickPredictiveVector, DeterministicPerSeed) {
  std::mt19937_64 rng(2);
  const Matrix x = testutil::gaussian_matrix(100, 5, rng);
  const Vector y = testutil::gaussian_matrix(100, 1, rng).col(0);
  ShiftSpec spec;
  spec.seed = 17;
  const auto a = pick_predictive_vector(x, y, spec);
  const auto b = pick_predictive_vector(x, y, spec);
  EXPECT_EQ(a.vector, b.vector);
  EXPECT_EQ(a.index, b.index);
  EXPECT_DOUBLE_EQ(a.vector.norm(), 1.0);
}

TEST(PickPredictiveVector, BeatsTheMedianCandidateOnSingleIndexData) {
  Vector v(6);
  v << 1.0, 0.5, 0.0, 0.0, -1.0, 0.0;
  v.normalize();
  const auto t = single_index(500, 6, v, 3);
  ShiftSpec spec;
  spec.standardize = false;
  spec.seed = 4;
  spec.n_candidate_vectors = 100;
  const auto c = pick_predictive_vector(t.x, t.y, spec);

  std::vector<double> errs = c.errors;
  std::nth_element(errs.begin(), errs.begin() + 50, errs.end());
  EXPECT_LT(c.errors[c.index], errs[50]);

  // Direct check against random unit directions.
  std::mt19937_64 other(99);
  Matrix rand = testutil::gaussian_matrix(6, 101, other);
  std::vector<double> cosines;
  for (Index j = 0; j < rand.cols(); ++j) cosines.push_back(std::abs(rand.col(j).normalized().dot(v)));
  std::nth_element(cosines.begin(), cosines.begin() + 50, cosines.end());
  EXPECT_GT(std::abs(c.vector.dot(v)), cosines[50]);
}

TEST(InduceShift, FlatAcceptanceLeavesMeansAligned) {
  Vector v = Vector::Unit(3, 0);
  const auto t = single_index(2000, 3, v, 5);
  ShiftSpec spec;
  spec.c = 1e8;
  spec.seed = 6;
  const auto s = induce_shift(t.x, t.y, v, spec);
  const double mtr = mean_of(s.data.x_train * s.vector);
  const double mte = mean_of(s.data.x_test * s.vector);
  EXPECT_LT(std::abs(mtr - mte), 0.1 * s.sigma);
  EXPECT_GE(s.acceptance.minCoeff(), 0.99);
}

TEST(InduceShift, AlphaOneMovesTestToTheTop) {
  Vector v = Vector::Unit(3, 1);
  const auto t = single_index(2000, 3, v, 7);
  ShiftSpec spec;
  spec.alpha = 1.0;
  spec.c = 0.5;
  spec.seed = 8;
  const auto s = induce_shift(t.x, t.y, v, spec);
  const Vector ptr = s.data.x_train * s.vector;
  const Vector pte = s.data.x_test * s.vector;
  const double var_tr = (ptr.array() - ptr.mean()).square().sum() / (ptr.size() - 1.0);
  const double var_te = (pte.array() - pte.mean()).square().sum() / (pte.size() - 1.0);
  const double z = (pte.mean() - ptr.mean()) /
                   std::sqrt(var_tr / static_cast<double>(ptr.size()) +
                             var_te / static_cast<double>(pte.size()));
  EXPECT_GT(z, 2.33);  // one-sided p < 0.01
}

TEST(InduceShift, ExtremeAlphaAndSmallCShrinkTheEffectiveSampleSize) {
  // Bounded covariates, as in real tables; Gaussian tails leave almost nothing near the max.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.05);
  Matrix x(1200, 5);
  Vector y(1200);
  for (Index i = 0; i < 1200; ++i) {
    for (Index j = 0; j < 5; ++j) x(i, j) = u(rng);
    y(i) = std::sin(2.0 * x(i, 0)) + e(rng);
  }
  const Vector v = Vector::Unit(5, 0);
  for (const double alpha : {0.0, 1.0}) {
    ShiftSpec spec;
    spec.alpha = alpha;
    spec.c = 0.1;
    spec.seed = 10;
    const auto s = induce_shift(x, y, v, spec);
    EXPECT_LT(full_iw_ess_fraction(s.data), 0.5) << "alpha " << alpha;
  }
}

TEST(InduceShift, AcceptanceInUnitIntervalAndPeakedAtCenter) {
  Vector v = Vector::Unit(4, 2);
  const auto t = single_index(600, 4, v, 11);
  ShiftSpec spec;
  spec.alpha = 0.3;
  spec.seed = 12;
  const auto s = induce_shift(t.x, t.y, v, spec);
  EXPECT_GE(s.acceptance.minCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(s.acceptance.maxCoeff(), 1.0);
  EXPECT_DOUBLE_EQ(s.center, s.t0 + 0.3 * (s.t1 - s.t0));
  Index peak = 0;
  s.acceptance.maxCoeff(&peak);
  const double closest = s.projections(s.remainder_rows[static_cast<std::size_t>(peak)]);
  for (const Index r : s.remainder_rows)
    EXPECT_GE(std::abs(s.projections(r) - s.center) + 1e-12, std::abs(closest - s.center));
}

TEST(InduceShift, NoLeakageAndReproducible) {
  Vector v = Vector::Unit(4, 0);
  const auto t = single_index(800, 4, v, 13);
  ShiftSpec spec;
  spec.seed = 14;
  const auto a = induce_shift(t.x, t.y, v, spec);
  const auto b = induce_shift(t.x, t.y, v, spec);
  EXPECT_EQ(a.data.train_rows, b.data.train_rows);
  EXPECT_EQ(a.data.test_rows, b.data.test_rows);
  EXPECT_EQ(a.data.holdout_rows, b.data.holdout_rows);

  std::set<Index> train(a.data.train_rows.begin(), a.data.train_rows.end());
  std::set<Index> test(a.data.test_rows.begin(), a.data.test_rows.end());
  for (const Index h : a.data.holdout_rows) {
    EXPECT_FALSE(train.count(h));
    EXPECT_FALSE(test.count(h));
  }
  for (const Index r : a.data.test_rows) EXPECT_FALSE(train.count(r));
  EXPECT_EQ(static_cast<Index>(a.data.train_rows.size()), 400);
}

TEST(InduceShift, TooFewAcceptedPointsIsAnError) {
  Vector v = Vector::Unit(2, 0);
  const auto t = single_index(40, 2, v, 15);
  ShiftSpec spec;
  spec.alpha = 1.0;
  spec.c = 1e-6;
  EXPECT_THROW(induce_shift(t.x, t.y, v, spec), InputError);
}

TEST(ShiftSpec, Validation) {
  ShiftSpec s;
  s.alpha = 1.5;
  EXPECT_THROW(s.validate(), InputError);
  s = ShiftSpec{};
  s.c = 0.0;
  EXPECT_THROW(s.validate(), InputError);
  s = ShiftSpec{};
  s.train_fraction = 1.0;
  EXPECT_THROW(s.validate(), InputError);
}

TEST(SubgroupSplit, WholeTableAsSubgroupHasNoShift) {
  const auto t = single_index(300, 3, Vector::Unit(3, 0), 16);
  const auto d = subgroup_split(t.x, t.y, Vector::Ones(300), {1.0 / 3.0, 1});
  EXPECT_EQ(d.train_rows, d.test_rows);
  EXPECT_EQ(d.x_holdout.rows(), 100);
  EXPECT_GT(full_iw_ess_fraction(d), 0.8);
}

TEST(SubgroupSplit, IndependentGroupLeavesDistributionsMatched) {
  const auto t = single_index(2000, 3, Vector::Unit(3, 0), 17);
  std::mt19937_64 rng(18);
  std::bernoulli_distribution coin(0.4);
  Vector g(2000);
  for (Index i = 0; i < 2000; ++i) g(i) = coin(rng) ? 1.0 : 0.0;
  const auto d = subgroup_split(t.x, t.y, g, {1.0 / 3.0, 2});
  for (Index j = 0; j < 3; ++j)
    EXPECT_GT(testutil::ks_two_sample_p(testutil::to_std(d.x_train.col(j)),
                                       testutil::to_std(d.x_test.col(j))),
              0.01);
}

TEST(SubgroupSplit, MedianSplitShowsUpAsReducedEss) {
  const auto t = single_index(600, 3, Vector::Unit(3, 1), 19);
  Vector g(600);
  const double med = [&] {
    std::vector<double> c = testutil::to_std(t.x.col(0));
    std::nth_element(c.begin(), c.begin() + 300, c.end());
    return c[300];
  }();
  for (Index i = 0; i < 600; ++i) g(i) = t.x(i, 0) > med ? 1.0 : 0.0;
  const auto d = subgroup_split(t.x, t.y, g, {1.0 / 3.0, 3});
  EXPECT_LT(full_iw_ess_fraction(d), 1.0);
  EXPECT_GT(d.x_test.leftCols(1).minCoeff(), med);
}

TEST(SubgroupSplit, HoldoutNeverTrainsOrTests) {
  const auto t = single_index(200, 2, Vector::Unit(2, 0), 20);
  Vector g(200);
  for (Index i = 0; i < 200; ++i) g(i) = i % 3 == 0 ? 1.0 : 0.0;
  const auto d = subgroup_split(t.x, t.y, g, {0.25, 4});
  std::set<Index> train(d.train_rows.begin(), d.train_rows.end());
  std::set<Index> test(d.test_rows.begin(), d.test_rows.end());
  for (const Index h : d.holdout_rows) {
    EXPECT_FALSE(train.count(h));
    EXPECT_FALSE(test.count(h));
    EXPECT_EQ(h % 3, 0);
  }
  EXPECT_EQ(d.train_rows.size() + d.holdout_rows.size(), 200u);
  EXPECT_EQ(subgroup_split(t.x, t.y, g, {0.25, 4}).holdout_rows, d.holdout_rows);
}

TEST(SubgroupSplit, SmallSubgroupIsAnError) {
  const auto t = single_index(50, 2, Vector::Unit(2, 0), 21);
  Vector g = Vector::Zero(50);
  g.head(9).setOnes();
  EXPECT_THROW(subgroup_split(t.x, t.y, g, {}), InputError);
}
