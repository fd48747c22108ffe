#include "edr/shift_induction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace edr::shift {

namespace {

constexpr std::uint64_t kCandidateStream = 0xca;
constexpr std::uint64_t kTrainStream = 0x7a;
constexpr std::uint64_t kAcceptStream = 0xac;
constexpr std::uint64_t kSubgroupStream = 0x5b;

// Kernel contributions beyond this many bandwidths are below 1e-13.
constexpr double kWindow = 8.0;

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<Index> permutation(Index n, std::uint64_t seed) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

Matrix take_rows(const Matrix& x, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(rows[r]);
  return out;
}

Vector take(const Vector& y, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = y(rows[r]);
  return out;
}

void check_table(const Matrix& x, const Vector& y, const char* who) {
  require(x.rows() == y.size(), std::string(who) + ": X and y row counts differ");
  require(x.rows() > 0 && x.cols() > 0, std::string(who) + ": empty table");
  require(x.allFinite() && y.allFinite(), std::string(who) + ": non-finite values");
}

}  // namespace

void ShiftSpec::validate() const {
  require(n_candidate_vectors >= 1, "ShiftSpec: need at least one candidate vector");
  require(alpha >= 0.0 && alpha <= 1.0, "ShiftSpec: alpha must lie in [0, 1]");
  require(c > 0.0, "ShiftSpec: c must be positive");
  require(train_fraction > 0.0 && train_fraction < 1.0, "ShiftSpec: train_fraction in (0, 1)");
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0,
          "ShiftSpec: holdout_fraction in (0, 1)");
  require(bandwidth_scale > 0.0, "ShiftSpec: bandwidth_scale must be positive");
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - s.mean;
  s.scale = (centered.colwise().squaredNorm() / static_cast<double>(std::max<Index>(x.rows() - 1, 1)))
                .cwiseSqrt();
  for (Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
  return s;
}

Standardizer Standardizer::identity(Index d) {
  return {Eigen::RowVectorXd::Zero(d), Eigen::RowVectorXd::Ones(d)};
}

Matrix Standardizer::apply(const Matrix& x) const {
  require(x.cols() == mean.size(), "Standardizer: dimension mismatch");
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

Standardizer standardizer_for(const Matrix& x, const ShiftSpec& spec) {
  return spec.standardize ? Standardizer::fit(x) : Standardizer::identity(x.cols());
}

double silverman_bandwidth(const Vector& t) {
  const Index n = t.size();
  require(n >= 2, "silverman_bandwidth: need two points");
  std::vector<double> v(t.data(), t.data() + n);
  std::sort(v.begin(), v.end());
  const double mean = t.mean();
  const double sd = std::sqrt((t.array() - mean).square().sum() / static_cast<double>(n - 1));
  const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

double nadaraya_watson_error(const Vector& t, const Vector& y, double bandwidth) {
  const Index n = t.size();
  require(y.size() == n && n > 0, "nadaraya_watson_error: length mismatch");
  require(bandwidth > 0.0, "nadaraya_watson_error: bandwidth must be positive");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return t(a) < t(b); });
  std::vector<double> ts(order.size()), ys(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    ts[r] = t(order[r]);
    ys[r] = y(order[r]);
  }
  const double reach = kWindow * bandwidth;
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  double sse = 0.0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    while (ts[i] - ts[lo] > reach) ++lo;
    while (hi < ts.size() && ts[hi] - ts[i] <= reach) ++hi;
    double num = 0.0, den = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
      const double d = ts[j] - ts[i];
      const double k = std::exp(-d * d * inv);
      num += k * ys[j];
      den += k;
    }
    const double r = ys[i] - num / den;
    sse += r * r;
  }
  return sse / static_cast<double>(n);
}

VectorChoice pick_predictive_vector(const Matrix& x, const Vector& y, const Matrix& candidates,
                                    const ShiftSpec& spec) {
  check_table(x, y, "pick_predictive_vector");
  spec.validate();
  require(x.rows() >= 20, "pick_predictive_vector: need at least 20 rows");
  require(candidates.rows() == x.cols() && candidates.cols() >= 1,
          "pick_predictive_vector: candidate shape mismatch");
  const Matrix z = standardizer_for(x, spec).apply(x);

  VectorChoice out;
  double best = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < candidates.cols(); ++c) {
    const double norm = candidates.col(c).norm();
    require(norm > 0.0, "pick_predictive_vector: zero candidate");
    const Vector v = candidates.col(c) / norm;
    const Vector t = z * v;
    const double h = spec.bandwidth_scale * silverman_bandwidth(t);
    const double err = h > 0.0 ? nadaraya_watson_error(t, y, h)
                               : std::numeric_limits<double>::infinity();
    out.errors.push_back(err);
    if (err < best) {
      best = err;
      out.index = static_cast<std::size_t>(c);
      out.vector = v;
    }
  }
  if (out.vector.size() == 0)
    throw InputError("pick_predictive_vector: every candidate has a degenerate projection");
  return out;
}

VectorChoice pick_predictive_vector(const Matrix& x, const Vector& y, const ShiftSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, kCandidateStream));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix candidates(x.cols(), spec.n_candidate_vectors);
  for (Index c = 0; c < candidates.cols(); ++c)
    for (Index j = 0; j < candidates.rows(); ++j) candidates(j, c) = normal(rng);
  return pick_predictive_vector(x, y, candidates, spec);
}

InducedShift induce_shift(const Matrix& x, const Vector& y, const Vector& vector,
                          const ShiftSpec& spec) {
  check_table(x, y, "induce_shift");
  spec.validate();
  require(vector.size() == x.cols(), "induce_shift: vector dimension mismatch");
  require(vector.norm() > 0.0, "induce_shift: zero vector");
  const Index n = x.rows();
  const auto n_train = static_cast<Index>(std::llround(spec.train_fraction * static_cast<double>(n)));
  require(n_train >= 1 && n_train < n, "induce_shift: training sample would be empty or everything");

  InducedShift out;
  out.vector = vector / vector.norm();
  out.projections = standardizer_for(x, spec).apply(x) * out.vector;
  out.t0 = out.projections.minCoeff();
  out.t1 = out.projections.maxCoeff();
  out.center = out.t0 + spec.alpha * (out.t1 - out.t0);

  const auto perm = permutation(n, derive_seed(spec.seed, kTrainStream));
  std::vector<Index> train(perm.begin(), perm.begin() + n_train);
  out.remainder_rows.assign(perm.begin() + n_train, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(out.remainder_rows.begin(), out.remainder_rows.end());

  const Vector t_rem = take(out.projections, out.remainder_rows);
  const double m = t_rem.mean();
  out.sigma = t_rem.size() > 1 ? std::sqrt((t_rem.array() - m).square().sum() /
                                           static_cast<double>(t_rem.size() - 1))
                               : 0.0;
  require(out.sigma > 0.0, "induce_shift: projections of the remainder are constant");

  // Log-density up to a constant, shifted so the largest is 0.
  const double var = spec.c * out.sigma * out.sigma;
  Vector logd = -(t_rem.array() - out.center).square() / (2.0 * var);
  logd.array() -= logd.maxCoeff();
  out.acceptance = logd.array().exp();

  std::mt19937_64 rng(derive_seed(spec.seed, kAcceptStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Index> accepted;
  for (Index r = 0; r < t_rem.size(); ++r)
    if (unit(rng) < out.acceptance(r)) accepted.push_back(out.remainder_rows[static_cast<std::size_t>(r)]);
  if (accepted.size() < 10)
    throw InputError("induce_shift: only " + std::to_string(accepted.size()) +
                     " test points accepted; use a larger c or an alpha away from 0/1");

  std::shuffle(accepted.begin(), accepted.end(), rng);
  const auto n_hold = static_cast<std::size_t>(
      std::floor(spec.holdout_fraction * static_cast<double>(accepted.size())));
  std::vector<Index> hold(accepted.end() - static_cast<std::ptrdiff_t>(n_hold), accepted.end());
  std::vector<Index> test(accepted.begin(), accepted.end() - static_cast<std::ptrdiff_t>(n_hold));
  std::sort(hold.begin(), hold.end());
  std::sort(test.begin(), test.end());

  auto& d = out.data;
  d.generator = "induced";
  d.seed = spec.seed;
  d.x_train = take_rows(x, train);
  d.y_train = take(y, train);
  d.x_test = take_rows(x, test);
  d.x_holdout = take_rows(x, hold);
  d.y_holdout = take(y, hold);
  d.train_rows = std::move(train);
  d.test_rows = std::move(test);
  d.holdout_rows = std::move(hold);
  d.validate();
  return out;
}

TrainTestPair subgroup_split(const Matrix& x, const Vector& y, const Vector& group,
                             const SubgroupSpec& spec) {
  check_table(x, y, "subgroup_split");
  require(group.size() == x.rows(), "subgroup_split: group length mismatch");
  require(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0,
          "subgroup_split: holdout_fraction in (0, 1)");
  std::vector<Index> members;
  for (Index i = 0; i < group.size(); ++i) {
    require(group(i) == 0.0 || group(i) == 1.0, "subgroup_split: group must be 0/1");
    if (group(i) == 1.0) members.push_back(i);
  }
  if (members.size() < 10)
    throw InputError("subgroup_split: subgroup has " + std::to_string(members.size()) +
                     " rows; need at least 10");

  std::mt19937_64 rng(derive_seed(spec.seed, kSubgroupStream));
  std::shuffle(members.begin(), members.end(), rng);
  const auto n_hold = static_cast<std::size_t>(
      std::floor(spec.holdout_fraction * static_cast<double>(members.size())));
  std::vector<Index> hold(members.end() - static_cast<std::ptrdiff_t>(n_hold), members.end());
  std::vector<Index> test(members.begin(), members.end() - static_cast<std::ptrdiff_t>(n_hold));
  std::sort(hold.begin(), hold.end());
  std::sort(test.begin(), test.end());

  std::vector<bool> held(static_cast<std::size_t>(x.rows()), false);
  for (Index i : hold) held[static_cast<std::size_t>(i)] = true;
  std::vector<Index> train;
  for (Index i = 0; i < x.rows(); ++i)
    if (!held[static_cast<std::size_t>(i)]) train.push_back(i);

  TrainTestPair d;
  d.generator = "subgroup";
  d.seed = spec.seed;
  d.x_train = take_rows(x, train);
  d.y_train = take(y, train);
  d.x_test = take_rows(x, test);
  d.x_holdout = take_rows(x, hold);
  d.y_holdout = take(y, hold);
  d.train_rows = std::move(train);
  d.test_rows = std::move(test);
  d.holdout_rows = std::move(hold);
  d.validate();
  return d;
}

nlohmann::json to_json(const ShiftSpec& spec) {
  return {{"n_candidate_vectors", spec.n_candidate_vectors},
          {"alpha", spec.alpha},
          {"c", spec.c},
          {"train_fraction", spec.train_fraction},
          {"holdout_fraction", spec.holdout_fraction},
          {"standardize", spec.standardize},
          {"bandwidth_rule", "silverman"},
          {"bandwidth_scale", spec.bandwidth_scale},
          {"seed", spec.seed}};
}

nlohmann::json manifest(const InducedShift& shift, const ShiftSpec& spec) {
  const auto& d = shift.data;
  return {{"mode", "induce"},
          {"spec", to_json(spec)},
          {"vector", std::vector<double>(shift.vector.data(), shift.vector.data() + shift.vector.size())},
          {"t0", shift.t0},
          {"t1", shift.t1},
          {"sigma", shift.sigma},
          {"center", shift.center},
          {"seed", spec.seed},
          {"rows", {{"train", d.train_rows}, {"test", d.test_rows}, {"holdout", d.holdout_rows}}}};
}

nlohmann::json manifest(const TrainTestPair& split, const SubgroupSpec& spec) {
  return {{"mode", "subgroup"},
          {"holdout_fraction", spec.holdout_fraction},
          {"seed", spec.seed},
          {"rows",
           {{"train", split.train_rows}, {"test", split.test_rows}, {"holdout", split.holdout_rows}}}};
}

}  // namespace edr::shift
