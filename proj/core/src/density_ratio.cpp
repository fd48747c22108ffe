#include "edr/density_ratio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace edr::ratio {

namespace {

void check_points(const Matrix& points, Index dim, const char* what) {
  if (points.cols() != dim)
    throw InputError(std::string(what) + ": dimension mismatch (got " +
                     std::to_string(points.cols()) + ", expected " +
                     std::to_string(dim) + ")");
  if (!points.allFinite())
    throw InputError(std::string(what) + ": non-finite input");
}

std::vector<Index> permutation(Index n, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

// ||p_i - c_m||^2 for every point/center pair.
Matrix squared_distances(const Matrix& points, const Matrix& centers) {
  Matrix d2(points.rows(), centers.rows());
  for (Index m = 0; m < centers.rows(); ++m)
    d2.col(m) = (points.rowwise() - centers.row(m)).rowwise().squaredNorm();
  return d2;
}

Matrix gaussian_of(const Matrix& d2, double sigma) {
  return (d2.array() * (-1.0 / (2.0 * sigma * sigma))).exp().matrix();
}

Matrix select_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

void KernelBasis::validate() const {
  require(centers.rows() > 0, "KernelBasis: no centers");
  require(sigma > 0.0 && std::isfinite(sigma),
          "KernelBasis: bandwidth must be positive");
  require(centers.allFinite(), "KernelBasis: non-finite center");
}

Vector kernel_features(const Vector& x, const KernelBasis& basis) {
  basis.validate();
  if (x.size() != basis.dimension())
    throw InputError("kernel_features: dimension mismatch");
  if (!x.allFinite()) throw InputError("kernel_features: non-finite input");
  const double inv = 1.0 / (2.0 * basis.sigma * basis.sigma);
  Vector phi(basis.size());
  for (Index m = 0; m < basis.size(); ++m)
    phi(m) = std::exp(-(x.transpose() - basis.centers.row(m)).squaredNorm() *
                      inv);
  return phi;
}

Matrix kernel_feature_matrix(const Matrix& points, const KernelBasis& basis) {
  basis.validate();
  check_points(points, basis.dimension(), "kernel_feature_matrix");
  return gaussian_of(squared_distances(points, basis.centers), basis.sigma);
}

Vector solve_coefficients(const Matrix& h_matrix, const Vector& h_vector,
                          double gamma, Penalty penalty) {
  const Index m = h_matrix.rows();
  require(h_matrix.cols() == m && h_vector.size() == m,
          "solve_coefficients: shape mismatch");
  require(gamma >= 0.0, "solve_coefficients: gamma must be nonnegative");
  require(h_matrix.allFinite() && h_vector.allFinite(),
          "solve_coefficients: non-finite input");
  const double ridge = kRelativeRidge * h_matrix.trace() / static_cast<double>(m);
  const double shift = ridge + (penalty == Penalty::kQuadratic ? gamma : 0.0);
  Matrix system = h_matrix;
  system.diagonal().array() += shift;
  const Vector rhs = penalty == Penalty::kLinear
                         ? Vector(h_vector.array() - gamma)
                         : h_vector;
  linalg::SpdSolver solver(system);
  return solver.solve(rhs);
}

UlsifSystem build_system(const Matrix& proj_train, const Matrix& proj_test,
                         const KernelBasis& basis, double gamma,
                         Penalty penalty) {
  require(proj_train.rows() > 0 && proj_test.rows() > 0,
          "ulsif: train and test samples must be nonempty");
  require(gamma >= 0.0 && std::isfinite(gamma),
          "ulsif: gamma must be nonnegative");
  UlsifSystem sys;
  sys.phi_train = kernel_feature_matrix(proj_train, basis);
  sys.phi_test = kernel_feature_matrix(proj_test, basis);
  const Index m = basis.size();
  const double n_tr = static_cast<double>(proj_train.rows());
  const double n_te = static_cast<double>(proj_test.rows());

  sys.h_matrix = Matrix::Zero(m, m);
  sys.h_matrix.selfadjointView<Eigen::Lower>().rankUpdate(
      sys.phi_train.transpose(), 1.0 / n_tr);
  sys.h_matrix = sys.h_matrix.selfadjointView<Eigen::Lower>();
  sys.h_vector = sys.phi_test.colwise().sum().transpose() / n_te;

  sys.gamma = gamma;
  sys.penalty = penalty;
  sys.ridge = kRelativeRidge * sys.h_matrix.trace() / static_cast<double>(m);
  sys.rhs = penalty == Penalty::kLinear ? Vector(sys.h_vector.array() - gamma)
                                        : sys.h_vector;
  Matrix system = sys.h_matrix;
  system.diagonal().array() += sys.diagonal_shift();
  sys.solver.compute(system);
  sys.alpha = sys.solver.solve(sys.rhs);
  if (!sys.alpha.allFinite())
    throw NumericalError("ulsif: non-finite coefficients");
  return sys;
}

std::vector<Index> choose_center_rows(Index n_test, Index n_centers,
                                      std::uint64_t seed) {
  require(n_test > 0, "choose_center_rows: empty test sample");
  require(n_centers > 0, "choose_center_rows: need at least one center");
  const Index m = std::min(n_centers, n_test);
  std::vector<Index> perm = permutation(n_test, seed);
  perm.resize(static_cast<std::size_t>(m));
  std::sort(perm.begin(), perm.end());
  return perm;
}

RatioModel ulsif_fit_with_centers(const Matrix& proj_train,
                                  const Matrix& proj_test,
                                  const std::vector<Index>& center_rows,
                                  double gamma, double sigma,
                                  Penalty penalty) {
  require(!center_rows.empty(), "ulsif_fit: no centers");
  require(proj_train.cols() == proj_test.cols(),
          "ulsif_fit: train/test dimension mismatch");
  check_points(proj_train, proj_train.cols(), "ulsif_fit(train)");
  check_points(proj_test, proj_test.cols(), "ulsif_fit(test)");
  for (Index r : center_rows)
    require(r >= 0 && r < proj_test.rows(), "ulsif_fit: center row out of range");

  RatioModel model;
  model.basis.centers = select_rows(proj_test, center_rows);
  model.basis.sigma = sigma;
  model.basis.validate();
  UlsifSystem sys = build_system(proj_train, proj_test, model.basis, gamma, penalty);
  model.alpha = std::move(sys.alpha);
  model.gamma = gamma;
  model.penalty = penalty;
  model.ridge = sys.ridge;
  return model;
}

RatioModel ulsif_fit(const Matrix& proj_train, const Matrix& proj_test,
                     double gamma, double sigma, Index n_centers,
                     std::uint64_t seed, Penalty penalty) {
  require(n_centers >= 1, "ulsif_fit: n_centers must be positive");
  require(n_centers <= proj_test.rows(),
          "ulsif_fit: n_centers exceeds the number of test points");
  return ulsif_fit_with_centers(
      proj_train, proj_test, choose_center_rows(proj_test.rows(), n_centers, seed),
      gamma, sigma, penalty);
}

Vector raw_ratio(const RatioModel& model, const Matrix& points) {
  require(model.alpha.size() == model.basis.size(),
          "raw_ratio: alpha length does not match basis");
  return kernel_feature_matrix(points, model.basis) * model.alpha;
}

WeightVector predict_weights(const RatioModel& model, const Matrix& points) {
  WeightVector out;
  out.w = raw_ratio(model, points).cwiseMax(0.0);
  out.ess = effective_sample_size(out.w);
  return out;
}

double effective_sample_size(const Vector& w) {
  if ((w.array() < 0.0).any())
    throw InputError("effective_sample_size: negative weight");
  if (!w.allFinite()) throw InputError("effective_sample_size: non-finite weight");
  const double sq = w.squaredNorm();
  if (sq == 0.0) return 0.0;
  const double s = w.sum();
  return s * s / sq;
}

double ulsif_criterion(const RatioModel& model, const Matrix& proj_train,
                       const Matrix& proj_test) {
  double value = 0.0;
  if (proj_train.rows() > 0)
    value += 0.5 * raw_ratio(model, proj_train).squaredNorm() /
             static_cast<double>(proj_train.rows());
  if (proj_test.rows() > 0)
    value -= raw_ratio(model, proj_test).mean();
  return value;
}

RatioCvResult ratio_cv(const Matrix& proj_train, const Matrix& proj_test,
                       const std::vector<double>& sigma_grid,
                       const std::vector<double>& gamma_grid, int folds,
                       std::uint64_t seed, Penalty penalty,
                       Index max_centers) {
  require(!sigma_grid.empty(), "ratio_cv: empty sigma grid");
  require(!gamma_grid.empty(), "ratio_cv: empty gamma grid");
  require(folds >= 2, "ratio_cv: need at least two folds");
  require(proj_train.rows() >= 2 && proj_test.rows() >= 2,
          "ratio_cv: need at least two train and two test points");
  require(proj_train.cols() == proj_test.cols(), "ratio_cv: dimension mismatch");
  check_points(proj_train, proj_train.cols(), "ratio_cv(train)");
  check_points(proj_test, proj_test.cols(), "ratio_cv(test)");
  for (double s : sigma_grid) require(s > 0.0, "ratio_cv: sigma must be positive");
  for (double g : gamma_grid) require(g >= 0.0, "ratio_cv: gamma must be nonnegative");

  const Index n_tr = proj_train.rows();
  const Index n_te = proj_test.rows();
  const Index folds_tr = std::min<Index>(folds, n_tr);
  const Index folds_te = std::min<Index>(folds, n_te);
  const auto perm_tr = permutation(n_tr, derive_seed(seed, 1));
  const auto perm_te = permutation(n_te, derive_seed(seed, 2));

  const Index n_sigma = static_cast<Index>(sigma_grid.size());
  const Index n_gamma = static_cast<Index>(gamma_grid.size());
  Matrix scores = Matrix::Zero(n_sigma, n_gamma);

  for (int f = 0; f < folds; ++f) {
    std::vector<Index> fit_tr, hold_tr, fit_te, hold_te;
    for (Index i = 0; i < n_tr; ++i)
      (i % folds_tr == f ? hold_tr : fit_tr).push_back(perm_tr[static_cast<std::size_t>(i)]);
    for (Index i = 0; i < n_te; ++i)
      (i % folds_te == f ? hold_te : fit_te).push_back(perm_te[static_cast<std::size_t>(i)]);
    if (hold_tr.empty() && hold_te.empty()) continue;

    const Matrix x_fit_tr = select_rows(proj_train, fit_tr);
    const Matrix x_fit_te = select_rows(proj_test, fit_te);
    const Matrix x_hold_tr = select_rows(proj_train, hold_tr);
    const Matrix x_hold_te = select_rows(proj_test, hold_te);
    const auto centers = choose_center_rows(x_fit_te.rows(), max_centers,
                                            derive_seed(seed, 3, static_cast<std::uint64_t>(f)));
    const Matrix c = select_rows(x_fit_te, centers);
    const Index m = c.rows();
    const Matrix d2_fit_tr = squared_distances(x_fit_tr, c);
    const Matrix d2_fit_te = squared_distances(x_fit_te, c);
    const Matrix d2_hold_tr = squared_distances(x_hold_tr, c);
    const Matrix d2_hold_te = squared_distances(x_hold_te, c);

    for (Index si = 0; si < n_sigma; ++si) {
      const double sigma = sigma_grid[static_cast<std::size_t>(si)];
      const Matrix phi_tr = gaussian_of(d2_fit_tr, sigma);
      const Matrix phi_te = gaussian_of(d2_fit_te, sigma);
      Matrix h_matrix = Matrix::Zero(m, m);
      h_matrix.selfadjointView<Eigen::Lower>().rankUpdate(phi_tr.transpose(),
                                                          1.0 / static_cast<double>(phi_tr.rows()));
      h_matrix = h_matrix.selfadjointView<Eigen::Lower>();
      const Vector h_vector = phi_te.colwise().mean().transpose();
      const double ridge = kRelativeRidge * h_matrix.trace() / static_cast<double>(m);
      const Matrix phi_hold_tr = gaussian_of(d2_hold_tr, sigma);
      const Matrix phi_hold_te = gaussian_of(d2_hold_te, sigma);

      for (Index gi = 0; gi < n_gamma; ++gi) {
        const double gamma = gamma_grid[static_cast<std::size_t>(gi)];
        Matrix system = h_matrix;
        Vector rhs = h_vector;
        if (penalty == Penalty::kQuadratic) {
          system.diagonal().array() += ridge + gamma;
        } else {
          system.diagonal().array() += ridge;
          rhs.array() -= gamma;
        }
        Eigen::LLT<Matrix> llt(system);
        const Vector alpha = llt.info() == Eigen::Success ? Vector(llt.solve(rhs))
                                                          : Vector(system.ldlt().solve(rhs));
        double crit = 0.0;
        if (phi_hold_tr.rows() > 0)
          crit += 0.5 * (phi_hold_tr * alpha).squaredNorm() /
                  static_cast<double>(phi_hold_tr.rows());
        if (phi_hold_te.rows() > 0) crit -= (phi_hold_te * alpha).mean();
        scores(si, gi) += crit / static_cast<double>(folds);
      }
    }
  }

  RatioCvResult out;
  out.scores = scores;
  out.score = std::numeric_limits<double>::infinity();
  for (Index si = 0; si < n_sigma; ++si) {
    for (Index gi = 0; gi < n_gamma; ++gi) {
      const double s = scores(si, gi);
      if (std::isfinite(s) && s < out.score) {
        out.score = s;
        out.sigma = sigma_grid[static_cast<std::size_t>(si)];
        out.gamma = gamma_grid[static_cast<std::size_t>(gi)];
      }
    }
  }
  if (!std::isfinite(out.score))
    throw NumericalError("ratio_cv: every grid point produced a non-finite score");
  return out;
}

std::vector<double> default_sigma_grid(const Matrix& proj_train,
                                       const Matrix& proj_test) {
  require(proj_train.cols() == proj_test.cols(),
          "default_sigma_grid: dimension mismatch");
  Matrix pooled(proj_train.rows() + proj_test.rows(), proj_train.cols());
  pooled << proj_train, proj_test;
  double med = linalg::median_pairwise_distance(pooled);
  if (!(med > 0.0)) med = 1.0;
  std::vector<double> grid;
  for (double f : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0}) grid.push_back(f * med);
  return grid;
}

std::vector<double> default_gamma_grid() { return {1e-3, 1e-2, 1e-1, 1.0}; }

Vector normalize_mean_one(const Vector& w) {
  const double m = w.mean();
  return m > 0.0 ? Vector(w / m) : w;
}

TunedWeights tuned_weights(const Matrix& proj_train, const Matrix& proj_test, int folds,
                           std::uint64_t seed, Penalty penalty, Index max_centers) {
  TunedWeights out;
  out.cv = ratio_cv(proj_train, proj_test, default_sigma_grid(proj_train, proj_test),
                    default_gamma_grid(), folds, derive_seed(seed, 0xcf), penalty,
                    max_centers);
  out.model = ulsif_fit(proj_train, proj_test, out.cv.gamma, out.cv.sigma,
                        std::min(max_centers, proj_test.rows()), derive_seed(seed, 0xf1),
                        penalty);
  out.weights = predict_weights(out.model, proj_train);
  out.weights.w = normalize_mean_one(out.weights.w);
  return out;
}

}  // namespace edr::ratio
