#include "edr/subspace_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "edr/linalg.hpp"

namespace edr::search {

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kCenterStream = 0xce;
constexpr std::uint64_t kStartStream = 0x57a7;
constexpr std::uint64_t kInlineCvStream = 0x1c5;
constexpr std::uint64_t kLambdaCvStream = 0x1a3b;
constexpr std::uint64_t kDownstreamStream = 0xd0;
constexpr std::uint64_t kRatioCvStream = 0xd1;
constexpr std::uint64_t kRidgeCvStream = 0xd2;

constexpr double kMinWeightScale = 1e-12;

}  // namespace

Projection Projection::from_matrix(Matrix a, double tol) {
  if (a.cols() < 1 || a.cols() >= a.rows())
    throw InputError("Projection: need 1 <= K < D (got D=" + std::to_string(a.rows()) +
                     ", K=" + std::to_string(a.cols()) + ")");
  if (!a.allFinite()) throw InputError("Projection: non-finite entries");
  const double err = linalg::orthonormality_error(a);
  if (!(err <= tol))
    throw InputError("Projection: columns not orthonormal (||A^T A - I|| = " +
                     std::to_string(err) + ")");
  return Projection(std::move(a));
}

ObjectiveSettings make_objective_settings(const TrainTestPair& data,
                                          const model::LossSpec& loss,
                                          std::uint64_t seed, Index max_centers,
                                          ratio::Penalty penalty) {
  ObjectiveSettings s;
  s.loss = loss;
  s.penalty = penalty;
  s.center_rows = ratio::choose_center_rows(data.x_test.rows(), max_centers,
                                            derive_seed(seed, kCenterStream));
  return s;
}

ObjectiveState evaluate_objective_at(const Matrix& a, const TrainTestPair& data,
                                     const Hyper& hyper,
                                     const ObjectiveSettings& settings) {
  require(a.rows() == data.dimension(), "evaluate_objective: projection/data mismatch");
  require(hyper.lambda >= 0.0, "evaluate_objective: lambda must be nonnegative");
  ObjectiveState st;
  st.a = a;
  st.hyper = hyper;
  st.u_train = data.x_train * a;
  st.u_test = data.x_test * a;

  st.ratio.basis.sigma = hyper.sigma;
  st.ratio.basis.centers.resize(static_cast<Index>(settings.center_rows.size()), a.cols());
  for (std::size_t m = 0; m < settings.center_rows.size(); ++m)
    st.ratio.basis.centers.row(static_cast<Index>(m)) = st.u_test.row(settings.center_rows[m]);
  st.ratio.basis.validate();
  st.system = ratio::build_system(st.u_train, st.u_test, st.ratio.basis, hyper.gamma,
                                  settings.penalty);
  st.ratio.alpha = st.system.alpha;
  st.ratio.gamma = hyper.gamma;
  st.ratio.penalty = settings.penalty;
  st.ratio.ridge = st.system.ridge;

  st.raw_weights = st.system.phi_train * st.system.alpha;
  st.weights.w = st.raw_weights.cwiseMax(0.0);
  if (settings.normalize_weights) {
    st.weight_scale = st.weights.w.mean();
    if (!(st.weight_scale > kMinWeightScale))
      throw NumericalError("evaluate_objective: every training weight is zero (sigma=" +
                           std::to_string(hyper.sigma) + ")");
    st.weights.w /= st.weight_scale;
  }
  st.weights.ess = ratio::effective_sample_size(st.weights.w);

  st.model = model::weighted_fit(st.u_train, data.y_train, st.weights.w, hyper.c,
                                 settings.loss, settings.fit);
  st.utility_term = st.model.degenerate
                        ? 0.0
                        : model::weighted_loss(st.model, st.u_train, data.y_train,
                                               st.weights.w, settings.loss);
  st.ess_penalty_term = st.weights.w.squaredNorm();
  st.objective_value = st.utility_term + hyper.lambda * st.ess_penalty_term;
  if (!std::isfinite(st.objective_value)) {
    std::ostringstream msg;
    msg << "evaluate_objective: non-finite objective (utility=" << st.utility_term
        << ", sum w^2=" << st.ess_penalty_term << ", sigma=" << hyper.sigma
        << ", gamma=" << hyper.gamma << ", c=" << hyper.c << ")";
    throw NumericalError(msg.str());
  }
  return st;
}

ObjectiveState evaluate_objective(const Projection& a, const TrainTestPair& data,
                                  const Hyper& hyper,
                                  const ObjectiveSettings& settings) {
  return evaluate_objective_at(a.matrix(), data, hyper, settings);
}

InnerAdjoint hypergrad_b(const Vector& dG_db, const FitContext& ctx) {
  const auto& m = ctx.model;
  const Matrix z = model::design_matrix(ctx.u, m.intercept);
  const Index n = z.rows();
  const Index dim = z.cols();
  const Index k = ctx.u.cols();
  require(dG_db.size() == dim, "hypergrad_b: gradient length mismatch");

  InnerAdjoint out;
  out.d_weights = Vector::Zero(n);
  out.d_features = Matrix::Zero(n, k);
  out.v = Vector::Zero(dim);
  if (m.degenerate || dG_db.isZero(0.0)) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  const Vector p = z * m.b;
  Vector d1(n), curv(n);
  for (Index i = 0; i < n; ++i) {
    d1(i) = model::loss_d1(ctx.loss.train, p(i), ctx.y(i));
    curv(i) = ctx.w(i) * model::loss_d2(ctx.loss.train, p(i), ctx.y(i)) * inv_n;
  }
  Vector mask = Vector::Ones(dim);
  if (m.intercept) mask(dim - 1) = 0.0;
  const double two_c = 2.0 * m.ridge;

  auto hvp = [&](const Vector& x) -> Vector {
    Vector hx = z.transpose() * (curv.cwiseProduct(z * x));
    hx += two_c * mask.cwiseProduct(x);
    return hx;
  };
  const int max_it = static_cast<int>(10 * dim);
  auto cg = linalg::conjugate_gradient(hvp, dG_db, 1e-10, max_it);
  out.cg_iterations = cg.iterations;
  out.cg_relative_residual = cg.relative_residual;
  if (cg.converged) {
    out.v = cg.x;
  } else {
    spdlog::info("hypergrad_b: CG stopped at relative residual {:.3e} after {} iterations; "
                 "using a dense solve",
                 cg.relative_residual, cg.iterations);
    Matrix h = z.transpose() * curv.asDiagonal() * z;
    h.diagonal() += two_c * mask;
    out.v = h.ldlt().solve(dG_db);
    out.used_fallback = true;
  }

  const Vector zv = z * out.v;
  const Vector b_k = m.b.head(k);
  const Vector v_k = out.v.head(k);
  for (Index i = 0; i < n; ++i) {
    out.d_weights(i) = -inv_n * d1(i) * zv(i);
    const double wi = ctx.w(i);
    if (wi == 0.0) continue;
    const double d2 = model::loss_d2(ctx.loss.train, p(i), ctx.y(i));
    out.d_features.row(i) = (-inv_n * wi) * (d2 * zv(i) * b_k + d1(i) * v_k).transpose();
  }
  return out;
}

Matrix kernel_pullback(const Matrix& d_phi_train, const Matrix* d_phi_test,
                       const RatioContext& ctx) {
  const auto& sys = ctx.system;
  const Index k = ctx.u_train.cols();
  const Index m = sys.phi_train.cols();
  const double inv_s2 = 1.0 / (ctx.sigma * ctx.sigma);

  Matrix centers(m, k);
  for (Index j = 0; j < m; ++j)
    centers.row(j) = ctx.u_test.row(ctx.center_rows[static_cast<std::size_t>(j)]);

  // d phi_im / d u_i = -phi_im (u_i - c_m) / sigma^2, and the negative of
  // that for c_m.
  const Matrix e_tr = d_phi_train.cwiseProduct(sys.phi_train);
  Matrix d_u_tr = -inv_s2 * (e_tr.rowwise().sum().asDiagonal() * ctx.u_train - e_tr * centers);
  Matrix d_c = inv_s2 * (e_tr.transpose() * ctx.u_train -
                         e_tr.colwise().sum().transpose().asDiagonal() * centers);

  Matrix d_u_te = Matrix::Zero(ctx.u_test.rows(), k);
  if (d_phi_test != nullptr) {
    const Matrix e_te = d_phi_test->cwiseProduct(sys.phi_test);
    d_u_te = -inv_s2 * (e_te.rowwise().sum().asDiagonal() * ctx.u_test - e_te * centers);
    d_c += inv_s2 * (e_te.transpose() * ctx.u_test -
                     e_te.colwise().sum().transpose().asDiagonal() * centers);
  }
  for (Index j = 0; j < m; ++j)
    d_u_te.row(ctx.center_rows[static_cast<std::size_t>(j)]) += d_c.row(j);

  return ctx.x_train.transpose() * d_u_tr + ctx.x_test.transpose() * d_u_te;
}

Matrix hypergrad_alpha(const Vector& dG_dalpha, const RatioContext& ctx) {
  const auto& sys = ctx.system;
  const Index m = sys.phi_train.cols();
  require(dG_dalpha.size() == m, "hypergrad_alpha: gradient length mismatch");
  if (dG_dalpha.isZero(0.0)) return Matrix::Zero(ctx.x_train.cols(), ctx.u_train.cols());

  const Vector q = sys.solver.solve(dG_dalpha);
  const Vector& alpha = sys.alpha;
  // alpha = (H + shift I)^{-1} rhs with shift = eps(H) [+ gamma]:
  //   d rhs = q, d H = -sym(q alpha^T), d eps = -q^T alpha.
  Matrix d_h = -0.5 * (q * alpha.transpose() + alpha * q.transpose());
  const double d_eps = -q.dot(alpha);
  d_h.diagonal().array() += ratio::kRelativeRidge / static_cast<double>(m) * d_eps;

  const double n_tr = static_cast<double>(sys.phi_train.rows());
  const double n_te = static_cast<double>(sys.phi_test.rows());
  const Matrix d_phi_tr = (2.0 / n_tr) * sys.phi_train * d_h;
  const Matrix d_phi_te = Vector::Ones(sys.phi_test.rows()) * (q.transpose() / n_te);
  return kernel_pullback(d_phi_tr, &d_phi_te, ctx);
}

Matrix total_gradient(const ObjectiveState& state, const TrainTestPair& data,
                      const ObjectiveSettings& settings) {
  const auto& w = state.weights.w;
  const auto& mdl = state.model;
  const Index n = state.u_train.rows();
  const Index k = state.u_train.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda = state.hyper.lambda;

  // Adjoints of G w.r.t. the weights and the projected training points.
  Vector d_w = 2.0 * lambda * w;
  Matrix d_u = Matrix::Zero(n, k);
  if (!mdl.degenerate) {
    const Matrix z = model::design_matrix(state.u_train, mdl.intercept);
    const Vector p = z * mdl.b;
    Vector wd1(n);
    for (Index i = 0; i < n; ++i) {
      const double yi = data.y_train(i);
      d_w(i) += inv_n * model::loss_value(settings.loss.train, p(i), yi);
      wd1(i) = w(i) * model::loss_d1(settings.loss.train, p(i), yi) * inv_n;
    }
    const Vector dG_db = z.transpose() * wd1;
    d_u += wd1 * mdl.b.head(k).transpose();

    const InnerAdjoint inner =
        hypergrad_b(dG_db, FitContext{state.u_train, data.y_train, w, mdl, settings.loss});
    d_w += inner.d_weights;
    d_u += inner.d_features;
  }

  // Normalization w = s / mean(s), then the clamp (subgradient 0 where
  // alpha^T phi <= 0).
  Vector d_s = d_w;
  if (settings.normalize_weights)
    d_s = (d_w.array() - d_w.dot(w) * inv_n) / state.weight_scale;
  for (Index i = 0; i < n; ++i)
    if (!(state.raw_weights(i) > 0.0)) d_s(i) = 0.0;

  const RatioContext rctx{data.x_train, data.x_test,         state.u_train,
                          state.u_test, settings.center_rows, state.system,
                          state.hyper.sigma};
  const Vector d_alpha = state.system.phi_train.transpose() * d_s;
  const Matrix d_phi_direct = d_s * state.system.alpha.transpose();

  Matrix grad = data.x_train.transpose() * d_u;
  grad += kernel_pullback(d_phi_direct, nullptr, rctx);
  grad += hypergrad_alpha(d_alpha, rctx);
  if (!grad.allFinite()) throw NumericalError("total_gradient: non-finite gradient");
  return grad;
}

Matrix riemannian_gradient(const Matrix& a, const Matrix& euclidean_grad) {
  const Matrix atg = a.transpose() * euclidean_grad;
  return euclidean_grad - a * (0.5 * (atg + atg.transpose()));
}

Projection stiefel_step(const Projection& a, const Matrix& euclidean_grad, double step) {
  const Matrix& x = a.matrix();
  require(euclidean_grad.rows() == x.rows() && euclidean_grad.cols() == x.cols(),
          "stiefel_step: gradient shape mismatch");
  const Matrix y = x - step * riemannian_gradient(x, euclidean_grad);
  return Projection::from_matrix(linalg::qr_orthonormalize(y));
}

void SearchConfig::validate(Index input_dimension) const {
  require(k >= 1 && k < input_dimension, "SearchConfig: need 1 <= K < D");
  require(!lambda_grid.empty(), "SearchConfig: empty lambda grid");
  for (double l : lambda_grid) require(l >= 0.0, "SearchConfig: negative lambda");
  require(restarts >= 1, "SearchConfig: restarts must be >= 1");
  require(max_iters >= 1, "SearchConfig: max_iters must be >= 1");
  require(inline_cv_period >= 1, "SearchConfig: inline_cv_period must be >= 1");
  require(cv_folds >= 2, "SearchConfig: cv_folds must be >= 2");
  require(initial_step > 0.0 && max_step >= initial_step, "SearchConfig: bad step sizes");
  require(backtrack > 0.0 && backtrack < 1.0, "SearchConfig: backtrack factor in (0,1)");
  require(subspace_tolerance >= 0.0, "SearchConfig: negative subspace tolerance");
  require(!sigma_factors.empty() && !gamma_grid.empty() && !c_grid.empty(),
          "SearchConfig: empty hyperparameter grid");
  loss.validate();
}

Hyper inline_cv(const Matrix& a, const TrainTestPair& data, const SearchConfig& config,
                const ObjectiveSettings& settings, double lambda, std::uint64_t seed) {
  const Matrix u_tr = data.x_train * a;
  const Matrix u_te = data.x_test * a;
  Matrix pooled(u_tr.rows() + u_te.rows(), u_tr.cols());
  pooled << u_tr, u_te;
  double med = linalg::median_pairwise_distance(pooled);
  if (!(med > 0.0)) med = 1.0;
  std::vector<double> sigma_grid;
  for (double f : config.sigma_factors) sigma_grid.push_back(f * med);

  const auto cv = ratio::ratio_cv(u_tr, u_te, sigma_grid, config.gamma_grid, config.cv_folds,
                                  derive_seed(seed, 1), config.penalty, config.max_centers);
  Hyper h;
  h.sigma = cv.sigma;
  h.gamma = cv.gamma;
  h.lambda = lambda;

  const auto r = ratio::ulsif_fit_with_centers(u_tr, u_te, settings.center_rows, h.gamma,
                                               h.sigma, config.penalty);
  Vector w = ratio::predict_weights(r, u_tr).w;
  if (settings.normalize_weights) w = ratio::normalize_mean_one(w);
  h.c = model::select_ridge(u_tr, w, data.y_train, config.loss, config.c_grid,
                            config.cv_folds, derive_seed(seed, 2), settings.fit);
  return h;
}

RestartResult descend(const TrainTestPair& data, const SearchConfig& config,
                      const ObjectiveSettings& settings, double lambda, const Matrix& a0,
                      std::uint64_t seed) {
  RestartResult res;
  res.seed = seed;
  Projection a = Projection::from_matrix(a0);
  res.max_stiefel_error = linalg::orthonormality_error(a.matrix());

  Hyper hyper = inline_cv(a.matrix(), data, config, settings, lambda, derive_seed(seed, 0));
  ObjectiveState state = evaluate_objective(a, data, hyper, settings);
  if (config.record_trace) {
    res.trace.objective.push_back(state.objective_value);
    res.trace.stiefel_error.push_back(res.max_stiefel_error);
  }

  double step = config.initial_step;
  Matrix a_refresh = a.matrix();
  int it = 0;
  for (; it < config.max_iters; ++it) {
    if (it > 0 && it % config.inline_cv_period == 0) {
      const double moved = linalg::principal_angles(a_refresh, a.matrix()).maxCoeff();
      spdlog::debug("descend: it={} G={:.6g} moved={:.3g} sigma={:.3g} gamma={:.3g} c={:.3g}", it,
                    state.objective_value, moved, hyper.sigma, hyper.gamma, hyper.c);
      if (moved <= config.subspace_tolerance) {
        res.converged = true;
        break;
      }
      a_refresh = a.matrix();
      const Hyper fresh = inline_cv(a.matrix(), data, config, settings, lambda,
                                    derive_seed(seed, 0));
      try {
        state = evaluate_objective(a, data, fresh, settings);
        hyper = fresh;
      } catch (const NumericalError& e) {
        spdlog::debug("descend: keeping previous hyperparameters ({})", e.what());
      }
      if (config.record_trace) {
        res.trace.refreshes.push_back(res.trace.objective.size());
        res.trace.objective.push_back(state.objective_value);
        res.trace.stiefel_error.push_back(linalg::orthonormality_error(a.matrix()));
      }
    }

    const Matrix egrad = total_gradient(state, data, settings);
    const Matrix rgrad = riemannian_gradient(a.matrix(), egrad);
    const double gn2 = rgrad.squaredNorm();
    if (std::sqrt(gn2) <= config.gradient_tolerance) {
      res.converged = true;
      break;
    }

    std::optional<Projection> next;
    std::optional<ObjectiveState> next_state;
    if (config.step_rule == StepRule::kFixed) {
      next = stiefel_step(a, egrad, config.initial_step);
      next_state = evaluate_objective(*next, data, hyper, settings);
    } else {
      double t = step;
      while (t >= 1e-12) {
        Projection cand = stiefel_step(a, egrad, t);
        try {
          ObjectiveState cs = evaluate_objective(cand, data, hyper, settings);
          if (cs.objective_value <= state.objective_value - config.armijo * t * gn2) {
            next = std::move(cand);
            next_state = std::move(cs);
            break;
          }
        } catch (const NumericalError&) {
          // treat like a failed sufficient-decrease test
        }
        t *= config.backtrack;
      }
      if (!next) {
        res.converged = true;  // no descent possible at this resolution
        break;
      }
      step = std::min(2.0 * t, config.max_step);
    }

    const double decrease = state.objective_value - next_state->objective_value;
    a = std::move(*next);
    state = std::move(*next_state);
    const double orth = linalg::orthonormality_error(a.matrix());
    res.max_stiefel_error = std::max(res.max_stiefel_error, orth);
    if (config.record_trace) {
      res.trace.objective.push_back(state.objective_value);
      res.trace.stiefel_error.push_back(orth);
    }
    if (config.step_rule == StepRule::kBacktracking &&
        decrease <= config.relative_tolerance * std::max(1.0, std::abs(state.objective_value))) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.state = std::move(state);
  return res;
}

Downstream downstream_fit(const Matrix& a, const TrainTestPair& data, const SearchConfig& config,
                          std::uint64_t seed) {
  Downstream d;
  d.a = a;
  const Matrix u_train = data.x_train * a;
  d.ratio = ratio::tuned_weights(u_train, data.x_test * a, config.cv_folds,
                                 derive_seed(seed, kRatioCvStream), config.penalty,
                                 config.max_centers);
  Vector& w = d.ratio.weights.w;
  if (w.sum() <= 0.0) {
    spdlog::warn("downstream_fit: every weight is zero; using unit weights");
    w = Vector::Ones(w.size());
    d.ratio.weights.ess = static_cast<double>(w.size());
  }
  d.c = model::select_ridge(u_train, w, data.y_train, config.loss, config.c_grid,
                            config.cv_folds, derive_seed(seed, kRidgeCvStream), config.fit);
  d.model = model::weighted_fit(u_train, data.y_train, w, d.c, config.loss, config.fit);
  return d;
}

SearchResult search(const TrainTestPair& data, const SearchConfig& config) {
  data.validate();
  config.validate(data.dimension());
  ObjectiveSettings settings = make_objective_settings(
      data, config.loss, config.seed, config.max_centers, config.penalty);
  settings.fit = config.fit;
  settings.normalize_weights = config.normalize_weights;

  SearchResult out;
  out.seed = config.seed;
  std::vector<model::IwcvCandidate> candidates;
  std::vector<std::size_t> candidate_lambda;

  for (std::size_t li = 0; li < config.lambda_grid.size(); ++li) {
    LambdaResult lr;
    lr.lambda = config.lambda_grid[li];
    for (int r = 0; r < config.restarts; ++r) {
      const std::uint64_t rseed =
          derive_seed(config.seed, kStartStream, (static_cast<std::uint64_t>(li) << 32) |
                                                     static_cast<std::uint64_t>(r));
      std::mt19937_64 rng(rseed);
      const Matrix a0 = linalg::random_stiefel(data.dimension(), config.k, rng);
      RestartResult rr;
      try {
        rr = descend(data, config, settings, lr.lambda, a0, derive_seed(rseed, kInlineCvStream));
        rr.seed = rseed;
      } catch (const std::exception& e) {
        rr.seed = rseed;
        rr.error = e.what();
        spdlog::warn("search: lambda={} restart={} failed: {}", lr.lambda, r, e.what());
      }
      lr.restarts.push_back(std::move(rr));
    }
    for (std::size_t r = 0; r < lr.restarts.size(); ++r) {
      const auto& rr = lr.restarts[r];
      if (!rr.state) continue;
      if (!lr.best_restart ||
          rr.state->objective_value <
              lr.restarts[*lr.best_restart].state->objective_value)
        lr.best_restart = r;
    }
    if (lr.best_restart) {
      const auto& st = *lr.restarts[*lr.best_restart].state;
      if (config.downstream_refit) {
        try {
          lr.downstream = downstream_fit(st.a, data, config,
                                         derive_seed(config.seed, kDownstreamStream, li));
        } catch (const std::exception& e) {
          spdlog::warn("search: lambda={} downstream fit failed: {}", lr.lambda, e.what());
        }
        if (lr.downstream) {
          candidates.push_back({st.u_train, lr.downstream->ratio.weights.w, lr.downstream->c,
                                lr.lambda});
          candidate_lambda.push_back(li);
        }
      } else {
        candidates.push_back({st.u_train, st.weights.w, st.hyper.c, lr.lambda});
        candidate_lambda.push_back(li);
      }
    }
    out.per_lambda.push_back(std::move(lr));
  }

  if (candidates.empty()) {
    std::ostringstream msg;
    msg << "search: every restart failed;";
    for (const auto& lr : out.per_lambda)
      for (const auto& rr : lr.restarts) msg << " [lambda=" << lr.lambda << "] " << rr.error;
    throw NumericalError(msg.str());
  }

  const auto sel = model::iwcv_select(candidates, data.y_train, config.loss, config.cv_folds,
                                      derive_seed(config.seed, kLambdaCvStream), config.fit);
  for (std::size_t c = 0; c < candidates.size(); ++c)
    out.per_lambda[candidate_lambda[c]].iwcv_score = sel.scores[c];

  out.lambda_index = candidate_lambda[sel.best];
  const auto& lr = out.per_lambda[out.lambda_index];
  out.restart_index = *lr.best_restart;
  const auto& winner = lr.restarts[out.restart_index];
  out.best = *winner.state;
  out.downstream = lr.downstream;
  out.projection = Projection::from_matrix(out.best.a);
  out.iterations = winner.iterations;
  for (const auto& l : out.per_lambda)
    for (const auto& r : l.restarts) out.max_stiefel_error = std::max(out.max_stiefel_error, r.max_stiefel_error);
  return out;
}

Matrix finite_difference_gradient(const Matrix& a, const TrainTestPair& data,
                                  const Hyper& hyper, const ObjectiveSettings& settings,
                                  double step) {
  Matrix g(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      Matrix ap = a, am = a;
      ap(i, j) += step;
      am(i, j) -= step;
      const double fp = evaluate_objective_at(ap, data, hyper, settings).objective_value;
      const double fm = evaluate_objective_at(am, data, hyper, settings).objective_value;
      g(i, j) = (fp - fm) / (2.0 * step);
    }
  }
  return g;
}

GradcheckResult gradcheck(const Matrix& a, const TrainTestPair& data, const Hyper& hyper,
                          const ObjectiveSettings& settings, double step) {
  GradcheckResult out;
  const ObjectiveState st = evaluate_objective_at(a, data, hyper, settings);
  out.analytic = total_gradient(st, data, settings);
  out.numeric = finite_difference_gradient(a, data, hyper, settings, step);
  const Matrix diff = out.analytic - out.numeric;
  out.max_abs_error = diff.cwiseAbs().maxCoeff();
  const double scale = std::max(out.numeric.cwiseAbs().maxCoeff(), 1e-10);
  out.max_relative_error = out.max_abs_error / scale;
  return out;
}

GradcheckInstance make_gradcheck_instance(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x9c));
  std::uniform_int_distribution<int> dim_dist(3, 6);
  std::uniform_int_distribution<int> k_dist(1, 2);
  std::uniform_int_distribution<int> n_dist(30, 60);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const Index d = dim_dist(rng);
  const Index k = k_dist(rng);
  const Index n = n_dist(rng);
  const Index n_te = n_dist(rng);
  const bool classification = (seed % 4) == 3;

  GradcheckInstance inst;
  auto& data = inst.data;
  data.generator = "gradcheck";
  data.seed = seed;
  Vector shift(d);
  for (Index j = 0; j < d; ++j) shift(j) = 0.6 * normal(rng);
  data.x_train.resize(n, d);
  data.y_train.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) data.x_train(i, j) = normal(rng);
    const double signal = std::abs(data.x_train(i, 0)) + 0.5 * data.x_train(i, 1);
    if (classification)
      data.y_train(i) = signal + 0.5 * normal(rng) > 0.8 ? 1.0 : 0.0;
    else
      data.y_train(i) = signal + 0.1 * normal(rng);
  }
  data.x_test.resize(n_te, d);
  for (Index i = 0; i < n_te; ++i)
    for (Index j = 0; j < d; ++j) data.x_test(i, j) = shift(j) + normal(rng);

  inst.a = linalg::random_stiefel(d, k, rng);
  inst.hyper.c = 0.01 + 0.1 * unif(rng);
  inst.hyper.gamma = 0.02 + 0.2 * unif(rng);
  inst.hyper.sigma = 0.7 + 0.8 * unif(rng);
  inst.hyper.lambda = 1e-3 * unif(rng);
  inst.settings = make_objective_settings(
      data, classification ? model::LossSpec::classification() : model::LossSpec::regression(),
      seed, std::min<Index>(20, n_te));
  return inst;
}

}  // namespace edr::search
