#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "seqdml/errors.hpp"
#include "seqdml/lasso.hpp"
#include "seqdml/learner_options.hpp"

namespace seqdml {

struct LogisticLassoModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;  // original scale
  double lambda = 0.0;
  Eigen::Index n_train = 0;
  double p_min = 1e-4;
  bool degenerate = false;  // single-class training response

  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x) const {
    if (x.cols() != coef.size()) {
      throw Error("dimension_mismatch",
                  "predict: feature count differs from training");
    }
    return (x * coef).array() + intercept;
  }

  // Probabilities via the logistic link, clipped to [p_min, 1 - p_min].
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd eta = linear_predictor(x);
    return eta.unaryExpr([this](double e) {
      const double p = 1.0 / (1.0 + std::exp(-e));
      return std::clamp(p, p_min, 1.0 - p_min);
    });
  }
};

namespace detail {

inline constexpr double kIrlsWeightFloor = 1e-5;
inline constexpr double kEtaCap = 30.0;

// Mean negative log-likelihood; probabilities are floored for the evaluation
// only, so a perfect-but-wrong probability cannot produce infinity.
inline double binomial_deviance(const Eigen::VectorXd& y,
                                const Eigen::VectorXd& p) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
    acc -= y[i] * std::log(pi) + (1.0 - y[i]) * std::log1p(-pi);
  }
  return acc / static_cast<double>(y.size());
}

struct LogisticState {
  double intercept = 0.0;
  Eigen::VectorXd beta;  // standardized scale
};

// One IRLS step: build the weighted quadratic surrogate at the current
// coefficients and solve it by coordinate descent with soft-thresholding.
// The intercept is unpenalized. Returns the max coefficient change.
inline double logistic_irls_step(const Eigen::MatrixXd& xs,
                                 const Eigen::VectorXd& y,
                                 const std::vector<char>& active_col,
                                 double lambda, const SolverOptions& opt,
                                 LogisticState& state) {
  const Eigen::Index n = xs.rows();
  const auto p = xs.cols();
  const double dn = static_cast<double>(n);

  Eigen::VectorXd eta = (xs * state.beta).array() + state.intercept;
  Eigen::VectorXd w(n), z_resid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = std::clamp(eta[i], -kEtaCap, kEtaCap);
    const double mu = 1.0 / (1.0 + std::exp(-e));
    w[i] = std::max(mu * (1.0 - mu), kIrlsWeightFloor);
    // residual of the working response around the current fit
    z_resid[i] = (y[i] - mu) / w[i];
  }

  const LogisticState before = state;
  const double wsum = w.sum();
  // Quadratic-surrogate coordinate descent. Weighted column norms are
  // recomputed once per step since w is fixed within the surrogate.
  Eigen::VectorXd col_wnorm(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    col_wnorm[j] = active_col[static_cast<std::size_t>(j)]
                       ? w.dot(xs.col(j).cwiseProduct(xs.col(j))) / dn
                       : 1.0;
  }

  int sweeps = 0;
  while (sweeps < opt.max_sweeps) {
    ++sweeps;
    double delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!active_col[static_cast<std::size_t>(j)]) continue;
      const double old = state.beta[j];
      const double grad = w.cwiseProduct(xs.col(j)).dot(z_resid) / dn;
      const double next =
          soft_threshold(grad + col_wnorm[j] * old, lambda) / col_wnorm[j];
      if (next != old) {
        z_resid.noalias() -= (next - old) * xs.col(j);
        state.beta[j] = next;
        delta = std::max(delta, std::abs(next - old));
      }
    }
    const double dint = w.dot(z_resid) / wsum;
    if (dint != 0.0) {
      state.intercept += dint;
      z_resid.array() -= dint;
      delta = std::max(delta, std::abs(dint));
    }
    if (delta < opt.tol) break;
  }

  double changed = std::abs(state.intercept - before.intercept);
  changed = std::max(changed, (state.beta - before.beta).cwiseAbs().maxCoeff());
  return changed;
}

inline void logistic_solve(const Eigen::MatrixXd& xs, const Eigen::VectorXd& y,
                           const std::vector<char>& active_col, double lambda,
                           const SolverOptions& opt, LogisticState& state) {
  constexpr int kMaxIrls = 100;
  for (int it = 0; it < kMaxIrls; ++it) {
    const double changed =
        logistic_irls_step(xs, y, active_col, lambda, opt, state);
    if (changed < opt.tol) break;
  }
}

inline LogisticLassoModel logistic_degenerate_model(Eigen::Index p,
                                                    double rate,
                                                    const SolverOptions& opt,
                                                    Eigen::Index n) {
  LogisticLassoModel model;
  model.coef = Eigen::VectorXd::Zero(p);
  const double clipped = std::clamp(rate, opt.p_min, 1.0 - opt.p_min);
  model.intercept = std::log(clipped / (1.0 - clipped));
  model.lambda = 0.0;
  model.n_train = n;
  model.p_min = opt.p_min;
  model.degenerate = true;
  return model;
}

}  // namespace detail

// l1-penalized logistic regression at a fixed penalty, solved by IRLS with a
// coordinate-descent inner loop on the quadratic surrogate. A single-class
// response yields an intercept-only model at the (clipped) class rate,
// flagged via `degenerate`.
inline LogisticLassoModel fit_logistic_lasso_fixed(const Eigen::MatrixXd& x,
                                                   const Eigen::VectorXd& y,
                                                   double lambda,
                                                   const SolverOptions& opt =
                                                       {}) {
  const Eigen::Index n = x.rows();
  if (n != y.size() || n < 2) {
    throw Error("bad_learner_input",
                "logistic lasso requires matching X/y with at least 2 rows");
  }
  if (!(lambda >= 0.0)) {
    throw Error("bad_learner_input", "logistic penalty must be >= 0");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw Error("bad_learner_input", "logistic response must be 0/1");
    }
  }
  const double rate = y.mean();
  if (rate == 0.0 || rate == 1.0) {
    return detail::logistic_degenerate_model(x.cols(), rate, opt, n);
  }

  const detail::Standardizer std = detail::Standardizer::fit(x);
  const Eigen::MatrixXd xs = std.transform(x);
  detail::LogisticState state;
  state.beta = Eigen::VectorXd::Zero(x.cols());
  state.intercept = std::log(rate / (1.0 - rate));
  detail::logistic_solve(xs, y, std.active, lambda, opt, state);

  LogisticLassoModel model;
  model.coef = state.beta.array() / std.scale.array();
  model.intercept = state.intercept - model.coef.dot(std.mean);
  model.lambda = lambda;
  model.n_train = n;
  model.p_min = opt.p_min;
  return model;
}

// Lambda by internal CV minimizing held-out deviance over the geometric grid
// anchored at the full-sample lambda_max; warm starts along the path.
inline LogisticLassoModel fit_logistic_lasso_cv(const Eigen::MatrixXd& x,
                                                const Eigen::VectorXd& y,
                                                const SolverOptions& opt,
                                                std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (n != y.size() || n < 2) {
    throw Error("bad_learner_input",
                "logistic lasso requires matching X/y with at least 2 rows");
  }
  const double rate = y.mean();
  if (rate == 0.0 || rate == 1.0) {
    return detail::logistic_degenerate_model(x.cols(), rate, opt, n);
  }

  const detail::Standardizer std_full = detail::Standardizer::fit(x);
  double lambda_max = 0.0;
  {
    const Eigen::MatrixXd xs = std_full.transform(x);
    const Eigen::VectorXd resid = y.array() - rate;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!std_full.active[static_cast<std::size_t>(j)]) continue;
      lambda_max = std::max(
          lambda_max, std::abs(xs.col(j).dot(resid)) / static_cast<double>(n));
    }
  }
  if (!(lambda_max > 0.0)) {
    return detail::logistic_degenerate_model(x.cols(), rate, opt, n);
  }

  const std::vector<double> grid =
      detail::lambda_grid(lambda_max, opt.grid_size, opt.lambda_min_ratio);
  const int folds = std::min<int>(opt.cv_folds, static_cast<int>(n));
  const std::vector<int> ids = detail::cv_fold_ids(n, folds, seed);

  std::vector<double> loss(grid.size(), 0.0);
  std::vector<Eigen::Index> counted(grid.size(), 0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, valid;
    for (Eigen::Index i = 0; i < n; ++i) {
      (ids[static_cast<std::size_t>(i)] == f ? valid : train)
          .push_back(static_cast<int>(i));
    }
    const Eigen::MatrixXd xt = detail::take_rows(x, train);
    const Eigen::VectorXd yt = detail::take_rows(y, train);
    const Eigen::MatrixXd xv = detail::take_rows(x, valid);
    const Eigen::VectorXd yv = detail::take_rows(y, valid);
    const double fold_rate = yt.mean();
    if (fold_rate == 0.0 || fold_rate == 1.0) continue;  // fold unusable

    const detail::Standardizer std_f = detail::Standardizer::fit(xt);
    const Eigen::MatrixXd xst = std_f.transform(xt);
    detail::LogisticState state;
    state.beta = Eigen::VectorXd::Zero(x.cols());
    state.intercept = std::log(fold_rate / (1.0 - fold_rate));
    for (std::size_t g = 0; g < grid.size(); ++g) {
      detail::logistic_solve(xst, yt, std_f.active, grid[g], opt, state);
      Eigen::VectorXd coef = state.beta.array() / std_f.scale.array();
      const double b0 = state.intercept - coef.dot(std_f.mean);
      Eigen::VectorXd eta = (xv * coef).array() + b0;
      Eigen::VectorXd pv = eta.unaryExpr(
          [](double e) { return 1.0 / (1.0 + std::exp(-e)); });
      loss[g] += detail::binomial_deviance(yv, pv) *
                 static_cast<double>(yv.size());
      counted[g] += yv.size();
    }
  }
  std::size_t best = 0;
  bool any = false;
  double best_loss = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (counted[g] == 0) continue;
    const double mean_loss = loss[g] / static_cast<double>(counted[g]);
    if (!any || mean_loss < best_loss) {
      any = true;
      best = g;
      best_loss = mean_loss;
    }
  }
  if (!any) {
    throw Error("cv_failed",
                "every CV fold was single-class; cannot select lambda");
  }

  // Final fit on the full sample, warm-started along the same path.
  const Eigen::MatrixXd xs = std_full.transform(x);
  detail::LogisticState state;
  state.beta = Eigen::VectorXd::Zero(x.cols());
  state.intercept = std::log(rate / (1.0 - rate));
  for (std::size_t g = 0; g <= best; ++g) {
    detail::logistic_solve(xs, y, std_full.active, grid[g], opt, state);
  }

  LogisticLassoModel model;
  model.coef = state.beta.array() / std_full.scale.array();
  model.intercept = state.intercept - model.coef.dot(std_full.mean);
  model.lambda = grid[best];
  model.n_train = n;
  model.p_min = opt.p_min;
  return model;
}

inline LogisticLassoModel fit_logistic_lasso(const Eigen::MatrixXd& x,
                                             const Eigen::VectorXd& y,
                                             double lambda,
                                             const SolverOptions& opt = {},
                                             std::uint64_t seed = 0) {
  return is_cv_lambda(lambda) ? fit_logistic_lasso_cv(x, y, opt, seed)
                              : fit_logistic_lasso_fixed(x, y, lambda, opt);
}

}  // namespace seqdml
