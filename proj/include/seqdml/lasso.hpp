#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "seqdml/errors.hpp"
#include "seqdml/learner_options.hpp"
#include "seqdml/rng.hpp"

namespace seqdml {

namespace detail {

// Column-wise mean-0 / SD-1 rescaling (population SD, divisor n). Constant
// columns get scale 1 and are excluded from coordinate updates; their effect
// is absorbed by the intercept.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<char> active;  // false for constant columns

  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    const auto p = x.cols();
    s.mean.resize(p);
    s.scale.resize(p);
    s.active.assign(static_cast<std::size_t>(p), 1);
    for (Eigen::Index j = 0; j < p; ++j) {
      s.mean[j] = x.col(j).mean();
      const double var = (x.col(j).array() - s.mean[j]).square().mean();
      if (var > 0.0) {
        s.scale[j] = std::sqrt(var);
      } else {
        s.scale[j] = 1.0;
        s.active[static_cast<std::size_t>(j)] = 0;
      }
    }
    return s;
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
  }
};

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

// Geometric grid from lambda_max down to lambda_max * ratio.
inline std::vector<double> lambda_grid(double lambda_max, int size,
                                       double ratio) {
  std::vector<double> grid(static_cast<std::size_t>(size));
  const double step = std::log(ratio) / static_cast<double>(size - 1);
  for (int i = 0; i < size; ++i) {
    grid[static_cast<std::size_t>(i)] = lambda_max * std::exp(step * i);
  }
  return grid;
}

// Balanced fold ids for internal CV, shuffled deterministically.
inline std::vector<int> cv_fold_ids(Eigen::Index n, int folds,
                                    std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  auto g = rng::engine(rng::derive(seed, rng::tag("learner_cv")));
  rng::shuffle(order, g);
  std::vector<int> ids(static_cast<std::size_t>(n));
  const Eigen::Index base = n / folds;
  const Eigen::Index rem = n % folds;
  Eigen::Index pos = 0;
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index size = base + (f < rem ? 1 : 0);
    for (Eigen::Index j = 0; j < size; ++j) {
      ids[static_cast<std::size_t>(order[static_cast<std::size_t>(pos + j)])] =
          f;
    }
    pos += size;
  }
  return ids;
}

}  // namespace detail

struct LinearLassoModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;  // original scale
  double lambda = 0.0;
  Eigen::Index n_train = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != coef.size()) {
      throw Error("dimension_mismatch",
                  "predict: feature count differs from training");
    }
    return (x * coef).array() + intercept;
  }
};

// (1/2n)||y - b0 - X b||^2 + lambda * ||b||_1 with X standardized; used by
// tests to assert objective monotonicity.
inline double lasso_objective(const Eigen::MatrixXd& x_std,
                              const Eigen::VectorXd& y_centered,
                              const Eigen::VectorXd& beta_std, double lambda) {
  const Eigen::VectorXd r = y_centered - x_std * beta_std;
  return 0.5 * r.squaredNorm() / static_cast<double>(y_centered.size()) +
         lambda * beta_std.template lpNorm<1>();
}

namespace detail {

// Coordinate descent on standardized columns; beta is updated in place and
// residual kept consistent. Returns sweeps used.
inline int lasso_cd(const Eigen::MatrixXd& xs, Eigen::VectorXd& beta,
                    Eigen::VectorXd& resid, const std::vector<char>& active_col,
                    double lambda, const SolverOptions& opt) {
  const double n = static_cast<double>(xs.rows());
  const auto p = xs.cols();
  int sweeps = 0;
  std::vector<Eigen::Index> working;

  auto update_one = [&](Eigen::Index j) -> double {
    const double old = beta[j];
    const double z = xs.col(j).dot(resid) / n + old;
    const double next = soft_threshold(z, lambda);
    if (next != old) {
      resid.noalias() -= (next - old) * xs.col(j);
      beta[j] = next;
    }
    return std::abs(next - old);
  };

  while (sweeps < opt.max_sweeps) {
    // Full sweep; also rebuilds the working set.
    ++sweeps;
    double delta = 0.0;
    working.clear();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!active_col[static_cast<std::size_t>(j)]) continue;
      delta = std::max(delta, update_one(j));
      if (beta[j] != 0.0) working.push_back(j);
    }
    if (delta < opt.tol) break;
    // Iterate the working set until it settles, then re-check everything.
    while (sweeps < opt.max_sweeps) {
      ++sweeps;
      double wdelta = 0.0;
      for (Eigen::Index j : working) wdelta = std::max(wdelta, update_one(j));
      if (wdelta < opt.tol) break;
    }
  }
  return sweeps;
}

struct LassoPathFit {
  // Standardized-scale coefficients per grid point.
  std::vector<Eigen::VectorXd> beta;
  Standardizer std;
  double y_mean = 0.0;
};

inline LassoPathFit lasso_path(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y,
                               const std::vector<double>& grid,
                               const SolverOptions& opt) {
  LassoPathFit fit;
  fit.std = Standardizer::fit(x);
  fit.y_mean = y.mean();
  const Eigen::MatrixXd xs = fit.std.transform(x);
  const Eigen::VectorXd yc = y.array() - fit.y_mean;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd resid = yc;
  fit.beta.reserve(grid.size());
  for (double lambda : grid) {
    lasso_cd(xs, beta, resid, fit.std.active, lambda, opt);
    fit.beta.push_back(beta);
  }
  return fit;
}

inline LinearLassoModel from_path_point(const LassoPathFit& path,
                                        std::size_t index, double lambda,
                                        Eigen::Index n_train) {
  LinearLassoModel model;
  const Eigen::VectorXd& bs = path.beta[index];
  model.coef = bs.array() / path.std.scale.array();
  model.intercept = path.y_mean - model.coef.dot(path.std.mean);
  model.lambda = lambda;
  model.n_train = n_train;
  return model;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x,
                                 const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return out;
}

inline Eigen::VectorXd take_rows(const Eigen::VectorXd& v,
                                 const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  }
  return out;
}

}  // namespace detail

// Fits the lasso at a fixed penalty. lambda = kCvLambda is handled by
// fit_lasso below.
inline LinearLassoModel fit_lasso_fixed(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        double lambda,
                                        const SolverOptions& opt = {}) {
  if (x.rows() != y.size() || y.size() < 2) {
    throw Error("bad_learner_input",
                "lasso requires matching X/y with at least 2 rows");
  }
  if (!(lambda >= 0.0)) {
    throw Error("bad_learner_input", "lasso penalty must be >= 0");
  }
  detail::LassoPathFit path = detail::lasso_path(x, y, {lambda}, opt);
  return detail::from_path_point(path, 0, lambda, x.rows());
}

// Lambda selection by internal K-fold CV over a geometric grid anchored at
// lambda_max (the smallest penalty zeroing every coefficient on the full
// sample); minimum mean validation MSE wins, ties to the larger lambda.
inline LinearLassoModel fit_lasso_cv(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     const SolverOptions& opt,
                                     std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (n != y.size() || n < 2) {
    throw Error("bad_learner_input",
                "lasso requires matching X/y with at least 2 rows");
  }
  const detail::Standardizer std_full = detail::Standardizer::fit(x);
  const Eigen::VectorXd yc = y.array() - y.mean();
  double lambda_max = 0.0;
  {
    const Eigen::MatrixXd xs = std_full.transform(x);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!std_full.active[static_cast<std::size_t>(j)]) continue;
      lambda_max = std::max(
          lambda_max, std::abs(xs.col(j).dot(yc)) / static_cast<double>(n));
    }
  }
  if (!(lambda_max > 0.0)) {
    // Constant outcome (or no informative column): intercept-only model.
    LinearLassoModel model;
    model.coef = Eigen::VectorXd::Zero(x.cols());
    model.intercept = y.mean();
    model.lambda = 0.0;
    model.n_train = n;
    return model;
  }

  const std::vector<double> grid =
      detail::lambda_grid(lambda_max, opt.grid_size, opt.lambda_min_ratio);
  const int folds = std::min<int>(opt.cv_folds, static_cast<int>(n));
  const std::vector<int> ids = detail::cv_fold_ids(n, folds, seed);

  std::vector<double> sse(grid.size(), 0.0);
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
    const detail::LassoPathFit path = detail::lasso_path(xt, yt, grid, opt);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const LinearLassoModel m =
          detail::from_path_point(path, g, grid[g], xt.rows());
      sse[g] += (m.predict(xv) - yv).squaredNorm();
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (sse[g] < sse[best]) best = g;
  }

  const detail::LassoPathFit path = detail::lasso_path(x, y, grid, opt);
  return detail::from_path_point(path, best, grid[best], n);
}

inline LinearLassoModel fit_lasso(const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, double lambda,
                                  const SolverOptions& opt = {},
                                  std::uint64_t seed = 0) {
  return is_cv_lambda(lambda) ? fit_lasso_cv(x, y, opt, seed)
                              : fit_lasso_fixed(x, y, lambda, opt);
}

}  // namespace seqdml
