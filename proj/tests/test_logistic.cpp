#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "seqdml/logistic.hpp"
#include "seqdml/rng.hpp"
#include "seqdml/stats.hpp"

using namespace seqdml;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index p,
                              std::uint64_t seed) {
  auto g = rng::engine(seed);
  rng::NormalDraw normal;
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = normal(g);
  }
  return x;
}

double sigmoid(double e) { return 1.0 / (1.0 + std::exp(-e)); }

// Penalized mean deviance on standardized x; the grid-search oracle and the
// solver are compared in this common objective.
double penalized_objective(const Eigen::VectorXd& xs, const Eigen::VectorXd& y,
                           double b0, double b1, double lambda) {
  double nll = 0.0;
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const double eta = b0 + b1 * xs[i];
    nll += std::log1p(std::exp(eta)) - y[i] * eta;
  }
  return nll / static_cast<double>(xs.size()) + lambda * std::abs(b1);
}

}  // namespace

TEST_CASE("null model under heavy shrinkage", "[logistic]") {
  const Eigen::Index n = 1000;
  const Eigen::MatrixXd x = random_matrix(n, 3, 17);
  auto g = rng::engine(18);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = (rng::uniform01(g) < 0.5) ? 1.0 : 0.0;  // independent of x
  }
  const LogisticLassoModel m = fit_logistic_lasso(x, y, 5.0);
  const Eigen::VectorXd p = m.predict_proba(x);
  CHECK(m.coef.cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK(p[i] == Catch::Approx(0.5).margin(0.05));
  }
}

TEST_CASE("separable data stays finite and monotone", "[logistic]") {
  Eigen::MatrixXd x(10, 1);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i) - 4.5;
    y[i] = (i >= 5) ? 1.0 : 0.0;
  }
  const LogisticLassoModel m = fit_logistic_lasso(x, y, 0.1);
  REQUIRE(std::isfinite(m.coef[0]));
  REQUIRE(std::isfinite(m.intercept));
  const Eigen::VectorXd p = m.predict_proba(x);
  for (int i = 0; i + 1 < 10; ++i) {
    CHECK(p[i] <= p[i + 1] + 1e-12);
  }
}

TEST_CASE("solver matches a brute-force grid oracle", "[logistic]") {
  const Eigen::Index n = 60;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  auto g = rng::engine(200);
  rng::NormalDraw normal;
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = normal(g);
    y[i] = (rng::uniform01(g) < sigmoid(0.4 + 1.3 * x(i, 0))) ? 1.0 : 0.0;
  }
  const double lambda = 0.05;
  const LogisticLassoModel m = fit_logistic_lasso(x, y, lambda);

  // Standardize exactly as the solver does, then search (b0, b1) on a fine
  // grid around the relevant region.
  const double mu = x.col(0).mean();
  const double sd =
      std::sqrt((x.col(0).array() - mu).square().sum() / static_cast<double>(n));
  const Eigen::VectorXd xs = (x.col(0).array() - mu) / sd;

  double best = std::numeric_limits<double>::infinity();
  for (double b0 = -2.0; b0 <= 2.0; b0 += 0.005) {
    for (double b1 = -3.0; b1 <= 3.0; b1 += 0.005) {
      best = std::min(best, penalized_objective(xs, y, b0, b1, lambda));
    }
  }
  const double b1_fit = m.coef[0] * sd;
  const double b0_fit = m.intercept + m.coef[0] * mu;
  const double at_fit = penalized_objective(xs, y, b0_fit, b1_fit, lambda);
  CHECK(at_fit <= best + 1e-4);
}

TEST_CASE("single-class response degenerates to the clipped rate",
          "[logistic]") {
  const Eigen::MatrixXd x = random_matrix(25, 2, 4);
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(25);
  const LogisticLassoModel m = fit_logistic_lasso(x, y, 0.1);
  CHECK(m.degenerate);
  CHECK(m.coef.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd p = m.predict_proba(x);
  for (Eigen::Index i = 0; i < 25; ++i) {
    CHECK(p[i] == Catch::Approx(1.0 - m.p_min));
  }
}

TEST_CASE("probabilities respect the clipping band", "[logistic]") {
  Eigen::MatrixXd x(40, 1);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = (i < 20) ? -8.0 + 0.01 * i : 8.0 + 0.01 * i;
    y[i] = (i < 20) ? 0.0 : 1.0;
  }
  SolverOptions opt;
  const LogisticLassoModel m = fit_logistic_lasso(x, y, 0.001, opt);
  const Eigen::VectorXd p = m.predict_proba(x);
  for (Eigen::Index i = 0; i < 40; ++i) {
    CHECK(p[i] >= opt.p_min);
    CHECK(p[i] <= 1.0 - opt.p_min);
  }
}

TEST_CASE("subgradient optimality at the solution", "[logistic]") {
  const Eigen::Index n = 300, p = 5;
  const Eigen::MatrixXd x = random_matrix(n, p, 61);
  Eigen::VectorXd y(n);
  auto g = rng::engine(62);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = (rng::uniform01(g) < sigmoid(0.8 * x(i, 0) - 0.6 * x(i, 2))) ? 1.0
                                                                        : 0.0;
  }
  const double lambda = 0.03;
  const LogisticLassoModel m = fit_logistic_lasso(x, y, lambda);

  Eigen::MatrixXd xs = x;
  Eigen::VectorXd beta_std(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mu = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mu).square().sum() /
                                static_cast<double>(n));
    xs.col(j) = (x.col(j).array() - mu) / sd;
    beta_std[j] = m.coef[j] * sd;
  }
  const double b0 = m.intercept + m.coef.dot(
      x.colwise().mean().transpose().eval());
  Eigen::VectorXd prob(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    prob[i] = sigmoid(b0 + xs.row(i).dot(beta_std));
  }
  // Mean log-likelihood gradient per coordinate must sit inside [-lambda,
  // lambda], touching the boundary where the coefficient is active.
  for (Eigen::Index j = 0; j < p; ++j) {
    const double grad = xs.col(j).dot(y - prob) / static_cast<double>(n);
    if (beta_std[j] != 0.0) {
      CHECK(std::abs(grad) == Catch::Approx(lambda).margin(2e-4));
    } else {
      CHECK(std::abs(grad) <= lambda + 2e-4);
    }
  }
  // Intercept is unpenalized: its gradient is zero.
  CHECK(std::abs((y - prob).mean()) < 2e-4);
}

TEST_CASE("CV logistic lasso tracks the true link", "[logistic]") {
  const Eigen::Index n = 800, p = 6;
  const Eigen::MatrixXd x = random_matrix(n, p, 71);
  Eigen::VectorXd y(n), truth(n);
  auto g = rng::engine(72);
  for (Eigen::Index i = 0; i < n; ++i) {
    truth[i] = sigmoid(1.2 * x(i, 0) - 0.9 * x(i, 1));
    y[i] = (rng::uniform01(g) < truth[i]) ? 1.0 : 0.0;
  }
  const LogisticLassoModel m = fit_logistic_lasso(x, y, kCvLambda, {}, 7);
  CHECK(m.lambda > 0.0);
  const Eigen::VectorXd phat = m.predict_proba(x);
  CHECK((phat - truth).cwiseAbs().mean() < 0.08);

  const LogisticLassoModel m2 = fit_logistic_lasso(x, y, kCvLambda, {}, 7);
  CHECK(m2.lambda == m.lambda);
  CHECK(m2.coef == m.coef);
}

TEST_CASE("logistic input validation", "[logistic]") {
  const Eigen::MatrixXd x = random_matrix(10, 1, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  y[3] = 0.5;
  CHECK_THROWS_AS(fit_logistic_lasso(x, y, 0.1), Error);  // non-binary
  CHECK_THROWS_AS(
      fit_logistic_lasso(x, Eigen::VectorXd::Zero(10), -1.0),
      Error);  // negative penalty
}
