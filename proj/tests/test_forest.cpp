#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "seqdml/forest.hpp"
#include "seqdml/rng.hpp"

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

}  // namespace

TEST_CASE("constant outcome predicts exactly", "[forest]") {
  const Eigen::MatrixXd x = random_matrix(50, 3, 5);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(50, 2.75);
  const ForestModel m = fit_forest(x, y, {}, 1);
  const Eigen::VectorXd pred = m.predict(random_matrix(20, 3, 6));
  for (Eigen::Index i = 0; i < 20; ++i) {
    CHECK(pred[i] == 2.75);
  }
}

TEST_CASE("step function is learned to low error", "[forest]") {
  const Eigen::Index n = 2000;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  auto g = rng::engine(9);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 4.0 * rng::uniform01(g) - 2.0;
    y[i] = (x(i, 0) > 0.0) ? 1.0 : 0.0;
  }
  ForestOptions opt;  // 200 trees
  const ForestModel m = fit_forest(x, y, opt, 11);
  Eigen::MatrixXd probe(2, 1);
  probe << 1.0, -1.0;
  const Eigen::VectorXd pred = m.predict(probe);
  const double mse =
      0.5 * ((pred[0] - 1.0) * (pred[0] - 1.0) + pred[1] * pred[1]);
  CHECK(mse < 0.02);
}

TEST_CASE("forest is deterministic given its seed", "[forest]") {
  const Eigen::MatrixXd x = random_matrix(150, 4, 13);
  Eigen::VectorXd y = x.col(0).array().sin() + x.col(2).array();
  ForestOptions opt;
  opt.trees = 25;
  const ForestModel a = fit_forest(x, y, opt, 99);
  const ForestModel b = fit_forest(x, y, opt, 99);
  const Eigen::MatrixXd probe = random_matrix(30, 4, 14);
  CHECK(a.predict(probe) == b.predict(probe));

  const ForestModel c = fit_forest(x, y, opt, 100);
  CHECK(a.predict(probe) != c.predict(probe));
}

TEST_CASE("predictions stay within the training range", "[forest]") {
  const Eigen::MatrixXd x = random_matrix(200, 3, 21);
  Eigen::VectorXd y = 3.0 * x.col(1);
  ForestOptions opt;
  opt.trees = 40;
  const ForestModel m = fit_forest(x, y, opt, 3);
  const Eigen::VectorXd pred = m.predict(random_matrix(100, 3, 22) * 2.0);
  CHECK(pred.minCoeff() >= y.minCoeff() - 1e-12);
  CHECK(pred.maxCoeff() <= y.maxCoeff() + 1e-12);
}

TEST_CASE("identical rows collapse to the mean", "[forest]") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(30, 2);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = static_cast<double>(i);
  ForestOptions opt;
  opt.trees = 10;
  const ForestModel m = fit_forest(x, y, opt, 8);
  const Eigen::VectorXd pred = m.predict(x.topRows(3));
  // Bootstrap means differ per tree, but with no splits available every
  // prediction is that tree's sample mean; the ensemble must stay close to
  // the overall mean and be constant across probe rows.
  CHECK(pred[0] == pred[1]);
  CHECK(pred[1] == pred[2]);
  CHECK(pred[0] == Catch::Approx(y.mean()).margin(1.5));
}

TEST_CASE("forest input validation", "[forest]") {
  ForestOptions opt;
  opt.min_leaf = 5;
  const Eigen::MatrixXd x = random_matrix(8, 2, 2);  // < 2 * min_leaf
  CHECK_THROWS_AS(fit_forest(x, Eigen::VectorXd::Zero(8), opt, 1), Error);

  const Eigen::MatrixXd x2 = random_matrix(40, 2, 2);
  const ForestModel m = fit_forest(x2, Eigen::VectorXd::Zero(40), opt, 1);
  CHECK_THROWS_AS(m.predict(random_matrix(5, 3, 3)), Error);
}
