#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "seqdml/effects.hpp"
#include "seqdml/scores.hpp"
#include "seqdml/simulation.hpp"

using namespace seqdml;

namespace {

std::string catch_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("design matches its stated moments", "[simulation]") {
  const Eigen::Index n = 20000, p = 5;
  const PanelDataset data = simulate_dgp({n, p, 101});

  // AR(1)-style covariance: unit variances, 0.5 at lag one, 0.25 at lag two.
  auto cov = [&](const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
    const Eigen::ArrayXd ca = m.col(a).array() - m.col(a).mean();
    const Eigen::ArrayXd cb = m.col(b).array() - m.col(b).mean();
    return (ca * cb).mean();
  };
  CHECK(cov(data.x0, 0, 0) == Catch::Approx(1.0).margin(0.05));
  CHECK(cov(data.x0, 0, 1) == Catch::Approx(0.5).margin(0.05));
  CHECK(cov(data.x0, 0, 2) == Catch::Approx(0.25).margin(0.05));
  CHECK(cov(data.x1, 1, 2) == Catch::Approx(0.5).margin(0.05));

  // Symmetric threshold crossing: half the sample starts treated.
  CHECK(data.d1.cast<double>().mean() == Catch::Approx(0.5).margin(0.02));

  // OLS on the true regressors recovers the structural coefficients.
  Eigen::MatrixXd design(n, 3 + 2 * p);
  design.col(0).setOnes();
  design.col(1) = data.d1.cast<double>();
  design.col(2) = data.d2.cast<double>();
  design.middleCols(3, p) = data.x0;
  design.middleCols(3 + p, p) = data.x1;
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(data.y2);
  CHECK(coef[1] == Catch::Approx(1.0).margin(0.05));
  CHECK(coef[2] == Catch::Approx(1.0).margin(0.05));
  const Eigen::VectorXd beta = dgp_beta(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    CHECK(coef[3 + j] == Catch::Approx(beta[j]).margin(0.05));
    CHECK(coef[3 + p + j] == Catch::Approx(beta[j]).margin(0.05));
  }
}

TEST_CASE("simulation is seed-deterministic", "[simulation]") {
  const PanelDataset a = simulate_dgp({300, 4, 7});
  const PanelDataset b = simulate_dgp({300, 4, 7});
  const PanelDataset c = simulate_dgp({300, 4, 8});
  CHECK(a.y2 == b.y2);
  CHECK(a.x0 == b.x0);
  CHECK(a.d1 == b.d1);
  CHECK(a.y2 != c.y2);

  CHECK(catch_code([] { simulate_dgp({0, 5, 1}); }) == "bad_dgp_config");
  CHECK(catch_code([] { simulate_dgp({100, 0, 1}); }) == "bad_dgp_config");
}

TEST_CASE("decaying coefficients", "[simulation]") {
  const Eigen::VectorXd beta = dgp_beta(4);
  CHECK(beta[0] == Catch::Approx(0.4));
  CHECK(beta[1] == Catch::Approx(0.4 / 16.0));
  CHECK(beta[3] == Catch::Approx(0.4 / 256.0));
}

TEST_CASE("closed-form nuisances at reference points", "[simulation]") {
  const OracleNuisances oracle(3);
  CHECK(oracle.p1(1, 0.0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(oracle.p1(0, 0.0) == Catch::Approx(0.5).margin(1e-15));
  // Phi(0.3): the carryover alone moves the second-period propensity.
  CHECK(oracle.p2(1, 1, 0.0, 0.0) ==
        Catch::Approx(0.6179114221889526).margin(1e-12));
  CHECK(oracle.p2(1, 0, 0.0, 0.0) ==
        Catch::Approx(1.0 - 0.6179114221889526).margin(1e-12));
  CHECK(oracle.mu({1, 1}, 0.0, 0.0) == 2.0);
  CHECK(oracle.mu({1, 0}, 0.5, -0.2) == Catch::Approx(1.3).margin(1e-15));
  CHECK(oracle.nu({0, 0}, 0.0) == 0.0);
  CHECK(oracle.g(0.0) == Catch::Approx(0.5).margin(1e-15));

  const PanelDataset data = simulate_dgp({200, 3, 55});
  const NuisanceFits narrow = oracle_nuisance_fits(data, {1, 1}, 0.4);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    CHECK(narrow.p1hat[i] >= 0.4);
    CHECK(narrow.p1hat[i] <= 0.6);
  }
}

TEST_CASE("monte carlo report identities", "[simulation]") {
  MonteCarloConfig cfg;
  cfg.use_oracle = true;
  cfg.seed = 5;
  const std::vector<MonteCarloReport> rows =
      run_monte_carlo({{3, 400}}, 4, cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].estimator == "ate");
  CHECK(rows[1].estimator == "ate_weighted");
  for (const auto& r : rows) {
    CHECK(r.p == 3);
    CHECK(r.n == 400);
    CHECK(r.reps == 4);
    CHECK(r.true_effect == 2.0);
    CHECK(r.rmse * r.rmse ==
          Catch::Approx(r.bias * r.bias + r.sd * r.sd).margin(1e-12));
    CHECK(r.coverage_pct >= 0.0);
    CHECK(r.coverage_pct <= 100.0);
    CHECK(r.avg_se > 0.0);
  }

  CHECK(catch_code([&] { run_monte_carlo({{3, 400}}, 1, cfg); }) ==
        "bad_rep_count");

  // Same seed, same reports; bumping the seed moves the draws.
  const auto again = run_monte_carlo({{3, 400}}, 4, cfg);
  CHECK(again[0].bias == rows[0].bias);
  CHECK(again[0].sd == rows[0].sd);
  MonteCarloConfig other = cfg;
  other.seed = 6;
  const auto moved = run_monte_carlo({{3, 400}}, 4, other);
  CHECK(moved[0].bias != rows[0].bias);
}

TEST_CASE("confounding audit separates signal from noise", "[simulation]") {
  const Eigen::Index n = 3000;
  auto g = rng::engine(61);
  rng::NormalDraw normal;

  // Pure noise: every R2 flavor should be near zero.
  Eigen::MatrixXd x0(n, 2), x1(n, 2);
  Eigen::VectorXd y2(n);
  Eigen::VectorXi d1(n), d2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x0(i, 0) = normal(g);
    x0(i, 1) = normal(g);
    x1(i, 0) = normal(g);
    x1(i, 1) = normal(g);
    y2[i] = normal(g);
    d1[i] = (rng::uniform01(g) < 0.5) ? 1 : 0;
    d2[i] = (rng::uniform01(g) < 0.5) ? 1 : 0;
  }
  const AuditReport noise =
      confounding_audit(validate_dataset(y2, d1, d2, x0, x1));
  CHECK(noise.r2_outcome < 0.05);
  CHECK(noise.pseudo_r2_d1 < 0.05);
  CHECK(noise.pseudo_r2_d2 < 0.05);

  // Deterministic treatment: the pseudo-R2 saturates.
  Eigen::VectorXi d1_sep(n);
  for (Eigen::Index i = 0; i < n; ++i) d1_sep[i] = x0(i, 0) > 0.0 ? 1 : 0;
  const AuditReport sep =
      confounding_audit(validate_dataset(y2, d1_sep, d2, x0, x1));
  CHECK(sep.pseudo_r2_d1 > 0.9);

  // Single-class treatment has no null likelihood.
  const Eigen::VectorXi ones = Eigen::VectorXi::Ones(n);
  CHECK(catch_code([&] {
          confounding_audit(validate_dataset(y2, ones, d2, x0, x1));
        }) == "single_class_stratum");
}

TEST_CASE("score drift is second order in nuisance error", "[simulation]") {
  const PanelDataset data = simulate_dgp({100000, 5, 2});
  const OrthogonalityReport rep = check_orthogonality(data, {1, 1});

  CHECK(rep.truth == 2.0);
  CHECK(std::abs(rep.baseline_mean - rep.truth) <= 3.0 * rep.baseline_se);

  REQUIRE(rep.directions.size() == 2);
  CHECK(rep.directions[0].direction == "constant");
  CHECK(rep.directions[1].direction == "x0_linear");
  for (const auto& dir : rep.directions) {
    REQUIRE(dir.r.size() == 8);
    REQUIRE(dir.drift_psi.size() == dir.r.size());
    CHECK(dir.slope_psi >= 1.8);
  }
  // The plain inverse-probability average has a first-order term; it is the
  // negative control that the slope statistic must not absolve.
  CHECK(rep.directions[0].slope_ipw <= 1.3);
  CHECK(rep.directions[0].slope_ipw >= 0.7);
}

TEST_CASE("nu-only error moves the mean within sampling noise",
          "[simulation]") {
  const PanelDataset data = simulate_dgp({50000, 5, 9});
  const NuisanceFits base = oracle_nuisance_fits(data, {1, 1});
  const ScoreVector sv0 = score_psi(data, base, 0.0);
  const EffectEstimate e0 = estimate_potential_outcome(sv0);

  // A constant shift of nuhat enters psi through 1 - 1{D1=d1}/p1hat, whose
  // oracle mean is zero, so the estimate moves by O(r/sqrt(n)) only.
  for (double r : {0.1, 0.5, 1.0}) {
    NuisanceFits fits = base;
    fits.nuhat.array() += r;
    const EffectEstimate e =
        estimate_potential_outcome(score_psi(data, fits, 0.0));
    CHECK(std::abs(e.estimate - e0.estimate) <= 4.0 * e0.se * r);
  }
}

TEST_CASE("perturbations that exit the unit interval are rejected",
          "[simulation]") {
  const PanelDataset data = simulate_dgp({500, 3, 15});
  OrthoSpec spec;
  spec.amp_prop = 40.0;  // pushes Phi to exactly 1 in double precision
  spec.r_lo = 1.0;
  spec.r_hi = 1.0;
  spec.r_points = 1;
  CHECK(catch_code([&] { check_orthogonality(data, {1, 1}, spec); }) ==
        "invalid_perturbation");
}
