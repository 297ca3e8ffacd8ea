#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "seqdml/crossfit.hpp"
#include "seqdml/dataset.hpp"
#include "seqdml/effects.hpp"
#include "seqdml/errors.hpp"
#include "seqdml/rng.hpp"
#include "seqdml/scores.hpp"
#include "seqdml/stats.hpp"

namespace seqdml {

// Simulation design: per-period covariates X0, X1 ~ N(0, Sigma) with
// Sigma_ij = 0.5^|i-j|, coefficient beta_i = 0.4/i^4 shared by both periods,
// treatments by threshold crossing with carryover 0.3, unit effects in both
// periods:
//   D1 = 1{X0'b + V > 0}
//   D2 = 1{0.3 D1 + X0'b + X1'b + W > 0}
//   Y2 = D1 + D2 + X0'b + X1'b + U,  U,V,W iid N(0,1).
struct DgpConfig {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::uint64_t seed = 0;
};

inline Eigen::VectorXd dgp_beta(Eigen::Index p) {
  Eigen::VectorXd beta(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double k = static_cast<double>(i + 1);
    beta[i] = 0.4 / (k * k * k * k);
  }
  return beta;
}

inline Eigen::MatrixXd dgp_covariance(Eigen::Index p) {
  Eigen::MatrixXd sigma(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      sigma(i, j) = std::pow(0.5, std::abs(static_cast<double>(i - j)));
    }
  }
  return sigma;
}

inline PanelDataset simulate_dgp(const DgpConfig& cfg) {
  if (cfg.n < 1 || cfg.p < 1) {
    throw Error("bad_dgp_config", "n and p must be positive");
  }
  const Eigen::VectorXd beta = dgp_beta(cfg.p);
  // Lower-triangular factor with fixed column order keeps the draw → data
  // map identical across platforms given the same normal stream.
  const Eigen::MatrixXd chol =
      Eigen::LLT<Eigen::MatrixXd>(dgp_covariance(cfg.p)).matrixL();

  auto g = rng::engine(rng::derive(cfg.seed, rng::tag("dgp")));
  rng::NormalDraw normal;
  auto draw_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = normal(g);
    }
    return z;
  };
  auto draw_vector = [&](Eigen::Index rows) {
    Eigen::VectorXd z(rows);
    for (Eigen::Index i = 0; i < rows; ++i) z[i] = normal(g);
    return z;
  };

  Eigen::MatrixXd x0 = draw_matrix(cfg.n, cfg.p) * chol.transpose();
  Eigen::MatrixXd x1 = draw_matrix(cfg.n, cfg.p) * chol.transpose();
  const Eigen::VectorXd v = draw_vector(cfg.n);
  const Eigen::VectorXd w = draw_vector(cfg.n);
  const Eigen::VectorXd u = draw_vector(cfg.n);

  const Eigen::VectorXd idx0 = x0 * beta;
  const Eigen::VectorXd idx1 = x1 * beta;

  Eigen::VectorXi d1(cfg.n), d2(cfg.n);
  Eigen::VectorXd y2(cfg.n);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    d1[i] = (idx0[i] + v[i] > 0.0) ? 1 : 0;
    d2[i] = (0.3 * d1[i] + idx0[i] + idx1[i] + w[i] > 0.0) ? 1 : 0;
    y2[i] = d1[i] + d2[i] + idx0[i] + idx1[i] + u[i];
  }

  std::vector<std::string> x0_names(cfg.p), x1_names(cfg.p);
  for (Eigen::Index j = 0; j < cfg.p; ++j) {
    x0_names[j] = "x0_" + std::to_string(j + 1);
    x1_names[j] = "x1_" + std::to_string(j + 1);
  }
  return validate_dataset(std::move(y2), std::move(d1), std::move(d2),
                          std::move(x0), std::move(x1), std::nullopt,
                          std::move(x0_names), std::move(x1_names));
}

// Closed-form nuisances implied by the design; the nested mean collapses to
// nu = d1 + d2 + x0'b because X1 has mean zero given (D1, X0) under this
// DGP.
struct OracleNuisances {
  Eigen::VectorXd beta;

  explicit OracleNuisances(Eigen::Index p) : beta(dgp_beta(p)) {}

  double p1(int d1, double index0) const {
    const double pr = stats::norm_cdf(index0);
    return d1 == 1 ? pr : 1.0 - pr;
  }
  double p2(int d1, int d2, double index0, double index1) const {
    const double pr = stats::norm_cdf(0.3 * d1 + index0 + index1);
    return d2 == 1 ? pr : 1.0 - pr;
  }
  double mu(const TreatmentSequence& seq, double index0, double index1) const {
    return seq.d1 + seq.d2 + index0 + index1;
  }
  double nu(const TreatmentSequence& seq, double index0) const {
    return seq.d1 + seq.d2 + index0;
  }
  // Pr(S=1 | X0) for the subgroup S = 1{D1=1}.
  double g(double index0) const { return stats::norm_cdf(index0); }
};

// NuisanceFits populated from the closed forms (no fitting); probabilities
// are clipped like learner output so downstream code sees one contract.
inline NuisanceFits oracle_nuisance_fits(const PanelDataset& data,
                                         const TreatmentSequence& seq,
                                         double p_min = 1e-4,
                                         bool with_g = false) {
  const OracleNuisances oracle(data.p0());
  const Eigen::VectorXd idx0 = data.x0 * oracle.beta;
  const Eigen::VectorXd idx1 = data.x1 * oracle.beta;
  const Eigen::Index n = data.n();

  NuisanceFits fits;
  fits.seq = seq;
  fits.p1hat.resize(n);
  fits.p2hat.resize(n);
  fits.muhat.resize(n);
  fits.nuhat.resize(n);
  fits.fold = Eigen::VectorXi::Zero(n);
  if (with_g) fits.ghat = Eigen::VectorXd(n);
  auto clip = [&](double p) {
    return std::clamp(p, p_min, 1.0 - p_min);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    fits.p1hat[i] = clip(oracle.p1(seq.d1, idx0[i]));
    fits.p2hat[i] = clip(oracle.p2(seq.d1, seq.d2, idx0[i], idx1[i]));
    fits.muhat[i] = oracle.mu(seq, idx0[i], idx1[i]);
    fits.nuhat[i] = oracle.nu(seq, idx0[i]);
    if (with_g) (*fits.ghat)[i] = clip(oracle.g(idx0[i]));
  }
  return fits;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloCell {
  Eigen::Index p = 0;
  Eigen::Index n = 0;
};

struct MonteCarloConfig {
  int k = 3;            // "3-fold cross-fitting is used"
  double trim = 0.01;
  std::uint64_t seed = 1;
  NuisanceConfig nuisance;
  bool use_oracle = false;
};

struct MonteCarloReport {
  std::string estimator;  // "ate" or "ate_weighted"
  Eigen::Index p = 0;
  Eigen::Index n = 0;
  int reps = 0;
  double true_effect = 2.0;
  double bias = 0.0;       // |mean estimate - truth|
  double sd = 0.0;         // dispersion of estimates (divisor R)
  double avg_se = 0.0;
  double rmse = 0.0;
  double coverage_pct = 0.0;
  double wall_seconds = 0.0;  // diagnostics only; never serialized
};

namespace detail {

struct RepResult {
  double estimate = 0.0;
  double se = 0.0;
  bool covered = false;
};

inline MonteCarloReport reduce_reps(const std::vector<RepResult>& reps,
                                    double truth) {
  MonteCarloReport r;
  r.reps = static_cast<int>(reps.size());
  r.true_effect = truth;
  const double cnt = static_cast<double>(reps.size());
  double sum = 0.0;
  for (const auto& x : reps) sum += x.estimate;
  const double mean_est = sum / cnt;
  r.bias = std::abs(mean_est - truth);
  double ss = 0.0, mse = 0.0, se_sum = 0.0, cover = 0.0;
  for (const auto& x : reps) {
    ss += (x.estimate - mean_est) * (x.estimate - mean_est);
    mse += (x.estimate - truth) * (x.estimate - truth);
    se_sum += x.se;
    cover += x.covered ? 1.0 : 0.0;
  }
  r.sd = std::sqrt(ss / cnt);
  r.rmse = std::sqrt(mse / cnt);
  r.avg_se = se_sum / cnt;
  r.coverage_pct = 100.0 * cover / cnt;
  return r;
}

}  // namespace detail

// Per cell, repeats simulate → cross-fit → estimate for the population ATE
// and the S = 1{D1=1} weighted ATE of (1,1) vs (0,0). Two report rows per
// cell. Failed replications abort the cell with the rep index attached.
inline std::vector<MonteCarloReport> run_monte_carlo(
    const std::vector<MonteCarloCell>& grid, int reps,
    const MonteCarloConfig& cfg) {
  if (reps < 2) throw Error("bad_rep_count", "need at least 2 replications");
  const TreatmentSequence arm_a{1, 1};
  const TreatmentSequence arm_b{0, 0};
  const double truth = 2.0;

  std::vector<MonteCarloReport> out;
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<detail::RepResult> plain(reps), weighted(reps);
    for (int rep = 0; rep < reps; ++rep) {
      try {
        const DgpConfig dgp{
            grid[cell].n, grid[cell].p,
            rng::derive(cfg.seed, cell, static_cast<std::uint64_t>(rep),
                        rng::tag("dgp"))};
        const PanelDataset data = simulate_dgp(dgp);
        Eigen::VectorXi s(data.n());
        for (Eigen::Index i = 0; i < data.n(); ++i) {
          s[i] = (data.d1[i] == 1) ? 1 : 0;
        }

        NuisanceFits fits_a, fits_b;
        if (cfg.use_oracle) {
          fits_a = oracle_nuisance_fits(data, arm_a, cfg.nuisance.p_min(),
                                        /*with_g=*/true);
          fits_b = oracle_nuisance_fits(data, arm_b, cfg.nuisance.p_min(),
                                        /*with_g=*/true);
        } else {
          const FoldPlan plan = make_folds(
              data.n(), cfg.k,
              rng::derive(cfg.seed, cell, static_cast<std::uint64_t>(rep),
                          rng::tag("plan")));
          fits_a = cross_fit(data, arm_a, plan, cfg.nuisance, s);
          fits_b = cross_fit(data, arm_b, plan, cfg.nuisance, s);
        }

        const ScoreVector sv_a = score_psi(data, fits_a, cfg.trim);
        const ScoreVector sv_b = score_psi(data, fits_b, cfg.trim);
        const EffectEstimate ate = estimate_ate(sv_a, sv_b);
        plain[rep] = {ate.estimate, ate.se,
                      ate.ci_low <= truth && truth <= ate.ci_high};

        const WeightedScore wv_a = score_psi_weighted(data, fits_a, s, cfg.trim);
        const WeightedScore wv_b = score_psi_weighted(data, fits_b, s, cfg.trim);
        const EffectEstimate wate =
            estimate_weighted_ate(wv_a, wv_b, "d1==1");
        weighted[rep] = {wate.estimate, wate.se,
                         wate.ci_low <= truth && truth <= wate.ci_high};
      } catch (const Error& e) {
        throw Error(e.code(), "cell (p=" + std::to_string(grid[cell].p) +
                                  ", n=" + std::to_string(grid[cell].n) +
                                  ") rep " + std::to_string(rep) + ": " +
                                  e.what());
      }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    MonteCarloReport r1 = detail::reduce_reps(plain, truth);
    r1.estimator = "ate";
    r1.p = grid[cell].p;
    r1.n = grid[cell].n;
    r1.wall_seconds = wall;
    MonteCarloReport r2 = detail::reduce_reps(weighted, truth);
    r2.estimator = "ate_weighted";
    r2.p = grid[cell].p;
    r2.n = grid[cell].n;
    r2.wall_seconds = wall;
    out.push_back(std::move(r1));
    out.push_back(std::move(r2));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Confounding audit

struct AuditReport {
  double r2_outcome = 0.0;     // OLS R2 of Y2 on (X0, X1)
  double pseudo_r2_d1 = 0.0;   // Nagelkerke, D1 on X0
  double pseudo_r2_d2 = 0.0;   // Nagelkerke, D2 on (D1, X0, X1)
};

namespace detail {

inline double ols_r2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  const Eigen::VectorXd coef =
      design.colPivHouseholderQr().solve(y);
  const double ssr = (y - design * coef).squaredNorm();
  const double sst = (y.array() - y.mean()).square().sum();
  if (sst <= 0.0) return 0.0;
  return 1.0 - ssr / sst;
}

// Unpenalized logistic log-likelihood via IRLS (Newton steps on the full
// design). Returns the maximized log-likelihood.
inline double logistic_loglik(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd design(n, x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(design.cols());

  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd eta =
        (design * coef).cwiseMax(-30.0).cwiseMin(30.0);
    const Eigen::VectorXd p =
        eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
    const Eigen::VectorXd w =
        p.array() * (1.0 - p.array()) + 1e-10;
    const Eigen::MatrixXd xtw = design.transpose() * w.asDiagonal();
    const Eigen::VectorXd grad = design.transpose() * (y - p);
    const Eigen::VectorXd step =
        (xtw * design).ldlt().solve(grad);
    coef += step;
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }

  const Eigen::VectorXd eta = (design * coef).cwiseMax(-30.0).cwiseMin(30.0);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ll += y[i] * eta[i] - std::log1p(std::exp(eta[i]));
  }
  return ll;
}

inline double null_loglik(const Eigen::VectorXd& y) {
  const double rate = y.mean();
  if (rate <= 0.0 || rate >= 1.0) {
    throw Error("single_class_stratum",
                "treatment column is single-class; audit undefined");
  }
  const double n = static_cast<double>(y.size());
  return n * (rate * std::log(rate) + (1.0 - rate) * std::log(1.0 - rate));
}

// Nagelkerke (1991): Cox-Snell R2 rescaled by its maximum.
inline double nagelkerke(double ll_null, double ll_fit, Eigen::Index n) {
  const double nn = static_cast<double>(n);
  const double cox_snell = 1.0 - std::exp(2.0 * (ll_null - ll_fit) / nn);
  const double max_cs = 1.0 - std::exp(2.0 * ll_null / nn);
  return cox_snell / max_cs;
}

}  // namespace detail

// How predictable outcome and treatments are from observables, matching the
// design summary the simulation section reports.
inline AuditReport confounding_audit(const PanelDataset& data) {
  AuditReport rep;
  const Eigen::MatrixXd xbar = data.xbar();
  rep.r2_outcome = detail::ols_r2(xbar, data.y2);

  const Eigen::VectorXd d1 = data.d1.cast<double>();
  const Eigen::VectorXd d2 = data.d2.cast<double>();
  rep.pseudo_r2_d1 = detail::nagelkerke(
      detail::null_loglik(d1), detail::logistic_loglik(data.x0, d1), data.n());

  Eigen::MatrixXd x_d2(data.n(), xbar.cols() + 1);
  x_d2.col(0) = d1;
  x_d2.rightCols(xbar.cols()) = xbar;
  rep.pseudo_r2_d2 = detail::nagelkerke(
      detail::null_loglik(d2), detail::logistic_loglik(x_d2, d2), data.n());
  return rep;
}

// ---------------------------------------------------------------------------
// Orthogonality checker

// Perturbs the oracle nuisance vector along a fixed direction h(X), scaled
// to unit root-mean-square on the sample: regressions additively, propensities
// on the probit index so perturbed probabilities stay inside (0,1).
struct OrthoSpec {
  double amp_reg = 2.0;   // mu, nu shift amplitude
  double amp_prop = 0.2;  // probit-index shift amplitude
  double r_lo = 0.2;
  double r_hi = 1.0;
  int r_points = 8;
  double p_min = 1e-4;
};

struct OrthoDirectionResult {
  std::string direction;            // "constant" or "x0_linear"
  double slope_psi = 0.0;           // log-log drift slope, orthogonal score
  double slope_ipw = 0.0;           // same for the IPW negative control
  std::vector<double> r;
  std::vector<double> drift_psi;
  std::vector<double> drift_ipw;
};

struct OrthogonalityReport {
  double truth = 0.0;          // Psi0 = d1 + d2 under the design
  double baseline_mean = 0.0;  // mean score at the oracle nuisances
  double baseline_se = 0.0;
  double baseline_mean_ipw = 0.0;
  std::vector<OrthoDirectionResult> directions;
};

namespace detail {

struct OrthoBasis {
  Eigen::VectorXd i1;       // 1{D1 = d1}
  Eigen::VectorXd i12;      // 1{D1 = d1, D2 = d2}
  Eigen::VectorXd y;
  Eigen::VectorXd mu0, nu0;
  Eigen::VectorXd q1, q2;   // probit indices of the oracle propensities
};

inline double ortho_mean_psi(const OrthoBasis& b, const Eigen::VectorXd& mu,
                             const Eigen::VectorXd& nu,
                             const Eigen::VectorXd& p1,
                             const Eigen::VectorXd& p2) {
  const Eigen::ArrayXd term1 =
      b.i12.array() * (b.y - mu).array() / (p1.array() * p2.array());
  const Eigen::ArrayXd term2 =
      b.i1.array() * (mu - nu).array() / p1.array();
  return (term1 + term2 + nu.array()).mean();
}

inline double ortho_mean_ipw(const OrthoBasis& b, const Eigen::VectorXd& p1,
                             const Eigen::VectorXd& p2) {
  return (b.i12.array() * b.y.array() / (p1.array() * p2.array())).mean();
}

inline Eigen::VectorXd probit_shift(const Eigen::VectorXd& q, double amount,
                                    const Eigen::VectorXd& h) {
  Eigen::VectorXd p(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    p[i] = stats::norm_cdf(q[i] + amount * h[i]);
    if (!(p[i] > 0.0 && p[i] < 1.0)) {
      throw Error("invalid_perturbation",
                  "perturbed propensity left (0,1) at row " +
                      std::to_string(i));
    }
  }
  return p;
}

}  // namespace detail

// Numerically verifies first-order insensitivity of the score to nuisance
// error. For each direction the drift at radius r is the geometric mean of
// the two-sided deviations |Psi(eta0 + r*delta) - Psi(eta0)| and
// |Psi(eta0 - r*delta) - Psi(eta0)|, which cancels the odd-order sampling
// noise that a one-sided probe picks up while leaving a genuinely linear
// drift (the IPW control) intact. Orthogonal scores drift like r^2, so the
// fitted log-log slope is ~2; IPW's is ~1.
inline OrthogonalityReport check_orthogonality(const PanelDataset& data,
                                               const TreatmentSequence& seq,
                                               const OrthoSpec& spec = {}) {
  const OracleNuisances oracle(data.p0());
  const Eigen::VectorXd idx0 = data.x0 * oracle.beta;
  const Eigen::VectorXd idx1 = data.x1 * oracle.beta;
  const Eigen::Index n = data.n();

  detail::OrthoBasis b;
  b.y = data.y2;
  b.i1.resize(n);
  b.i12.resize(n);
  b.mu0.resize(n);
  b.nu0.resize(n);
  b.q1.resize(n);
  b.q2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool m1 = data.d1[i] == seq.d1;
    const bool m2 = data.d2[i] == seq.d2;
    b.i1[i] = m1 ? 1.0 : 0.0;
    b.i12[i] = (m1 && m2) ? 1.0 : 0.0;
    b.mu0[i] = oracle.mu(seq, idx0[i], idx1[i]);
    b.nu0[i] = oracle.nu(seq, idx0[i]);
    const double p1 =
        std::clamp(oracle.p1(seq.d1, idx0[i]), spec.p_min, 1.0 - spec.p_min);
    const double p2 = std::clamp(oracle.p2(seq.d1, seq.d2, idx0[i], idx1[i]),
                                 spec.p_min, 1.0 - spec.p_min);
    b.q1[i] = stats::norm_ppf(p1);
    b.q2[i] = stats::norm_ppf(p2);
  }
  const Eigen::VectorXd p1_0 = b.q1.unaryExpr(
      [](double q) { return stats::norm_cdf(q); });
  const Eigen::VectorXd p2_0 = b.q2.unaryExpr(
      [](double q) { return stats::norm_cdf(q); });

  OrthogonalityReport report;
  report.truth = seq.d1 + seq.d2;
  report.baseline_mean = detail::ortho_mean_psi(b, b.mu0, b.nu0, p1_0, p2_0);
  report.baseline_mean_ipw = detail::ortho_mean_ipw(b, p1_0, p2_0);
  {
    const Eigen::ArrayXd term1 =
        b.i12.array() * (b.y - b.mu0).array() / (p1_0.array() * p2_0.array());
    const Eigen::ArrayXd term2 =
        b.i1.array() * (b.mu0 - b.nu0).array() / p1_0.array();
    const Eigen::ArrayXd psi = term1 + term2 + b.nu0.array();
    report.baseline_se = std::sqrt(
        (psi - psi.mean()).square().mean() / static_cast<double>(n));
  }

  // Unit-RMS directions: intercept-type and slope-type nuisance error.
  std::vector<std::pair<std::string, Eigen::VectorXd>> dirs;
  dirs.emplace_back("constant", Eigen::VectorXd::Ones(n));
  {
    Eigen::VectorXd h = data.x0.col(0);
    const double rms = std::sqrt(h.array().square().mean());
    dirs.emplace_back("x0_linear", h / rms);
  }

  std::vector<double> rs(spec.r_points);
  const double log_lo = std::log(spec.r_lo), log_hi = std::log(spec.r_hi);
  for (int i = 0; i < spec.r_points; ++i) {
    const double t = spec.r_points == 1
                         ? 0.0
                         : static_cast<double>(i) /
                               static_cast<double>(spec.r_points - 1);
    rs[static_cast<std::size_t>(i)] = std::exp(log_lo + t * (log_hi - log_lo));
  }

  for (auto& [name, h] : dirs) {
    OrthoDirectionResult res;
    res.direction = name;
    res.r = rs;
    std::vector<double> log_r, log_psi, log_ipw;
    for (double r : rs) {
      auto eval = [&](double sign) {
        const Eigen::VectorXd mu = b.mu0 + sign * spec.amp_reg * r * h;
        const Eigen::VectorXd nu = b.nu0 + sign * spec.amp_reg * r * h;
        const Eigen::VectorXd p1 =
            detail::probit_shift(b.q1, sign * spec.amp_prop * r, h);
        const Eigen::VectorXd p2 =
            detail::probit_shift(b.q2, sign * spec.amp_prop * r, h);
        return std::pair<double, double>{
            detail::ortho_mean_psi(b, mu, nu, p1, p2),
            detail::ortho_mean_ipw(b, p1, p2)};
      };
      const auto [psi_plus, ipw_plus] = eval(+1.0);
      const auto [psi_minus, ipw_minus] = eval(-1.0);
      const double drift_psi =
          std::sqrt(std::abs(psi_plus - report.baseline_mean) *
                    std::abs(psi_minus - report.baseline_mean));
      const double drift_ipw =
          std::sqrt(std::abs(ipw_plus - report.baseline_mean_ipw) *
                    std::abs(ipw_minus - report.baseline_mean_ipw));
      res.drift_psi.push_back(drift_psi);
      res.drift_ipw.push_back(drift_ipw);
      log_r.push_back(std::log(r));
      log_psi.push_back(std::log(std::max(drift_psi, 1e-300)));
      log_ipw.push_back(std::log(std::max(drift_ipw, 1e-300)));
    }
    res.slope_psi = stats::fit_line(log_r, log_psi).slope;
    res.slope_ipw = stats::fit_line(log_r, log_ipw).slope;
    report.directions.push_back(std::move(res));
  }
  return report;
}

}  // namespace seqdml
