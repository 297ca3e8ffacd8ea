#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqdml/dataset.hpp"
#include "seqdml/errors.hpp"
#include "seqdml/learners.hpp"

namespace seqdml {

// Learner assignment for the nuisance functions. Binary targets (p1, p2, g)
// share `propensity`; continuous targets (mu, nu) share `outcome`.
struct NuisanceConfig {
  LearnerSpec propensity{LearnerKind::kLogisticLasso};
  LearnerSpec outcome{LearnerKind::kLinearLasso};
  int min_stratum = 20;   // abort below this many fitting rows
  bool pooled_p2 = false;  // sensitivity mode: d1 enters p2 as a feature

  double p_min() const { return propensity.solver.p_min; }
};

// Out-of-fold nuisance predictions for one treatment sequence: every entry
// for observation i comes from models that never saw fold(i).
struct NuisanceFits {
  TreatmentSequence seq;
  Eigen::VectorXd p1hat;  // Pr(D1 = seq.d1 | X0)
  Eigen::VectorXd p2hat;  // Pr(D2 = seq.d2 | D1 = seq.d1, X0, X1)
  Eigen::VectorXd muhat;  // E[Y2 | D = seq, X0, X1]
  Eigen::VectorXd nuhat;  // E[mu | D1 = seq.d1, X0]
  std::optional<Eigen::VectorXd> ghat;  // Pr(S = 1 | X0)
  Eigen::VectorXi fold;   // fold id whose models produced row i
};

namespace detail {

inline void require_stratum(std::size_t size, int min_stratum,
                            const std::string& what) {
  if (size < static_cast<std::size_t>(min_stratum)) {
    throw Error("stratum_too_small", what + " has " + std::to_string(size) +
                                         " fitting rows; minimum is " +
                                         std::to_string(min_stratum));
  }
}

inline void require_two_classes(const Eigen::VectorXd& y,
                                const std::string& message) {
  const double m = y.mean();
  if (m == 0.0 || m == 1.0) throw Error("single_class_stratum", message);
}

inline Eigen::VectorXd indicator(const Eigen::VectorXi& d, int level,
                                 const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = (d[rows[i]] == level) ? 1.0 : 0.0;
  }
  return out;
}

inline std::vector<int> complement_rows(const FoldPlan& plan, int k) {
  std::vector<int> rows;
  rows.reserve(plan.assignment.size() - plan.folds[k].size());
  for (Eigen::Index i = 0; i < plan.assignment.size(); ++i) {
    if (plan.assignment[i] != k) rows.push_back(static_cast<int>(i));
  }
  return rows;
}

// Per-fit seeds mix the plan seed, the fold and a role tag. The treatment
// sequence deliberately stays out of the mix: p1's fits for d1 = 0 and
// d1 = 1 are then label flips of the same CV path, and a subgroup defined as
// S = I{D1 = d1} reproduces the p1 fit exactly (see estimate_g).
inline std::uint64_t fit_seed(const FoldPlan& plan, int k, const char* role) {
  return rng::derive(plan.seed, static_cast<std::uint64_t>(k), rng::tag(role));
}

}  // namespace detail

// Pr(D1 = seq.d1 | X0): classifier fit on the full complement of fold k,
// predicted on fold k.
inline Eigen::VectorXd estimate_p1(const PanelDataset& data,
                                   const TreatmentSequence& seq, int k,
                                   const FoldPlan& plan,
                                   const NuisanceConfig& cfg) {
  const std::vector<int> rows = detail::complement_rows(plan, k);
  detail::require_stratum(rows.size(), cfg.min_stratum, "p1 complement");
  const Eigen::VectorXd y = detail::indicator(data.d1, seq.d1, rows);
  detail::require_two_classes(y, "no variation in first treatment");
  const FittedLearner model =
      fit_binary(cfg.propensity, detail::take_rows(data.x0, rows), y,
                 detail::fit_seed(plan, k, "bin_x0"));
  return model.predict_proba(detail::take_rows(data.x0, plan.fold_rows(k)));
}

// Pr(D2 = seq.d2 | D1 = seq.d1, X0, X1): fit on the complement's D1 = seq.d1
// stratum (canonical mode) or the pooled complement with d1 as a feature,
// predicted on all fold-k rows.
inline Eigen::VectorXd estimate_p2(const PanelDataset& data,
                                   const TreatmentSequence& seq, int k,
                                   const FoldPlan& plan,
                                   const NuisanceConfig& cfg) {
  const std::vector<int> complement = detail::complement_rows(plan, k);
  const Eigen::MatrixXd xbar = data.xbar();

  if (cfg.pooled_p2) {
    detail::require_stratum(complement.size(), cfg.min_stratum, "p2 pool");
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(complement.size()),
                       xbar.cols() + 1);
    for (std::size_t i = 0; i < complement.size(); ++i) {
      xt(static_cast<Eigen::Index>(i), 0) = data.d1[complement[i]];
      xt.row(static_cast<Eigen::Index>(i)).tail(xbar.cols()) =
          xbar.row(complement[i]);
    }
    const Eigen::VectorXd y = detail::indicator(data.d2, seq.d2, complement);
    detail::require_two_classes(y, "no variation in second treatment");
    const FittedLearner model = fit_binary(
        cfg.propensity, xt, y, detail::fit_seed(plan, k, "bin_xbar"));
    const auto& fold = plan.fold_rows(k);
    Eigen::MatrixXd xp(static_cast<Eigen::Index>(fold.size()),
                       xbar.cols() + 1);
    for (std::size_t i = 0; i < fold.size(); ++i) {
      xp(static_cast<Eigen::Index>(i), 0) = seq.d1;
      xp.row(static_cast<Eigen::Index>(i)).tail(xbar.cols()) =
          xbar.row(fold[i]);
    }
    return model.predict_proba(xp);
  }

  const std::vector<int> rows =
      subset_by_sequence(data, seq, complement, /*d1_only=*/true);
  detail::require_stratum(rows.size(), cfg.min_stratum,
                          "p2 stratum (D1=" + std::to_string(seq.d1) + ")");
  const Eigen::VectorXd y = detail::indicator(data.d2, seq.d2, rows);
  detail::require_two_classes(
      y, "no variation in second treatment within the D1 stratum");
  const FittedLearner model =
      fit_binary(cfg.propensity, detail::take_rows(xbar, rows), y,
                 detail::fit_seed(plan, k, "bin_xbar"));
  return model.predict_proba(detail::take_rows(xbar, plan.fold_rows(k)));
}

// E[Y2 | D = seq, X0, X1]: regression fit on half A restricted to the
// sequence stratum. Returns fold-k predictions plus the model, which the
// nested regression needs for its pseudo-outcome.
struct MuFit {
  Eigen::VectorXd predictions;  // on fold k
  FittedLearner model;
};

inline MuFit estimate_mu(const PanelDataset& data,
                         const TreatmentSequence& seq, int k,
                         const FoldPlan& plan, const NuisanceConfig& cfg) {
  const std::vector<int> rows =
      subset_by_sequence(data, seq, plan.half_a[k]);
  detail::require_stratum(rows.size(), cfg.min_stratum,
                          "mu stratum " + to_string(seq) + " in half A");
  const Eigen::MatrixXd xbar = data.xbar();
  FittedLearner model =
      fit_regression(cfg.outcome, detail::take_rows(xbar, rows),
                     detail::take_rows(data.y2, rows),
                     detail::fit_seed(plan, k, "reg_mu"));
  MuFit fit{model.predict(detail::take_rows(xbar, plan.fold_rows(k))),
            std::move(model)};
  return fit;
}

// E[mu(seq, X0, X1) | D1 = seq.d1, X0]: the pseudo-outcome is the mu model
// evaluated at half-B rows' own covariates, regressed on X0 within the
// D1 = seq.d1 stratum of half B.
inline Eigen::VectorXd estimate_nu(const PanelDataset& data,
                                   const TreatmentSequence& seq, int k,
                                   const FoldPlan& plan,
                                   const NuisanceConfig& cfg,
                                   const FittedLearner& mu_model) {
  const std::vector<int> rows =
      subset_by_sequence(data, seq, plan.half_b[k], /*d1_only=*/true);
  detail::require_stratum(rows.size(), cfg.min_stratum,
                          "nu stratum (D1=" + std::to_string(seq.d1) +
                              ") in half B");
  const Eigen::MatrixXd xbar = data.xbar();
  const Eigen::VectorXd pseudo =
      mu_model.predict(detail::take_rows(xbar, rows));
  const FittedLearner model =
      fit_regression(cfg.outcome, detail::take_rows(data.x0, rows), pseudo,
                     detail::fit_seed(plan, k, "reg_nu"));
  return model.predict(detail::take_rows(data.x0, plan.fold_rows(k)));
}

// Pr(S = 1 | X0) fit on the full complement. Shares p1's seed role, so when
// S = I{D1 = d1} the fit coincides with estimate_p1's exactly.
inline Eigen::VectorXd estimate_g(const PanelDataset& data,
                                  const Eigen::VectorXi& s, int k,
                                  const FoldPlan& plan,
                                  const NuisanceConfig& cfg) {
  const std::vector<int> rows = detail::complement_rows(plan, k);
  detail::require_stratum(rows.size(), cfg.min_stratum, "g complement");
  const Eigen::VectorXd y = detail::indicator(s, 1, rows);
  detail::require_two_classes(y, "subgroup indicator is single-class");
  const FittedLearner model =
      fit_binary(cfg.propensity, detail::take_rows(data.x0, rows), y,
                 detail::fit_seed(plan, k, "bin_x0"));
  return model.predict_proba(detail::take_rows(data.x0, plan.fold_rows(k)));
}

// Algorithm: loop folds, fit the nuisances on each complement, predict on
// the held-out fold. With a subgroup S, ghat is included; the degenerate
// S = 1 subgroup bypasses fitting with ghat = 1.
inline NuisanceFits cross_fit(
    const PanelDataset& data, const TreatmentSequence& seq,
    const FoldPlan& plan, const NuisanceConfig& cfg,
    const std::optional<Eigen::VectorXi>& subgroup = std::nullopt) {
  const Eigen::Index n = data.n();
  NuisanceFits fits;
  fits.seq = seq;
  fits.p1hat.resize(n);
  fits.p2hat.resize(n);
  fits.muhat.resize(n);
  fits.nuhat.resize(n);
  fits.fold = plan.assignment;

  bool g_constant_one = false;
  if (subgroup) {
    fits.ghat = Eigen::VectorXd(n);
    g_constant_one = (subgroup->minCoeff() == 1);
  }

  for (int k = 0; k < plan.k; ++k) {
    const auto& fold = plan.fold_rows(k);
    auto scatter = [&](Eigen::VectorXd& dst, const Eigen::VectorXd& src) {
      for (std::size_t i = 0; i < fold.size(); ++i) {
        dst[fold[i]] = src[static_cast<Eigen::Index>(i)];
      }
    };
    try {
      scatter(fits.p1hat, estimate_p1(data, seq, k, plan, cfg));
      scatter(fits.p2hat, estimate_p2(data, seq, k, plan, cfg));
      MuFit mu = estimate_mu(data, seq, k, plan, cfg);
      scatter(fits.muhat, mu.predictions);
      scatter(fits.nuhat, estimate_nu(data, seq, k, plan, cfg, mu.model));
      if (subgroup) {
        if (g_constant_one) {
          for (int i : fold) (*fits.ghat)[i] = 1.0;
        } else {
          scatter(*fits.ghat, estimate_g(data, *subgroup, k, plan, cfg));
        }
      }
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(k) + ": " + e.what());
    }
  }
  return fits;
}

}  // namespace seqdml
