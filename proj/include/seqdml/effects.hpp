#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seqdml/crossfit.hpp"
#include "seqdml/dataset.hpp"
#include "seqdml/errors.hpp"
#include "seqdml/scores.hpp"
#include "seqdml/stats.hpp"

namespace seqdml {

struct EffectEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  Eigen::Index n_used = 0;
  Eigen::Index n_trimmed = 0;
  std::pair<TreatmentSequence, TreatmentSequence> contrast;
  std::optional<std::string> subgroup;
};

namespace detail {

// Influence-function inference: estimate = mean(u), SE = sqrt(mean((u -
// mean)^2)/n). p-value from the normal approximation; SE = 0 gives p = 0
// for a nonzero estimate and p = 1 at zero.
inline EffectEstimate summarize(const std::vector<double>& u,
                                Eigen::Index n_trimmed) {
  EffectEstimate e;
  e.n_used = static_cast<Eigen::Index>(u.size());
  e.n_trimmed = n_trimmed;
  double sum = 0.0;
  for (double v : u) sum += v;
  e.estimate = sum / static_cast<double>(u.size());
  double ss = 0.0;
  for (double v : u) ss += (v - e.estimate) * (v - e.estimate);
  const double n = static_cast<double>(u.size());
  e.se = std::sqrt(ss / n / n);
  e.ci_low = e.estimate - stats::kZ975 * e.se;
  e.ci_high = e.estimate + stats::kZ975 * e.se;
  if (e.se > 0.0) {
    e.p_value = 2.0 * (1.0 - stats::norm_cdf(std::abs(e.estimate) / e.se));
  } else {
    e.p_value = (e.estimate == 0.0) ? 1.0 : 0.0;
  }
  return e;
}

inline void require_used(std::size_t n, const char* what) {
  if (n < 2) {
    throw Error("too_few_kept",
                std::string(what) + ": fewer than 2 observations survive "
                                    "trimming");
  }
}

}  // namespace detail

// Mean potential outcome E[Y2(d1,d2)]: average of kept scores.
inline EffectEstimate estimate_potential_outcome(const ScoreVector& scores) {
  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(scores.n_kept));
  for (Eigen::Index i = 0; i < scores.psi.size(); ++i) {
    if (scores.kept[static_cast<std::size_t>(i)]) u.push_back(scores.psi[i]);
  }
  detail::require_used(u.size(), "potential outcome");
  EffectEstimate e = detail::summarize(u, scores.n_trimmed);
  e.contrast = {scores.seq, scores.seq};
  return e;
}

// ATE of sequence a versus b: per-observation score differences over the
// intersection of the two kept-masks, so both arms average the same rows.
inline EffectEstimate estimate_ate(const ScoreVector& a, const ScoreVector& b) {
  if (a.psi.size() != b.psi.size()) {
    throw Error("length_mismatch", "score vectors differ in length");
  }
  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(a.psi.size()));
  Eigen::Index n_trimmed = 0;
  for (Eigen::Index i = 0; i < a.psi.size(); ++i) {
    const auto j = static_cast<std::size_t>(i);
    if (a.kept[j] && b.kept[j]) {
      u.push_back(a.psi[i] - b.psi[i]);
    } else {
      ++n_trimmed;
    }
  }
  detail::require_used(u.size(), "ate");
  EffectEstimate e = detail::summarize(u, n_trimmed);
  e.contrast = {a.seq, b.seq};
  return e;
}

namespace detail {

// Ratio linearization for sum(psi)/sum(S): with w = mean over kept rows,
// the estimate is mean(psi)/mean(S) and the per-observation influence value
// is u_i = (psi_i - S_i * estimate) / mean(S).
struct RatioParts {
  double estimate = 0.0;
  std::vector<double> u;
  Eigen::Index n_trimmed = 0;
};

inline RatioParts ratio_linearize(const ScoreVector& a, const ScoreVector& b,
                                  const Eigen::VectorXd& s) {
  RatioParts out;
  std::vector<double> delta;
  std::vector<double> s_kept;
  for (Eigen::Index i = 0; i < a.psi.size(); ++i) {
    const auto j = static_cast<std::size_t>(i);
    if (a.kept[j] && b.kept[j]) {
      delta.push_back(a.psi[i] - b.psi[i]);
      s_kept.push_back(s[i]);
    } else {
      ++out.n_trimmed;
    }
  }
  require_used(delta.size(), "weighted ate");
  double s_sum = 0.0;
  for (double v : s_kept) s_sum += v;
  if (s_sum < 2.0) {
    throw Error("empty_subgroup",
                "fewer than 2 subgroup members survive trimming");
  }
  const double s_mean = s_sum / static_cast<double>(delta.size());
  double d_sum = 0.0;
  for (double v : delta) d_sum += v;
  out.estimate = d_sum / s_sum;
  out.u.resize(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    out.u[i] = (delta[i] - s_kept[i] * out.estimate) / s_mean;
  }
  return out;
}

}  // namespace detail

// Subgroup ATE E[Y2(a) - Y2(b) | S=1]: weighted scores summed over kept rows
// and divided by the kept subgroup size, with a delta-method SE for the
// ratio of means.
inline EffectEstimate estimate_weighted_ate(const WeightedScore& a,
                                            const WeightedScore& b,
                                            const std::string& subgroup_label) {
  if (a.score.psi.size() != b.score.psi.size()) {
    throw Error("length_mismatch", "score vectors differ in length");
  }
  detail::RatioParts parts = detail::ratio_linearize(a.score, b.score, a.s);
  EffectEstimate e;
  e.estimate = parts.estimate;
  e.n_used = static_cast<Eigen::Index>(parts.u.size());
  e.n_trimmed = parts.n_trimmed;
  double ss = 0.0;
  for (double v : parts.u) ss += v * v;
  const double n = static_cast<double>(parts.u.size());
  e.se = std::sqrt(ss / n / n);
  e.ci_low = e.estimate - stats::kZ975 * e.se;
  e.ci_high = e.estimate + stats::kZ975 * e.se;
  if (e.se > 0.0) {
    e.p_value = 2.0 * (1.0 - stats::norm_cdf(std::abs(e.estimate) / e.se));
  } else {
    e.p_value = (e.estimate == 0.0) ? 1.0 : 0.0;
  }
  e.contrast = {a.score.seq, b.score.seq};
  e.subgroup = subgroup_label;
  return e;
}

// Weighted level: Psi^{S=1} per arm, same ratio linearization with a single
// score vector.
inline EffectEstimate estimate_weighted_potential_outcome(
    const WeightedScore& a, const std::string& subgroup_label) {
  std::vector<double> psi_kept;
  std::vector<double> s_kept;
  Eigen::Index n_trimmed = 0;
  for (Eigen::Index i = 0; i < a.score.psi.size(); ++i) {
    const auto j = static_cast<std::size_t>(i);
    if (a.score.kept[j]) {
      psi_kept.push_back(a.score.psi[i]);
      s_kept.push_back(a.s[i]);
    } else {
      ++n_trimmed;
    }
  }
  detail::require_used(psi_kept.size(), "weighted potential outcome");
  double s_sum = 0.0;
  for (double v : s_kept) s_sum += v;
  if (s_sum < 2.0) {
    throw Error("empty_subgroup",
                "fewer than 2 subgroup members survive trimming");
  }
  const double n = static_cast<double>(psi_kept.size());
  const double s_mean = s_sum / n;
  double p_sum = 0.0;
  for (double v : psi_kept) p_sum += v;
  EffectEstimate e;
  e.estimate = p_sum / s_sum;
  e.n_used = static_cast<Eigen::Index>(psi_kept.size());
  e.n_trimmed = n_trimmed;
  double ss = 0.0;
  for (std::size_t i = 0; i < psi_kept.size(); ++i) {
    const double u = (psi_kept[i] - s_kept[i] * e.estimate) / s_mean;
    ss += u * u;
  }
  e.se = std::sqrt(ss / n / n);
  e.ci_low = e.estimate - stats::kZ975 * e.se;
  e.ci_high = e.estimate + stats::kZ975 * e.se;
  if (e.se > 0.0) {
    e.p_value = 2.0 * (1.0 - stats::norm_cdf(std::abs(e.estimate) / e.se));
  } else {
    e.p_value = (e.estimate == 0.0) ? 1.0 : 0.0;
  }
  e.contrast = {a.score.seq, a.score.seq};
  e.subgroup = subgroup_label;
  return e;
}

// Static placebo contrast: cross-fitted AIPW for a binary pseudo-treatment
// on the baseline covariates only. Per fold, the propensity is fit on the
// full complement and each arm's outcome mean on the complement's rows with
// D = d (no further halving; the static score has no nested mean).
inline EffectEstimate estimate_placebo(const Eigen::VectorXd& y,
                                       const Eigen::VectorXi& d,
                                       const Eigen::MatrixXd& x0,
                                       const FoldPlan& plan,
                                       const NuisanceConfig& cfg,
                                       double threshold) {
  const Eigen::Index n = y.size();
  if (d.size() != n || x0.rows() != n) {
    throw Error("length_mismatch", "placebo inputs differ in length");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d[i] != 0 && d[i] != 1) {
      throw Error("treatment_out_of_range",
                  "placebo pseudo-treatment must be binary");
    }
  }
  StaticFits fits;
  fits.phat.resize(n);
  fits.m1hat.resize(n);
  fits.m0hat.resize(n);

  for (int k = 0; k < plan.k; ++k) {
    const std::vector<int> complement = detail::complement_rows(plan, k);
    detail::require_stratum(complement.size(), cfg.min_stratum,
                            "placebo complement");
    const Eigen::VectorXd dy = detail::indicator(d, 1, complement);
    detail::require_two_classes(dy, "no variation in pseudo-treatment");
    const Eigen::MatrixXd xc = detail::take_rows(x0, complement);
    const FittedLearner prop = fit_binary(
        cfg.propensity, xc, dy, detail::fit_seed(plan, k, "bin_x0"));

    const auto& fold = plan.fold_rows(k);
    const Eigen::MatrixXd xf = detail::take_rows(x0, fold);
    const Eigen::VectorXd pf = prop.predict_proba(xf);

    for (int arm = 0; arm <= 1; ++arm) {
      std::vector<int> rows;
      for (int i : complement) {
        if (d[i] == arm) rows.push_back(i);
      }
      detail::require_stratum(rows.size(), cfg.min_stratum,
                              "placebo arm " + std::to_string(arm));
      const FittedLearner m = fit_regression(
          cfg.outcome, detail::take_rows(x0, rows), detail::take_rows(y, rows),
          detail::fit_seed(plan, k, arm == 1 ? "reg_m1" : "reg_m0"));
      const Eigen::VectorXd mf = m.predict(xf);
      for (std::size_t i = 0; i < fold.size(); ++i) {
        (arm == 1 ? fits.m1hat : fits.m0hat)[fold[i]] =
            mf[static_cast<Eigen::Index>(i)];
      }
    }
    for (std::size_t i = 0; i < fold.size(); ++i) {
      fits.phat[fold[i]] = pf[static_cast<Eigen::Index>(i)];
    }
  }

  const ScoreVector sv = score_static_aipw(y, d, fits, threshold);
  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(sv.n_kept));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sv.kept[static_cast<std::size_t>(i)]) u.push_back(sv.psi[i]);
  }
  detail::require_used(u.size(), "placebo");
  EffectEstimate e = detail::summarize(u, sv.n_trimmed);
  e.contrast = {TreatmentSequence{1, 1}, TreatmentSequence{0, 0}};
  e.subgroup = std::nullopt;
  return e;
}

}  // namespace seqdml
