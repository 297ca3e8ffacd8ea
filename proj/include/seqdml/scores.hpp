#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "seqdml/crossfit.hpp"
#include "seqdml/dataset.hpp"
#include "seqdml/errors.hpp"

namespace seqdml {

// Per-observation score contributions for one treatment sequence, plus the
// trimming mask that the aggregation step applies.
struct ScoreVector {
  Eigen::VectorXd psi;
  std::vector<bool> kept;
  TreatmentSequence seq;
  double threshold = 0.0;
  Eigen::Index n_kept = 0;
  Eigen::Index n_trimmed = 0;
};

// kept_i = (p1hat_i * p2hat_i >= threshold). Trimming drops observations
// from the average; it is separate from probability clipping, which is
// always-on numerical hygiene inside the learners.
inline std::vector<bool> trim_mask(const NuisanceFits& fits, double threshold,
                                   Eigen::Index* n_kept = nullptr,
                                   Eigen::Index* n_trimmed = nullptr) {
  if (threshold < 0.0 || threshold >= 1.0) {
    throw Error("bad_threshold", "trimming threshold must lie in [0,1)");
  }
  const Eigen::Index n = fits.p1hat.size();
  std::vector<bool> kept(static_cast<std::size_t>(n));
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool keep = fits.p1hat[i] * fits.p2hat[i] >= threshold;
    kept[static_cast<std::size_t>(i)] = keep;
    count += keep ? 1 : 0;
  }
  if (n_kept) *n_kept = count;
  if (n_trimmed) *n_trimmed = n - count;
  return kept;
}

namespace detail {

inline void require_finite_kept(const ScoreVector& sv, const char* what) {
  for (Eigen::Index i = 0; i < sv.psi.size(); ++i) {
    if (sv.kept[static_cast<std::size_t>(i)] && !std::isfinite(sv.psi[i])) {
      throw Error("non_finite_score",
                  std::string(what) + " is non-finite on kept row " +
                      std::to_string(i) + "; check probability clipping");
    }
  }
}

}  // namespace detail

// The three-term orthogonal score for E[Y2(d1,d2)]:
//   psi_i = 1{D1=d1}1{D2=d2}(Y2 - muhat)/(p1hat*p2hat)
//         + 1{D1=d1}(muhat - nuhat)/p1hat
//         + nuhat.
inline ScoreVector score_psi(const PanelDataset& data, const NuisanceFits& fits,
                             double threshold) {
  const Eigen::Index n = data.n();
  ScoreVector sv;
  sv.seq = fits.seq;
  sv.threshold = threshold;
  sv.kept = trim_mask(fits, threshold, &sv.n_kept, &sv.n_trimmed);
  sv.psi.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double i1 = (data.d1[i] == fits.seq.d1) ? 1.0 : 0.0;
    const double i2 = (data.d2[i] == fits.seq.d2) ? 1.0 : 0.0;
    const double term1 =
        i1 * i2 * (data.y2[i] - fits.muhat[i]) / (fits.p1hat[i] * fits.p2hat[i]);
    const double term2 = i1 * (fits.muhat[i] - fits.nuhat[i]) / fits.p1hat[i];
    sv.psi[i] = term1 + term2 + fits.nuhat[i];
  }
  detail::require_finite_kept(sv, "psi");
  return sv;
}

// Weighted score for the subgroup mean E[Y2(d1,d2) | S=1]:
//   psi_i = ghat(X0_i) * [term1 + term2] + S_i * nuhat,
// left un-normalized here; the aggregation divides by sum(S_i) over kept
// rows. Also returns the S companion so callers share one definition.
struct WeightedScore {
  ScoreVector score;
  Eigen::VectorXd s;  // subgroup indicator as reals
};

inline WeightedScore score_psi_weighted(const PanelDataset& data,
                                        const NuisanceFits& fits,
                                        const Eigen::VectorXi& s,
                                        double threshold) {
  if (!fits.ghat) {
    throw Error("missing_ghat", "weighted score requires subgroup fits");
  }
  if (s.size() != data.n()) {
    throw Error("length_mismatch", "subgroup indicator length mismatch");
  }
  if (s.maxCoeff() == 0) {
    throw Error("empty_subgroup", "empty subgroup: all S_i are zero");
  }
  const Eigen::Index n = data.n();
  WeightedScore out;
  out.score.seq = fits.seq;
  out.score.threshold = threshold;
  out.score.kept =
      trim_mask(fits, threshold, &out.score.n_kept, &out.score.n_trimmed);
  out.score.psi.resize(n);
  out.s = s.cast<double>();
  const Eigen::VectorXd& g = *fits.ghat;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double i1 = (data.d1[i] == fits.seq.d1) ? 1.0 : 0.0;
    const double i2 = (data.d2[i] == fits.seq.d2) ? 1.0 : 0.0;
    const double term1 =
        i1 * i2 * (data.y2[i] - fits.muhat[i]) / (fits.p1hat[i] * fits.p2hat[i]);
    const double term2 = i1 * (fits.muhat[i] - fits.nuhat[i]) / fits.p1hat[i];
    out.score.psi[i] = g[i] * (term1 + term2) + out.s[i] * fits.nuhat[i];
  }
  detail::require_finite_kept(out.score, "weighted psi");
  return out;
}

// Cross-fitted nuisances for the static placebo contrast: a single binary
// pseudo-treatment with propensity phat = Pr(D=1|X0) and per-arm outcome
// means m1hat, m0hat.
struct StaticFits {
  Eigen::VectorXd phat;
  Eigen::VectorXd m1hat;
  Eigen::VectorXd m0hat;
};

// Standard AIPW effect score, differenced across arms:
//   psi_i = [1{D=1}(Y - m1)/p + m1] - [1{D=0}(Y - m0)/(1-p) + m0].
// Trimming keeps rows with min(p, 1-p) >= threshold so both denominators
// are controlled by one rule.
inline ScoreVector score_static_aipw(const Eigen::VectorXd& y,
                                     const Eigen::VectorXi& d,
                                     const StaticFits& fits,
                                     double threshold) {
  if (threshold < 0.0 || threshold >= 1.0) {
    throw Error("bad_threshold", "trimming threshold must lie in [0,1)");
  }
  const Eigen::Index n = y.size();
  ScoreVector sv;
  sv.seq = TreatmentSequence{1, 1};  // treated pseudo-arm, static (d,d) coding
  sv.threshold = threshold;
  sv.kept.assign(static_cast<std::size_t>(n), true);
  sv.psi.resize(n);
  sv.n_kept = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = fits.phat[i];
    const bool keep = std::min(p, 1.0 - p) >= threshold;
    sv.kept[static_cast<std::size_t>(i)] = keep;
    sv.n_kept += keep ? 1 : 0;
    const double i1 = (d[i] == 1) ? 1.0 : 0.0;
    const double arm1 = i1 * (y[i] - fits.m1hat[i]) / p + fits.m1hat[i];
    const double arm0 =
        (1.0 - i1) * (y[i] - fits.m0hat[i]) / (1.0 - p) + fits.m0hat[i];
    sv.psi[i] = arm1 - arm0;
  }
  sv.n_trimmed = n - sv.n_kept;
  detail::require_finite_kept(sv, "static aipw score");
  return sv;
}

}  // namespace seqdml
