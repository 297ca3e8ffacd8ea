#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <iterator>
#include <string>
#include <vector>

#include "seqdml/crossfit.hpp"
#include "seqdml/dataset.hpp"
#include "seqdml/errors.hpp"
#include "seqdml/scores.hpp"
#include "seqdml/stats.hpp"

namespace seqdml {

inline constexpr double kOverlapQuantiles[] = {0.01, 0.05, 0.25, 0.50,
                                               0.75, 0.95, 0.99};

// Binned distribution of one propensity, split by whether the row belongs
// to the treatment group the score targets.
struct OverlapPanel {
  std::string name;                 // "p1" or "p2"
  std::vector<double> bin_edges;    // bins+1 edges spanning [0,1]
  std::vector<long> count_group;    // rows matching the sequence condition
  std::vector<long> count_rest;
  std::vector<double> quantiles_group;  // at kOverlapQuantiles
  std::vector<double> quantiles_rest;
  double min_group = 0.0, max_group = 0.0;
  double min_rest = 0.0, max_rest = 0.0;
};

struct OverlapReport {
  TreatmentSequence seq;
  std::vector<OverlapPanel> panels;  // p1 then p2
};

namespace detail {

inline OverlapPanel make_panel(const std::string& name,
                               const Eigen::VectorXd& p,
                               const std::vector<bool>& in_group, int bins) {
  OverlapPanel panel;
  panel.name = name;
  panel.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    panel.bin_edges[static_cast<std::size_t>(b)] =
        static_cast<double>(b) / static_cast<double>(bins);
  }
  panel.count_group.assign(static_cast<std::size_t>(bins), 0);
  panel.count_rest.assign(static_cast<std::size_t>(bins), 0);

  std::vector<double> vg, vr;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    int b = static_cast<int>(p[i] * bins);
    b = std::min(std::max(b, 0), bins - 1);  // 1.0 lands in the top bin
    if (in_group[static_cast<std::size_t>(i)]) {
      ++panel.count_group[static_cast<std::size_t>(b)];
      vg.push_back(p[i]);
    } else {
      ++panel.count_rest[static_cast<std::size_t>(b)];
      vr.push_back(p[i]);
    }
  }
  auto summarize = [](const std::vector<double>& v, std::vector<double>& q,
                      double& lo, double& hi) {
    if (v.empty()) {
      q.assign(std::size(kOverlapQuantiles), 0.0);
      lo = hi = 0.0;
      return;
    }
    for (double level : kOverlapQuantiles) q.push_back(stats::quantile(v, level));
    lo = *std::min_element(v.begin(), v.end());
    hi = *std::max_element(v.begin(), v.end());
  };
  summarize(vg, panel.quantiles_group, panel.min_group, panel.max_group);
  summarize(vr, panel.quantiles_rest, panel.min_rest, panel.max_rest);
  return panel;
}

}  // namespace detail

// Common-support diagnostic: p1hat split by 1{D1 = d1}, p2hat split by the
// full sequence match. Histograms with uniform bins on [0,1] plus quantile
// summaries per group.
inline OverlapReport overlap_report(const NuisanceFits& fits,
                                    const PanelDataset& data,
                                    int bins = 40) {
  if (bins < 2) throw Error("bad_bin_count", "need at least 2 bins");
  const Eigen::Index n = data.n();
  std::vector<bool> g1(static_cast<std::size_t>(n)),
      g12(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool m1 = data.d1[i] == fits.seq.d1;
    g1[static_cast<std::size_t>(i)] = m1;
    g12[static_cast<std::size_t>(i)] = m1 && data.d2[i] == fits.seq.d2;
  }
  OverlapReport report;
  report.seq = fits.seq;
  report.panels.push_back(detail::make_panel("p1", fits.p1hat, g1, bins));
  report.panels.push_back(detail::make_panel("p2", fits.p2hat, g12, bins));
  return report;
}

struct TrimmingRow {
  double threshold = 0.0;
  Eigen::Index n_kept = 0;
  Eigen::Index n_trimmed = 0;
};

// Trimming accounting across thresholds; counts always sum to n and kept
// counts are non-increasing in the threshold.
inline std::vector<TrimmingRow> trimming_table(
    const NuisanceFits& fits, const std::vector<double>& thresholds) {
  std::vector<TrimmingRow> rows;
  rows.reserve(thresholds.size());
  for (double t : thresholds) {
    TrimmingRow row;
    row.threshold = t;
    trim_mask(fits, t, &row.n_kept, &row.n_trimmed);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace seqdml
