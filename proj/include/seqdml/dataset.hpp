#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqdml/errors.hpp"
#include "seqdml/rng.hpp"

namespace seqdml {

// A counterfactual two-period regime (d1, d2).
struct TreatmentSequence {
  int d1 = 0;
  int d2 = 0;

  friend bool operator==(const TreatmentSequence&,
                         const TreatmentSequence&) = default;
};

inline std::string to_string(const TreatmentSequence& s) {
  return "(" + std::to_string(s.d1) + "," + std::to_string(s.d2) + ")";
}

// Observed data: outcome measured after period 2, integer-coded treatments
// for both periods, baseline covariates x0, period-1 covariates x1 (measured
// after d1 and before d2), and an optional binary subgroup indicator.
struct PanelDataset {
  Eigen::VectorXd y2;
  Eigen::VectorXi d1;
  Eigen::VectorXi d2;
  Eigen::MatrixXd x0;
  Eigen::MatrixXd x1;
  std::optional<Eigen::VectorXi> s;
  std::vector<std::string> x0_names;
  std::vector<std::string> x1_names;
  int q = 1;  // treatment support is {0, ..., q}

  Eigen::Index n() const { return y2.size(); }
  Eigen::Index p0() const { return x0.cols(); }
  Eigen::Index p1() const { return x1.cols(); }

  // (x0 | x1), the covariate history before period-2 treatment.
  Eigen::MatrixXd xbar() const {
    Eigen::MatrixXd xb(n(), p0() + p1());
    xb << x0, x1;
    return xb;
  }
};

// Validates raw columns and assembles a PanelDataset. Treatment support
// {0..Q} is inferred as the max over both treatment columns. Passing the
// intended fold count enforces n >= 2K up front.
inline PanelDataset validate_dataset(
    Eigen::VectorXd y2, Eigen::VectorXi d1, Eigen::VectorXi d2,
    Eigen::MatrixXd x0, Eigen::MatrixXd x1,
    std::optional<Eigen::VectorXi> s = std::nullopt,
    std::vector<std::string> x0_names = {},
    std::vector<std::string> x1_names = {}, int k_folds = 0) {
  const Eigen::Index n = y2.size();
  if (n < 1) throw Error("empty_dataset", "dataset has no rows");
  if (k_folds > 0 && n < 2 * static_cast<Eigen::Index>(k_folds)) {
    throw Error("too_few_rows", "need at least " + std::to_string(2 * k_folds) +
                                    " rows for " + std::to_string(k_folds) +
                                    "-fold cross-fitting, got " +
                                    std::to_string(n));
  }
  auto check_rows = [&](Eigen::Index got, const char* what) {
    if (got != n) {
      throw Error("length_mismatch",
                  std::string(what) + " has " + std::to_string(got) +
                      " rows, expected " + std::to_string(n));
    }
  };
  check_rows(d1.size(), "d1");
  check_rows(d2.size(), "d2");
  check_rows(x0.rows(), "x0");
  check_rows(x1.rows(), "x1");
  if (s) check_rows(s->size(), "s");

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y2[i])) {
      throw Error("non_finite_value",
                  "y2 is non-finite at row " + std::to_string(i));
    }
  }
  auto check_matrix = [&](const Eigen::MatrixXd& m, const char* name) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!std::isfinite(m(i, j))) {
          throw Error("non_finite_value", std::string(name) + " column " +
                                              std::to_string(j) +
                                              " is non-finite at row " +
                                              std::to_string(i));
        }
      }
    }
  };
  check_matrix(x0, "x0");
  check_matrix(x1, "x1");

  int q = 1;
  auto check_treatment = [&](const Eigen::VectorXi& d, const char* name) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] < 0) {
        throw Error("treatment_out_of_range",
                    std::string(name) + " is negative at row " +
                        std::to_string(i));
      }
      q = std::max(q, d[i]);
    }
  };
  check_treatment(d1, "d1");
  check_treatment(d2, "d2");
  if (s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((*s)[i] != 0 && (*s)[i] != 1) {
        throw Error("subgroup_not_binary",
                    "s must be 0/1; offending row " + std::to_string(i));
      }
    }
  }

  PanelDataset data;
  data.y2 = std::move(y2);
  data.d1 = std::move(d1);
  data.d2 = std::move(d2);
  data.x0 = std::move(x0);
  data.x1 = std::move(x1);
  data.s = std::move(s);
  data.x0_names = std::move(x0_names);
  data.x1_names = std::move(x1_names);
  data.q = q;
  return data;
}

// Deterministic K-fold partition plus, per fold, a halving of the complement
// into A (hosts the outcome regression) and B (hosts the nested regression).
struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXi assignment;            // fold id per observation
  std::vector<std::vector<int>> folds;   // row indices per fold
  std::vector<std::vector<int>> half_a;  // per fold: complement half A
  std::vector<std::vector<int>> half_b;  // per fold: complement half B

  const std::vector<int>& fold_rows(int f) const { return folds[f]; }
};

// Balanced partition: remainder rows go one-per-fold to the lowest-indexed
// folds after a seeded shuffle; the A/B halving is drawn from the same
// stream, folds in order, so one seed reproduces the whole plan.
inline FoldPlan make_folds(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2) throw Error("bad_fold_count", "K must be at least 2");
  if (static_cast<Eigen::Index>(k) > n) {
    throw Error("bad_fold_count", "K exceeds the number of rows");
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment = Eigen::VectorXi::Zero(n);
  plan.folds.resize(k);
  plan.half_a.resize(k);
  plan.half_b.resize(k);

  std::vector<int> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  auto g = rng::engine(rng::derive(seed, rng::tag("fold_split")));
  rng::shuffle(order, g);

  const Eigen::Index base = n / k;
  const Eigen::Index rem = n % k;
  Eigen::Index pos = 0;
  for (int f = 0; f < k; ++f) {
    const Eigen::Index size = base + (f < rem ? 1 : 0);
    plan.folds[f].assign(order.begin() + pos, order.begin() + pos + size);
    for (Eigen::Index j = 0; j < size; ++j) {
      plan.assignment[order[pos + j]] = f;
    }
    pos += size;
  }

  for (int f = 0; f < k; ++f) {
    std::vector<int> complement;
    complement.reserve(n - plan.folds[f].size());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (plan.assignment[i] != f) complement.push_back(static_cast<int>(i));
    }
    rng::shuffle(complement, g);
    const std::size_t half = (complement.size() + 1) / 2;  // A gets the odd row
    plan.half_a[f].assign(complement.begin(), complement.begin() + half);
    plan.half_b[f].assign(complement.begin() + half, complement.end());
  }
  return plan;
}

// Rows (within `rows`) whose realized treatments match the sequence; with
// d1_only, only the first-period condition is applied (used when nesting the
// outcome regression into the period-1 regression).
inline std::vector<int> subset_by_sequence(const PanelDataset& data,
                                           const TreatmentSequence& seq,
                                           const std::vector<int>& rows,
                                           bool d1_only = false) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int i : rows) {
    if (data.d1[i] != seq.d1) continue;
    if (!d1_only && data.d2[i] != seq.d2) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace seqdml
