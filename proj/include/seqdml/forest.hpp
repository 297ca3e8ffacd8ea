#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "seqdml/errors.hpp"
#include "seqdml/learner_options.hpp"
#include "seqdml/rng.hpp"

namespace seqdml {

// CART-style regression forest: variance-reduction splits on bootstrap
// samples, a random feature subset per split, ensemble mean prediction.
// Deterministic given (data, params, seed); tree t draws from its own stream.
class ForestModel {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  ForestModel() = default;

  static ForestModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const ForestOptions& opt, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (n != y.size() || n < 2 * opt.min_leaf) {
      throw Error("bad_learner_input",
                  "forest requires at least 2*min_leaf matching rows");
    }
    ForestModel model;
    model.p_ = x.cols();
    model.trees_.resize(static_cast<std::size_t>(opt.trees));
    for (int t = 0; t < opt.trees; ++t) {
      auto g = rng::engine(rng::derive(seed, rng::tag("tree"), t));
      model.trees_[static_cast<std::size_t>(t)] =
          build_tree(x, y, opt, g);
    }
    return model;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != p_) {
      throw Error("dimension_mismatch",
                  "predict: feature count differs from training");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (const auto& tree : trees_) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[i] += predict_one(tree, x.row(i));
      }
    }
    return out / static_cast<double>(trees_.size());
  }

 private:
  using Tree = std::vector<Node>;

  static double predict_one(const Tree& tree,
                            const Eigen::RowVectorXd& row) {
    int node = 0;
    while (tree[static_cast<std::size_t>(node)].feature >= 0) {
      const Node& nd = tree[static_cast<std::size_t>(node)];
      node = (row[nd.feature] <= nd.threshold) ? nd.left : nd.right;
    }
    return tree[static_cast<std::size_t>(node)].value;
  }

  static Tree build_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const ForestOptions& opt, rng::Engine& g) {
    const Eigen::Index n = x.rows();
    std::vector<int> sample(static_cast<std::size_t>(n));
    for (auto& idx : sample) {
      idx = static_cast<int>(rng::below(g, static_cast<std::uint64_t>(n)));
    }
    Tree tree;
    grow(tree, x, y, std::move(sample), opt, g);
    return tree;
  }

  struct Split {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
  };

  static Split best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const std::vector<int>& rows,
                          const ForestOptions& opt, rng::Engine& g) {
    const auto p = x.cols();
    const int m = std::max<int>(
        1, static_cast<int>(
               std::ceil(opt.feature_fraction * static_cast<double>(p))));
    // Partial Fisher-Yates draws m distinct features.
    std::vector<int> feats(static_cast<std::size_t>(p));
    std::iota(feats.begin(), feats.end(), 0);
    for (int i = 0; i < m; ++i) {
      const auto j = i + static_cast<int>(rng::below(
                             g, static_cast<std::uint64_t>(p - i)));
      std::swap(feats[static_cast<std::size_t>(i)],
                feats[static_cast<std::size_t>(j)]);
    }

    const auto nn = static_cast<double>(rows.size());
    double total = 0.0;
    for (int i : rows) total += y[i];

    Split best;
    double best_gain = 0.0;
    std::vector<int> order;
    for (int fi = 0; fi < m; ++fi) {
      const int f = feats[static_cast<std::size_t>(fi)];
      order = rows;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return x(a, f) < x(b, f);
      });
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_sum += y[order[k]];
        const double xv = x(order[k], f);
        const double xn = x(order[k + 1], f);
        if (xv == xn) continue;
        const auto nl = static_cast<double>(k + 1);
        const double nr = nn - nl;
        if (nl < opt.min_leaf || nr < opt.min_leaf) continue;
        // Variance reduction up to constants: sum_l^2/n_l + sum_r^2/n_r.
        const double right_sum = total - left_sum;
        const double gain =
            left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (!best.found || gain > best_gain) {
          best.found = true;
          best_gain = gain;
          best.feature = f;
          best.threshold = 0.5 * (xv + xn);
        }
      }
    }
    return best;
  }

  static int grow(Tree& tree, const Eigen::MatrixXd& x,
                  const Eigen::VectorXd& y, std::vector<int> rows,
                  const ForestOptions& opt, rng::Engine& g) {
    const int id = static_cast<int>(tree.size());
    tree.emplace_back();

    double mean = 0.0;
    for (int i : rows) mean += y[i];
    mean /= static_cast<double>(rows.size());

    if (rows.size() < 2 * static_cast<std::size_t>(opt.min_leaf)) {
      tree[static_cast<std::size_t>(id)].value = mean;
      return id;
    }
    const Split split = best_split(x, y, rows, opt, g);
    if (!split.found) {
      tree[static_cast<std::size_t>(id)].value = mean;
      return id;
    }

    std::vector<int> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (int i : rows) {
      (x(i, split.feature) <= split.threshold ? left : right).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = grow(tree, x, y, std::move(left), opt, g);
    const int right_id = grow(tree, x, y, std::move(right), opt, g);
    Node& nd = tree[static_cast<std::size_t>(id)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = left_id;
    nd.right = right_id;
    return id;
  }

  Eigen::Index p_ = 0;
  std::vector<Tree> trees_;
};

inline ForestModel fit_forest(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y,
                              const ForestOptions& opt = {},
                              std::uint64_t seed = 0) {
  return ForestModel::fit(x, y, opt, seed);
}

}  // namespace seqdml
