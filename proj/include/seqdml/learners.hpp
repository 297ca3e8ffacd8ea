#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <variant>

#include "seqdml/forest.hpp"
#include "seqdml/lasso.hpp"
#include "seqdml/learner_options.hpp"
#include "seqdml/logistic.hpp"

namespace seqdml {

// Type-erased handle over the three learner kinds. Regression targets use
// predict(); binary targets use predict_proba(), which clips to the band
// [p_min, 1-p_min] regardless of the underlying kind.
class FittedLearner {
 public:
  FittedLearner(LinearLassoModel m, double p_min)
      : model_(std::move(m)), p_min_(p_min) {}
  FittedLearner(LogisticLassoModel m)
      : model_(std::move(m)),
        p_min_(std::get<LogisticLassoModel>(model_).p_min) {}
  FittedLearner(ForestModel m, double p_min)
      : model_(std::move(m)), p_min_(p_min) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    return std::visit([&](const auto& m) { return m_predict(m, x); }, model_);
  }

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd p = predict(x);
    return p.unaryExpr([this](double v) {
      return std::clamp(v, p_min_, 1.0 - p_min_);
    });
  }

  bool degenerate() const {
    const auto* logit = std::get_if<LogisticLassoModel>(&model_);
    return logit != nullptr && logit->degenerate;
  }

 private:
  template <typename M>
  static Eigen::VectorXd m_predict(const M& m, const Eigen::MatrixXd& x) {
    return m.predict(x);
  }
  static Eigen::VectorXd m_predict(const LogisticLassoModel& m,
                                   const Eigen::MatrixXd& x) {
    return m.predict_proba(x);
  }

  std::variant<LinearLassoModel, LogisticLassoModel, ForestModel> model_;
  double p_min_;
};

inline FittedLearner fit_regression(const LearnerSpec& spec,
                                    const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& y,
                                    std::uint64_t seed) {
  switch (spec.kind) {
    case LearnerKind::kLinearLasso:
      return {fit_lasso(x, y, spec.lambda, spec.solver, seed),
              spec.solver.p_min};
    case LearnerKind::kLogisticLasso:
      return {fit_logistic_lasso(x, y, spec.lambda, spec.solver, seed)};
    case LearnerKind::kForest:
      return {fit_forest(x, y, spec.forest, seed), spec.solver.p_min};
  }
  throw Error("bad_learner_kind", "unknown learner kind");
}

// Binary targets accept any kind; non-logistic kinds model the indicator by
// regression and rely on clipping.
inline FittedLearner fit_binary(const LearnerSpec& spec,
                                const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& y, std::uint64_t seed) {
  return fit_regression(spec, x, y, seed);
}

}  // namespace seqdml
