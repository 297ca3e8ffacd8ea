#pragma once

#include <cmath>
#include <limits>

namespace seqdml {

enum class LearnerKind { kLinearLasso, kLogisticLasso, kForest };

// Shared by the two penalized solvers.
struct SolverOptions {
  double tol = 1e-7;             // max coefficient change per sweep
  int max_sweeps = 10000;        // coordinate-descent sweep budget per fit
  int cv_folds = 5;              // internal CV folds for lambda selection
  int grid_size = 50;            // geometric lambda grid length
  double lambda_min_ratio = 1e-3;  // lambda_min / lambda_max
  double p_min = 1e-4;           // probability clipping band
};

struct ForestOptions {
  int trees = 200;
  int min_leaf = 5;
  double feature_fraction = 1.0 / 3.0;
};

// Sentinel meaning "choose lambda by internal cross-validation".
inline constexpr double kCvLambda = std::numeric_limits<double>::quiet_NaN();

inline bool is_cv_lambda(double lambda) { return std::isnan(lambda); }

struct LearnerSpec {
  LearnerKind kind = LearnerKind::kLinearLasso;
  double lambda = kCvLambda;  // fixed penalty, or kCvLambda for CV
  SolverOptions solver;
  ForestOptions forest;

  LearnerSpec() = default;
  explicit LearnerSpec(LearnerKind k, double lam = kCvLambda)
      : kind(k), lambda(lam) {}
};

}  // namespace seqdml
