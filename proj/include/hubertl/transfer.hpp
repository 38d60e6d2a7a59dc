// Two-step transfer estimator: fuse the target with transferable sources,
// then debias on the target alone. The final estimate is the entrywise sum
// of the two steps.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hubertl/core.hpp"
#include "hubertl/solver.hpp"

namespace hubertl {

struct TransferConfig {
  double alpha = 1.0;
  double gamma = 1.0;
  std::optional<double> lambda_w;      // absent: 5-fold CV on the pooled sample
  std::optional<double> lambda_delta;  // absent: 5-fold CV on the target
  int cv_folds = 5;
  int n_lambda = 100;
  std::optional<double> lambda_ratio;  // absent: solver default by shape
  double tol = 1e-7;
  int max_iter = 10000;
  bool penalize_intercept = false;
  // Pool the target once per source instead of once overall. Off by default;
  // see fuse() for the pooling rule.
  bool replicate_target = false;

  void validate() const;
  SolverConfig solver_config(double lambda) const;
};

struct StepFit {
  CoefVector coef;
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct TransferFit {
  CoefVector w_hat;
  CoefVector delta_hat;
  CoefVector beta_hat;  // w_hat + delta_hat, exact entrywise sum
  double lambda_w = 0.0;
  double lambda_delta = 0.0;
  bool converged = false;
};

// Stack target and source rows into one dataset. With replicate_target the
// target block is repeated once per source (the literal pooled objective);
// otherwise it appears exactly once.
Dataset pool_datasets(const Dataset& target, const std::vector<Dataset>& sources,
                      bool replicate_target = false);

// Fusion step: penalized Huber fit on the pooled sample. Empty source list
// degenerates to a plain target fit.
StepFit fuse(const Dataset& target, const std::vector<Dataset>& sources,
             const TransferConfig& cfg, std::uint64_t seed);

// Debiasing step: penalized Huber fit of the correction delta on the target,
// with the fused estimate entering through a fixed per-row offset.
StepFit debias(const Dataset& target, const CoefVector& w_hat,
               const TransferConfig& cfg, std::uint64_t seed);

// Full two-step estimator over a known transferable set.
TransferFit oracle_fit(const Dataset& target, const std::vector<Dataset>& sources,
                       const TransferConfig& cfg, std::uint64_t seed);

}  // namespace hubertl
