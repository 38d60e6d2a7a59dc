#include "hubertl/transfer.hpp"

#include "hubertl/rng.hpp"

namespace hubertl {

void TransferConfig::validate() const {
  solver_config(0.0).validate();
  if (cv_folds < 2) throw DataError("transfer: cv_folds must be at least 2");
  if (n_lambda < 2) throw DataError("transfer: n_lambda must be at least 2");
  if (lambda_w && !(*lambda_w >= 0.0)) throw DataError("transfer: lambda_w must be nonnegative");
  if (lambda_delta && !(*lambda_delta >= 0.0))
    throw DataError("transfer: lambda_delta must be nonnegative");
  if (lambda_ratio && !(*lambda_ratio > 0.0 && *lambda_ratio < 1.0))
    throw DataError("transfer: lambda_ratio must lie in (0,1)");
}

SolverConfig TransferConfig::solver_config(double lambda) const {
  SolverConfig cfg;
  cfg.gamma = gamma;
  cfg.alpha = alpha;
  cfg.lambda = lambda;
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  cfg.penalize_intercept = penalize_intercept;
  return cfg;
}

Dataset pool_datasets(const Dataset& target, const std::vector<Dataset>& sources,
                      bool replicate_target) {
  target.validate();
  for (const Dataset& s : sources) {
    s.validate();
    if (s.p() != target.p())
      throw DataError("pool_datasets: covariate dimension mismatch between '" +
                      target.label + "' and '" + s.label + "'");
  }
  const int target_copies =
      replicate_target && !sources.empty() ? static_cast<int>(sources.size()) : 1;
  Eigen::Index n = target.n() * target_copies;
  for (const Dataset& s : sources) n += s.n();

  Dataset pooled;
  pooled.label = "pooled";
  pooled.y.resize(n);
  pooled.X.resize(n, target.p());
  Eigen::Index at = 0;
  for (int c = 0; c < target_copies; ++c) {
    pooled.y.segment(at, target.n()) = target.y;
    pooled.X.middleRows(at, target.n()) = target.X;
    at += target.n();
  }
  for (const Dataset& s : sources) {
    pooled.y.segment(at, s.n()) = s.y;
    pooled.X.middleRows(at, s.n()) = s.X;
    at += s.n();
  }
  return pooled;
}

namespace {

StepFit penalized_step(const Dataset& d, const TransferConfig& cfg,
                       std::optional<double> lambda, std::uint64_t seed,
                       const Eigen::VectorXd* offset) {
  double lam;
  if (lambda) {
    lam = *lambda;
  } else {
    CvResult cv = cross_validate(d, cfg.alpha, cfg.gamma, cfg.cv_folds, seed,
                                 cfg.n_lambda, cfg.lambda_ratio, offset, cfg.tol,
                                 cfg.max_iter);
    lam = cv.lambda_star;
  }
  FitResult fr = fit(d, cfg.solver_config(lam), nullptr, offset);
  StepFit out;
  out.coef = fr.coef;
  out.lambda = lam;
  out.converged = fr.converged;
  out.iterations = fr.iterations;
  return out;
}

}  // namespace

StepFit fuse(const Dataset& target, const std::vector<Dataset>& sources,
             const TransferConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Dataset pooled = pool_datasets(target, sources, cfg.replicate_target);
  return penalized_step(pooled, cfg, cfg.lambda_w, seed, nullptr);
}

StepFit debias(const Dataset& target, const CoefVector& w_hat,
               const TransferConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  target.validate();
  if (w_hat.slopes.size() != target.p())
    throw DataError("debias: coefficient dimension mismatch");
  const Eigen::VectorXd offset = predict(target.X, w_hat);
  return penalized_step(target, cfg, cfg.lambda_delta, seed, &offset);
}

TransferFit oracle_fit(const Dataset& target, const std::vector<Dataset>& sources,
                       const TransferConfig& cfg, std::uint64_t seed) {
  StepFit w = fuse(target, sources, cfg, Rng::derive_key(seed, {1}));
  StepFit delta = debias(target, w.coef, cfg, Rng::derive_key(seed, {2}));
  TransferFit out;
  out.w_hat = w.coef;
  out.delta_hat = delta.coef;
  out.beta_hat = CoefVector(w.coef.intercept + delta.coef.intercept,
                            w.coef.slopes + delta.coef.slopes);
  out.lambda_w = w.lambda;
  out.lambda_delta = delta.lambda;
  out.converged = w.converged && delta.converged;
  return out;
}

}  // namespace hubertl
