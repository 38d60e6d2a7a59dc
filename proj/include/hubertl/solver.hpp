#pragma once

// Elastic-net-penalized Huber regression:
//
//   min over beta of  (1/n) sum_i l(y_i - o_i - z_i' beta) + lambda * P_a(beta)
//
// with l the gamma-scaled Huber loss, P_a(b) = a*|b|_1 + 0.5*(1-a)*|b|_2^2,
// and o an optional fixed per-row offset. Solved by cyclic coordinate descent
// on an iteratively reweighted quadratic majorization of the Huber term
// (weights w_i = 1/max(gamma, |r_i|)), with soft-thresholding updates.
// The intercept is unpenalized unless penalize_intercept is set.

#include <cstdint>
#include <optional>
#include <vector>

#include "hubertl/core.hpp"

namespace hubertl {

struct SolverConfig {
  double gamma = 1.0;   // Huber threshold, > 0
  double alpha = 1.0;   // elastic-net mixing in [0,1]
  double lambda = 0.0;  // penalty level, >= 0
  double tol = 1e-7;    // max absolute coefficient change per sweep
  int max_iter = 10000;
  bool penalize_intercept = false;

  void validate() const;
};

struct FitResult {
  CoefVector coef;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  // objective value at initialization and after each full sweep
  std::vector<double> objective_trace;
};

// pointwise Huber loss: 0.5 t^2 / gamma for |t| <= gamma, |t| - 0.5 gamma beyond
double huber_loss(double t, double gamma);

// its derivative: t/gamma inside the threshold, sign(t) outside
double huber_deriv(double t, double gamma);

// (1/n) sum_i huber_loss(r_i)
double mean_huber_loss(const Eigen::VectorXd& residuals, double gamma);

// full penalized objective at beta
double huber_objective(const CoefVector& beta, const Dataset& d, const SolverConfig& cfg,
                       const Eigen::VectorXd* offset = nullptr);

// argmin over c of (1/n) sum_i huber_loss(y_i - c), by IRLS
double intercept_only_fit(const Eigen::VectorXd& y, double gamma);

// max subgradient-condition violation at beta; converged fits certify
// kkt_residual <= 100 * tol
double kkt_residual(const CoefVector& beta, const Dataset& d, const SolverConfig& cfg,
                    const Eigen::VectorXd* offset = nullptr);

// Fit the penalized Huber regression. Non-convergence within max_iter is
// reported through FitResult::converged, not an exception.
FitResult fit(const Dataset& d, const SolverConfig& cfg,
              const CoefVector* warm_start = nullptr,
              const Eigen::VectorXd* offset = nullptr);

// glmnet-style ratio convention: deep path when n >= p
double default_lambda_ratio(const Dataset& d);

// Decreasing geometric grid from lambda_max down to lambda_max * ratio.
// lambda_max is the smallest penalty at which every slope is zero given the
// intercept-only fit. Throws DataError when the response carries no signal.
std::vector<double> lambda_path(const Dataset& d, double alpha, double gamma,
                                int n_lambda = 100,
                                std::optional<double> ratio = std::nullopt,
                                const Eigen::VectorXd* offset = nullptr);

struct CvRow {
  double lambda = 0.0;
  double mean_loss = 0.0;  // held-out mean Huber loss, unpenalized, same gamma
};

struct CvResult {
  double lambda_star = 0.0;
  std::vector<CvRow> table;
};

// K-fold cross-validation over the lambda path. Folds are a seeded partition
// with sizes differing by at most one; ties in held-out loss break toward the
// larger lambda.
CvResult cross_validate(const Dataset& d, double alpha, double gamma, int folds,
                        std::uint64_t seed, int n_lambda = 100,
                        std::optional<double> ratio = std::nullopt,
                        const Eigen::VectorXd* offset = nullptr,
                        double tol = 1e-7, int max_iter = 10000);

// 1.345 * 1.4826 * MAD of the residuals about the median response,
// computed once. Falls back to the response standard deviation, then 1.0,
// when the MAD degenerates.
double default_gamma(const Dataset& d);

}  // namespace hubertl
