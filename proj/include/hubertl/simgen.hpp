// Deterministic generators for the synthetic designs: sparse target
// coefficients, informative/non-informative source perturbations, Gaussian
// covariates under identity/AR/Toeplitz covariance, and three error laws.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hubertl/core.hpp"
#include "hubertl/rng.hpp"

namespace hubertl {

enum class ErrorDist { normal, cauchy, mixed_normal };
enum class Design { known_source, unknown_source };

const char* error_dist_name(ErrorDist dist);
ErrorDist parse_error_dist(const std::string& name);

struct ScenarioConfig {
  int p = 50;
  int n0 = 30;
  int nk = 20;
  int S = 25;
  double h = 4.0;
  int k_informative = 10;
  int ell = 14;         // nonzero prefix length of the target coefficients
  int s_toeplitz = 5;   // source-covariance band parameter (unknown-source design)
  ErrorDist error_dist = ErrorDist::normal;
  Design design = Design::known_source;
  std::uint64_t seed = 0;
  std::optional<double> ar_rho;  // known-source design: AR(rho) instead of identity
  // Informative perturbations draw N(0, h^2/|R|^2) per coordinate, whose
  // expected l1 shift is h*sqrt(2/pi), not h. This flag inflates the variance
  // by pi/2 so the expectation is exactly h.
  bool exact_mean_shift = false;

  void validate() const;
};

struct ScenarioTruth {
  CoefVector beta0;
  std::vector<CoefVector> betas;  // one per source
  std::vector<int> informative;   // 0-based source indices, ascending
};

struct Scenario {
  Dataset target;
  std::vector<Dataset> sources;
  ScenarioTruth truth;
};

// First ell coordinates (intercept first) equal 0.3, the rest 0.
CoefVector gen_target_beta(int p, int ell);

// Known-source informative shift: independent N(0, (h/m)^2) noise on the
// first m = min(100, p+1) coordinates.
CoefVector perturb_informative_gaussian(const CoefVector& beta0, double h, Rng& rng,
                                  bool exact_mean_shift = false);

// Unknown-source informative shift: (h/p) times a Rademacher sign on every
// coordinate, so the l1 shift is exactly (h/p)(p+1).
CoefVector perturb_informative_rademacher(const CoefVector& beta0, double h, Rng& rng);

// Non-informative coefficients: 0.5 on coordinates l+1..2l and on a random
// l-subset of {2l+1..p+1}, plus 2h times a Rademacher sign everywhere.
CoefVector gen_noninformative_beta(double h, int l, int p, Rng& rng);

// Symmetric Toeplitz covariance with first row (1, 1/(s+1) repeated 2s-1
// times, zeros). Rejects combinations that fail the definiteness check.
Eigen::MatrixXd gen_toeplitz_sigma(int p, int s);

Eigen::MatrixXd ar1_sigma(int p, double rho);

// Rows i.i.d. N(0, Sigma) through the lower Cholesky factor; a null factor
// means identity covariance.
Eigen::MatrixXd sample_covariates(int n, int p, const Eigen::MatrixXd* chol_lower,
                                  Rng& rng);

Eigen::VectorXd sample_errors(int n, ErrorDist dist, Rng& rng);

// Cholesky factor of the source covariance implied by the config, or null
// for identity.
std::optional<Eigen::MatrixXd> source_covariance_chol(const ScenarioConfig& cfg);

Scenario gen_scenario(const ScenarioConfig& cfg);

// One dataset CSV per sample plus a JSON manifest with the config and truth.
void dump_scenario(const Scenario& sc, const ScenarioConfig& cfg,
                   const std::string& dir);

}  // namespace hubertl
