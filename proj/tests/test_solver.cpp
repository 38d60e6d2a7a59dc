#include <cmath>
#include <vector>

#include "doctest.h"
#include "hubertl/core.hpp"
#include "hubertl/rng.hpp"
#include "hubertl/solver.hpp"
#include "oracle_solver.hpp"
#include "test_util.hpp"

using namespace hubertl;
using testing::linf;
using testing::make_instance;

TEST_CASE("huber_loss closed-form values") {
  CHECK(huber_loss(0.0, 1.0) == 0.0);
  CHECK(huber_loss(0.5, 1.0) == 0.125);
  CHECK(huber_loss(2.0, 1.0) == 1.5);
  CHECK(huber_loss(-3.0, 2.0) == 2.0);
  CHECK_THROWS_AS(huber_loss(std::nan(""), 1.0), DataError);
  CHECK_THROWS_AS(huber_loss(1.0, 0.0), DataError);
  CHECK_THROWS_AS(huber_loss(1.0, -2.0), DataError);
}

TEST_CASE("huber_loss is convex") {
  Rng rng(1);
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (int t = 0; t < 200; ++t) {
      const double t1 = 10.0 * (rng.uniform01() - 0.5);
      const double t2 = 10.0 * (rng.uniform01() - 0.5);
      const double th = rng.uniform01();
      const double lhs = huber_loss(th * t1 + (1.0 - th) * t2, gamma);
      const double rhs = th * huber_loss(t1, gamma) + (1.0 - th) * huber_loss(t2, gamma);
      CHECK(lhs <= rhs + 1e-12);
    }
  }
}

TEST_CASE("huber_deriv matches central finite differences away from the kink") {
  const double step = 1e-6;
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (double t = -3.0 * gamma; t <= 3.0 * gamma; t += 0.0137) {
      if (std::abs(std::abs(t) - gamma) < 2e-6) continue;
      const double fd = (huber_loss(t + step, gamma) - huber_loss(t - step, gamma)) /
                        (2.0 * step);
      CHECK(std::abs(fd - huber_deriv(t, gamma)) < 1e-6);
    }
  }
}

TEST_CASE("huber_objective closed-form values") {
  Dataset d;
  d.X = Eigen::MatrixXd::Random(8, 2);
  d.y = Eigen::VectorXd::Zero(8);
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.lambda = 0.0;
  CoefVector zero(0.0, Eigen::VectorXd::Zero(2));
  CHECK(huber_objective(zero, d, cfg) == 0.0);

  // large gamma puts every residual on the quadratic branch
  Dataset d2 = make_instance(20, 3, 12, 0.5);
  SolverConfig big;
  big.lambda = 0.0;
  big.gamma = 2.0 * d2.y.cwiseAbs().maxCoeff() + 10.0;
  CoefVector zero3(0.0, Eigen::VectorXd::Zero(3));
  const double msr = d2.y.squaredNorm() / static_cast<double>(d2.n());
  CHECK(huber_objective(zero3, d2, big) ==
        doctest::Approx(msr / (2.0 * big.gamma)).epsilon(1e-12));

  // penalty arithmetic: slopes (1,-2), alpha 0.5, lambda 1, zero residuals
  Eigen::VectorXd s(2);
  s << 1.0, -2.0;
  CoefVector beta(0.0, s);
  Dataset d3;
  d3.X = Eigen::MatrixXd::Random(6, 2);
  d3.y = predict(d3.X, beta);
  SolverConfig pcfg;
  pcfg.gamma = 1.0;
  pcfg.alpha = 0.5;
  pcfg.lambda = 1.0;
  CHECK(huber_objective(beta, d3, pcfg) == doctest::Approx(2.75).epsilon(1e-12));

  CoefVector wrong(0.0, Eigen::VectorXd::Zero(5));
  CHECK_THROWS_AS(huber_objective(wrong, d3, pcfg), DataError);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SolverConfig bad = cfg;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.max_iter = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("intercept_only_fit is a stationary point") {
  Rng rng(21);
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) y(i) = 2.0 + rng.normal() + (i == 0 ? 50.0 : 0.0);
  for (double gamma : {0.5, 1.345}) {
    const double c = intercept_only_fit(y, gamma);
    double g = 0.0;
    for (Eigen::Index i = 0; i < 30; ++i) g += huber_deriv(y(i) - c, gamma);
    CHECK(std::abs(g) / 30.0 < 1e-9);
  }
}

TEST_CASE("complete shrinkage at and above lambda_max") {
  Dataset d = make_instance(40, 6, 2024, 0.7);
  const double gamma = 1.0;
  for (double alpha : {1.0, 0.5}) {
    const std::vector<double> path = lambda_path(d, alpha, gamma, 10, 0.01);
    for (double lam : {path[0], 2.0 * path[0]}) {
      SolverConfig cfg;
      cfg.gamma = gamma;
      cfg.alpha = alpha;
      cfg.lambda = lam;
      FitResult fr = fit(d, cfg);
      CHECK(fr.converged);
      CHECK(fr.coef.slopes.cwiseAbs().maxCoeff() == 0.0);
      CHECK(fr.coef.intercept ==
            doctest::Approx(intercept_only_fit(d.y, gamma)).epsilon(1e-8));
    }
  }
}

TEST_CASE("noiseless system is recovered at tiny lambda") {
  CoefVector truth;
  Dataset d = make_instance(50, 5, 515, 0.0, 5, &truth);
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.lambda = 1e-6;
  cfg.tol = 1e-9;
  FitResult fr = fit(d, cfg);
  CHECK(fr.converged);
  CHECK((fr.coef.slopes - truth.slopes).cwiseAbs().maxCoeff() < 1e-3);
  Eigen::VectorXd r = d.y - predict(d.X, fr.coef);
  CHECK(r.cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("fit matches the proximal-gradient oracle") {
  // a handful of shapes and penalties; the full 50-instance battery lives
  // in the acceptance suite
  struct Case {
    Eigen::Index n, p;
    double alpha, gamma;
    std::uint64_t seed;
    bool penalize_intercept;
  };
  const std::vector<Case> cases = {
      {30, 4, 1.0, 1.5, 1001, false}, {30, 4, 0.5, 1.5, 1002, false},
      {20, 6, 1.0, 0.5, 1003, false}, {50, 10, 0.5, 1.0, 1004, false},
      {40, 5, 0.0, 1.0, 1005, false}, {30, 4, 1.0, 1.0, 1006, true},
  };
  for (const Case& c : cases) {
    CAPTURE(c.seed);
    Dataset d = make_instance(c.n, c.p, c.seed, 0.8);
    const std::vector<double> path = lambda_path(d, c.alpha, c.gamma, 20, 0.01);
    const double lam = c.seed == 1001 ? 0.1 : path[10];

    SolverConfig cfg;
    cfg.gamma = c.gamma;
    cfg.alpha = c.alpha;
    cfg.lambda = lam;
    cfg.tol = 1e-9;
    cfg.penalize_intercept = c.penalize_intercept;
    FitResult fr = fit(d, cfg);
    CHECK(fr.converged);
    CHECK(fr.kkt_residual <= 100.0 * cfg.tol);

    testing::OracleProblem prob;
    prob.y = d.y;
    prob.X = d.X;
    prob.gamma = c.gamma;
    prob.alpha = c.alpha;
    prob.lambda = lam;
    prob.penalize_intercept = c.penalize_intercept;
    testing::OracleSolution sol = testing::prox_gradient_oracle(prob);

    CHECK(linf(fr.coef, sol.coef) < 1e-4);
    CHECK(std::abs(fr.objective - sol.objective) < 1e-8);
  }
}

TEST_CASE("objective trace is monotone nonincreasing") {
  for (std::uint64_t seed : {3001ULL, 3002ULL, 3003ULL}) {
    Dataset d = make_instance(35, 8, seed, 1.0);
    SolverConfig cfg;
    cfg.gamma = 0.8;
    cfg.alpha = 0.7;
    cfg.lambda = 0.05;
    FitResult fr = fit(d, cfg);
    REQUIRE(fr.objective_trace.size() >= 2);
    for (std::size_t i = 1; i < fr.objective_trace.size(); ++i)
      CHECK(fr.objective_trace[i] <= fr.objective_trace[i - 1] + 1e-14);
  }
}

TEST_CASE("non-convergence reports converged=false instead of throwing") {
  Dataset d = make_instance(40, 10, 41, 1.0);
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.lambda = 1e-4;
  cfg.max_iter = 1;
  FitResult fr;
  CHECK_NOTHROW(fr = fit(d, cfg));
  CHECK_FALSE(fr.converged);
  CHECK(fr.iterations == 1);
}

TEST_CASE("warm start reaches the same minimizer") {
  Dataset d = make_instance(45, 6, 99, 0.6);
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.alpha = 0.5;
  cfg.lambda = 0.02;
  cfg.tol = 1e-9;
  FitResult cold = fit(d, cfg);
  SolverConfig warm_cfg = cfg;
  warm_cfg.lambda = 0.05;
  FitResult warm_src = fit(d, warm_cfg);
  FitResult warm = fit(d, cfg, &warm_src.coef);
  CHECK(linf(cold.coef, warm.coef) < 1e-5);
}

TEST_CASE("offset fit equals fitting the shifted response") {
  Dataset d = make_instance(30, 4, 71, 0.5);
  Eigen::VectorXd off(30);
  Rng rng(72);
  for (Eigen::Index i = 0; i < 30; ++i) off(i) = rng.normal();
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.alpha = 1.0;
  cfg.lambda = 0.03;
  FitResult with_off = fit(d, cfg, nullptr, &off);
  Dataset shifted = d;
  shifted.y -= off;
  FitResult direct = fit(shifted, cfg);
  CHECK(linf(with_off.coef, direct.coef) < 1e-12);
}

TEST_CASE("huge gamma reduces to penalized least squares") {
  Dataset d = make_instance(40, 5, 505, 0.4);
  const double gamma = 1e6;

  SolverConfig ridge_cfg;
  ridge_cfg.gamma = gamma;
  ridge_cfg.alpha = 0.0;
  ridge_cfg.lambda = 2e-7;
  ridge_cfg.tol = 1e-11;
  FitResult ridge_fit = fit(d, ridge_cfg);
  CoefVector ridge_ref =
      testing::ridge_closed_form(d.y, d.X, gamma, ridge_cfg.lambda, false);
  CHECK(linf(ridge_fit.coef, ridge_ref) < 1e-4);

  SolverConfig ols_cfg;
  ols_cfg.gamma = gamma;
  ols_cfg.lambda = 0.0;
  ols_cfg.tol = 1e-11;
  FitResult ols_fit = fit(d, ols_cfg);
  CoefVector ols_ref = testing::least_squares(d.y, d.X);
  CHECK(linf(ols_fit.coef, ols_ref) < 1e-4);
}

TEST_CASE("one gross outlier moves huber slopes less than least squares") {
  Dataset d = make_instance(50, 4, 606, 0.3);
  SolverConfig cfg;
  cfg.gamma = 1.0;
  cfg.lambda = 0.0;
  FitResult clean = fit(d, cfg);
  CoefVector ls_clean = testing::least_squares(d.y, d.X);

  Dataset corrupted = d;
  corrupted.y(0) += 1000.0;
  FitResult dirty = fit(corrupted, cfg);
  CoefVector ls_dirty = testing::least_squares(corrupted.y, corrupted.X);

  const double huber_move = (dirty.coef.slopes - clean.coef.slopes).norm();
  const double ls_move = (ls_dirty.slopes - ls_clean.slopes).norm();
  CHECK(huber_move < ls_move);
}

TEST_CASE("lambda_path geometry and scale behavior") {
  Dataset d = make_instance(30, 5, 808, 0.5);
  const std::vector<double> path = lambda_path(d, 1.0, 1.0, 5, 0.01);
  REQUIRE(path.size() == 5);
  CHECK(path[4] / path[0] == doctest::Approx(0.01).epsilon(1e-12));
  for (std::size_t i = 1; i < path.size(); ++i) CHECK(path[i] < path[i - 1]);

  // the printed loss has a scale-free derivative, so jointly doubling y and
  // gamma leaves lambda_max unchanged (doubling y alone would change it)
  Dataset doubled = d;
  doubled.y *= 2.0;
  const std::vector<double> path2 = lambda_path(doubled, 1.0, 2.0, 5, 0.01);
  CHECK(path2[0] == doctest::Approx(path[0]).epsilon(1e-12));

  Dataset constant = d;
  constant.y.setConstant(3.0);
  CHECK_THROWS_AS(lambda_path(constant, 1.0, 1.0, 5, 0.01), DataError);

  // alpha=0 uses the 0.001 surrogate in lambda_max only
  const std::vector<double> p0 = lambda_path(d, 0.0, 1.0, 5, 0.01);
  const std::vector<double> p1 = lambda_path(d, 0.001, 1.0, 5, 0.01);
  CHECK(p0[0] == doctest::Approx(p1[0]).epsilon(1e-12));
}

TEST_CASE("cross validation is deterministic and respects the tie rule") {
  Dataset d = make_instance(24, 4, 909, 0.4);
  CvResult a = cross_validate(d, 1.0, 1.0, 4, 7, 30);
  CvResult b = cross_validate(d, 1.0, 1.0, 4, 7, 30);
  REQUIRE(a.table.size() == b.table.size());
  CHECK(a.lambda_star == b.lambda_star);
  for (std::size_t i = 0; i < a.table.size(); ++i) {
    CHECK(a.table[i].lambda == b.table[i].lambda);
    CHECK(a.table[i].mean_loss == b.table[i].mean_loss);
  }

  // recompute the selection rule from the reported table
  double best = a.table[0].mean_loss;
  for (const CvRow& row : a.table) best = std::min(best, row.mean_loss);
  const double tie = 1e-12 * (1.0 + std::abs(best));
  double expect = 0.0;
  for (const CvRow& row : a.table) {
    if (row.mean_loss <= best + tie) {
      expect = row.lambda;
      break;
    }
  }
  CHECK(a.lambda_star == expect);

  CvResult c = cross_validate(d, 1.0, 1.0, 4, 8, 30);
  bool any_diff = c.lambda_star != a.lambda_star;
  for (std::size_t i = 0; !any_diff && i < a.table.size(); ++i)
    any_diff = c.table[i].mean_loss != a.table[i].mean_loss;
  CHECK(any_diff);
}

TEST_CASE("leave-one-out tie selection on a near-exact linear dataset") {
  Rng rng(313);
  Dataset d;
  d.X.resize(6, 1);
  d.y.resize(6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    d.X(i, 0) = static_cast<double>(i) - 2.5;
    d.y(i) = 1.0 + 2.0 * d.X(i, 0) + 1e-8 * rng.normal();
  }
  CvResult cv = cross_validate(d, 1.0, 1.0, 6, 11, 25);
  double best = cv.table[0].mean_loss;
  for (const CvRow& row : cv.table) best = std::min(best, row.mean_loss);
  const double tie = 1e-12 * (1.0 + std::abs(best));
  double largest_within = 0.0;
  for (const CvRow& row : cv.table) {
    if (row.mean_loss <= best + tie) {
      largest_within = row.lambda;
      break;
    }
  }
  CHECK(cv.lambda_star == largest_within);
  // exact-fit data drives the best lambda to the small end of the path
  CHECK(cv.lambda_star < cv.table.front().lambda);
}

TEST_CASE("leave-one-out cv loss at lambda_max is permutation invariant") {
  Dataset d = make_instance(12, 3, 515, 0.5);
  CvResult base = cross_validate(d, 1.0, 1.0, 12, 5, 10);

  std::vector<int> perm(12);
  for (int i = 0; i < 12; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(99);
  rng.shuffle(perm);
  Dataset shuffled = d.subset(perm);
  CvResult moved = cross_validate(shuffled, 1.0, 1.0, 12, 5, 10);

  CHECK(std::abs(base.table[0].mean_loss - moved.table[0].mean_loss) < 1e-12);
}

TEST_CASE("default gamma follows the scaled MAD") {
  Dataset d = make_instance(60, 3, 717, 1.0);
  const double g = default_gamma(d);
  CHECK(g > 0.0);
  std::vector<double> v(d.y.data(), d.y.data() + d.n());
  std::sort(v.begin(), v.end());
  const double med = 0.5 * (v[29] + v[30]);
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - med));
  std::sort(dev.begin(), dev.end());
  const double mad = 0.5 * (dev[29] + dev[30]);
  CHECK(g == doctest::Approx(1.345 * 1.4826 * mad).epsilon(1e-12));
}
