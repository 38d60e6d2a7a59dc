#include "hubertl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hubertl/rng.hpp"

namespace hubertl {

void SolverConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw DataError("solver: gamma must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("solver: alpha must be in [0,1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw DataError("solver: lambda must be nonnegative");
  if (!(tol > 0.0)) throw DataError("solver: tol must be positive");
  if (max_iter < 1) throw DataError("solver: max_iter must be at least 1");
}

double huber_loss(double t, double gamma) {
  if (!(gamma > 0.0)) throw DataError("huber_loss: gamma must be positive");
  if (!std::isfinite(t)) throw DataError("huber_loss: non-finite argument");
  const double a = std::abs(t);
  return a > gamma ? a - 0.5 * gamma : 0.5 * t * t / gamma;
}

double huber_deriv(double t, double gamma) {
  if (!(gamma > 0.0)) throw DataError("huber_deriv: gamma must be positive");
  if (!std::isfinite(t)) throw DataError("huber_deriv: non-finite argument");
  if (t > gamma) return 1.0;
  if (t < -gamma) return -1.0;
  return t / gamma;
}

double mean_huber_loss(const Eigen::VectorXd& residuals, double gamma) {
  const Eigen::Index n = residuals.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(residuals(i));
    acc += a > gamma ? a - 0.5 * gamma : 0.5 * residuals(i) * residuals(i) / gamma;
  }
  return acc / static_cast<double>(n);
}

namespace {

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double penalty_value(double b0, const Eigen::VectorXd& b, const SolverConfig& cfg) {
  double l1 = b.cwiseAbs().sum();
  double l2 = b.squaredNorm();
  if (cfg.penalize_intercept) {
    l1 += std::abs(b0);
    l2 += b0 * b0;
  }
  return cfg.lambda * (cfg.alpha * l1 + 0.5 * (1.0 - cfg.alpha) * l2);
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

// violation of the stationarity condition for one penalized coordinate
inline double coord_violation(double beta_j, double g_j, double lam_l1, double lam_l2) {
  if (beta_j == 0.0) return std::max(0.0, std::abs(g_j) - lam_l1);
  const double s = beta_j > 0.0 ? 1.0 : -1.0;
  return std::abs(g_j + lam_l2 * beta_j + lam_l1 * s);
}

double kkt_residual_impl(double b0, const Eigen::VectorXd& b, const Eigen::VectorXd& r,
                         const Eigen::MatrixXd& X, const SolverConfig& cfg) {
  const Eigen::Index n = r.size(), p = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd lpr(n);
  for (Eigen::Index i = 0; i < n; ++i) lpr(i) = huber_deriv(r(i), cfg.gamma);
  const double lam_l1 = cfg.lambda * cfg.alpha;
  const double lam_l2 = cfg.lambda * (1.0 - cfg.alpha);

  const double g0 = -inv_n * lpr.sum();
  double worst = cfg.penalize_intercept ? coord_violation(b0, g0, lam_l1, lam_l2)
                                        : std::abs(g0);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double gj = -inv_n * X.col(j).dot(lpr);
    worst = std::max(worst, coord_violation(b(j), gj, lam_l1, lam_l2));
  }
  return worst;
}

}  // namespace

double huber_objective(const CoefVector& beta, const Dataset& d, const SolverConfig& cfg,
                       const Eigen::VectorXd* offset) {
  cfg.validate();
  d.validate();
  Eigen::VectorXd r = d.y - predict(d.X, beta);
  if (offset) {
    if (offset->size() != d.n()) throw DataError("huber_objective: offset size mismatch");
    r -= *offset;
  }
  return mean_huber_loss(r, cfg.gamma) + penalty_value(beta.intercept, beta.slopes, cfg);
}

double intercept_only_fit(const Eigen::VectorXd& y, double gamma) {
  if (!(gamma > 0.0)) throw DataError("intercept_only_fit: gamma must be positive");
  const Eigen::Index n = y.size();
  if (n == 0) throw DataError("intercept_only_fit: empty response");
  std::vector<double> v(y.data(), y.data() + n);
  double c = median_of(std::move(v));
  for (int it = 0; it < 500; ++it) {
    double sw = 0.0, swy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = 1.0 / std::max(gamma, std::abs(y(i) - c));
      sw += w;
      swy += w * y(i);
    }
    const double cnew = swy / sw;
    const double step = cnew - c;
    c = cnew;
    if (std::abs(step) <= 1e-13 * (1.0 + std::abs(c))) break;
  }
  return c;
}

double kkt_residual(const CoefVector& beta, const Dataset& d, const SolverConfig& cfg,
                    const Eigen::VectorXd* offset) {
  cfg.validate();
  d.validate();
  Eigen::VectorXd r = d.y - predict(d.X, beta);
  if (offset) {
    if (offset->size() != d.n()) throw DataError("kkt_residual: offset size mismatch");
    r -= *offset;
  }
  return kkt_residual_impl(beta.intercept, beta.slopes, r, d.X, cfg);
}

FitResult fit(const Dataset& d, const SolverConfig& cfg, const CoefVector* warm_start,
              const Eigen::VectorXd* offset) {
  cfg.validate();
  d.validate();
  const Eigen::Index n = d.n(), p = d.p();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::VectorXd yeff = d.y;
  if (offset) {
    if (offset->size() != n) throw DataError("fit: offset size mismatch");
    yeff -= *offset;
  }

  double b0;
  Eigen::VectorXd b;
  if (warm_start) {
    if (warm_start->slopes.size() != p) throw DataError("fit: warm start dimension mismatch");
    if (!warm_start->all_finite()) throw DataError("fit: non-finite warm start");
    b0 = warm_start->intercept;
    b = warm_start->slopes;
  } else {
    b0 = intercept_only_fit(yeff, cfg.gamma);
    b = Eigen::VectorXd::Zero(p);
  }

  Eigen::VectorXd r = yeff - d.X * b;
  r.array() -= b0;

  const double lam_l1 = cfg.lambda * cfg.alpha;
  const double lam_l2 = cfg.lambda * (1.0 - cfg.alpha);
  const double gamma = cfg.gamma;

  FitResult res;
  res.objective_trace.reserve(64);
  auto objective_now = [&]() {
    return mean_huber_loss(r, gamma) + penalty_value(b0, b, cfg);
  };
  res.objective_trace.push_back(objective_now());

  Eigen::VectorXd w(n);
  double kkt = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iter = 0;

  while (iter < cfg.max_iter) {
    ++iter;
    // Majorization weights from the sweep-start residuals. Holding them
    // fixed for the whole sweep keeps the true objective nonincreasing.
    for (Eigen::Index i = 0; i < n; ++i)
      w(i) = 1.0 / std::max(gamma, std::abs(r(i)));

    double delta_max = 0.0;

    // intercept
    {
      double sw = 0.0, swr = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        sw += w(i);
        swr += w(i) * r(i);
      }
      double step;
      if (!cfg.penalize_intercept) {
        step = swr / sw;
      } else {
        const double num = inv_n * (swr + sw * b0);
        const double denom = inv_n * sw + lam_l2;
        step = soft_threshold(num, lam_l1) / denom - b0;
      }
      if (step != 0.0) {
        b0 += step;
        r.array() -= step;
      }
      delta_max = std::max(delta_max, std::abs(step));
    }

    // slopes
    const double* wp = w.data();
    double* rp = r.data();
    for (Eigen::Index j = 0; j < p; ++j) {
      const double* xj = d.X.col(j).data();
      double num = 0.0, curv = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double wx = wp[i] * xj[i];
        num += wx * rp[i];
        curv += wx * xj[i];
      }
      num = inv_n * num + b(j) * (inv_n * curv);
      const double denom = inv_n * curv + lam_l2;
      const double bj_new = denom > 0.0 ? soft_threshold(num, lam_l1) / denom : 0.0;
      const double step = bj_new - b(j);
      if (step != 0.0) {
        b(j) = bj_new;
        for (Eigen::Index i = 0; i < n; ++i) rp[i] -= step * xj[i];
      }
      delta_max = std::max(delta_max, std::abs(step));
    }

    res.objective_trace.push_back(objective_now());

    if (delta_max < cfg.tol) {
      kkt = kkt_residual_impl(b0, b, r, d.X, cfg);
      if (kkt <= 100.0 * cfg.tol) {
        converged = true;
        break;
      }
    }
  }

  if (!std::isfinite(kkt)) kkt = kkt_residual_impl(b0, b, r, d.X, cfg);

  res.coef = CoefVector(b0, std::move(b));
  res.objective = res.objective_trace.back();
  res.iterations = iter;
  res.converged = converged;
  res.kkt_residual = kkt;
  return res;
}

double default_lambda_ratio(const Dataset& d) {
  return d.n() < d.p() ? 0.01 : 1e-4;
}

std::vector<double> lambda_path(const Dataset& d, double alpha, double gamma,
                                int n_lambda, std::optional<double> ratio,
                                const Eigen::VectorXd* offset) {
  d.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("lambda_path: alpha must be in [0,1]");
  if (!(gamma > 0.0)) throw DataError("lambda_path: gamma must be positive");
  if (n_lambda < 2) throw DataError("lambda_path: need at least 2 grid points");
  const double q = ratio.value_or(default_lambda_ratio(d));
  if (!(q > 0.0 && q < 1.0)) throw DataError("lambda_path: ratio must lie in (0,1)");

  Eigen::VectorXd yeff = d.y;
  if (offset) {
    if (offset->size() != d.n()) throw DataError("lambda_path: offset size mismatch");
    yeff -= *offset;
  }
  const double b0 = intercept_only_fit(yeff, gamma);
  const Eigen::Index n = d.n();
  Eigen::VectorXd lpr(n);
  for (Eigen::Index i = 0; i < n; ++i) lpr(i) = huber_deriv(yeff(i) - b0, gamma);
  const double gmax = ((d.X.transpose() * lpr) / static_cast<double>(n))
                          .cwiseAbs()
                          .maxCoeff();
  if (!(gmax > 0.0))
    throw DataError("lambda_path: lambda_max is zero (constant response?)");

  const double alpha_eff = std::max(alpha, 1e-3);
  // tiny inflation keeps the all-zero-slope solution an exact fixed point
  // of the solver at path[0] despite the divide/multiply round trip
  const double lmax = gmax / alpha_eff * (1.0 + 1e-10);

  std::vector<double> path(static_cast<std::size_t>(n_lambda));
  for (int k = 0; k < n_lambda; ++k)
    path[static_cast<std::size_t>(k)] =
        lmax * std::pow(q, static_cast<double>(k) / static_cast<double>(n_lambda - 1));
  return path;
}

CvResult cross_validate(const Dataset& d, double alpha, double gamma, int folds,
                        std::uint64_t seed, int n_lambda, std::optional<double> ratio,
                        const Eigen::VectorXd* offset, double tol, int max_iter) {
  d.validate();
  const int n = static_cast<int>(d.n());
  if (folds < 2) throw DataError("cross_validate: need at least 2 folds");
  if (n < folds) throw DataError("cross_validate: more folds than rows");

  const std::vector<double> path = lambda_path(d, alpha, gamma, n_lambda, ratio, offset);
  const std::size_t K = path.size();

  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(perm);

  // contiguous chunks of the shuffled order; first n % folds chunks get +1
  std::vector<double> loss_sum(K, 0.0);
  int pos = 0;
  for (int f = 0; f < folds; ++f) {
    const int size = n / folds + (f < n % folds ? 1 : 0);
    std::vector<int> val_idx(perm.begin() + pos, perm.begin() + pos + size);
    pos += size;
    std::sort(val_idx.begin(), val_idx.end());
    std::vector<int> train_idx;
    train_idx.reserve(static_cast<std::size_t>(n - size));
    {
      std::size_t vi = 0;
      for (int i = 0; i < n; ++i) {
        if (vi < val_idx.size() && val_idx[vi] == i) {
          ++vi;
        } else {
          train_idx.push_back(i);
        }
      }
    }

    Dataset train = d.subset(train_idx);
    Dataset val = d.subset(val_idx);
    Eigen::VectorXd off_train, off_val;
    if (offset) {
      off_train.resize(static_cast<Eigen::Index>(train_idx.size()));
      for (std::size_t i = 0; i < train_idx.size(); ++i)
        off_train(static_cast<Eigen::Index>(i)) = (*offset)(train_idx[i]);
      off_val.resize(static_cast<Eigen::Index>(val_idx.size()));
      for (std::size_t i = 0; i < val_idx.size(); ++i)
        off_val(static_cast<Eigen::Index>(i)) = (*offset)(val_idx[i]);
    }

    SolverConfig cfg;
    cfg.gamma = gamma;
    cfg.alpha = alpha;
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    CoefVector warm;
    for (std::size_t k = 0; k < K; ++k) {
      cfg.lambda = path[k];
      FitResult fr = fit(train, cfg, k == 0 ? nullptr : &warm,
                         offset ? &off_train : nullptr);
      warm = fr.coef;
      Eigen::VectorXd rv = val.y - predict(val.X, warm);
      if (offset) rv -= off_val;
      loss_sum[k] += mean_huber_loss(rv, gamma);
    }
  }

  CvResult out;
  out.table.resize(K);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    out.table[k].lambda = path[k];
    out.table[k].mean_loss = loss_sum[k] / static_cast<double>(folds);
    best = std::min(best, out.table[k].mean_loss);
  }
  // ties break toward the larger lambda (path is decreasing)
  const double tie_tol = 1e-12 * (1.0 + std::abs(best));
  for (std::size_t k = 0; k < K; ++k) {
    if (out.table[k].mean_loss <= best + tie_tol) {
      out.lambda_star = path[k];
      break;
    }
  }
  return out;
}

double default_gamma(const Dataset& d) {
  d.validate();
  std::vector<double> v(d.y.data(), d.y.data() + d.n());
  const double med = median_of(v);
  for (double& x : v) x = std::abs(x - med);
  const double mad = median_of(std::move(v));
  double scale = 1.4826 * mad;
  if (!(scale > 1e-12 * (1.0 + std::abs(med)))) {
    const double mean = d.y.mean();
    scale = std::sqrt((d.y.array() - mean).square().sum() / static_cast<double>(d.n()));
  }
  if (!(scale > 0.0)) scale = 1.0;
  return 1.345 * scale;
}

}  // namespace hubertl
