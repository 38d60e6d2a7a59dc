#include "hubertl/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Cholesky>

#include "json.hpp"

namespace hubertl {

const char* error_dist_name(ErrorDist dist) {
  switch (dist) {
    case ErrorDist::normal: return "normal";
    case ErrorDist::cauchy: return "cauchy";
    case ErrorDist::mixed_normal: return "mixed_normal";
  }
  throw DataError("error_dist_name: unknown distribution");
}

ErrorDist parse_error_dist(const std::string& name) {
  if (name == "normal") return ErrorDist::normal;
  if (name == "cauchy") return ErrorDist::cauchy;
  if (name == "mixed_normal" || name == "mixed") return ErrorDist::mixed_normal;
  throw DataError("parse_error_dist: unknown distribution '" + name + "'");
}

void ScenarioConfig::validate() const {
  if (p < 1 || n0 < 1 || S < 0) throw DataError("scenario: p, n0 must be >= 1 and S >= 0");
  if (S > 0 && nk < 1) throw DataError("scenario: nk must be >= 1 when sources exist");
  if (!(h >= 0.0)) throw DataError("scenario: h must be nonnegative");
  if (k_informative < 0 || k_informative > S)
    throw DataError("scenario: k_informative must lie in [0, S]");
  if (ell < 0 || ell > p + 1) throw DataError("scenario: ell must lie in [0, p+1]");
  if (s_toeplitz < 1 || 2 * s_toeplitz > p)
    throw DataError("scenario: s_toeplitz must satisfy 1 <= s and 2s <= p");
  if (ar_rho && !(std::abs(*ar_rho) < 1.0))
    throw DataError("scenario: ar_rho must lie in (-1, 1)");
}

CoefVector gen_target_beta(int p, int ell) {
  if (ell < 0 || ell > p + 1) throw DataError("gen_target_beta: ell must lie in [0, p+1]");
  CoefVector beta(0.0, Eigen::VectorXd::Zero(p));
  if (ell >= 1) beta.intercept = 0.3;
  for (int j = 0; j < ell - 1; ++j) beta.slopes(j) = 0.3;
  return beta;
}

CoefVector perturb_informative_gaussian(const CoefVector& beta0, double h, Rng& rng,
                                  bool exact_mean_shift) {
  const int dim = static_cast<int>(beta0.dim());
  const int m = std::min(100, dim);
  double sd = h / static_cast<double>(m);
  if (exact_mean_shift) sd *= std::sqrt(1.5707963267948966);  // pi/2
  CoefVector out = beta0;
  out.intercept += sd * rng.normal();
  for (int j = 0; j < m - 1; ++j) out.slopes(j) += sd * rng.normal();
  return out;
}

CoefVector perturb_informative_rademacher(const CoefVector& beta0, double h, Rng& rng) {
  const double step = h / static_cast<double>(beta0.slopes.size());
  CoefVector out = beta0;
  out.intercept += step * rng.rademacher();
  for (Eigen::Index j = 0; j < out.slopes.size(); ++j)
    out.slopes(j) += step * rng.rademacher();
  return out;
}

CoefVector gen_noninformative_beta(double h, int l, int p, Rng& rng) {
  if (l < 1) throw DataError("gen_noninformative_beta: l must be >= 1");
  if (2 * l >= p + 1) throw DataError("gen_noninformative_beta: need 2l < p+1");
  if (p + 1 - 2 * l < l)
    throw DataError("gen_noninformative_beta: not enough coordinates beyond 2l to sample from");

  // 0-based coordinates over (intercept, slopes...): base block l..2l-1,
  // plus a uniform l-subset of 2l..p
  std::vector<int> pool;
  pool.reserve(static_cast<std::size_t>(p + 1 - 2 * l));
  for (int c = 2 * l; c <= p; ++c) pool.push_back(c);
  std::vector<bool> bump(static_cast<std::size_t>(p + 1), false);
  for (int c = l; c < 2 * l; ++c) bump[static_cast<std::size_t>(c)] = true;
  for (int i = 0; i < l; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng.below(pool.size() - static_cast<std::size_t>(i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    bump[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])] = true;
  }

  CoefVector out(0.0, Eigen::VectorXd::Zero(p));
  for (int c = 0; c <= p; ++c) {
    const double v = 2.0 * h * rng.rademacher() + (bump[static_cast<std::size_t>(c)] ? 0.5 : 0.0);
    if (c == 0)
      out.intercept = v;
    else
      out.slopes(c - 1) = v;
  }
  return out;
}

Eigen::MatrixXd gen_toeplitz_sigma(int p, int s) {
  if (s < 1) throw DataError("gen_toeplitz_sigma: s must be >= 1");
  if (2 * s > p) throw DataError("gen_toeplitz_sigma: need 2s <= p");
  Eigen::VectorXd row = Eigen::VectorXd::Zero(p);
  row(0) = 1.0;
  for (int j = 1; j <= 2 * s - 1; ++j) row(j) = 1.0 / static_cast<double>(s + 1);
  Eigen::MatrixXd sigma(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) sigma(i, j) = row(std::abs(i - j));
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gen_toeplitz_sigma: (p=" + std::to_string(p) +
                         ", s=" + std::to_string(s) + ") is not positive definite");
  return sigma;
}

Eigen::MatrixXd ar1_sigma(int p, double rho) {
  if (!(std::abs(rho) < 1.0)) throw DataError("ar1_sigma: rho must lie in (-1, 1)");
  Eigen::MatrixXd sigma(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) sigma(i, j) = std::pow(rho, std::abs(i - j));
  return sigma;
}

Eigen::MatrixXd sample_covariates(int n, int p, const Eigen::MatrixXd* chol_lower,
                                  Rng& rng) {
  if (n < 1 || p < 1) throw DataError("sample_covariates: n and p must be >= 1");
  if (chol_lower && (chol_lower->rows() != p || chol_lower->cols() != p))
    throw DataError("sample_covariates: factor dimension mismatch");
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    if (chol_lower)
      X.row(i) = ((*chol_lower) * z).transpose();
    else
      X.row(i) = z.transpose();
  }
  return X;
}

Eigen::VectorXd sample_errors(int n, ErrorDist dist, Rng& rng) {
  if (n < 1) throw DataError("sample_errors: n must be >= 1");
  Eigen::VectorXd e(n);
  switch (dist) {
    case ErrorDist::normal:
      for (int i = 0; i < n; ++i) e(i) = rng.normal();
      break;
    case ErrorDist::cauchy:
      for (int i = 0; i < n; ++i) e(i) = rng.cauchy();
      break;
    case ErrorDist::mixed_normal:
      for (int i = 0; i < n; ++i) {
        const double wide = rng.uniform01() < 0.1 ? 10.0 : 1.0;
        e(i) = wide * rng.normal();
      }
      break;
  }
  return e;
}

std::optional<Eigen::MatrixXd> source_covariance_chol(const ScenarioConfig& cfg) {
  if (cfg.design == Design::unknown_source) {
    Eigen::MatrixXd sigma = gen_toeplitz_sigma(cfg.p, cfg.s_toeplitz);
    return Eigen::MatrixXd(Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL());
  }
  if (cfg.ar_rho) {
    Eigen::MatrixXd sigma = ar1_sigma(cfg.p, *cfg.ar_rho);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("source_covariance_chol: AR covariance is not positive definite");
    return Eigen::MatrixXd(llt.matrixL());
  }
  return std::nullopt;
}

Scenario gen_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario sc;
  sc.truth.beta0 = gen_target_beta(cfg.p, cfg.ell);
  for (int k = 0; k < cfg.k_informative; ++k) sc.truth.informative.push_back(k);

  const std::optional<Eigen::MatrixXd> schol = source_covariance_chol(cfg);
  // the known-source design shares one covariance across all datasets; the
  // unknown-source design pairs an identity-covariance target with Toeplitz
  // sources
  const Eigen::MatrixXd* target_chol =
      (cfg.design == Design::known_source && schol) ? &*schol : nullptr;
  const Eigen::MatrixXd* source_chol = schol ? &*schol : nullptr;

  {
    Rng rx = Rng::from_path(cfg.seed, {0, 0});
    Rng re = Rng::from_path(cfg.seed, {0, 1});
    sc.target.X = sample_covariates(cfg.n0, cfg.p, target_chol, rx);
    sc.target.y = predict(sc.target.X, sc.truth.beta0) +
                  sample_errors(cfg.n0, cfg.error_dist, re);
    sc.target.label = "target";
  }

  for (int k = 0; k < cfg.S; ++k) {
    const std::uint64_t id = static_cast<std::uint64_t>(k) + 1;
    Rng rb = Rng::from_path(cfg.seed, {1, id});
    CoefVector beta_k;
    if (k < cfg.k_informative) {
      beta_k = cfg.design == Design::known_source
                   ? perturb_informative_gaussian(sc.truth.beta0, cfg.h, rb,
                                            cfg.exact_mean_shift)
                   : perturb_informative_rademacher(sc.truth.beta0, cfg.h, rb);
    } else {
      beta_k = gen_noninformative_beta(cfg.h, cfg.ell, cfg.p, rb);
    }
    sc.truth.betas.push_back(beta_k);

    Rng rx = Rng::from_path(cfg.seed, {2, id});
    Rng re = Rng::from_path(cfg.seed, {3, id});
    Dataset src;
    src.X = sample_covariates(cfg.nk, cfg.p, source_chol, rx);
    src.y = predict(src.X, beta_k) + sample_errors(cfg.nk, cfg.error_dist, re);
    src.label = "source-" + std::to_string(k + 1);
    sc.sources.push_back(std::move(src));
  }
  return sc;
}

namespace {

nlohmann::json coef_to_json(const CoefVector& c) {
  nlohmann::json j;
  j["intercept"] = c.intercept;
  j["slopes"] = std::vector<double>(c.slopes.data(), c.slopes.data() + c.slopes.size());
  return j;
}

}  // namespace

void dump_scenario(const Scenario& sc, const ScenarioConfig& cfg,
                   const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_dataset_csv(sc.target, (base / "target.csv").string());
  for (std::size_t k = 0; k < sc.sources.size(); ++k)
    write_dataset_csv(sc.sources[k],
                      (base / ("source-" + std::to_string(k + 1) + ".csv")).string());

  nlohmann::json m;
  m["schema_version"] = 1;
  m["config"] = {
      {"p", cfg.p},
      {"n0", cfg.n0},
      {"nk", cfg.nk},
      {"S", cfg.S},
      {"h", cfg.h},
      {"k_informative", cfg.k_informative},
      {"ell", cfg.ell},
      {"s_toeplitz", cfg.s_toeplitz},
      {"error_dist", error_dist_name(cfg.error_dist)},
      {"design", cfg.design == Design::known_source ? "known_source" : "unknown_source"},
      {"seed", cfg.seed},
      {"exact_mean_shift", cfg.exact_mean_shift},
  };
  if (cfg.ar_rho) m["config"]["ar_rho"] = *cfg.ar_rho;
  m["truth"]["beta0"] = coef_to_json(sc.truth.beta0);
  nlohmann::json betas = nlohmann::json::array();
  for (const CoefVector& b : sc.truth.betas) betas.push_back(coef_to_json(b));
  m["truth"]["betas"] = betas;
  std::vector<int> informative_ids;
  for (int k : sc.truth.informative) informative_ids.push_back(k + 1);
  m["truth"]["informative_sources"] = informative_ids;

  std::ofstream out(base / "manifest.json", std::ios::binary);
  if (!out) throw DataError("dump_scenario: cannot open manifest in '" + dir + "'");
  out << m.dump(2) << "\n";
  if (!out) throw DataError("dump_scenario: manifest write failure in '" + dir + "'");
}

}  // namespace hubertl
