// Command-line front end: single fits, two-step transfer fits, source
// detection, the seeded simulation designs, the grouped real-data pipeline
// and aggregate plotting. Every run writes its outputs plus a manifest.json
// capturing the effective configuration into the --out directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hubertl/experiments.hpp"
#include "hubertl/rng.hpp"
#include "hubertl/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hubertl;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_manifest(const std::string& dir, const std::string& command,
                    std::uint64_t seed, const json& config,
                    const std::vector<std::string>& outputs) {
  json m;
  m["schema_version"] = 1;
  m["library_version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = config;
  m["outputs"] = outputs;
  const std::string path = dir + "/manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << m.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

void write_coef_csv(const CoefVector& coef, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "term,value\n";
  out << "intercept," << format_double(coef.intercept) << '\n';
  for (Eigen::Index j = 0; j < coef.slopes.size(); ++j) {
    out << 'x' << (j + 1) << ',' << format_double(coef.slopes(j)) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_cv_csv(const CvResult& cv, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "lambda,mean_loss\n";
  for (const CvRow& row : cv.table) {
    out << format_double(row.lambda) << ',' << format_double(row.mean_loss) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<Dataset> read_sources(const std::vector<std::string>& paths) {
  std::vector<Dataset> sources;
  sources.reserve(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    sources.push_back(
        read_dataset_csv(paths[k], "source-" + std::to_string(k + 1)));
  }
  return sources;
}

std::string join_selected(const std::vector<int>& selected) {
  std::string s;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(selected[i] + 1);
  }
  return s.empty() ? "none" : s;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data;
  std::string out = "fit_out";
  double alpha = 1.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double tol = 1e-7;
  int max_iter = 10000;
  bool penalize_intercept = false;
  int cv_folds = 5;
  int n_lambda = 100;
  double lambda_ratio = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_lambda = nullptr;
  CLI::Option* o_ratio = nullptr;
};

void add_fit_options(CLI::App* sub, FitArgs& a) {
  sub->add_option("--data", a.data, "dataset CSV (y,x1..xp)")->required();
  sub->add_option("--out", a.out, "output directory");
  sub->add_option("--alpha", a.alpha, "elastic-net mixing in [0,1]");
  a.o_gamma = sub->add_option("--gamma", a.gamma,
                              "Huber threshold (default: scaled MAD of y)");
  a.o_lambda = sub->add_option("--lambda", a.lambda,
                               "penalty level (default: chosen by CV)");
  sub->add_option("--tol", a.tol, "coefficient-change tolerance");
  sub->add_option("--max-iter", a.max_iter, "sweep limit");
  sub->add_flag("--penalize-intercept", a.penalize_intercept,
                "include the intercept in the penalty");
  sub->add_option("--cv-folds", a.cv_folds, "cross-validation folds");
  sub->add_option("--n-lambda", a.n_lambda, "path length");
  a.o_ratio = sub->add_option("--lambda-ratio", a.lambda_ratio,
                              "path depth lambda_min/lambda_max");
  sub->add_option("--seed", a.seed, "fold-shuffle seed");
}

int run_fit(const FitArgs& a) {
  const Dataset d = read_dataset_csv(a.data, "data");
  SolverConfig cfg;
  cfg.alpha = a.alpha;
  cfg.gamma = a.o_gamma->count() ? a.gamma : default_gamma(d);
  cfg.tol = a.tol;
  cfg.max_iter = a.max_iter;
  cfg.penalize_intercept = a.penalize_intercept;

  fs::create_directories(a.out);
  std::vector<std::string> outputs = {"coefficients.csv"};
  std::string lambda_source = "given";
  if (a.o_lambda->count()) {
    cfg.lambda = a.lambda;
  } else {
    std::optional<double> ratio;
    if (a.o_ratio->count()) ratio = a.lambda_ratio;
    const CvResult cv = cross_validate(d, cfg.alpha, cfg.gamma, a.cv_folds,
                                       a.seed, a.n_lambda, ratio, nullptr,
                                       cfg.tol, cfg.max_iter);
    cfg.lambda = cv.lambda_star;
    lambda_source = "cv";
    write_cv_csv(cv, a.out + "/cv.csv");
    outputs.push_back("cv.csv");
  }
  cfg.validate();
  const FitResult res = fit(d, cfg);
  write_coef_csv(res.coef, a.out + "/coefficients.csv");

  json config;
  config["data"] = a.data;
  config["alpha"] = cfg.alpha;
  config["gamma"] = cfg.gamma;
  config["lambda"] = cfg.lambda;
  config["lambda_source"] = lambda_source;
  config["tol"] = cfg.tol;
  config["max_iter"] = cfg.max_iter;
  config["penalize_intercept"] = cfg.penalize_intercept;
  config["cv_folds"] = a.cv_folds;
  config["n_lambda"] = a.n_lambda;
  if (a.o_ratio->count()) config["lambda_ratio"] = a.lambda_ratio;
  write_manifest(a.out, "fit", a.seed, config, outputs);

  std::cout << "fit: converged=" << res.converged
            << " iterations=" << res.iterations
            << " lambda=" << format_double(cfg.lambda)
            << " objective=" << format_double(res.objective)
            << " kkt=" << format_double(res.kkt_residual) << "\n";
  if (!res.converged) throw NumericalError("fit did not converge");
  return 0;
}

// ---------------------------------------------------------------------------
// oracle / detect

struct TransferArgs {
  std::string target;
  std::vector<std::string> sources;
  std::string out;
  double alpha = 1.0;
  double gamma = 0.0;
  double lambda_w = 0.0;
  double lambda_delta = 0.0;
  int cv_folds = 5;
  int n_lambda = 100;
  double lambda_ratio = 0.0;
  double tol = 1e-7;
  int max_iter = 10000;
  bool penalize_intercept = false;
  bool replicate_target = false;
  double epsilon0 = 0.05;
  std::uint64_t seed = 0;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_lambda_w = nullptr;
  CLI::Option* o_lambda_delta = nullptr;
  CLI::Option* o_ratio = nullptr;
};

void add_transfer_options(CLI::App* sub, TransferArgs& a, bool with_epsilon) {
  sub->add_option("--target", a.target, "target dataset CSV")->required();
  sub->add_option("--source", a.sources, "source dataset CSV (repeatable)");
  sub->add_option("--out", a.out, "output directory");
  sub->add_option("--alpha", a.alpha, "elastic-net mixing in [0,1]");
  a.o_gamma = sub->add_option("--gamma", a.gamma,
                              "Huber threshold (default: scaled MAD of target y)");
  a.o_lambda_w = sub->add_option("--lambda-w", a.lambda_w,
                                 "fusion penalty (default: CV)");
  a.o_lambda_delta = sub->add_option("--lambda-delta", a.lambda_delta,
                                     "debias penalty (default: CV)");
  sub->add_option("--cv-folds", a.cv_folds, "cross-validation folds");
  sub->add_option("--n-lambda", a.n_lambda, "path length");
  a.o_ratio = sub->add_option("--lambda-ratio", a.lambda_ratio,
                              "path depth lambda_min/lambda_max");
  sub->add_option("--tol", a.tol, "coefficient-change tolerance");
  sub->add_option("--max-iter", a.max_iter, "sweep limit");
  sub->add_flag("--penalize-intercept", a.penalize_intercept,
                "include the intercept in the penalty");
  sub->add_flag("--replicate-target", a.replicate_target,
                "pool one target copy per source instead of one overall");
  if (with_epsilon) {
    sub->add_option("--epsilon0", a.epsilon0, "selection slack over the baseline");
  }
  sub->add_option("--seed", a.seed, "run seed");
}

TransferConfig build_transfer_config(const TransferArgs& a, const Dataset& target) {
  TransferConfig cfg;
  cfg.alpha = a.alpha;
  cfg.gamma = a.o_gamma->count() ? a.gamma : default_gamma(target);
  if (a.o_lambda_w->count()) cfg.lambda_w = a.lambda_w;
  if (a.o_lambda_delta->count()) cfg.lambda_delta = a.lambda_delta;
  cfg.cv_folds = a.cv_folds;
  cfg.n_lambda = a.n_lambda;
  if (a.o_ratio->count()) cfg.lambda_ratio = a.lambda_ratio;
  cfg.tol = a.tol;
  cfg.max_iter = a.max_iter;
  cfg.penalize_intercept = a.penalize_intercept;
  cfg.replicate_target = a.replicate_target;
  cfg.validate();
  return cfg;
}

json transfer_config_json(const TransferArgs& a, const TransferConfig& cfg) {
  json config;
  config["target"] = a.target;
  config["sources"] = a.sources;
  config["alpha"] = cfg.alpha;
  config["gamma"] = cfg.gamma;
  if (cfg.lambda_w) config["lambda_w"] = *cfg.lambda_w;
  if (cfg.lambda_delta) config["lambda_delta"] = *cfg.lambda_delta;
  config["cv_folds"] = cfg.cv_folds;
  config["n_lambda"] = cfg.n_lambda;
  if (cfg.lambda_ratio) config["lambda_ratio"] = *cfg.lambda_ratio;
  config["tol"] = cfg.tol;
  config["max_iter"] = cfg.max_iter;
  config["penalize_intercept"] = cfg.penalize_intercept;
  config["replicate_target"] = cfg.replicate_target;
  return config;
}

int run_oracle(const TransferArgs& a) {
  const Dataset target = read_dataset_csv(a.target, "target");
  const std::vector<Dataset> sources = read_sources(a.sources);
  const TransferConfig cfg = build_transfer_config(a, target);

  const TransferFit res = oracle_fit(target, sources, cfg, a.seed);
  fs::create_directories(a.out);
  write_coef_csv(res.beta_hat, a.out + "/coefficients.csv");
  write_coef_csv(res.w_hat, a.out + "/w_hat.csv");
  write_coef_csv(res.delta_hat, a.out + "/delta_hat.csv");
  write_manifest(a.out, "oracle", a.seed, transfer_config_json(a, cfg),
                 {"coefficients.csv", "w_hat.csv", "delta_hat.csv"});

  std::cout << "oracle: converged=" << res.converged
            << " lambda_w=" << format_double(res.lambda_w)
            << " lambda_delta=" << format_double(res.lambda_delta) << "\n";
  if (!res.converged) throw NumericalError("two-step fit did not converge");
  return 0;
}

int run_detect(const TransferArgs& a) {
  const Dataset target = read_dataset_csv(a.target, "target");
  const std::vector<Dataset> sources = read_sources(a.sources);
  const TransferConfig cfg = build_transfer_config(a, target);

  const DetectionReport report =
      detect_sources(target, sources, a.epsilon0, cfg, a.seed);
  fs::create_directories(a.out);
  write_detection_csv(report, a.out + "/detection.csv");
  write_coef_csv(report.final_fit.beta_hat, a.out + "/coefficients.csv");
  json config = transfer_config_json(a, cfg);
  config["epsilon0"] = a.epsilon0;
  write_manifest(a.out, "detect", a.seed, config,
                 {"detection.csv", "coefficients.csv"});

  std::cout << "detect: selected=" << join_selected(report.selected)
            << " q0=" << format_double(report.q0)
            << " converged=" << report.final_fit.converged << "\n";
  if (!report.final_fit.converged) {
    throw NumericalError("final two-step fit did not converge");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate known|unknown

struct SimArgs {
  std::vector<double> h;
  std::vector<int> k;
  std::string dist = "normal";
  double alpha = 1.0;
  int replications = 25;
  std::uint64_t seed = 0;
  double epsilon0 = 0.05;
  int threads = 1;
  bool timings = false;
  double gamma = 0.0;
  int p = 0;
  int n0 = 0;
  int nk = 0;
  int S = 0;
  int ell = 14;
  int s_toeplitz = 5;
  double ar_rho = 0.0;
  bool exact_mean_shift = false;
  int cv_folds = 5;
  int n_lambda = 100;
  double lambda_ratio = 0.0;
  double tol = 1e-7;
  int max_iter = 10000;
  bool penalize_intercept = false;
  bool replicate_target = false;
  bool paper_scale = false;
  std::string out;
  CLI::Option* o_h = nullptr;
  CLI::Option* o_k = nullptr;
  CLI::Option* o_p = nullptr;
  CLI::Option* o_reps = nullptr;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_ar = nullptr;
  CLI::Option* o_ratio = nullptr;
};

void add_sim_options(CLI::App* sub, SimArgs& a, bool with_epsilon) {
  a.o_h = sub->add_option("--h", a.h, "similarity levels (repeatable)");
  a.o_k = sub->add_option("--k", a.k, "informative-source counts (repeatable)");
  sub->add_option("--dist", a.dist, "error law: normal, cauchy or mixed_normal");
  sub->add_option("--alpha", a.alpha, "elastic-net mixing in [0,1]");
  a.o_reps = sub->add_option("--replications", a.replications, "replications per cell");
  sub->add_option("--seed", a.seed, "experiment seed");
  if (with_epsilon) {
    sub->add_option("--epsilon0", a.epsilon0, "selection slack over the baseline");
  }
  sub->add_option("--threads", a.threads, "worker threads");
  sub->add_flag("--timings", a.timings,
                "record wall time per fit (breaks byte-identical reruns)");
  a.o_gamma = sub->add_option("--gamma", a.gamma,
                              "Huber threshold (default: per-replication scaled MAD)");
  a.o_p = sub->add_option("--p", a.p, "covariate dimension");
  sub->add_option("--n0", a.n0, "target sample size");
  sub->add_option("--nk", a.nk, "per-source sample size");
  sub->add_option("--S", a.S, "number of sources");
  sub->add_option("--ell", a.ell, "nonzero prefix of the target coefficients");
  sub->add_option("--s-toeplitz", a.s_toeplitz, "source-covariance band parameter");
  a.o_ar = sub->add_option("--ar-rho", a.ar_rho,
                           "AR(rho) covariance instead of identity");
  sub->add_flag("--exact-mean-shift", a.exact_mean_shift,
                "scale informative shifts so the expected l1 distance is h");
  sub->add_option("--cv-folds", a.cv_folds, "cross-validation folds");
  sub->add_option("--n-lambda", a.n_lambda, "path length");
  a.o_ratio = sub->add_option("--lambda-ratio", a.lambda_ratio,
                              "path depth lambda_min/lambda_max");
  sub->add_option("--tol", a.tol, "coefficient-change tolerance");
  sub->add_option("--max-iter", a.max_iter, "sweep limit");
  sub->add_flag("--penalize-intercept", a.penalize_intercept,
                "include the intercept in the penalty");
  sub->add_flag("--replicate-target", a.replicate_target,
                "pool one target copy per source instead of one overall");
  sub->add_flag("--paper-scale", a.paper_scale,
                "full-size grids (p=500, 200 replications)");
  sub->add_option("--out", a.out, "output directory");
}

int run_simulate(SimArgs& a, Design design) {
  if (a.paper_scale) {
    if (!a.o_p->count()) a.p = 500;
    if (!a.o_reps->count()) a.replications = 200;
    if (!a.o_h->count()) {
      a.h = design == Design::known_source ? std::vector<double>{4, 6, 8, 10}
                                           : std::vector<double>{30, 60};
    }
    if (!a.o_k->count()) {
      a.k = design == Design::known_source ? std::vector<int>{0, 5, 10, 15, 20}
                                           : std::vector<int>{0, 2, 4, 6, 8, 10};
    }
  }

  ExperimentGrid grid;
  grid.h_values = a.h;
  grid.k_values = a.k;
  grid.dist = parse_error_dist(a.dist);
  grid.alpha = a.alpha;
  grid.replications = a.replications;
  grid.seed = a.seed;
  grid.epsilon0 = a.epsilon0;
  grid.threads = a.threads;
  grid.timings = a.timings;
  if (a.o_gamma->count()) grid.gamma = a.gamma;
  grid.scenario.p = a.p;
  grid.scenario.n0 = a.n0;
  grid.scenario.nk = a.nk;
  grid.scenario.S = a.S;
  grid.scenario.ell = a.ell;
  grid.scenario.s_toeplitz = a.s_toeplitz;
  grid.scenario.design = design;
  grid.scenario.seed = a.seed;
  if (a.o_ar->count()) grid.scenario.ar_rho = a.ar_rho;
  grid.scenario.exact_mean_shift = a.exact_mean_shift;
  grid.transfer.cv_folds = a.cv_folds;
  grid.transfer.n_lambda = a.n_lambda;
  if (a.o_ratio->count()) grid.transfer.lambda_ratio = a.lambda_ratio;
  grid.transfer.tol = a.tol;
  grid.transfer.max_iter = a.max_iter;
  grid.transfer.penalize_intercept = a.penalize_intercept;
  grid.transfer.replicate_target = a.replicate_target;

  const bool known = design == Design::known_source;
  const std::vector<ExperimentResult> rows =
      known ? run_known_source_experiment(grid) : run_detection_experiment(grid);
  const std::vector<AggregateRow> agg = aggregate_results(rows);

  fs::create_directories(a.out);
  write_results_csv(rows, a.out + "/results.csv");
  write_aggregate_csv(agg, a.out + "/aggregate.csv");
  emit_plot(agg, a.out + "/plot.svg");

  json config;
  config["design"] = known ? "known_source" : "unknown_source";
  config["h"] = a.h;
  config["k"] = a.k;
  config["dist"] = a.dist;
  config["alpha"] = a.alpha;
  config["replications"] = a.replications;
  if (!known) config["epsilon0"] = a.epsilon0;
  config["threads"] = a.threads;
  config["timings"] = a.timings;
  if (a.o_gamma->count()) config["gamma"] = a.gamma;
  config["p"] = a.p;
  config["n0"] = a.n0;
  config["nk"] = a.nk;
  config["S"] = a.S;
  config["ell"] = a.ell;
  config["s_toeplitz"] = a.s_toeplitz;
  if (a.o_ar->count()) config["ar_rho"] = a.ar_rho;
  config["exact_mean_shift"] = a.exact_mean_shift;
  config["cv_folds"] = a.cv_folds;
  config["n_lambda"] = a.n_lambda;
  if (a.o_ratio->count()) config["lambda_ratio"] = a.lambda_ratio;
  config["tol"] = a.tol;
  config["max_iter"] = a.max_iter;
  config["penalize_intercept"] = a.penalize_intercept;
  config["replicate_target"] = a.replicate_target;
  config["paper_scale"] = a.paper_scale;
  write_manifest(a.out, known ? "simulate known" : "simulate unknown", a.seed,
                 config, {"results.csv", "aggregate.csv", "plot.svg", "plot.csv"});

  int n_converged = 0;
  for (const ExperimentResult& r : rows) n_converged += r.converged ? 1 : 0;
  std::cout << "simulate " << (known ? "known" : "unknown") << ": rows="
            << rows.size() << " converged=" << n_converged << " out=" << a.out
            << "\n";
  if (n_converged == 0) throw NumericalError("every fit failed to converge");
  return 0;
}

// ---------------------------------------------------------------------------
// realdata ingest|run

struct IngestArgs {
  std::string data;
  std::string out = "realdata_split";
  std::string response = "critical_temp";
  std::string group = "number_of_elements";
  std::string target_group = "4";
  double test_fraction = 0.2;
  std::vector<std::string> categorical;
  std::uint64_t seed = 0;
};

void add_ingest_options(CLI::App* sub, IngestArgs& a) {
  sub->add_option("--data", a.data, "raw CSV with header")->required();
  sub->add_option("--out", a.out, "split output directory");
  sub->add_option("--response", a.response, "response column");
  sub->add_option("--group", a.group, "grouping column");
  sub->add_option("--target-group", a.target_group, "group value forming the target");
  sub->add_option("--test-fraction", a.test_fraction, "held-out share of the target");
  sub->add_option("--categorical", a.categorical, "one-hot columns (repeatable)");
  sub->add_option("--seed", a.seed, "split seed");
}

int run_ingest(const IngestArgs& a) {
  IngestOptions opts;
  opts.response_column = a.response;
  opts.group_column = a.group;
  opts.target_group = a.target_group;
  opts.test_fraction = a.test_fraction;
  opts.categorical = a.categorical;
  opts.seed = a.seed;

  const RealDataSplit split = ingest_real_data(a.data, opts);
  write_real_data_split(split, a.out);

  json config;
  config["data"] = a.data;
  config["response"] = a.response;
  config["group"] = a.group;
  config["target_group"] = a.target_group;
  config["test_fraction"] = a.test_fraction;
  config["categorical"] = a.categorical;
  std::vector<std::string> outputs = {"split.json", "target_train.csv",
                                      "target_test.csv"};
  for (std::size_t k = 0; k < split.sources.size(); ++k) {
    std::string num = std::to_string(k + 1);
    if (num.size() < 3) num.insert(num.begin(), 3 - num.size(), '0');
    outputs.push_back("source_" + num + ".csv");
  }
  write_manifest(a.out, "realdata ingest", a.seed, config, outputs);

  std::cout << "ingest: target train=" << split.target_train.n()
            << " test=" << split.target_test.n() << " sources=";
  for (std::size_t k = 0; k < split.sources.size(); ++k) {
    std::cout << (k ? "," : "") << split.sources[k].n();
  }
  std::cout << " features=" << split.feature_names.size() << "\n";
  return 0;
}

struct RunArgs {
  std::string split;
  std::string out = "realdata_out";
  double alpha = 1.0;
  double gamma = 0.0;
  double epsilon0 = 0.05;
  int cv_folds = 5;
  int n_lambda = 100;
  double lambda_ratio = 0.0;
  double tol = 1e-7;
  int max_iter = 10000;
  bool penalize_intercept = false;
  bool replicate_target = false;
  bool huber_pred_loss = false;
  std::uint64_t seed = 0;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_ratio = nullptr;
};

void add_run_options(CLI::App* sub, RunArgs& a) {
  sub->add_option("--split", a.split, "directory written by realdata ingest")
      ->required();
  sub->add_option("--out", a.out, "output directory");
  sub->add_option("--alpha", a.alpha, "elastic-net mixing in [0,1]");
  a.o_gamma = sub->add_option("--gamma", a.gamma,
                              "Huber threshold (default: scaled MAD of train y)");
  sub->add_option("--epsilon0", a.epsilon0, "selection slack over the baseline");
  sub->add_option("--cv-folds", a.cv_folds, "cross-validation folds");
  sub->add_option("--n-lambda", a.n_lambda, "path length");
  a.o_ratio = sub->add_option("--lambda-ratio", a.lambda_ratio,
                              "path depth lambda_min/lambda_max");
  sub->add_option("--tol", a.tol, "coefficient-change tolerance");
  sub->add_option("--max-iter", a.max_iter, "sweep limit");
  sub->add_flag("--penalize-intercept", a.penalize_intercept,
                "include the intercept in the penalty");
  sub->add_flag("--replicate-target", a.replicate_target,
                "pool one target copy per source instead of one overall");
  sub->add_flag("--huber-pred-loss", a.huber_pred_loss,
                "score the test rows with mean Huber loss instead of squared error");
  sub->add_option("--seed", a.seed, "run seed");
}

int run_realdata(const RunArgs& a) {
  const RealDataSplit split = read_real_data_split(a.split);
  TransferConfig cfg;
  cfg.alpha = a.alpha;
  cfg.gamma = a.o_gamma->count() ? a.gamma : default_gamma(split.target_train);
  cfg.cv_folds = a.cv_folds;
  cfg.n_lambda = a.n_lambda;
  if (a.o_ratio->count()) cfg.lambda_ratio = a.lambda_ratio;
  cfg.tol = a.tol;
  cfg.max_iter = a.max_iter;
  cfg.penalize_intercept = a.penalize_intercept;
  cfg.replicate_target = a.replicate_target;
  cfg.validate();

  const std::vector<RealDataResult> results =
      run_real_data(split, cfg, a.epsilon0, a.seed, a.huber_pred_loss);
  fs::create_directories(a.out);
  write_real_data_csv(results, a.out + "/results.csv");

  json config;
  config["split"] = a.split;
  config["alpha"] = cfg.alpha;
  config["gamma"] = cfg.gamma;
  config["epsilon0"] = a.epsilon0;
  config["cv_folds"] = cfg.cv_folds;
  config["n_lambda"] = cfg.n_lambda;
  if (cfg.lambda_ratio) config["lambda_ratio"] = *cfg.lambda_ratio;
  config["tol"] = cfg.tol;
  config["max_iter"] = cfg.max_iter;
  config["penalize_intercept"] = cfg.penalize_intercept;
  config["replicate_target"] = cfg.replicate_target;
  config["huber_pred_loss"] = a.huber_pred_loss;
  write_manifest(a.out, "realdata run", a.seed, config, {"results.csv"});

  bool any_converged = false;
  for (const RealDataResult& r : results) {
    any_converged = any_converged || r.converged;
    std::cout << method_name(r.method)
              << ": pred_mse=" << format_double(r.pred_mse)
              << " converged=" << r.converged;
    if (r.method == Method::detect) {
      std::cout << " selected=" << join_selected(r.selected);
    }
    std::cout << "\n";
  }
  if (!any_converged) throw NumericalError("every fit failed to converge");
  return 0;
}

// ---------------------------------------------------------------------------
// plot

struct PlotArgs {
  std::string aggregate;
  std::string out = "plot_out";
};

int run_plot(const PlotArgs& a) {
  const std::vector<AggregateRow> rows = read_aggregate_csv(a.aggregate);
  fs::create_directories(a.out);
  emit_plot(rows, a.out + "/plot.svg");
  json config;
  config["aggregate"] = a.aggregate;
  write_manifest(a.out, "plot", 0, config, {"plot.svg", "plot.csv"});
  std::cout << "plot: rows=" << rows.size() << " out=" << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"elastic-net penalized Huber regression with transfer learning"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // --h is a grid option below, so no -h short flag anywhere
  auto long_help = [](CLI::App* s) {
    s->set_help_flag("--help", "print help");
    return s;
  };
  long_help(&app);

  FitArgs fit_args;
  add_fit_options(
      long_help(app.add_subcommand("fit", "penalized Huber fit on one dataset")),
      fit_args);

  TransferArgs oracle_args;
  oracle_args.out = "oracle_out";
  CLI::App* oracle_sub = long_help(app.add_subcommand(
      "oracle", "two-step transfer fit over the given sources"));
  add_transfer_options(oracle_sub, oracle_args, false);

  TransferArgs detect_args;
  detect_args.out = "detect_out";
  CLI::App* detect_sub = long_help(app.add_subcommand(
      "detect", "select transferable sources, then fit on the selection"));
  add_transfer_options(detect_sub, detect_args, true);

  CLI::App* simulate =
      long_help(app.add_subcommand("simulate", "seeded simulation designs"));
  simulate->require_subcommand(1);
  SimArgs known_args;
  known_args.h = {4};
  known_args.k = {0, 5, 10, 15, 20};
  known_args.p = 50;
  known_args.n0 = 30;
  known_args.nk = 20;
  known_args.S = 25;
  known_args.out = "simulate_known_out";
  CLI::App* known_sub = long_help(simulate->add_subcommand(
      "known", "Target vs Oracle over a known informative set"));
  add_sim_options(known_sub, known_args, false);

  SimArgs unknown_args;
  unknown_args.h = {30};
  unknown_args.k = {0, 2, 4, 6, 8, 10};
  unknown_args.p = 100;
  unknown_args.n0 = 100;
  unknown_args.nk = 100;
  unknown_args.S = 10;
  unknown_args.out = "simulate_unknown_out";
  CLI::App* unknown_sub = long_help(simulate->add_subcommand(
      "unknown", "Target, Oracle, Naive and Detect with detection scoring"));
  add_sim_options(unknown_sub, unknown_args, true);

  CLI::App* realdata =
      long_help(app.add_subcommand("realdata", "grouped real-data pipeline"));
  realdata->require_subcommand(1);
  IngestArgs ingest_args;
  add_ingest_options(
      long_help(realdata->add_subcommand("ingest", "split a raw CSV by group")),
      ingest_args);
  RunArgs run_args;
  add_run_options(
      long_help(realdata->add_subcommand("run", "fit and score an ingested split")),
      run_args);

  PlotArgs plot_args;
  CLI::App* plot_sub =
      long_help(app.add_subcommand("plot", "render an aggregate CSV as SVG"));
  plot_sub->add_option("--aggregate", plot_args.aggregate, "aggregate CSV")
      ->required();
  plot_sub->add_option("--out", plot_args.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("fit")) return run_fit(fit_args);
    if (app.got_subcommand("oracle")) return run_oracle(oracle_args);
    if (app.got_subcommand("detect")) return run_detect(detect_args);
    if (app.got_subcommand("simulate")) {
      if (simulate->got_subcommand("known")) {
        return run_simulate(known_args, Design::known_source);
      }
      return run_simulate(unknown_args, Design::unknown_source);
    }
    if (app.got_subcommand("realdata")) {
      if (realdata->got_subcommand("ingest")) return run_ingest(ingest_args);
      return run_realdata(run_args);
    }
    if (app.got_subcommand("plot")) return run_plot(plot_args);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
