// Experiment orchestration: seeded replication grids for the known-source
// and detection designs, CSV/SVG result emission, and the grouped real-data
// pipeline (ingest, split, fit, test-set scoring).
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hubertl/core.hpp"
#include "hubertl/detect.hpp"
#include "hubertl/simgen.hpp"
#include "hubertl/transfer.hpp"

namespace hubertl {

enum class Method { target, oracle, naive, detect };

const char* method_name(Method m);
Method parse_method(const std::string& name);

struct ExperimentResult {
  Method method = Method::target;
  double h = 0.0;
  int k_informative = 0;
  ErrorDist dist = ErrorDist::normal;
  double alpha = 1.0;
  int replication = 0;
  std::optional<double> coef_mse;  // squared l2 error against the truth
  std::optional<double> pred_mse;
  bool converged = false;
  std::int64_t runtime_ms = 0;
  std::vector<int> selected;  // detect only, 0-based source indices
};

struct AggregateRow {
  std::string method;
  double h = 0.0;
  int k_informative = 0;
  std::string dist;
  double alpha = 1.0;
  int n_total = 0;
  int n_converged = 0;
  double mean_coef_mse = 0.0;
  double se_coef_mse = 0.0;
  std::optional<double> mean_pred_mse;
  std::optional<double> se_pred_mse;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct ExperimentGrid {
  std::vector<double> h_values;
  std::vector<int> k_values;
  ErrorDist dist = ErrorDist::normal;
  double alpha = 1.0;
  int replications = 25;
  std::uint64_t seed = 0;
  ScenarioConfig scenario;    // per-cell h/k_informative/dist/seed overwritten
  TransferConfig transfer;    // per-cell alpha overwritten
  std::optional<double> gamma;  // absent: per-replication default from the target
  double epsilon0 = 0.05;
  int threads = 1;
  bool timings = false;  // off: runtime_ms written as 0 so reruns byte-match

  void validate() const;
};

double estimation_error(const CoefVector& beta_hat, const CoefVector& beta0);

// One row per (h, k, method, replication); methods are Target and Oracle.
// Replications share the scenario stream across cells with the same index,
// and rows come back sorted by (h, k, method, replication).
std::vector<ExperimentResult> run_known_source_experiment(const ExperimentGrid& grid);

// Same layout with all four methods and per-replication selected sets.
std::vector<ExperimentResult> run_detection_experiment(const ExperimentGrid& grid);

// Mean and standard error of the mean per (method, h, k) cell, converged rows
// only; detect rows also aggregate selection precision and recall against the
// informative truth (the first k sources).
std::vector<AggregateRow> aggregate_results(const std::vector<ExperimentResult>& rows);

void write_results_csv(const std::vector<ExperimentResult>& rows,
                       const std::string& path);
void write_aggregate_csv(const std::vector<AggregateRow>& rows,
                         const std::string& path);
std::vector<AggregateRow> read_aggregate_csv(const std::string& path);

// Line chart of mean coef error vs k, one series per method and one panel
// per h, plus the aggregate CSV next to it.
void emit_plot(const std::vector<AggregateRow>& rows, const std::string& svg_path);

struct IngestOptions {
  std::string response_column;
  std::string group_column;
  std::string target_group;
  double test_fraction = 0.2;
  std::vector<std::string> categorical;
  std::uint64_t seed = 0;
};

struct RealDataSplit {
  Dataset target_train;
  Dataset target_test;
  std::vector<Dataset> sources;
  std::string group_key;
  std::vector<std::string> feature_names;
};

// Parses a headed CSV, one-hot encodes the declared categorical columns,
// partitions rows by the group column, carves the seeded train/test split
// out of the target group, drops columns constant on the training target,
// and standardizes the continuous columns with training-target statistics.
RealDataSplit ingest_real_data(const std::string& path, const IngestOptions& opts);

void write_real_data_split(const RealDataSplit& split, const std::string& dir);
RealDataSplit read_real_data_split(const std::string& dir);

struct RealDataResult {
  Method method = Method::target;
  double pred_mse = 0.0;
  bool converged = false;
  std::vector<int> selected;  // detect only
};

// Fits Target, Naive and Detect on the split and scores each on the held-out
// target rows with squared prediction error (Huber loss behind the flag).
std::vector<RealDataResult> run_real_data(const RealDataSplit& split,
                                          const TransferConfig& cfg,
                                          double epsilon0, std::uint64_t seed,
                                          bool huber_pred_loss = false);

void write_real_data_csv(const std::vector<RealDataResult>& rows,
                         const std::string& path);

}  // namespace hubertl
