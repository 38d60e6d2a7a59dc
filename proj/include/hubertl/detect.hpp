// Transferable-source detection: cross-fitted validation-loss comparison of
// per-source fused fits against a target-only baseline, followed by the
// two-step estimator on the selected set.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hubertl/core.hpp"
#include "hubertl/transfer.hpp"

namespace hubertl {

struct DetectionReport {
  double q0 = 0.0;              // summed baseline validation loss
  std::vector<double> q;        // per-source summed validation loss, +inf if failed
  std::vector<int> selected;    // 0-based source indices, ascending
  std::vector<int> failed;      // sources with a non-converged candidate fit
  double epsilon0 = 0.0;
  TransferFit final_fit;
};

// Disjoint, exhaustive, seed-deterministic partition into three folds with
// sizes differing by at most one (larger folds first).
std::array<std::vector<int>, 3> split_three_folds(const Dataset& target,
                                                  std::uint64_t seed);

// Algorithm: for each round one fold validates and the other two train.
// The baseline is a target-only fit of the training folds; each candidate
// fuses the training folds with one source. A source is selected when its
// summed validation loss is within (1+epsilon0) of the baseline's.
DetectionReport detect_sources(const Dataset& target,
                               const std::vector<Dataset>& sources,
                               double epsilon0, const TransferConfig& cfg,
                               std::uint64_t seed);

// CSV serialization: a comment line carrying q0 and epsilon0, then one row
// (source_id,q_k,selected_flag) per source with 1-based ids.
void write_detection_csv(const DetectionReport& report, const std::string& path);

// Reads back everything except final_fit.
DetectionReport read_detection_csv(const std::string& path);

}  // namespace hubertl
