#pragma once

// Shared data containers: response/covariate datasets, coefficient vectors
// with the intercept kept separate from the slopes, column standardization,
// and the L1 coefficient distance used to rank source similarity.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hubertl {

// Malformed or degenerate input (CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical breakdown, e.g. every fit of a run failed (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Intercept plus p slope coefficients. The design matrix never stores the
// constant column; predictions add the intercept explicitly.
struct CoefVector {
  double intercept = 0.0;
  Eigen::VectorXd slopes;

  CoefVector() = default;
  CoefVector(double b0, Eigen::VectorXd b) : intercept(b0), slopes(std::move(b)) {}
  static CoefVector zeros(int p) { return CoefVector(0.0, Eigen::VectorXd::Zero(p)); }

  // number of coefficients including the intercept (p + 1)
  Eigen::Index dim() const { return slopes.size() + 1; }

  bool all_finite() const;
};

// Response vector paired with an n-by-p covariate matrix.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::string label;

  Dataset() = default;
  Dataset(Eigen::VectorXd y_, Eigen::MatrixXd X_, std::string label_ = "")
      : y(std::move(y_)), X(std::move(X_)), label(std::move(label_)) {}

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }

  // throws DataError on shape mismatch, empty data or non-finite entries
  void validate() const;

  Dataset subset(const std::vector<int>& rows) const;
};

// Per-column centering/scaling parameters (population standard deviation).
struct StandardizationStats {
  Eigen::VectorXd means;
  Eigen::VectorXd scales;
};

// Center every column to mean 0 and scale to population standard deviation 1.
// Zero-variance columns are rejected with the offending column index.
std::pair<Dataset, StandardizationStats> standardize(const Dataset& d);

// Map coefficients fitted on standardized covariates back to raw units so
// that predictions on the raw matrix are unchanged.
CoefVector destandardize_coef(const CoefVector& coef, const StandardizationStats& stats);

// sum over all p+1 entries of |a - b|, intercept included
double l1_distance(const CoefVector& a, const CoefVector& b);

// fitted values beta0 + X * slopes
Eigen::VectorXd predict(const Eigen::MatrixXd& X, const CoefVector& coef);

// Dataset CSV: header row with response column `y` and covariates `x1..xp`.
Dataset read_dataset_csv(const std::string& path, const std::string& label = "");
void write_dataset_csv(const Dataset& d, const std::string& path);

// shortest round-trip decimal form, used for all CSV emission
std::string format_double(double v);

// quote-aware comma splitter shared by the CSV readers
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace hubertl
