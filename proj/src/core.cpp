#include "hubertl/core.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace hubertl {

bool CoefVector::all_finite() const {
  if (!std::isfinite(intercept)) return false;
  return slopes.allFinite();
}

void Dataset::validate() const {
  if (y.size() == 0) throw DataError("dataset '" + label + "': empty response");
  if (X.cols() < 1) throw DataError("dataset '" + label + "': no covariates");
  if (X.rows() != y.size())
    throw DataError("dataset '" + label + "': X has " + std::to_string(X.rows()) +
                    " rows but y has " + std::to_string(y.size()));
  if (!y.allFinite() || !X.allFinite())
    throw DataError("dataset '" + label + "': non-finite entry");
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  out.label = label;
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.y(static_cast<Eigen::Index>(i)) = y(rows[i]);
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  return out;
}

std::pair<Dataset, StandardizationStats> standardize(const Dataset& d) {
  d.validate();
  const Eigen::Index n = d.n(), p = d.p();
  StandardizationStats stats;
  stats.means.resize(p);
  stats.scales.resize(p);
  Dataset out;
  out.y = d.y;
  out.label = d.label;
  out.X.resize(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mean = d.X.col(j).mean();
    Eigen::VectorXd centered = d.X.col(j).array() - mean;
    const double scale = std::sqrt(centered.squaredNorm() / static_cast<double>(n));
    if (!(scale > 0.0))
      throw DataError("standardize: zero-variance column " + std::to_string(j + 1) +
                      " in dataset '" + d.label + "'");
    stats.means(j) = mean;
    stats.scales(j) = scale;
    out.X.col(j) = centered / scale;
  }
  return {std::move(out), std::move(stats)};
}

CoefVector destandardize_coef(const CoefVector& coef, const StandardizationStats& stats) {
  if (coef.slopes.size() != stats.means.size())
    throw DataError("destandardize_coef: dimension mismatch");
  CoefVector out;
  out.slopes = coef.slopes.array() / stats.scales.array();
  out.intercept = coef.intercept - out.slopes.dot(stats.means);
  return out;
}

double l1_distance(const CoefVector& a, const CoefVector& b) {
  if (a.slopes.size() != b.slopes.size())
    throw DataError("l1_distance: dimension mismatch");
  return std::abs(a.intercept - b.intercept) + (a.slopes - b.slopes).cwiseAbs().sum();
}

Eigen::VectorXd predict(const Eigen::MatrixXd& X, const CoefVector& coef) {
  if (X.cols() != coef.slopes.size())
    throw DataError("predict: dimension mismatch");
  return (X * coef.slopes).array() + coef.intercept;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

namespace {

double parse_double(const std::string& cell, std::size_t line_no, std::size_t col_no) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError("csv: bad numeric value '" + cell + "' at line " +
                    std::to_string(line_no) + ", column " + std::to_string(col_no));
  if (!std::isfinite(v))
    throw DataError("csv: non-finite value at line " + std::to_string(line_no));
  return v;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv '" + path + "': empty file");
  const auto header = split_csv_line(line);

  int y_col = -1;
  std::vector<int> x_cols;  // x_cols[j] = header index of column x{j+1}
  x_cols.assign(header.size(), -1);
  std::size_t p = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name == "y") {
      if (y_col >= 0) throw DataError("csv '" + path + "': duplicate column y");
      y_col = static_cast<int>(c);
    } else if (name.size() > 1 && name[0] == 'x') {
      std::size_t idx = 0;
      auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (res.ec != std::errc{} || res.ptr != name.data() + name.size() || idx == 0 ||
          idx > header.size())
        throw DataError("csv '" + path + "': unknown column '" + name + "'");
      if (x_cols[idx - 1] >= 0)
        throw DataError("csv '" + path + "': duplicate column '" + name + "'");
      x_cols[idx - 1] = static_cast<int>(c);
      p = std::max(p, idx);
    } else {
      throw DataError("csv '" + path + "': unknown column '" + name + "'");
    }
  }
  if (y_col < 0) throw DataError("csv '" + path + "': missing column y");
  if (p == 0) throw DataError("csv '" + path + "': no covariate columns");
  for (std::size_t j = 0; j < p; ++j)
    if (x_cols[j] < 0)
      throw DataError("csv '" + path + "': missing column x" + std::to_string(j + 1));

  std::vector<double> ys;
  std::vector<double> xs;  // row-major
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("csv '" + path + "': line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, expected " +
                      std::to_string(header.size()));
    for (const auto& cell : cells)
      if (cell.empty())
        throw DataError("csv '" + path + "': missing value at line " +
                        std::to_string(line_no));
    ys.push_back(parse_double(cells[y_col], line_no, y_col + 1));
    for (std::size_t j = 0; j < p; ++j)
      xs.push_back(parse_double(cells[x_cols[j]], line_no, x_cols[j] + 1));
  }
  if (ys.empty()) throw DataError("csv '" + path + "': no data rows");

  Dataset d;
  d.label = label.empty() ? path : label;
  const auto n = static_cast<Eigen::Index>(ys.size());
  d.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  d.X.resize(n, static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j)
      d.X(i, j) = xs[static_cast<std::size_t>(i) * p + static_cast<std::size_t>(j)];
  d.validate();
  return d;
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "y";
  for (Eigen::Index j = 0; j < d.p(); ++j) out << ",x" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << format_double(d.y(i));
    for (Eigen::Index j = 0; j < d.p(); ++j) out << ',' << format_double(d.X(i, j));
    out << "\n";
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace hubertl
