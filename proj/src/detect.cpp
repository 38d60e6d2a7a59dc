#include "hubertl/detect.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "hubertl/rng.hpp"
#include "hubertl/solver.hpp"

namespace hubertl {

std::array<std::vector<int>, 3> split_three_folds(const Dataset& target,
                                                  std::uint64_t seed) {
  target.validate();
  const int n = static_cast<int>(target.n());
  if (n < 3) throw DataError("split_three_folds: need at least 3 rows");

  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(perm);

  std::array<std::vector<int>, 3> folds;
  int pos = 0;
  for (int f = 0; f < 3; ++f) {
    const int size = n / 3 + (f < n % 3 ? 1 : 0);
    folds[static_cast<std::size_t>(f)].assign(perm.begin() + pos,
                                              perm.begin() + pos + size);
    pos += size;
    std::sort(folds[static_cast<std::size_t>(f)].begin(),
              folds[static_cast<std::size_t>(f)].end());
  }
  return folds;
}

DetectionReport detect_sources(const Dataset& target,
                               const std::vector<Dataset>& sources,
                               double epsilon0, const TransferConfig& cfg,
                               std::uint64_t seed) {
  cfg.validate();
  if (!(epsilon0 >= 0.0)) throw DataError("detect_sources: epsilon0 must be nonnegative");
  for (const Dataset& s : sources) {
    s.validate();
    if (s.p() != target.p())
      throw DataError("detect_sources: covariate dimension mismatch for '" + s.label + "'");
  }

  const std::size_t S = sources.size();
  DetectionReport rep;
  rep.epsilon0 = epsilon0;
  rep.q.assign(S, 0.0);
  std::vector<bool> fit_failed(S, false);

  const auto folds = split_three_folds(target, Rng::derive_key(seed, {0}));
  for (int r = 0; r < 3; ++r) {
    std::vector<int> train_idx;
    for (int o = 0; o < 3; ++o) {
      if (o == r) continue;
      const auto& f = folds[static_cast<std::size_t>(o)];
      train_idx.insert(train_idx.end(), f.begin(), f.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    const Dataset train = target.subset(train_idx);
    const Dataset val = target.subset(folds[static_cast<std::size_t>(r)]);

    const StepFit base =
        fuse(train, {}, cfg, Rng::derive_key(seed, {1, static_cast<std::uint64_t>(r)}));
    rep.q0 += mean_huber_loss(val.y - predict(val.X, base.coef), cfg.gamma);

    for (std::size_t k = 0; k < S; ++k) {
      const StepFit cand = fuse(
          train, {sources[k]}, cfg,
          Rng::derive_key(seed, {2, k + 1, static_cast<std::uint64_t>(r)}));
      if (!cand.converged) {
        fit_failed[k] = true;
        continue;
      }
      rep.q[k] += mean_huber_loss(val.y - predict(val.X, cand.coef), cfg.gamma);
    }
  }

  std::vector<Dataset> chosen;
  const double threshold = (1.0 + epsilon0) * rep.q0;
  for (std::size_t k = 0; k < S; ++k) {
    if (fit_failed[k]) {
      rep.q[k] = std::numeric_limits<double>::infinity();
      rep.failed.push_back(static_cast<int>(k));
      continue;
    }
    if (rep.q[k] <= threshold) {
      rep.selected.push_back(static_cast<int>(k));
      chosen.push_back(sources[k]);
    }
  }

  rep.final_fit = oracle_fit(target, chosen, cfg, Rng::derive_key(seed, {3}));
  return rep;
}

void write_detection_csv(const DetectionReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_detection_csv: cannot open '" + path + "'");
  out << "# q0=" << format_double(report.q0)
      << ",epsilon0=" << format_double(report.epsilon0) << "\n";
  out << "source_id,q_k,selected_flag\n";
  for (std::size_t k = 0; k < report.q.size(); ++k) {
    const bool sel = std::find(report.selected.begin(), report.selected.end(),
                               static_cast<int>(k)) != report.selected.end();
    out << (k + 1) << "," << format_double(report.q[k]) << "," << (sel ? 1 : 0)
        << "\n";
  }
  if (!out) throw DataError("write_detection_csv: write failure on '" + path + "'");
}

namespace {

double parse_double_field(const std::string& text, const std::string& path) {
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw DataError("read_detection_csv: bad number '" + text + "' in '" + path + "'");
  return v;
}

}  // namespace

DetectionReport read_detection_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_detection_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("# q0=", 0) != 0)
    throw DataError("read_detection_csv: missing header comment in '" + path + "'");
  const std::size_t sep = line.find(",epsilon0=");
  if (sep == std::string::npos)
    throw DataError("read_detection_csv: missing epsilon0 in '" + path + "'");
  DetectionReport rep;
  rep.q0 = parse_double_field(line.substr(5, sep - 5), path);
  rep.epsilon0 = parse_double_field(line.substr(sep + 10), path);

  if (!std::getline(in, line) || line != "source_id,q_k,selected_flag")
    throw DataError("read_detection_csv: missing column header in '" + path + "'");

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw DataError("read_detection_csv: malformed row in '" + path + "'");
    const double qk = parse_double_field(line.substr(c1 + 1, c2 - c1 - 1), path);
    const std::string flag = line.substr(c2 + 1);
    rep.q.push_back(qk);
    if (flag == "1")
      rep.selected.push_back(static_cast<int>(rep.q.size()) - 1);
    else if (flag != "0")
      throw DataError("read_detection_csv: bad selected_flag in '" + path + "'");
    if (!std::isfinite(qk)) rep.failed.push_back(static_cast<int>(rep.q.size()) - 1);
  }
  return rep;
}

}  // namespace hubertl
