#include "hubertl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "hubertl/rng.hpp"
#include "hubertl/solver.hpp"

namespace hubertl {

namespace {

constexpr const char* kMethodNames[] = {"Target", "Oracle", "Naive", "Detect"};

double parse_csv_double(const std::string& cell, const std::string& context) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw DataError(context + ": cannot parse number '" + cell + "'");
  }
  return v;
}

long long parse_csv_int(const std::string& cell, const std::string& context) {
  long long v = 0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw DataError(context + ": cannot parse integer '" + cell + "'");
  }
  return v;
}

std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::optional<double> parse_opt_field(const std::string& cell,
                                      const std::string& context) {
  if (cell.empty()) return std::nullopt;
  return parse_csv_double(cell, context);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// standard error of the mean, zero for fewer than two observations
double se_of(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

// informative truth for synthetic scenarios: the first k sources
double selection_precision(const std::vector<int>& selected, int k) {
  if (selected.empty()) return 1.0;
  std::ptrdiff_t hits =
      std::count_if(selected.begin(), selected.end(), [&](int s) { return s < k; });
  return static_cast<double>(hits) / static_cast<double>(selected.size());
}

double selection_recall(const std::vector<int>& selected, int k) {
  if (k == 0) return 1.0;
  std::ptrdiff_t hits =
      std::count_if(selected.begin(), selected.end(), [&](int s) { return s < k; });
  return static_cast<double>(hits) / static_cast<double>(k);
}

template <class F>
void run_pool(int n_tasks, int threads, F&& task) {
  const int workers = std::max(1, std::min(threads, n_tasks));
  if (workers <= 1) {
    for (int i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto body = [&] {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_tasks) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Measures wall time only on request so that default runs stay byte-identical
// across machines and reruns.
class StopWatch {
 public:
  explicit StopWatch(bool enabled) : enabled_(enabled) {
    if (enabled_) start_ = std::chrono::steady_clock::now();
  }
  std::int64_t elapsed_ms() const {
    if (!enabled_) return 0;
    const auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

ScenarioConfig cell_scenario(const ExperimentGrid& grid, double h, int k, int rep) {
  ScenarioConfig cfg = grid.scenario;
  cfg.h = h;
  cfg.k_informative = k;
  cfg.error_dist = grid.dist;
  // replications reuse one stream per index so grid cells share random numbers
  cfg.seed = Rng::derive_key(grid.seed, {static_cast<std::uint64_t>(rep)});
  cfg.validate();
  return cfg;
}

TransferConfig cell_transfer(const ExperimentGrid& grid, const Dataset& target) {
  TransferConfig cfg = grid.transfer;
  cfg.alpha = grid.alpha;
  cfg.gamma = grid.gamma ? *grid.gamma : default_gamma(target);
  return cfg;
}

std::vector<ExperimentResult> flatten_sorted(
    std::vector<std::vector<ExperimentResult>>& slots) {
  std::size_t total = 0;
  for (const auto& s : slots) total += s.size();
  std::vector<ExperimentResult> rows;
  rows.reserve(total);
  for (auto& s : slots) {
    for (auto& r : s) rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ExperimentResult& a, const ExperimentResult& b) {
                     return std::make_tuple(a.h, a.k_informative,
                                            static_cast<int>(a.method),
                                            a.replication) <
                            std::make_tuple(b.h, b.k_informative,
                                            static_cast<int>(b.method),
                                            b.replication);
                   });
  return rows;
}

struct CellIndex {
  double h;
  int k;
  int rep;
};

CellIndex decode_task(const ExperimentGrid& grid, int i) {
  const int R = grid.replications;
  const int K = static_cast<int>(grid.k_values.size());
  const int rep = i % R;
  const int cell = i / R;
  return {grid.h_values[static_cast<std::size_t>(cell / K)],
          grid.k_values[static_cast<std::size_t>(cell % K)], rep};
}

std::vector<Dataset> informative_subset(const Scenario& sc) {
  std::vector<Dataset> out;
  out.reserve(sc.truth.informative.size());
  for (int idx : sc.truth.informative) {
    out.push_back(sc.sources[static_cast<std::size_t>(idx)]);
  }
  return out;
}

const char* kResultsHeader =
    "method,h,k_informative,dist,alpha,replication,coef_mse,pred_mse,converged,"
    "runtime_ms";
const char* kAggregateHeader =
    "method,h,k_informative,dist,alpha,n_total,n_converged,mean_coef_mse,"
    "se_coef_mse,mean_pred_mse,se_pred_mse,precision,recall";

std::string zero_pad(int v, std::size_t width) {
  std::string s = std::to_string(v);
  if (s.size() < width) s.insert(s.begin(), width - s.size(), '0');
  return s;
}

}  // namespace

const char* method_name(Method m) { return kMethodNames[static_cast<int>(m)]; }

Method parse_method(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    if (name == kMethodNames[i]) return static_cast<Method>(i);
  }
  throw DataError("unknown method '" + name + "'");
}

void ExperimentGrid::validate() const {
  if (h_values.empty()) throw DataError("experiment grid: no h values");
  if (k_values.empty()) throw DataError("experiment grid: no k values");
  for (double h : h_values) {
    if (!(h >= 0.0)) throw DataError("experiment grid: h must be nonnegative");
  }
  for (int k : k_values) {
    if (k < 0 || k > scenario.S) {
      throw DataError("experiment grid: k_informative outside [0, S]");
    }
  }
  if (replications < 1) throw DataError("experiment grid: replications must be positive");
  if (threads < 1) throw DataError("experiment grid: threads must be positive");
  if (!(epsilon0 >= 0.0)) throw DataError("experiment grid: epsilon0 must be nonnegative");
  if (gamma && !(*gamma > 0.0)) throw DataError("experiment grid: gamma must be positive");
  transfer.validate();
}

double estimation_error(const CoefVector& beta_hat, const CoefVector& beta0) {
  if (beta_hat.slopes.size() != beta0.slopes.size()) {
    throw DataError("estimation_error: dimension mismatch");
  }
  const double d0 = beta_hat.intercept - beta0.intercept;
  return d0 * d0 + (beta_hat.slopes - beta0.slopes).squaredNorm();
}

std::vector<ExperimentResult> run_known_source_experiment(const ExperimentGrid& grid) {
  grid.validate();
  const int n_tasks = static_cast<int>(grid.h_values.size()) *
                      static_cast<int>(grid.k_values.size()) * grid.replications;
  std::vector<std::vector<ExperimentResult>> slots(
      static_cast<std::size_t>(n_tasks));
  run_pool(n_tasks, grid.threads, [&](int i) {
    const CellIndex cell = decode_task(grid, i);
    const Scenario sc = gen_scenario(cell_scenario(grid, cell.h, cell.k, cell.rep));
    const TransferConfig tcfg = cell_transfer(grid, sc.target);
    const auto rep_u = static_cast<std::uint64_t>(cell.rep);

    ExperimentResult base;
    base.h = cell.h;
    base.k_informative = cell.k;
    base.dist = grid.dist;
    base.alpha = grid.alpha;
    base.replication = cell.rep;

    {
      ExperimentResult r = base;
      r.method = Method::target;
      StopWatch watch(grid.timings);
      const StepFit fit =
          fuse(sc.target, {}, tcfg, Rng::derive_key(grid.seed, {rep_u, 10}));
      r.runtime_ms = watch.elapsed_ms();
      r.converged = fit.converged;
      r.coef_mse = estimation_error(fit.coef, sc.truth.beta0);
      slots[static_cast<std::size_t>(i)].push_back(std::move(r));
    }
    {
      ExperimentResult r = base;
      r.method = Method::oracle;
      StopWatch watch(grid.timings);
      const TransferFit fit = oracle_fit(sc.target, informative_subset(sc), tcfg,
                                         Rng::derive_key(grid.seed, {rep_u, 11}));
      r.runtime_ms = watch.elapsed_ms();
      r.converged = fit.converged;
      r.coef_mse = estimation_error(fit.beta_hat, sc.truth.beta0);
      slots[static_cast<std::size_t>(i)].push_back(std::move(r));
    }
  });
  return flatten_sorted(slots);
}

std::vector<ExperimentResult> run_detection_experiment(const ExperimentGrid& grid) {
  grid.validate();
  const int n_tasks = static_cast<int>(grid.h_values.size()) *
                      static_cast<int>(grid.k_values.size()) * grid.replications;
  std::vector<std::vector<ExperimentResult>> slots(
      static_cast<std::size_t>(n_tasks));
  run_pool(n_tasks, grid.threads, [&](int i) {
    const CellIndex cell = decode_task(grid, i);
    const Scenario sc = gen_scenario(cell_scenario(grid, cell.h, cell.k, cell.rep));
    const TransferConfig tcfg = cell_transfer(grid, sc.target);
    const auto rep_u = static_cast<std::uint64_t>(cell.rep);

    ExperimentResult base;
    base.h = cell.h;
    base.k_informative = cell.k;
    base.dist = grid.dist;
    base.alpha = grid.alpha;
    base.replication = cell.rep;

    {
      ExperimentResult r = base;
      r.method = Method::target;
      StopWatch watch(grid.timings);
      const StepFit fit =
          fuse(sc.target, {}, tcfg, Rng::derive_key(grid.seed, {rep_u, 10}));
      r.runtime_ms = watch.elapsed_ms();
      r.converged = fit.converged;
      r.coef_mse = estimation_error(fit.coef, sc.truth.beta0);
      slots[static_cast<std::size_t>(i)].push_back(std::move(r));
    }
    {
      ExperimentResult r = base;
      r.method = Method::oracle;
      StopWatch watch(grid.timings);
      const TransferFit fit = oracle_fit(sc.target, informative_subset(sc), tcfg,
                                         Rng::derive_key(grid.seed, {rep_u, 11}));
      r.runtime_ms = watch.elapsed_ms();
      r.converged = fit.converged;
      r.coef_mse = estimation_error(fit.beta_hat, sc.truth.beta0);
      slots[static_cast<std::size_t>(i)].push_back(std::move(r));
    }
    {
      ExperimentResult r = base;
      r.method = Method::naive;
      StopWatch watch(grid.timings);
      const TransferFit fit = oracle_fit(sc.target, sc.sources, tcfg,
                                         Rng::derive_key(grid.seed, {rep_u, 12}));
      r.runtime_ms = watch.elapsed_ms();
      r.converged = fit.converged;
      r.coef_mse = estimation_error(fit.beta_hat, sc.truth.beta0);
      slots[static_cast<std::size_t>(i)].push_back(std::move(r));
    }
    {
      ExperimentResult r = base;
      r.method = Method::detect;
      StopWatch watch(grid.timings);
      const DetectionReport report =
          detect_sources(sc.target, sc.sources, grid.epsilon0, tcfg,
                         Rng::derive_key(grid.seed, {rep_u, 13}));
      r.runtime_ms = watch.elapsed_ms();
      r.converged = report.final_fit.converged;
      r.coef_mse = estimation_error(report.final_fit.beta_hat, sc.truth.beta0);
      r.selected = report.selected;
      slots[static_cast<std::size_t>(i)].push_back(std::move(r));
    }
  });
  return flatten_sorted(slots);
}

std::vector<AggregateRow> aggregate_results(const std::vector<ExperimentResult>& rows) {
  using Key = std::tuple<double, int, int, int, double>;  // h, k, method, dist, alpha
  std::map<Key, std::vector<const ExperimentResult*>> cells;
  for (const auto& r : rows) {
    cells[{r.h, r.k_informative, static_cast<int>(r.method),
           static_cast<int>(r.dist), r.alpha}]
        .push_back(&r);
  }
  std::vector<AggregateRow> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    AggregateRow a;
    a.h = std::get<0>(key);
    a.k_informative = std::get<1>(key);
    a.method = method_name(static_cast<Method>(std::get<2>(key)));
    a.dist = error_dist_name(static_cast<ErrorDist>(std::get<3>(key)));
    a.alpha = std::get<4>(key);
    a.n_total = static_cast<int>(cell.size());
    std::vector<double> coef, pred, precs, recs;
    for (const ExperimentResult* r : cell) {
      if (!r->converged) continue;
      ++a.n_converged;
      if (r->coef_mse) coef.push_back(*r->coef_mse);
      if (r->pred_mse) pred.push_back(*r->pred_mse);
      if (r->method == Method::detect) {
        precs.push_back(selection_precision(r->selected, r->k_informative));
        recs.push_back(selection_recall(r->selected, r->k_informative));
      }
    }
    if (coef.empty()) {
      a.mean_coef_mse = std::numeric_limits<double>::quiet_NaN();
      a.se_coef_mse = std::numeric_limits<double>::quiet_NaN();
    } else {
      a.mean_coef_mse = mean_of(coef);
      a.se_coef_mse = se_of(coef);
    }
    if (!pred.empty()) {
      a.mean_pred_mse = mean_of(pred);
      a.se_pred_mse = se_of(pred);
    }
    if (!precs.empty()) {
      a.precision = mean_of(precs);
      a.recall = mean_of(recs);
    }
    out.push_back(std::move(a));
  }
  return out;
}

void write_results_csv(const std::vector<ExperimentResult>& rows,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << format_double(r.h) << ','
        << r.k_informative << ',' << error_dist_name(r.dist) << ','
        << format_double(r.alpha) << ',' << r.replication << ','
        << opt_field(r.coef_mse) << ',' << opt_field(r.pred_mse) << ','
        << (r.converged ? '1' : '0') << ',' << r.runtime_ms << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << kAggregateHeader << '\n';
  for (const auto& a : rows) {
    out << a.method << ',' << format_double(a.h) << ',' << a.k_informative << ','
        << a.dist << ',' << format_double(a.alpha) << ',' << a.n_total << ','
        << a.n_converged << ',' << format_double(a.mean_coef_mse) << ','
        << format_double(a.se_coef_mse) << ',' << opt_field(a.mean_pred_mse)
        << ',' << opt_field(a.se_pred_mse) << ',' << opt_field(a.precision)
        << ',' << opt_field(a.recall) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<AggregateRow> read_aggregate_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kAggregateHeader) {
    throw DataError("unexpected aggregate header in " + path);
  }
  std::vector<AggregateRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 13) {
      throw DataError(path + " line " + std::to_string(line_no) +
                      ": expected 13 fields");
    }
    const std::string ctx = path + " line " + std::to_string(line_no);
    AggregateRow a;
    a.method = cells[0];
    a.h = parse_csv_double(cells[1], ctx);
    a.k_informative = static_cast<int>(parse_csv_int(cells[2], ctx));
    a.dist = cells[3];
    a.alpha = parse_csv_double(cells[4], ctx);
    a.n_total = static_cast<int>(parse_csv_int(cells[5], ctx));
    a.n_converged = static_cast<int>(parse_csv_int(cells[6], ctx));
    a.mean_coef_mse = parse_csv_double(cells[7], ctx);
    a.se_coef_mse = parse_csv_double(cells[8], ctx);
    a.mean_pred_mse = parse_opt_field(cells[9], ctx);
    a.se_pred_mse = parse_opt_field(cells[10], ctx);
    a.precision = parse_opt_field(cells[11], ctx);
    a.recall = parse_opt_field(cells[12], ctx);
    rows.push_back(std::move(a));
  }
  return rows;
}

namespace {

double round_sig(double v, int digits) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  const int e = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  const double mag = std::pow(10.0, digits - 1 - e);
  return std::round(v * mag) / mag;
}

const char* series_color(const std::string& method) {
  if (method == "Target") return "#1f77b4";
  if (method == "Oracle") return "#2ca02c";
  if (method == "Naive") return "#d62728";
  if (method == "Detect") return "#9467bd";
  return "#7f7f7f";
}

}  // namespace

void emit_plot(const std::vector<AggregateRow>& rows, const std::string& svg_path) {
  if (rows.empty()) throw DataError("plot: empty aggregate table");

  std::vector<double> hs;
  for (const auto& a : rows) hs.push_back(a.h);
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());

  std::vector<std::string> methods;
  for (const char* name : kMethodNames) {
    if (std::any_of(rows.begin(), rows.end(),
                    [&](const AggregateRow& a) { return a.method == name; })) {
      methods.emplace_back(name);
    }
  }
  for (const auto& a : rows) {
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) {
      methods.push_back(a.method);
    }
  }

  double x0 = rows.front().k_informative, x1 = x0;
  double y0 = rows.front().mean_coef_mse, y1 = y0;
  bool have_y = false;
  for (const auto& a : rows) {
    x0 = std::min(x0, static_cast<double>(a.k_informative));
    x1 = std::max(x1, static_cast<double>(a.k_informative));
    if (std::isfinite(a.mean_coef_mse)) {
      if (!have_y) {
        y0 = y1 = a.mean_coef_mse;
        have_y = true;
      } else {
        y0 = std::min(y0, a.mean_coef_mse);
        y1 = std::max(y1, a.mean_coef_mse);
      }
    }
  }
  if (x1 == x0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (!have_y) {
    y0 = 0.0;
    y1 = 1.0;
  }
  const double pad = (y1 - y0 == 0.0) ? std::max(0.5, std::fabs(y1) * 0.1)
                                      : (y1 - y0) * 0.08;
  y0 -= pad;
  y1 += pad;

  const double plot_w = 320.0, plot_h = 240.0;
  const double left = 64.0, right = 18.0, top = 34.0, bottom = 46.0;
  const double panel_w = left + plot_w + right;
  const double legend_h = 26.0;
  const double width = panel_w * static_cast<double>(hs.size());
  const double height = legend_h + top + plot_h + bottom;

  std::ofstream out(svg_path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + svg_path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  double lx = 8.0;
  for (const auto& m : methods) {
    out << "<line x1=\"" << lx << "\" y1=\"13\" x2=\"" << lx + 22
        << "\" y2=\"13\" stroke=\"" << series_color(m) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << lx + 26 << "\" y=\"17\">" << m << "</text>\n";
    lx += 26.0 + 8.0 * static_cast<double>(m.size()) + 18.0;
  }

  for (std::size_t pi = 0; pi < hs.size(); ++pi) {
    const double ox = panel_w * static_cast<double>(pi) + left;
    const double oy = legend_h + top;
    auto sx = [&](double k) { return ox + (k - x0) / (x1 - x0) * plot_w; };
    auto sy = [&](double v) { return oy + plot_h - (v - y0) / (y1 - y0) * plot_h; };

    out << "<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    out << "<text x=\"" << ox + plot_w / 2 << "\" y=\"" << oy - 10
        << "\" text-anchor=\"middle\">h=" << format_double(hs[pi]) << "</text>\n";
    out << "<text x=\"" << ox + plot_w / 2 << "\" y=\"" << oy + plot_h + 34
        << "\" text-anchor=\"middle\">k_informative</text>\n";

    for (int t = 0; t <= 4; ++t) {
      const double v = y0 + (y1 - y0) * static_cast<double>(t) / 4.0;
      const double yy = sy(v);
      out << "<line x1=\"" << ox - 4 << "\" y1=\"" << yy << "\" x2=\"" << ox
          << "\" y2=\"" << yy << "\" stroke=\"#333333\"/>\n";
      out << "<text x=\"" << ox - 7 << "\" y=\"" << yy + 4
          << "\" text-anchor=\"end\">" << format_double(round_sig(v, 3))
          << "</text>\n";
    }

    std::set<int> ks;
    for (const auto& a : rows) {
      if (a.h == hs[pi]) ks.insert(a.k_informative);
    }
    for (int k : ks) {
      const double xx = sx(static_cast<double>(k));
      out << "<line x1=\"" << xx << "\" y1=\"" << oy + plot_h << "\" x2=\"" << xx
          << "\" y2=\"" << oy + plot_h + 4 << "\" stroke=\"#333333\"/>\n";
      out << "<text x=\"" << xx << "\" y=\"" << oy + plot_h + 17
          << "\" text-anchor=\"middle\">" << k << "</text>\n";
    }

    for (const auto& m : methods) {
      std::vector<std::pair<int, double>> pts;
      for (const auto& a : rows) {
        if (a.h == hs[pi] && a.method == m && std::isfinite(a.mean_coef_mse)) {
          pts.emplace_back(a.k_informative, a.mean_coef_mse);
        }
      }
      if (pts.empty()) continue;
      std::sort(pts.begin(), pts.end());
      out << "<polyline fill=\"none\" stroke=\"" << series_color(m)
          << "\" stroke-width=\"2\" points=\"";
      for (const auto& [k, v] : pts) {
        out << sx(static_cast<double>(k)) << ',' << sy(v) << ' ';
      }
      out << "\"/>\n";
      for (const auto& [k, v] : pts) {
        out << "<circle cx=\"" << sx(static_cast<double>(k)) << "\" cy=\""
            << sy(v) << "\" r=\"3\" fill=\"" << series_color(m) << "\"/>\n";
      }
    }
  }
  out << "</svg>\n";
  if (!out) throw DataError("write failed: " + svg_path);

  std::string csv_path = svg_path;
  if (csv_path.size() >= 4 && csv_path.compare(csv_path.size() - 4, 4, ".svg") == 0) {
    csv_path.replace(csv_path.size() - 4, 4, ".csv");
  } else {
    csv_path += ".csv";
  }
  write_aggregate_csv(rows, csv_path);
}

RealDataSplit ingest_real_data(const std::string& path, const IngestOptions& opts) {
  if (opts.response_column.empty()) {
    throw DataError("ingest: response column name is empty");
  }
  if (opts.group_column.empty()) {
    throw DataError("ingest: group column name is empty");
  }
  if (!(opts.test_fraction >= 0.0 && opts.test_fraction < 1.0)) {
    throw DataError("ingest: test fraction must lie in [0,1)");
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("ingest: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("ingest: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);

  auto col_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    throw DataError("ingest: unknown column '" + name + "'");
  };
  const std::size_t resp_col = col_index(opts.response_column);
  const std::size_t group_col = col_index(opts.group_column);
  if (resp_col == group_col) {
    throw DataError("ingest: response and group columns coincide");
  }

  std::set<std::size_t> categorical_cols;
  for (const auto& name : opts.categorical) {
    const std::size_t j = col_index(name);
    if (j == resp_col) throw DataError("ingest: response column cannot be categorical");
    if (j == group_col) throw DataError("ingest: group column is not a covariate");
    categorical_cols.insert(j);
  }

  std::vector<std::vector<std::string>> raw;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("ingest: line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    raw.push_back(std::move(cells));
  }
  if (raw.empty()) throw DataError("ingest: no data rows in " + path);

  // one-hot levels come from the whole file so every split shares the layout
  std::vector<std::vector<std::string>> levels(header.size());
  for (std::size_t j : categorical_cols) {
    std::set<std::string> seen;
    for (const auto& cells : raw) seen.insert(cells[j]);
    levels[j].assign(seen.begin(), seen.end());
  }

  struct Feature {
    std::size_t col;
    int level;  // -1 for continuous
  };
  std::vector<Feature> features;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j == resp_col || j == group_col) continue;
    if (categorical_cols.count(j)) {
      for (std::size_t li = 0; li < levels[j].size(); ++li) {
        features.push_back({j, static_cast<int>(li)});
        names.push_back(header[j] + "=" + levels[j][li]);
      }
    } else {
      features.push_back({j, -1});
      names.push_back(header[j]);
    }
  }
  if (features.empty()) throw DataError("ingest: no covariate columns");

  const std::size_t n_all = raw.size();
  Eigen::MatrixXd x_all(static_cast<Eigen::Index>(n_all),
                        static_cast<Eigen::Index>(features.size()));
  Eigen::VectorXd y_all(static_cast<Eigen::Index>(n_all));
  std::vector<std::string> group(n_all);
  for (std::size_t i = 0; i < n_all; ++i) {
    const auto& cells = raw[i];
    const std::string ctx = "ingest: row " + std::to_string(i + 2);
    y_all(static_cast<Eigen::Index>(i)) =
        parse_csv_double(cells[resp_col], ctx + " column '" + header[resp_col] + "'");
    group[i] = cells[group_col];
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      const Feature& f = features[fi];
      double v;
      if (f.level < 0) {
        v = parse_csv_double(cells[f.col],
                             ctx + " column '" + header[f.col] + "'");
      } else {
        v = cells[f.col] == levels[f.col][static_cast<std::size_t>(f.level)]
                ? 1.0
                : 0.0;
      }
      x_all(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fi)) = v;
    }
  }

  std::vector<int> target_rows;
  std::map<std::string, std::vector<int>> group_rows;
  for (std::size_t i = 0; i < n_all; ++i) {
    if (group[i] == opts.target_group) {
      target_rows.push_back(static_cast<int>(i));
    } else {
      group_rows[group[i]].push_back(static_cast<int>(i));
    }
  }
  if (target_rows.empty()) {
    throw DataError("ingest: empty target group '" + opts.target_group + "'");
  }

  std::vector<int> order = target_rows;
  Rng rng = Rng::from_path(opts.seed, {0});
  rng.shuffle(order);
  const int n_test = static_cast<int>(std::floor(
      static_cast<double>(order.size()) * opts.test_fraction));
  std::vector<int> test_rows(order.begin(), order.begin() + n_test);
  std::vector<int> train_rows(order.begin() + n_test, order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  if (train_rows.empty()) throw DataError("ingest: target training split is empty");

  bool constant_response = true;
  for (int r : train_rows) {
    if (y_all(r) != y_all(train_rows.front())) {
      constant_response = false;
      break;
    }
  }
  if (constant_response) {
    throw DataError("ingest: constant response over the target training rows");
  }

  // keep only columns that vary on the training target, then scale the
  // continuous ones with training-target statistics
  std::vector<std::size_t> keep;
  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    double lo = x_all(train_rows.front(), static_cast<Eigen::Index>(fi));
    double hi = lo;
    for (int r : train_rows) {
      const double v = x_all(r, static_cast<Eigen::Index>(fi));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi > lo) keep.push_back(fi);
  }
  if (keep.empty()) {
    throw DataError("ingest: every covariate is constant on the training target");
  }

  std::vector<double> offset(keep.size(), 0.0), scale(keep.size(), 1.0);
  const double n_train = static_cast<double>(train_rows.size());
  for (std::size_t ci = 0; ci < keep.size(); ++ci) {
    if (features[keep[ci]].level >= 0) continue;
    double mean = 0.0;
    for (int r : train_rows) mean += x_all(r, static_cast<Eigen::Index>(keep[ci]));
    mean /= n_train;
    double ss = 0.0;
    for (int r : train_rows) {
      const double d = x_all(r, static_cast<Eigen::Index>(keep[ci])) - mean;
      ss += d * d;
    }
    offset[ci] = mean;
    scale[ci] = std::sqrt(ss / n_train);
  }

  auto make_dataset = [&](const std::vector<int>& rows, const std::string& label) {
    Dataset d;
    d.label = label;
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    d.X.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(keep.size()));
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
      d.y(static_cast<Eigen::Index>(ri)) = y_all(rows[ri]);
      for (std::size_t ci = 0; ci < keep.size(); ++ci) {
        const double v = x_all(rows[ri], static_cast<Eigen::Index>(keep[ci]));
        d.X(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(ci)) =
            (v - offset[ci]) / scale[ci];
      }
    }
    return d;
  };

  std::vector<std::string> source_keys;
  source_keys.reserve(group_rows.size());
  for (const auto& [key, _] : group_rows) source_keys.push_back(key);
  bool all_numeric = true;
  std::vector<std::pair<double, std::string>> numeric_keys;
  for (const auto& key : source_keys) {
    double v = 0.0;
    const char* b = key.data();
    const char* e = b + key.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      all_numeric = false;
      break;
    }
    numeric_keys.emplace_back(v, key);
  }
  if (all_numeric) {
    std::sort(numeric_keys.begin(), numeric_keys.end());
    source_keys.clear();
    for (const auto& [_, key] : numeric_keys) source_keys.push_back(key);
  }

  RealDataSplit split;
  split.target_train = make_dataset(train_rows, "target-train");
  split.target_test = make_dataset(test_rows, "target-test");
  for (const auto& key : source_keys) {
    split.sources.push_back(
        make_dataset(group_rows.at(key), opts.group_column + "=" + key));
  }
  split.group_key = opts.group_column + "=" + opts.target_group;
  split.feature_names.reserve(keep.size());
  for (std::size_t fi : keep) split.feature_names.push_back(names[fi]);
  return split;
}

void write_real_data_split(const RealDataSplit& split, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_dataset_csv(split.target_train, dir + "/target_train.csv");
  write_dataset_csv(split.target_test, dir + "/target_test.csv");
  nlohmann::json m;
  m["schema_version"] = 1;
  m["group_key"] = split.group_key;
  m["feature_names"] = split.feature_names;
  nlohmann::json sources = nlohmann::json::array();
  for (std::size_t k = 0; k < split.sources.size(); ++k) {
    const std::string file = "source_" + zero_pad(static_cast<int>(k) + 1, 3) + ".csv";
    write_dataset_csv(split.sources[k], dir + "/" + file);
    sources.push_back({{"file", file},
                       {"label", split.sources[k].label},
                       {"rows", split.sources[k].n()}});
  }
  m["sources"] = sources;
  std::ofstream out(dir + "/split.json", std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + dir + "/split.json");
  out << m.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + dir + "/split.json");
}

RealDataSplit read_real_data_split(const std::string& dir) {
  std::ifstream in(dir + "/split.json", std::ios::binary);
  if (!in) throw DataError("cannot open: " + dir + "/split.json");
  nlohmann::json m;
  try {
    in >> m;
    RealDataSplit split;
    split.group_key = m.at("group_key").get<std::string>();
    split.feature_names =
        m.at("feature_names").get<std::vector<std::string>>();
    split.target_train = read_dataset_csv(dir + "/target_train.csv", "target-train");
    split.target_test = read_dataset_csv(dir + "/target_test.csv", "target-test");
    for (const auto& s : m.at("sources")) {
      split.sources.push_back(read_dataset_csv(
          dir + "/" + s.at("file").get<std::string>(),
          s.at("label").get<std::string>()));
    }
    return split;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed split manifest " + dir + "/split.json: " + e.what());
  }
}

std::vector<RealDataResult> run_real_data(const RealDataSplit& split,
                                          const TransferConfig& cfg,
                                          double epsilon0, std::uint64_t seed,
                                          bool huber_pred_loss) {
  cfg.validate();
  if (!(epsilon0 >= 0.0)) throw DataError("epsilon0 must be nonnegative");
  split.target_train.validate();
  split.target_test.validate();
  if (split.target_test.p() != split.target_train.p()) {
    throw DataError("real data: train/test covariate width mismatch");
  }

  auto score = [&](const CoefVector& coef) {
    const Eigen::VectorXd resid =
        split.target_test.y - predict(split.target_test.X, coef);
    if (huber_pred_loss) return mean_huber_loss(resid, cfg.gamma);
    return resid.squaredNorm() / static_cast<double>(resid.size());
  };

  std::vector<RealDataResult> out;
  {
    RealDataResult r;
    r.method = Method::target;
    const StepFit fit = fuse(split.target_train, {}, cfg, Rng::derive_key(seed, {1}));
    r.pred_mse = score(fit.coef);
    r.converged = fit.converged;
    out.push_back(std::move(r));
  }
  if (split.sources.empty()) {
    RealDataResult r = out.front();
    r.method = Method::naive;
    out.push_back(std::move(r));
  } else {
    RealDataResult r;
    r.method = Method::naive;
    const TransferFit fit =
        oracle_fit(split.target_train, split.sources, cfg, Rng::derive_key(seed, {2}));
    r.pred_mse = score(fit.beta_hat);
    r.converged = fit.converged;
    out.push_back(std::move(r));
  }
  {
    RealDataResult r;
    r.method = Method::detect;
    const DetectionReport report = detect_sources(
        split.target_train, split.sources, epsilon0, cfg, Rng::derive_key(seed, {3}));
    r.pred_mse = score(report.final_fit.beta_hat);
    r.converged = report.final_fit.converged;
    r.selected = report.selected;
    out.push_back(std::move(r));
  }
  return out;
}

void write_real_data_csv(const std::vector<RealDataResult>& rows,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "method,pred_mse,converged,selected\n";
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << format_double(r.pred_mse) << ','
        << (r.converged ? '1' : '0') << ',';
    for (std::size_t i = 0; i < r.selected.size(); ++i) {
      if (i) out << ';';
      out << r.selected[i] + 1;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace hubertl
