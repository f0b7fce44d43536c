#include "upliftlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "upliftlab/csv_io.hpp"
#include "upliftlab/dgp.hpp"
#include "upliftlab/random.hpp"

namespace upliftlab {
namespace {

// Runs body(i) for i in [0, count) on up to `threads` workers. Results must be
// written to slot i so ordering does not depend on scheduling. The first
// exception is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    items.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (const auto& item : items) {
    if (item.empty()) throw std::invalid_argument("empty value in list '" + std::string(s) + "'");
  }
  return items;
}

double parse_double(const std::string& s) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return value;
}

std::size_t parse_size(const std::string& s) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a nonnegative integer: '" + s + "'");
  }
  return value;
}

void validate_grid(const HyperGrid& grid, Arch arch) {
  if (grid.eta.empty() || grid.lambda2.empty()) {
    throw std::invalid_argument("grid: eta and lambda2 lists must be non-empty");
  }
  if (arch == Arch::kHidden && (grid.lambda1.empty() || grid.hidden.empty())) {
    throw std::invalid_argument("grid: lambda1 and hidden lists must be non-empty for hidden arch");
  }
  for (double e : grid.eta) {
    if (!(e > 0.0)) throw std::invalid_argument("grid: eta values must be positive");
  }
  for (const auto* list : {&grid.lambda1, &grid.lambda2}) {
    for (double l : *list) {
      if (!(l >= 0.0)) throw std::invalid_argument("grid: lambda values must be nonnegative");
    }
  }
  for (auto m : grid.hidden) {
    if (m == 0) throw std::invalid_argument("grid: hidden widths must be positive");
  }
  if (grid.epochs == 0) throw std::invalid_argument("grid: epochs must be at least 1");
  if (grid.batch_size == 0) throw std::invalid_argument("grid: batch_size must be at least 1");
  if (grid.grid_bins == 0) throw std::invalid_argument("grid: grid_bins must be at least 1");
  if (grid.kendall_bins < 2) throw std::invalid_argument("grid: kendall_bins must be at least 2");
}

// True when a is preferred over b at equal validation score.
bool tie_break(const GridCell& a, std::size_t ia, const GridCell& b, std::size_t ib) {
  if (a.lambda2 != b.lambda2) return a.lambda2 < b.lambda2;
  if (a.lambda1 != b.lambda1) return a.lambda1 < b.lambda1;
  if (a.eta != b.eta) return a.eta < b.eta;
  return ia < ib;
}

std::string file_label(const std::string& label) {
  std::string out;
  for (char c : label) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '_' || c == '-';
    out.push_back(keep ? c : '_');
  }
  return out;
}

}  // namespace

void SplitFractions::validate() const {
  if (!(train > 0.0 && valid > 0.0 && test > 0.0)) {
    throw std::invalid_argument("split fractions must be positive");
  }
  if (std::abs(train + valid + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
}

SplitIndices split_indices(std::size_t n, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  const auto n_valid = static_cast<std::size_t>(std::floor(fractions.valid * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(n)));
  if (n_valid == 0 || n_test == 0 || n_valid + n_test >= n) {
    throw std::invalid_argument("split: " + std::to_string(n) +
                                " rows are too few for a train/valid/test split");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, StreamTag::kSplit);
  rng.shuffle(std::span<std::size_t>(perm));

  SplitIndices out;
  out.valid.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_valid));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_valid),
                  perm.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
  out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), perm.end());
  for (auto* part : {&out.train, &out.valid, &out.test}) std::sort(part->begin(), part->end());
  return out;
}

SplitData split(const Dataset& data, const SplitFractions& fractions, std::uint64_t seed) {
  const auto idx = split_indices(data.n(), fractions, seed);
  return {data.subset(idx.train), data.subset(idx.valid), data.subset(idx.test)};
}

MethodSpec method_preset(std::string_view name) {
  if (name == "logistic") return {"Logistic", Arch::kInteraction, LossKind::kBceOnly};
  if (name == "twin_mu") return {"Twin_mu", Arch::kInteraction, LossKind::kUplift};
  if (name == "twin_nn") return {"Twin_NN", Arch::kHidden, LossKind::kUplift};
  if (name == "twin_mu_loglik") return {"Twin_mu_LogLik", Arch::kInteraction, LossKind::kLogLik};
  if (name == "twin_nn_loglik") return {"Twin_NN_LogLik", Arch::kHidden, LossKind::kLogLik};
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected logistic, twin_mu, twin_nn, twin_mu_loglik or "
                              "twin_nn_loglik)");
}

std::vector<GridCell> expand_grid(const HyperGrid& grid, Arch arch) {
  validate_grid(grid, arch);
  const bool hidden = arch == Arch::kHidden;
  const std::vector<double> l1 = hidden ? grid.lambda1 : std::vector<double>{0.0};
  const std::vector<std::size_t> widths = hidden ? grid.hidden : std::vector<std::size_t>{0};
  std::vector<GridCell> cells;
  for (double eta : grid.eta) {
    for (double lambda1 : l1) {
      for (double lambda2 : grid.lambda2) {
        for (auto m : widths) {
          const GridCell cell{eta, lambda1, lambda2, m};
          if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
        }
      }
    }
  }
  return cells;
}

TrainConfig make_config(const HyperGrid& grid, const GridCell& cell, LossKind loss,
                        std::uint64_t seed) {
  TrainConfig cfg;
  cfg.eta = cell.eta;
  cfg.lambda1 = cell.lambda1;
  cfg.lambda2 = cell.lambda2;
  cfg.reg = grid.reg;
  cfg.batch_size = grid.batch_size;
  cfg.epochs = grid.epochs;
  cfg.seed = seed;
  cfg.loss = loss;
  return cfg;
}

QiniReport score_model(const TwinParams& params, const Dataset& data, const HyperGrid& grid) {
  const Vector pred = predict_uplift(params, data.x());
  return evaluate_uplift(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                         data.t(), data.y(), grid.grid_bins, grid.kendall_bins);
}

GridSearchResult grid_search(const MethodSpec& method, const HyperGrid& grid,
                             std::span<const GridCell> cells, const Dataset& train,
                             const Dataset& valid, std::uint64_t seed, std::size_t threads) {
  validate_grid(grid, method.arch);
  if (cells.empty()) throw std::invalid_argument("grid search: no cells");
  if (train.p() != valid.p()) throw std::invalid_argument("grid search: train/valid covariates differ");

  std::vector<CellOutcome> outcomes(cells.size());
  std::vector<TwinParams> fitted(cells.size());

  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const GridCell& cell = cells[i];
    TwinParams init;
    if (method.arch == Arch::kInteraction) {
      init = TwinParams::interaction(train.p());
    } else {
      const std::size_t widths[] = {cell.hidden};
      init = TwinParams::hidden(train.p(), widths, seed);
    }
    const auto cfg = make_config(grid, cell, method.loss, seed);

    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, stall = 0;
    TwinParams best_params = init;
    auto observer = [&](const EpochStats& stats, const TwinParams& params) {
      double q = score_model(params, valid, grid).q_adj;
      if (!std::isfinite(q)) q = -std::numeric_limits<double>::infinity();
      if (best_epoch == 0 || q > best) {
        best = q;
        best_epoch = stats.epoch;
        best_params = params;
        stall = 0;
      } else if (grid.patience > 0 && ++stall >= grid.patience) {
        return false;
      }
      return true;
    };
    const auto result = upliftlab::train(init, train, cfg, observer);

    CellOutcome& out = outcomes[i];
    out.cell = cell;
    out.valid_q_adj = best;
    out.epochs_run = result.trace.epochs.size();
    out.best_epoch = best_epoch;
    out.diverged = result.trace.diverged;
    out.diagnostic = result.trace.diagnostic;
    fitted[i] = std::move(best_params);
  });

  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].best_epoch == 0) continue;
    if (!winner) {
      winner = i;
      continue;
    }
    const auto& w = outcomes[*winner];
    const auto& c = outcomes[i];
    if (c.valid_q_adj > w.valid_q_adj ||
        (c.valid_q_adj == w.valid_q_adj && tie_break(c.cell, i, w.cell, *winner))) {
      winner = i;
    }
  }
  if (!winner) {
    std::ostringstream msg;
    msg << "grid search for " << method.label << ": all " << outcomes.size() << " cells diverged";
    for (const auto& c : outcomes) {
      msg << "; eta=" << c.cell.eta << " lambda1=" << c.cell.lambda1 << " lambda2=" << c.cell.lambda2
          << " hidden=" << c.cell.hidden << ": " << c.diagnostic;
    }
    throw GridSearchError(msg.str());
  }

  GridSearchResult result;
  result.best_index = *winner;
  result.best_cell = outcomes[*winner].cell;
  result.best_config = make_config(grid, result.best_cell, method.loss, seed);
  result.params = std::move(fitted[*winner]);
  result.best_valid_q_adj = outcomes[*winner].valid_q_adj;
  result.cells = std::move(outcomes);
  return result;
}

GridSearchResult grid_search(const MethodSpec& method, const HyperGrid& grid, const Dataset& train,
                             const Dataset& valid, std::uint64_t seed, std::size_t threads) {
  const auto cells = expand_grid(grid, method.arch);
  return grid_search(method, grid, cells, train, valid, seed, threads);
}

void ExperimentSpec::validate() const {
  if (scenario.has_value() == data_path.has_value()) {
    throw std::invalid_argument("experiment: give exactly one of a scenario or a data file");
  }
  if (scenario) scenario_by_id(*scenario);
  if (sample_size && *sample_size == 0) throw std::invalid_argument("experiment: sample size is 0");
  fractions.validate();
  if (runs == 0) throw std::invalid_argument("experiment: runs must be at least 1");
  if (methods.empty()) throw std::invalid_argument("experiment: no methods");
  for (const auto& m : methods) validate_grid(grid, m.arch);
}

std::pair<double, double> mean_and_se(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_and_se: no values");
  const double r = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / r;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (r - 1.0)) / std::sqrt(r)};
}

BenchmarkResult run_benchmark(const ExperimentSpec& spec) {
  spec.validate();
  std::optional<Dataset> loaded;
  if (spec.data_path) loaded = load_csv(*spec.data_path);

  const std::size_t n_methods = spec.methods.size();
  std::vector<RunRecord> records(spec.runs * n_methods);
  std::vector<QiniReport> last_curves(n_methods);

  // Repetitions run concurrently when there are several; otherwise the
  // workers go to the grid cells.
  const std::size_t threads = std::max<std::size_t>(1, spec.threads);
  const std::size_t outer = spec.runs > 1 ? threads : 1;
  const std::size_t inner = spec.runs > 1 ? 1 : threads;

  parallel_for(spec.runs, outer, [&](std::size_t r) {
    const std::uint64_t run_seed = spec.base_seed + r + 1;
    Dataset data;
    if (loaded) {
      data = *loaded;
    } else {
      Scenario scn = scenario_by_id(*spec.scenario);
      if (spec.sample_size) scn.n = *spec.sample_size;
      data = generate_dataset(scn, run_seed);
    }
    const auto parts = split(data, spec.fractions, run_seed);
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      const auto& method = spec.methods[mi];
      const auto fit = grid_search(method, spec.grid, parts.train, parts.valid,
                                   derive_seed(run_seed, StreamTag::kInit, mi), inner);
      auto report = score_model(fit.params, parts.test, spec.grid);
      RunRecord& rec = records[r * n_methods + mi];
      rec.run = r + 1;
      rec.seed = run_seed;
      rec.method = method.label;
      rec.cell = fit.best_cell;
      rec.valid_q_adj = fit.best_valid_q_adj;
      rec.test_q_hat = report.q_hat;
      rec.test_rho = report.rho_hat;
      rec.test_q_adj = report.q_adj;
      rec.m_hat = method.arch == Arch::kHidden ? active_nodes(fit.params) : 0;
      rec.epochs_run = fit.cells[fit.best_index].epochs_run;
      if (r + 1 == spec.runs) last_curves[mi] = std::move(report);
    }
  });

  BenchmarkResult result;
  result.runs = records;
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    BenchmarkRow row;
    row.method = spec.methods[mi].label;
    double m_sum = 0.0;
    for (std::size_t r = 0; r < spec.runs; ++r) {
      const auto& rec = records[r * n_methods + mi];
      row.test_q_adj.push_back(rec.test_q_adj);
      m_sum += static_cast<double>(rec.m_hat);
    }
    std::tie(row.mean, row.se) = mean_and_se(row.test_q_adj);
    if (spec.methods[mi].arch == Arch::kHidden) row.mean_m_hat = m_sum / static_cast<double>(spec.runs);
    result.rows.push_back(std::move(row));
    result.final_curves[spec.methods[mi].label] = std::move(last_curves[mi]);
  }
  return result;
}

void BenchmarkResult::write_summary_csv(std::ostream& out) const {
  out << "method,runs,mean_q_adj,se_q_adj,mean_m_hat\n";
  for (const auto& row : rows) {
    out << row.method << ',' << row.test_q_adj.size() << ',' << format_double(row.mean) << ','
        << format_double(row.se) << ',' << (row.mean_m_hat ? format_double(*row.mean_m_hat) : "")
        << '\n';
  }
}

void BenchmarkResult::write_runs_csv(std::ostream& out) const {
  out << "run,seed,method,eta,lambda1,lambda2,hidden,valid_q_adj,test_q_hat,test_rho,test_q_adj,"
         "m_hat,epochs\n";
  for (const auto& r : runs) {
    out << r.run << ',' << r.seed << ',' << r.method << ',' << format_double(r.cell.eta) << ','
        << format_double(r.cell.lambda1) << ',' << format_double(r.cell.lambda2) << ','
        << r.cell.hidden << ',' << format_double(r.valid_q_adj) << ',' << format_double(r.test_q_hat)
        << ',' << format_double(r.test_rho) << ',' << format_double(r.test_q_adj) << ',' << r.m_hat
        << ',' << r.epochs_run << '\n';
  }
}

void BenchmarkResult::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("summary.csv");
    write_summary_csv(out);
  }
  {
    auto out = open("runs.csv");
    write_runs_csv(out);
  }
  for (const auto& [label, report] : final_curves) {
    auto out = open("curve_" + file_label(label) + ".csv");
    report.write_curve_csv(out);
  }
}

GridFile parse_grid_file(std::istream& in) {
  GridFile file;
  auto& g = file.grid;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("grid file line " + std::to_string(line_no) + ": expected key = values");
    }
    const auto key = trim(std::string_view(line).substr(0, eq));
    try {
      const auto values = split_list(std::string_view(line).substr(eq + 1));
      auto doubles = [&] {
        std::vector<double> out;
        for (const auto& v : values) out.push_back(parse_double(v));
        return out;
      };
      auto single = [&] {
        if (values.size() != 1) throw std::invalid_argument("expected a single value");
        return parse_size(values.front());
      };
      if (key == "eta") {
        g.eta = doubles();
      } else if (key == "lambda1") {
        g.lambda1 = doubles();
      } else if (key == "lambda2") {
        g.lambda2 = doubles();
      } else if (key == "hidden") {
        g.hidden.clear();
        for (const auto& v : values) g.hidden.push_back(parse_size(v));
      } else if (key == "reg") {
        if (values.size() != 1) throw std::invalid_argument("expected a single value");
        g.reg = parse_reg_kind(values.front());
      } else if (key == "epochs") {
        g.epochs = single();
      } else if (key == "batch_size") {
        g.batch_size = single();
      } else if (key == "patience") {
        g.patience = single();
      } else if (key == "grid_bins") {
        g.grid_bins = single();
      } else if (key == "kendall_bins") {
        g.kendall_bins = single();
      } else if (key == "methods") {
        std::vector<MethodSpec> methods;
        for (const auto& v : values) methods.push_back(method_preset(v));
        file.methods = std::move(methods);
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("grid file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return file;
}

GridFile load_grid_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open grid file " + path.string());
  return parse_grid_file(in);
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("UPLIFTLAB_THREADS")) {
    std::size_t value = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc() && ptr == s.data() + s.size() && value > 0) return value;
  }
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace upliftlab
