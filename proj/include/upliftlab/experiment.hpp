#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "upliftlab/dataset.hpp"
#include "upliftlab/prox_optim.hpp"
#include "upliftlab/qini.hpp"
#include "upliftlab/twin_model.hpp"
#include "upliftlab/uplift_loss.hpp"

namespace upliftlab {

struct SplitFractions {
  double train = 0.4;
  double valid = 0.3;
  double test = 0.3;

  // Positive fractions summing to 1 within 1e-9.
  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train, valid, test;
};

struct SplitData {
  Dataset train, valid, test;
};

// Random permutation by seed; valid and test get floor(f n) rows, train the
// remainder. Throws std::invalid_argument when a part would be empty.
SplitIndices split_indices(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);
SplitData split(const Dataset& data, const SplitFractions& fractions, std::uint64_t seed);

struct MethodSpec {
  std::string label;
  Arch arch = Arch::kInteraction;
  LossKind loss = LossKind::kUplift;
};

// "logistic" (interaction, bce), "twin_mu" (interaction, uplift),
// "twin_nn" (hidden, uplift), "twin_mu_loglik", "twin_nn_loglik".
MethodSpec method_preset(std::string_view name);

struct GridCell {
  double eta = 0.1;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::size_t hidden = 0;  // 0 for the interaction arch

  bool operator==(const GridCell&) const = default;
};

struct HyperGrid {
  std::vector<double> eta{0.005, 0.01, 0.05, 0.1, 0.2, 0.3};
  std::vector<double> lambda1{0.0, 0.0001, 0.0005, 0.001, 0.005, 0.01};
  std::vector<double> lambda2{0.0, 0.0001, 0.0005, 0.001, 0.005, 0.01};
  std::vector<std::size_t> hidden{512};
  RegKind reg = RegKind::kL1;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::size_t patience = 10;  // 0 disables early stopping
  std::size_t grid_bins = 20;
  std::size_t kendall_bins = 10;
};

// Cartesian product eta x lambda1 x lambda2 x hidden in listed order. For the
// interaction arch lambda1 and hidden do not apply and collapse to 0;
// duplicates keep their first position.
std::vector<GridCell> expand_grid(const HyperGrid& grid, Arch arch);

TrainConfig make_config(const HyperGrid& grid, const GridCell& cell, LossKind loss,
                        std::uint64_t seed);

struct CellOutcome {
  GridCell cell;
  double valid_q_adj = 0.0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string diagnostic;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  GridCell best_cell;
  TrainConfig best_config;
  TwinParams params;
  double best_valid_q_adj = 0.0;
  std::vector<CellOutcome> cells;
};

class GridSearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fits one model per cell on `train` (early stopping on validation q_adj)
// and returns the cell with the highest validation q_adj. Ties go to smaller
// lambda2, then lambda1, then eta, then the earlier cell. Throws
// GridSearchError when every cell diverged.
GridSearchResult grid_search(const MethodSpec& method, const HyperGrid& grid,
                             std::span<const GridCell> cells, const Dataset& train,
                             const Dataset& valid, std::uint64_t seed, std::size_t threads = 1);
GridSearchResult grid_search(const MethodSpec& method, const HyperGrid& grid, const Dataset& train,
                             const Dataset& valid, std::uint64_t seed, std::size_t threads = 1);

// Predictions of params on data scored with the grid's J and K.
QiniReport score_model(const TwinParams& params, const Dataset& data, const HyperGrid& grid);

struct ExperimentSpec {
  std::optional<int> scenario;
  std::optional<std::filesystem::path> data_path;
  std::optional<std::size_t> sample_size;  // overrides the scenario's n
  SplitFractions fractions;
  std::size_t runs = 20;
  std::vector<MethodSpec> methods{method_preset("logistic"), method_preset("twin_mu")};
  HyperGrid grid;
  std::uint64_t base_seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct RunRecord {
  std::size_t run = 0;  // 1-based
  std::uint64_t seed = 0;
  std::string method;
  GridCell cell;
  double valid_q_adj = 0.0;
  double test_q_hat = 0.0;
  double test_rho = 0.0;
  double test_q_adj = 0.0;
  std::size_t m_hat = 0;
  std::size_t epochs_run = 0;
};

struct BenchmarkRow {
  std::string method;
  std::vector<double> test_q_adj;  // per repetition
  double mean = 0.0;
  double se = 0.0;                 // sample std / sqrt(R); 0 when R = 1
  std::optional<double> mean_m_hat;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<RunRecord> runs;                 // sorted by (run, method index)
  std::map<std::string, QiniReport> final_curves;  // final repetition, per method

  void write_summary_csv(std::ostream& out) const;
  void write_runs_csv(std::ostream& out) const;
  // summary.csv, runs.csv and curve_<method>.csv under dir.
  void write(const std::filesystem::path& dir) const;
};

// mean and sample-std / sqrt(R).
std::pair<double, double> mean_and_se(std::span<const double> values);

// Generates (or loads) and splits data with seed base_seed + r for r = 1..R,
// grid-searches every method and scores the test split.
BenchmarkResult run_benchmark(const ExperimentSpec& spec);

// Flat "key = v1, v2, ..." lines; '#' starts a comment. Keys: methods, eta,
// lambda1, lambda2, hidden, reg, epochs, batch_size, patience, grid_bins,
// kendall_bins. Unknown keys or bad values throw std::invalid_argument.
struct GridFile {
  HyperGrid grid;
  std::optional<std::vector<MethodSpec>> methods;
};
GridFile parse_grid_file(std::istream& in);
GridFile load_grid_file(const std::filesystem::path& path);

// Worker count from UPLIFTLAB_THREADS (0 or unset = hardware concurrency).
std::size_t default_thread_count();

}  // namespace upliftlab
