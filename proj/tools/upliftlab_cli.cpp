// upliftlab: generate synthetic trials, train twin models, evaluate uplift
// rankings and run repeated benchmarks.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "upliftlab/csv_io.hpp"
#include "upliftlab/dgp.hpp"
#include "upliftlab/experiment.hpp"
#include "upliftlab/model_io.hpp"
#include "upliftlab/prox_optim.hpp"
#include "upliftlab/qini.hpp"
#include "upliftlab/twin_model.hpp"
#include "upliftlab/uplift_loss.hpp"

namespace fs = std::filesystem;
using namespace upliftlab;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void print_error(std::string_view kind, std::string_view message) {
  nlohmann::json err{{"error", kind}, {"message", message}};
  std::cerr << err.dump() << '\n';
}

struct GenerateArgs {
  int scenario = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n;
  std::string out;
};

struct TrainArgs {
  std::string data, arch = "interaction", loss = "uplift", reg = "l1", model_out, trace_out;
  std::size_t hidden = 512, epochs = 100, batch_size = 64;
  double eta = 0.1, lambda1 = 0.0, lambda2 = 0.0;
  std::uint64_t seed = 0;
};

struct EvaluateArgs {
  std::string model, data, report_out;
  std::size_t bins = 10, grid = 20;
};

struct BenchmarkArgs {
  std::optional<int> scenario;
  std::string data, grid_file, out_dir = "bench_out", methods;
  std::optional<std::size_t> n;
  std::size_t runs = 20;
  std::uint64_t seed = 0;
  std::optional<std::size_t> threads;
};

int run_generate(const GenerateArgs& a) {
  Scenario scn = scenario_by_id(a.scenario);
  if (a.n) scn.n = *a.n;
  const auto data = generate_dataset(scn, a.seed);
  save_csv(data, a.out);
  nlohmann::json summary{{"rows", data.n()}, {"covariates", data.p()},
                         {"treated", data.treated_count()}, {"out", a.out}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_train(const TrainArgs& a) {
  const auto data = load_csv(a.data);
  TwinParams init;
  if (a.arch == "interaction") {
    init = TwinParams::interaction(data.p());
  } else if (a.arch == "hidden1" || a.arch == "hidden") {
    const std::size_t widths[] = {a.hidden};
    init = TwinParams::hidden(data.p(), widths, a.seed);
  } else {
    throw std::invalid_argument("unknown arch '" + a.arch + "' (expected interaction or hidden1)");
  }
  TrainConfig cfg;
  cfg.eta = a.eta;
  cfg.lambda1 = a.lambda1;
  cfg.lambda2 = a.lambda2;
  cfg.reg = parse_reg_kind(a.reg);
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.seed = a.seed;
  cfg.loss = parse_loss_kind(a.loss);

  const auto result = train(init, data, cfg);
  save_model(result.params, a.model_out);
  if (!a.trace_out.empty()) {
    auto out = open_out(a.trace_out);
    result.trace.write_csv(out);
  }
  nlohmann::json summary{{"epochs", result.trace.epochs.size()},
                         {"diverged", result.trace.diverged},
                         {"active_nodes", active_nodes(result.params)},
                         {"zero_weights", zero_weight_count(result.params)},
                         {"model", a.model_out}};
  if (!result.trace.epochs.empty()) summary["final_loss"] = result.trace.epochs.back().loss;
  if (result.trace.diverged) summary["diagnostic"] = result.trace.diagnostic;
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  const auto params = load_model(a.model);
  const auto data = load_csv(a.data);
  if (data.p() != params.p) {
    throw std::invalid_argument("model expects " + std::to_string(params.p) + " covariates, data has " +
                                std::to_string(data.p()));
  }
  HyperGrid grid;
  grid.grid_bins = a.grid;
  grid.kendall_bins = a.bins;
  const auto report = score_model(params, data, grid);
  if (!a.report_out.empty()) {
    auto curve = open_out(a.report_out + "_curve.csv");
    report.write_curve_csv(curve);
    auto scalars = open_out(a.report_out + "_scalars.csv");
    report.write_scalars_csv(scalars);
  }
  nlohmann::json summary{{"q_hat", report.q_hat},
                         {"rho_hat", report.rho_hat},
                         {"q_adj", report.q_adj},
                         {"warnings", report.warnings}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_benchmark_cmd(const BenchmarkArgs& a) {
  ExperimentSpec spec;
  if (a.scenario) spec.scenario = a.scenario;
  if (!a.data.empty()) spec.data_path = fs::path(a.data);
  spec.sample_size = a.n;
  spec.runs = a.runs;
  spec.base_seed = a.seed;
  spec.threads = a.threads && *a.threads > 0 ? *a.threads : default_thread_count();
  if (!a.grid_file.empty()) {
    auto file = load_grid_file(a.grid_file);
    spec.grid = file.grid;
    if (file.methods) spec.methods = *file.methods;
  }
  const auto result = run_benchmark(spec);
  result.write(a.out_dir);
  auto rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    nlohmann::json r{{"method", row.method}, {"mean_q_adj", row.mean}, {"se_q_adj", row.se}};
    if (row.mean_m_hat) r["mean_m_hat"] = *row.mean_m_hat;
    rows.push_back(r);
  }
  std::cout << nlohmann::json{{"out_dir", a.out_dir}, {"rows", rows}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twin-network uplift modeling toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate a randomized trial to CSV");
  generate->add_option("--scenario", gen.scenario, "Scenario id 1..5")->required();
  generate->add_option("--seed", gen.seed, "Base seed");
  generate->add_option("--n", gen.n, "Override the scenario's sample size");
  generate->add_option("--out", gen.out, "Output CSV")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Fit a twin model with proximal SGD");
  train_cmd->add_option("--data", tr.data, "Training CSV")->required();
  train_cmd->add_option("--arch", tr.arch, "interaction or hidden1");
  train_cmd->add_option("--hidden", tr.hidden, "Hidden units for hidden1");
  train_cmd->add_option("--loss", tr.loss, "uplift, bce or loglik");
  train_cmd->add_option("--eta", tr.eta, "Learning rate");
  train_cmd->add_option("--lambda1", tr.lambda1, "Structured sparsity on scaling factors");
  train_cmd->add_option("--lambda2", tr.lambda2, "Weight regularization");
  train_cmd->add_option("--reg", tr.reg, "l1, l2 or none");
  train_cmd->add_option("--epochs", tr.epochs, "Epoch budget");
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  train_cmd->add_option("--seed", tr.seed, "Initialization and shuffling seed");
  train_cmd->add_option("--model-out", tr.model_out, "Model JSON output")->required();
  train_cmd->add_option("--trace-out", tr.trace_out, "Per-epoch trace CSV");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model's uplift ranking");
  evaluate->add_option("--model", ev.model, "Model JSON")->required();
  evaluate->add_option("--data", ev.data, "Evaluation CSV")->required();
  evaluate->add_option("--bins", ev.bins, "Kendall bins K");
  evaluate->add_option("--grid", ev.grid, "Qini grid intervals J");
  evaluate->add_option("--report-out", ev.report_out,
                       "Prefix for <prefix>_curve.csv and <prefix>_scalars.csv");

  BenchmarkArgs bm;
  auto* benchmark = app.add_subcommand("benchmark", "Repeated split, grid search and test scoring");
  auto* scn_opt = benchmark->add_option("--scenario", bm.scenario, "Scenario id 1..5");
  auto* data_opt = benchmark->add_option("--data", bm.data, "External CSV instead of a scenario");
  scn_opt->excludes(data_opt);
  benchmark->add_option("--n", bm.n, "Override the scenario's sample size");
  benchmark->add_option("--runs", bm.runs, "Repetitions R");
  benchmark->add_option("--grid-file", bm.grid_file, "Hyperparameter grid file");
  benchmark->add_option("--out-dir", bm.out_dir, "Directory for summary, runs and curve CSVs");
  benchmark->add_option("--seed", bm.seed, "Base seed");
  benchmark->add_option("--threads", bm.threads, "Worker threads (default UPLIFTLAB_THREADS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*train_cmd) return run_train(tr);
    if (*evaluate) return run_evaluate(ev);
    if (*benchmark) {
      if (!bm.scenario && bm.data.empty()) {
        throw std::invalid_argument("benchmark needs --scenario or --data");
      }
      return run_benchmark_cmd(bm);
    }
  } catch (const CsvError& e) {
    print_error("csv", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    print_error("invalid_argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
  return 0;
}
