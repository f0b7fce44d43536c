// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criteria 7 and 9 share one benchmark configuration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "upliftlab/dgp.hpp"
#include "upliftlab/experiment.hpp"
#include "upliftlab/prox_optim.hpp"
#include "upliftlab/qini.hpp"
#include "upliftlab/random.hpp"
#include "upliftlab/twin_model.hpp"
#include "upliftlab/uplift_loss.hpp"

using namespace upliftlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_s > 0 && secs > limit_s) {
    o.pass = false;
    o.detail += "; exceeded time budget";
  }
  if (!o.pass) ++failures;
  std::ostringstream line;
  line.precision(3);
  line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail
       << " [" << std::fixed << secs << " s]";
  std::cout << line.str() << std::endl;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Vector random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

Outcome embedding_equivalence() {
  Rng rng(derive_seed(1, StreamTag::kEvaluation));
  const std::size_t p = 5;
  const double c = 3.0;
  double worst = 0.0;
  std::vector<double> x(p);
  for (int rep = 0; rep < 1000; ++rep) {
    const Vector theta = random_vector(rng, 2 * p + 1, -2, 2);
    const double theta0 = rng.uniform(-2, 2);
    for (auto& v : x) v = rng.uniform(0.0, c);
    const int t = rng.bernoulli_half();
    const double a = nn_forward(construct_nn_from_interaction(theta0, theta, c), x, t);
    const double b = interaction_forward(TwinParams::interaction(theta0, theta), x, t);
    worst = std::max(worst, std::abs(a - b));
  }
  return {worst < 1e-12, "max |nn - interaction| = " + fmt(worst) + " over 1000 draws"};
}

Batch random_batch(Rng& rng, std::size_t n, std::size_t p) {
  Batch b;
  b.x.resize(Eigen::Index(n), Eigen::Index(p));
  for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.x.cols(); ++j) b.x(i, j) = rng.uniform(-1.5, 1.5);
  }
  for (std::size_t i = 0; i < n; ++i) {
    b.t.push_back(rng.bernoulli_half());
    b.y.push_back(rng.bernoulli_half());
  }
  return b;
}

Outcome gradient_correctness() {
  Rng rng(derive_seed(2, StreamTag::kEvaluation));
  const LossKind kinds[] = {LossKind::kUplift, LossKind::kLogLik, LossKind::kBceOnly};
  double worst = 0.0;
  std::size_t checked = 0, masked = 0, fixtures = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t p = 2 + rng.below(4);
    for (Arch arch : {Arch::kInteraction, Arch::kHidden}) {
      TwinParams params;
      if (arch == Arch::kInteraction) {
        params = TwinParams::interaction(rng.uniform(-0.5, 0.5), random_vector(rng, Eigen::Index(2 * p + 1), -1, 1));
      } else {
        const std::size_t m = 3 + rng.below(6);
        const std::size_t widths[] = {m};
        params = TwinParams::hidden(p, widths, rng.below(1u << 30));
        params.layers[0].bias = random_vector(rng, Eigen::Index(m), -0.3, 0.3);
        params.layers[0].scale = SplitVector::from_values(random_vector(rng, Eigen::Index(m), 0.5, 1.5));
        params.intercept = rng.uniform(-0.5, 0.5);
      }
      const auto batch = random_batch(rng, 4 + rng.below(29), p);
      ++fixtures;
      for (auto kind : kinds) {
        const auto r = check_gradients(params, batch, kind);
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
        masked += r.masked;
      }
    }
  }
  return {worst < 1e-4, "max relative error " + fmt(worst) + " over " + std::to_string(fixtures) +
                            " fixtures x 3 losses (" + std::to_string(checked) + " coordinates, " +
                            std::to_string(masked) + " kink-masked)"};
}

Outcome soft_threshold() {
  // l(theta) = (theta - 3)^2 / 2, lambda = 1: the minimizer is 2.
  double u = 0.0, v = 0.0;
  int iters = 0;
  for (; iters < 2000; ++iters) {
    const auto r = canonicalize(prox_lasso_step(u, v, (u - v) - 3.0, 0.1, 1.0).value);
    u = r.pos;
    v = r.neg;
  }
  const double err = std::abs(u - v - 2.0);
  return {err < 1e-6, "|theta - 2| = " + fmt(err) + " after " + std::to_string(iters) + " steps"};
}

Outcome qini_oracle() {
  const std::vector<double> pred{4, 3, 2, 1};
  const std::vector<int> t{1, 0, 0, 1};
  const std::vector<int> y{1, 0, 1, 0};
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const auto g = qini_curve(pred, t, y, grid);
  const double q = qini_coefficient(grid, g);
  const std::vector<double> bin_pred{0.4, 0.1};
  const double plus = kendall_from_bin_means(bin_pred, std::vector<std::optional<double>>{0.3, 0.05});
  const double minus = kendall_from_bin_means(bin_pred, std::vector<std::optional<double>>{0.05, 0.3});
  const bool ok = std::abs(g[1] - 0.5) < 1e-12 && std::abs(g[2]) < 1e-12 && std::abs(q - 25.0) < 1e-12 &&
                  plus == 1.0 && minus == -1.0;
  return {ok, "g(0.5)=" + fmt(g[1]) + " g(1)=" + fmt(g[2]) + " q=" + fmt(q) + " kendall " + fmt(plus) +
                  "/" + fmt(minus)};
}

Outcome random_calibration() {
  const auto data = generate_dataset(scenario_by_id(2), 2024);
  Rng rng(derive_seed(5, StreamTag::kEvaluation));
  std::vector<double> pred(data.n()), qs;
  for (int rep = 0; rep < 200; ++rep) {
    for (auto& v : pred) v = rng.uniform();
    qs.push_back(evaluate_uplift(pred, data.t(), data.y()).q_hat);
  }
  const auto [mean, se] = mean_and_se(qs);
  return {std::abs(mean) <= 4.0 * se, "mean q = " + fmt(mean) + ", SE = " + fmt(se)};
}

Outcome scenario1_monotone() {
  const Scenario s = scenario_by_id(1);
  const auto grid = uniform_grid(20);
  auto increments = [&](std::uint64_t seed) {
    const auto d = generate_dataset(s, seed);
    const Vector& u = d.true_uplift();
    const auto g = qini_curve(std::span<const double>(u.data(), d.n()), d.t(), d.y(), grid);
    std::vector<double> inc(g.size() - 1);
    for (std::size_t k = 0; k + 1 < g.size(); ++k) inc[k] = g[k + 1] - g[k];
    return inc;
  };
  // Monte Carlo spread of each step over independent replicate datasets.
  const int replicates = 40;
  std::vector<std::vector<double>> reps;
  for (int r = 0; r < replicates; ++r) reps.push_back(increments(5000 + r));
  const auto fresh = increments(1);
  std::size_t violations = 0;
  for (std::size_t k = 0; k < fresh.size(); ++k) {
    std::vector<double> col;
    for (const auto& r : reps) col.push_back(r[k]);
    const double sd = mean_and_se(col).second * std::sqrt(double(replicates));
    if (fresh[k] < -4.0 * sd) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " steps below the -4 sd noise bound (" +
                               std::to_string(fresh.size()) + " steps)"};
}

ExperimentSpec directional_spec() {
  ExperimentSpec spec;
  spec.scenario = 1;
  spec.runs = 5;
  spec.base_seed = 0;
  spec.methods = {method_preset("logistic"), method_preset("twin_mu")};
  spec.threads = default_thread_count();
  return spec;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome directional(const fs::path& dir) {
  const auto result = run_benchmark(directional_spec());
  result.write(dir);
  const auto& logistic = result.rows[0];
  const auto& twin = result.rows[1];
  int wins = 0;
  std::ostringstream per_run;
  for (std::size_t r = 0; r < twin.test_q_adj.size(); ++r) {
    wins += twin.test_q_adj[r] > logistic.test_q_adj[r];
    per_run << (r ? " " : "") << fmt(twin.test_q_adj[r]) << "/" << fmt(logistic.test_q_adj[r]);
  }
  const bool ok = twin.mean > logistic.mean && wins >= 4;
  return {ok, "mean q_adj Twin_mu " + fmt(twin.mean) + " (SE " + fmt(twin.se) + ") vs Logistic " +
                  fmt(logistic.mean) + " (SE " + fmt(logistic.se) + "); Twin_mu ahead in " +
                  std::to_string(wins) + "/5 runs [" + per_run.str() + "]"};
}

Outcome pruning() {
  Scenario s = scenario_by_id(5);
  const auto data = generate_dataset(s, 8);
  const std::size_t widths[] = {512};
  TrainConfig cfg;
  cfg.eta = 0.1;
  cfg.lambda1 = 0.001;
  cfg.lambda2 = 0.0001;
  cfg.reg = RegKind::kL1;
  cfg.epochs = 100;
  cfg.seed = 8;
  const auto result = train(TwinParams::hidden(data.p(), widths, 8), data, cfg);
  const auto& scale = result.params.layers[0].scale;
  const std::size_t m_hat = active_nodes(result.params);
  bool exact = true;
  for (std::size_t k = 0; k < scale.size(); ++k) {
    if (scale.value(k) == 0.0) {
      exact = exact && scale.pos[Eigen::Index(k)] == 0.0 && scale.neg[Eigen::Index(k)] == 0.0;
    } else {
      exact = exact && scale.value(k) != 0.0;
    }
  }
  const auto test = generate_dataset(s, 9);
  const auto rep = score_model(result.params, test, HyperGrid{});
  const bool ok = !result.trace.diverged && m_hat > 0 && m_hat < 512 && exact;
  return {ok, "m_hat = " + std::to_string(m_hat) + "/512 after " +
                  std::to_string(result.trace.epochs.size()) + " epochs, pruned factors exactly zero: " +
                  (exact ? "yes" : "no") + ", zero weights " +
                  std::to_string(zero_weight_count(result.params)) + ", held-out q_adj " + fmt(rep.q_adj)};
}

Outcome determinism(const fs::path& first, const fs::path& second) {
  run_benchmark(directional_spec()).write(second);
  const auto a = slurp(first / "summary.csv");
  const auto b = slurp(second / "summary.csv");
  const bool ok = !a.empty() && a == b && slurp(first / "runs.csv") == slurp(second / "runs.csv");
  return {ok, std::string("summary.csv ") + (a == b ? "byte-identical" : "differs") + " (" +
                  std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out-dir", out_dir, "Directory for benchmark artifacts");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  auto selected = [&](int id) {
    return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
  };

  if (selected(1)) report(1, "interaction embedding", 1.0, embedding_equivalence);
  if (selected(2)) report(2, "gradient check", 30.0, gradient_correctness);
  if (selected(3)) report(3, "soft-threshold oracle", 1.0, soft_threshold);
  if (selected(4)) report(4, "Qini hand oracle", 0.0, qini_oracle);
  if (selected(5)) report(5, "random-predictor calibration", 60.0, random_calibration);
  if (selected(6)) report(6, "scenario-1 monotone curve", 10.0, scenario1_monotone);
  if (selected(7) || selected(9)) {
    report(7, "Twin_mu vs Logistic on scenario 1", 900.0, [&] { return directional(dir / "bench_a"); });
  }
  if (selected(8)) report(8, "structured pruning m=512", 1200.0, pruning);
  if (selected(9)) {
    report(9, "benchmark determinism", 900.0,
           [&] { return determinism(dir / "bench_a", dir / "bench_b"); });
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
