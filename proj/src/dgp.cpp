#include "upliftlab/dgp.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "upliftlab/random.hpp"

namespace upliftlab {
namespace {

constexpr std::array<Scenario, 5> kScenarios{{
    {1, 10000, 200, 7, 4, 0.5},
    {2, 20000, 100, 3, 5, 1.0},
    {3, 20000, 100, 1, 6, 1.0},
    {4, 20000, 100, 2, 7, 2.0},
    {5, 20000, 100, 6, 8, 4.0},
}};

double ind(bool b) { return b ? 1.0 : 0.0; }

double f4(std::span<const double> x) {
  const double x2 = x[1], x4 = x[3], x6 = x[5];
  return x2 * x4 * x6 + 2 * x2 * x4 * (1 - x6) + 3 * x2 * (1 - x4) * x6 +
         4 * x2 * (1 - x4) * (1 - x6) + 5 * (1 - x2) * x4 * x6 + 6 * (1 - x2) * x4 * (1 - x6) +
         7 * (1 - x2) * (1 - x4) * x6 + 8 * (1 - x2) * (1 - x4) * (1 - x6);
}

double f5(std::span<const double> x) {
  return x[0] + x[2] + x[4] + x[6] + x[7] + x[8] - 2;
}

}  // namespace

std::span<const Scenario> benchmark_scenarios() { return kScenarios; }

const Scenario& scenario_by_id(int id) {
  if (id < 1 || id > static_cast<int>(kScenarios.size())) {
    throw std::invalid_argument("unknown scenario id " + std::to_string(id) + " (expected 1-5)");
  }
  return kScenarios[static_cast<std::size_t>(id - 1)];
}

void validate_scenario(const Scenario& s) {
  if (s.mu_fn < 1 || s.mu_fn > 8 || s.tau_fn < 1 || s.tau_fn > 8) {
    throw std::invalid_argument("scenario: effect function id outside 1-8");
  }
  if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) {
    throw std::invalid_argument("scenario: sigma must be positive and finite");
  }
  if (s.n == 0) throw std::invalid_argument("scenario: n must be positive");
  if (s.p < 9) throw std::invalid_argument("scenario: p must be at least 9");
}

std::size_t covariates_required(int fn_id) {
  switch (fn_id) {
    case 1: return 0;
    case 2:
    case 3: return 1;
    case 4: return 6;
    case 5:
    case 6:
    case 7:
    case 8: return 9;
    default: throw std::invalid_argument("effect function id " + std::to_string(fn_id) +
                                         " outside 1-8");
  }
}

double eval_f(int fn_id, std::span<const double> x) {
  const auto need = covariates_required(fn_id);
  if (x.size() < need) {
    throw std::invalid_argument("f" + std::to_string(fn_id) + " reads x" + std::to_string(need) +
                                " but only " + std::to_string(x.size()) + " covariates given");
  }
  switch (fn_id) {
    case 1: return 0.0;
    case 2: return 5 * ind(x[0] > 1) - 5;
    case 3: return 2 * x[0] - 4;
    case 4: return f4(x);
    case 5: return f5(x);
    case 6:
      return 4 * ind(x[0] > 1) * ind(x[2] > 0) + 4 * ind(x[4] > 1) * ind(x[6] > 0) +
             2 * x[7] * x[8];
    case 7:
      return 0.5 * (x[0] * x[0] + x[1] + x[2] * x[2] + x[3] + x[4] * x[4] + x[5] + x[6] * x[6] +
                    x[7] + x[8] * x[8] - 11);
    case 8: return (f4(x) + f5(x)) / std::sqrt(2.0);
  }
  return 0.0;  // unreachable, covariates_required rejects unknown ids
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double true_uplift(double mu, double tau, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("true_uplift: sigma must be positive");
  return std_normal_cdf((mu + tau) / sigma) - std_normal_cdf(mu / sigma);
}

Matrix generate_covariates(std::size_t n, std::size_t p, std::uint64_t seed) {
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    Rng rng(seed, StreamTag::kCovariate, j);
    const bool gaussian = (j % 2 == 0);  // 1-based odd index
    for (std::size_t i = 0; i < n; ++i) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gaussian ? rng.normal() : static_cast<double>(rng.bernoulli_half());
    }
  }
  return x;
}

Dataset generate_dataset(const Scenario& scenario, std::uint64_t seed) {
  validate_scenario(scenario);
  const auto n = scenario.n;
  Matrix x = generate_covariates(n, scenario.p, seed);
  Rng treat_rng(seed, StreamTag::kTreatment);
  Rng noise_rng(seed, StreamTag::kLatentNoise);

  std::vector<int> t(n), y(n);
  Vector u(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::span<const double> xi(x.row(row).data(), scenario.p);
    const double mu = eval_f(scenario.mu_fn, xi);
    const double tau = eval_f(scenario.tau_fn, xi);
    t[i] = treat_rng.bernoulli_half();
    const double latent = mu + t[i] * tau + scenario.sigma * noise_rng.normal();
    y[i] = latent > 0.0 ? 1 : 0;
    u[row] = true_uplift(mu, tau, scenario.sigma);
  }
  return Dataset(std::move(x), std::move(t), std::move(y), std::move(u));
}

}  // namespace upliftlab
