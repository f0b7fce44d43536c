#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "upliftlab/dataset.hpp"

namespace upliftlab {

// One row of the simulation table. mu_fn / tau_fn index the effect functions
// f1..f8.
struct Scenario {
  int id = 0;
  std::size_t n = 0;
  std::size_t p = 0;
  int mu_fn = 1;
  int tau_fn = 1;
  double sigma = 1.0;
};

// The five benchmark scenarios, ids 1..5.
std::span<const Scenario> benchmark_scenarios();

// Throws std::invalid_argument for ids outside 1..5.
const Scenario& scenario_by_id(int id);

// Throws std::invalid_argument when sigma <= 0, n == 0, p < 9 or a function
// id is outside 1..8.
void validate_scenario(const Scenario& scenario);

// Effect functions f1..f8 evaluated at x (x[0] is the first covariate).
// Throws std::invalid_argument for an unknown id or when x is too short for
// the covariates the function reads.
double eval_f(int fn_id, std::span<const double> x);

// Number of covariates f_{fn_id} reads (0 for f1).
std::size_t covariates_required(int fn_id);

// Standard Gaussian CDF via erfc.
double std_normal_cdf(double z);

// Phi((mu + tau) / sigma) - Phi(mu / sigma). Throws for sigma <= 0.
double true_uplift(double mu, double tau, double sigma);

// Odd 1-based columns ~ N(0, 1), even 1-based columns ~ Bernoulli(1/2).
// Column j draws from its own substream of `seed`.
Matrix generate_covariates(std::size_t n, std::size_t p, std::uint64_t seed);

// Probit randomized trial: t ~ Bernoulli(1/2),
// y = 1{mu(x) + t tau(x) + sigma eps > 0}, u_true from true_uplift().
Dataset generate_dataset(const Scenario& scenario, std::uint64_t seed);

}  // namespace upliftlab
