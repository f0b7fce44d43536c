#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "upliftlab/dataset.hpp"
#include "upliftlab/twin_model.hpp"

namespace upliftlab {

enum class LossKind {
  kUplift,   // outcome BCE on mu_t plus treatment BCE on the posterior propensity
  kLogLik,   // joint (Y, T) log-likelihood under e(x) = 1/2
  kBceOnly,  // outcome BCE only (logistic baseline)
};

std::string_view to_string(LossKind kind);
// Accepts "uplift", "loglik", "bce". Throws std::invalid_argument otherwise.
LossKind parse_loss_kind(std::string_view name);

// Log arguments below this floor are clamped and counted.
inline constexpr double kLogFloor = 1e-12;

struct Batch {
  Matrix x;
  std::vector<int> t;
  std::vector<int> y;

  std::size_t size() const { return t.size(); }
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows);
Batch full_batch(const Dataset& data);

struct BatchLossResult {
  double total = 0.0;
  double l1_term = 0.0;  // outcome term
  double l2_term = 0.0;  // treatment term (0 for kBceOnly)
  ParamGrads grads;      // d total / d parameter values, batch mean
  std::size_t clamped = 0;
};

// Pr(T = 1 | Y = y, x) under e(x) = 1/2:
// y = 1: mu1 / (mu1 + mu0); y = 0: (1 - mu1) / ((1 - mu1) + (1 - mu0)).
// Throws std::invalid_argument unless mu1, mu0 lie strictly inside (0, 1).
double posterior_propensity(double mu1, double mu0, int y);

// Batch-mean loss and gradient. treatment_weight scales the treatment term
// (1 reproduces the unweighted sum). Throws std::invalid_argument on an empty
// batch.
BatchLossResult uplift_loss_batch(const TwinParams& params, const Batch& batch, LossKind kind,
                                  double treatment_weight = 1.0);
BatchLossResult uplift_loss_batch(const TwinNet& net, const Batch& batch, LossKind kind,
                                  double treatment_weight = 1.0, bool with_grads = true);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t masked = 0;  // coordinates whose perturbation crossed a ReLU kink
};

// Central finite differences on every parameter value (split parameters are
// perturbed through their positive part). Relative error is
// |analytic - numeric| / max(1, |numeric|).
GradCheckResult check_gradients(const TwinParams& params, const Batch& batch, LossKind kind,
                                double h = 1e-5);

}  // namespace upliftlab
