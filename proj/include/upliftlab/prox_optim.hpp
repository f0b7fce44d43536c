#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "upliftlab/dataset.hpp"
#include "upliftlab/twin_model.hpp"
#include "upliftlab/uplift_loss.hpp"

namespace upliftlab {

struct SplitStep {
  double pos = 0.0;
  double neg = 0.0;
  double value = 0.0;
};

// Lasso step on theta = u - v:
//   u~ = u - eta (lambda + g),  v~ = v - eta (lambda - g),
//   u' = max(0, u~), v' = max(0, v~).
SplitStep prox_lasso_step(double u, double v, double grad, double eta, double lambda);

// Same algebra on a scaling factor s = a - b with constant lambda1. With
// `crossed`, the projection assigns a' = max(0, b~), b' = max(0, a~).
SplitStep prox_structured_step(double a, double b, double grad_s, double eta, double lambda1,
                               bool crossed = false);

// Re-split value into (max(v, 0), max(-v, 0)).
SplitStep canonicalize(double value);

enum class RegKind { kNone, kL1, kL2 };

std::string_view to_string(RegKind kind);
RegKind parse_reg_kind(std::string_view name);

struct TrainConfig {
  double eta = 0.1;
  double lambda1 = 0.0;  // structured sparsity on scaling factors
  double lambda2 = 0.0;  // weight regularization, L1 prox or L2 decay
  RegKind reg = RegKind::kL1;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kUplift;
  double treatment_weight = 1.0;
  bool canonicalize = true;        // re-split after every step
  bool crossed_structured = false; // literal crossed projection for (a, b)

  // Throws std::invalid_argument on eta <= 0, negative lambdas or
  // batch_size == 0.
  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  std::size_t active_nodes = 0;
  std::size_t zero_weights = 0;
  std::size_t clamped = 0;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
  bool diverged = false;
  std::string diagnostic;

  // epoch,loss,l1,l2,active_nodes,zero_weights
  void write_csv(std::ostream& out) const;
};

// Called after every completed epoch; returning false stops training.
using EpochObserver = std::function<bool(const EpochStats&, const TwinParams&)>;

struct TrainResult {
  TwinParams params;
  TrainTrace trace;
};

// Applies one optimizer update to params given batch-mean gradients.
void apply_update(TwinParams& params, const ParamGrads& grads, const TrainConfig& cfg);

// Mini-batch proximal SGD. Each epoch reshuffles the rows with a stream of
// cfg.seed; the final short batch is kept. On a non-finite batch loss the
// parameters of the last finite epoch are returned and trace.diverged is set.
TrainResult train(TwinParams params, const Dataset& data, const TrainConfig& cfg,
                  const EpochObserver& observer = {});

}  // namespace upliftlab
