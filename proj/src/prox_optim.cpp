#include "upliftlab/prox_optim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "upliftlab/random.hpp"

namespace upliftlab {
namespace {

bool all_finite(const ParamGrads& g) {
  for (const auto& layer : g.layers) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite() || !layer.scale.allFinite()) return false;
  }
  return g.output.allFinite() && std::isfinite(g.intercept);
}

void step_split(SplitVector& s, const Vector& grad, double eta, double lambda, bool canonical,
                bool crossed) {
  for (Eigen::Index i = 0; i < s.pos.size(); ++i) {
    SplitStep r = crossed ? prox_structured_step(s.pos[i], s.neg[i], grad[i], eta, lambda, true)
                          : prox_lasso_step(s.pos[i], s.neg[i], grad[i], eta, lambda);
    if (canonical) r = canonicalize(r.value);
    s.pos[i] = r.pos;
    s.neg[i] = r.neg;
  }
}

}  // namespace

SplitStep prox_lasso_step(double u, double v, double grad, double eta, double lambda) {
  const double u_tilde = u - eta * (lambda + grad);
  const double v_tilde = v - eta * (lambda - grad);
  const double u_next = std::max(0.0, u_tilde);
  const double v_next = std::max(0.0, v_tilde);
  return {u_next, v_next, u_next - v_next};
}

SplitStep prox_structured_step(double a, double b, double grad_s, double eta, double lambda1,
                               bool crossed) {
  if (!crossed) return prox_lasso_step(a, b, grad_s, eta, lambda1);
  const double a_tilde = a - eta * (lambda1 + grad_s);
  const double b_tilde = b - eta * (lambda1 - grad_s);
  const double a_next = std::max(0.0, b_tilde);
  const double b_next = std::max(0.0, a_tilde);
  return {a_next, b_next, a_next - b_next};
}

SplitStep canonicalize(double value) {
  return {std::max(value, 0.0), std::max(-value, 0.0), value};
}

std::string_view to_string(RegKind kind) {
  switch (kind) {
    case RegKind::kNone: return "none";
    case RegKind::kL1: return "l1";
    case RegKind::kL2: return "l2";
  }
  return "?";
}

RegKind parse_reg_kind(std::string_view name) {
  if (name == "none") return RegKind::kNone;
  if (name == "l1") return RegKind::kL1;
  if (name == "l2") return RegKind::kL2;
  throw std::invalid_argument("unknown regularization '" + std::string(name) +
                              "' (expected l1, l2 or none)");
}

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw std::invalid_argument("regularization constants must be nonnegative");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (!(treatment_weight >= 0.0)) throw std::invalid_argument("treatment weight must be nonnegative");
}

void TrainTrace::write_csv(std::ostream& out) const {
  const auto precision = out.precision(17);
  out << "epoch,loss,l1,l2,active_nodes,zero_weights\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.loss << ',' << e.l1 << ',' << e.l2 << ',' << e.active_nodes << ','
        << e.zero_weights << '\n';
  }
  out.precision(precision);
}

void apply_update(TwinParams& params, const ParamGrads& grads, const TrainConfig& cfg) {
  const double eta = cfg.eta;
  const double weight_lambda = cfg.reg == RegKind::kL1 ? cfg.lambda2 : 0.0;
  const bool decay = cfg.reg == RegKind::kL2 && cfg.lambda2 > 0.0;

  auto step_weights = [&](SplitVector& s, const Vector& g) {
    if (decay) {
      step_split(s, g + cfg.lambda2 * s.values(), eta, 0.0, cfg.canonicalize, false);
    } else {
      step_split(s, g, eta, weight_lambda, cfg.canonicalize, false);
    }
  };

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const auto& lg = grads.layers[l];
    step_weights(layer.weights, lg.weights);
    layer.bias -= eta * lg.bias;
    step_split(layer.scale, lg.scale, eta, cfg.lambda1, cfg.canonicalize, cfg.crossed_structured);
  }
  step_weights(params.output, grads.output);
  params.intercept -= eta * grads.intercept;
  assert(params.nonnegative());
}

TrainResult train(TwinParams params, const Dataset& data, const TrainConfig& cfg,
                  const EpochObserver& observer) {
  cfg.validate();
  params.validate();
  if (data.p() != params.p) {
    throw std::invalid_argument("training data has " + std::to_string(data.p()) +
                                " covariates, model expects " + std::to_string(params.p));
  }
  if (data.n() == 0) throw std::invalid_argument("training data is empty");

  TrainResult result{params, {}};
  Rng shuffle_rng(cfg.seed, StreamTag::kShuffle);
  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    EpochStats stats;
    stats.epoch = epoch;
    bool finite = true;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const auto batch = make_batch(data, std::span<const std::size_t>(order).subspan(start, stop - start));
      const auto loss = uplift_loss_batch(TwinNet(params), batch, cfg.loss, cfg.treatment_weight);
      if (!std::isfinite(loss.total) || !all_finite(loss.grads)) {
        finite = false;
        result.trace.diverged = true;
        result.trace.diagnostic = "non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                  ", batch starting at row " + std::to_string(start) +
                                  "; keeping parameters from epoch " + std::to_string(epoch - 1);
        break;
      }
      const double w = static_cast<double>(batch.size());
      stats.loss += w * loss.total;
      stats.l1 += w * loss.l1_term;
      stats.l2 += w * loss.l2_term;
      stats.clamped += loss.clamped;
      apply_update(params, loss.grads, cfg);
    }
    if (!finite) break;

    const double inv_n = 1.0 / static_cast<double>(data.n());
    stats.loss *= inv_n;
    stats.l1 *= inv_n;
    stats.l2 *= inv_n;
    stats.active_nodes = active_nodes(params);
    stats.zero_weights = zero_weight_count(params);
    result.params = params;
    result.trace.epochs.push_back(stats);
    if (observer && !observer(stats, params)) break;
  }
  return result;
}

}  // namespace upliftlab
