#include "upliftlab/uplift_loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace upliftlab {
namespace {

struct ClampedLog {
  std::size_t* clamped;
  double operator()(double v) const {
    if (v < kLogFloor) {
      ++*clamped;
      v = kLogFloor;
    }
    return std::log(v);
  }
};

// log sigmoid(z) without overflow for large |z|.
double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

// Sign pattern of every hidden unit in both branches.
std::vector<bool> activation_pattern(const ForwardCache& cache) {
  std::vector<bool> pattern;
  for (const auto& layer : cache.act) {
    for (const auto& branch : layer) {
      for (Eigen::Index i = 0; i < branch.size(); ++i) pattern.push_back(branch.data()[i] > 0.0);
    }
  }
  return pattern;
}

// Calls f(slot, analytic) for every scalar parameter, where slot is the
// storage perturbed by the finite-difference check.
template <class F>
void for_each_coordinate(TwinParams& params, const ParamGrads& grads, F&& f) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const auto& lg = grads.layers[l];
    for (Eigen::Index i = 0; i < layer.weights.pos.size(); ++i) f(layer.weights.pos[i], lg.weights[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) f(layer.bias[i], lg.bias[i]);
    for (Eigen::Index i = 0; i < layer.scale.pos.size(); ++i) f(layer.scale.pos[i], lg.scale[i]);
  }
  for (Eigen::Index i = 0; i < params.output.pos.size(); ++i) f(params.output.pos[i], grads.output[i]);
  f(params.intercept, grads.intercept);
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kUplift: return "uplift";
    case LossKind::kLogLik: return "loglik";
    case LossKind::kBceOnly: return "bce";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "uplift") return LossKind::kUplift;
  if (name == "loglik") return LossKind::kLogLik;
  if (name == "bce") return LossKind::kBceOnly;
  throw std::invalid_argument("unknown loss kind '" + std::string(name) +
                              "' (expected uplift, loglik or bce)");
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows) {
  Batch batch;
  batch.x.resize(Eigen::Index(rows.size()), data.x().cols());
  batch.t.resize(rows.size());
  batch.y.resize(rows.size());
  const auto t = data.t();
  const auto y = data.y();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    batch.x.row(Eigen::Index(r)) = data.x().row(Eigen::Index(rows[r]));
    batch.t[r] = t[rows[r]];
    batch.y[r] = y[rows[r]];
  }
  return batch;
}

Batch full_batch(const Dataset& data) {
  return Batch{data.x(), {data.t().begin(), data.t().end()}, {data.y().begin(), data.y().end()}};
}

double posterior_propensity(double mu1, double mu0, int y) {
  if (!(mu1 > 0.0 && mu1 < 1.0 && mu0 > 0.0 && mu0 < 1.0)) {
    throw std::invalid_argument("posterior_propensity: conditional means must lie in (0, 1)");
  }
  if (y == 1) return mu1 / (mu1 + mu0);
  if (y == 0) return (1.0 - mu1) / ((1.0 - mu1) + (1.0 - mu0));
  throw std::invalid_argument("posterior_propensity: y must be 0 or 1");
}

BatchLossResult uplift_loss_batch(const TwinParams& params, const Batch& batch, LossKind kind,
                                  double treatment_weight) {
  return uplift_loss_batch(TwinNet(params), batch, kind, treatment_weight, true);
}

BatchLossResult uplift_loss_batch(const TwinNet& net, const Batch& batch, LossKind kind,
                                  double treatment_weight, bool with_grads) {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("uplift loss: empty batch");

  ForwardCache cache;
  Vector z1, z0;
  net.logits(batch.x, z1, z0, with_grads ? &cache : nullptr);

  BatchLossResult result;
  ClampedLog clog{&result.clamped};
  Vector d1 = Vector::Zero(Eigen::Index(n));
  Vector d0 = Vector::Zero(Eigen::Index(n));
  double l1_sum = 0.0, l2_sum = 0.0;

  for (std::size_t r = 0; r < n; ++r) {
    const auto i = Eigen::Index(r);
    const int t = batch.t[r];
    const int y = batch.y[r];
    // 1 - sigmoid(z) evaluated as sigmoid(-z) to keep precision near 1.
    const double mu1 = sigmoid(z1[i]), nmu1 = sigmoid(-z1[i]);
    const double mu0 = sigmoid(z0[i]), nmu0 = sigmoid(-z0[i]);

    if (kind == LossKind::kLogLik) {
      if (y == 1) {
        const double s = mu1 + mu0;
        l1_sum -= clog(0.5 * s);
        d1[i] -= mu1 * nmu1 / s;
        d0[i] -= mu0 * nmu0 / s;
      } else {
        const double q = nmu1 + nmu0;
        l1_sum -= clog(0.5 * q);
        d1[i] += mu1 * nmu1 / q;
        d0[i] += mu0 * nmu0 / q;
      }
    } else {
      const double mu_t = t == 1 ? mu1 : mu0;
      const double nmu_t = t == 1 ? nmu1 : nmu0;
      l1_sum -= y == 1 ? clog(mu_t) : clog(nmu_t);
      (t == 1 ? d1 : d0)[i] += mu_t - y;
    }

    if (kind == LossKind::kBceOnly) continue;

    // Posterior propensity p = a / (a + b) with a = P(y | t=1), b = P(y | t=0),
    // evaluated through its logit log a - log b so saturated branches stay finite.
    const double log_a = y == 1 ? log_sigmoid(z1[i]) : log_sigmoid(-z1[i]);
    const double log_b = y == 1 ? log_sigmoid(z0[i]) : log_sigmoid(-z0[i]);
    const double prop = sigmoid(log_a - log_b);
    const double nprop = sigmoid(log_b - log_a);
    l2_sum -= treatment_weight * (t == 1 ? clog(prop) : clog(nprop));
    const double dlogit = treatment_weight * (prop - t);
    if (y == 1) {
      d1[i] += dlogit * nmu1;
      d0[i] -= dlogit * nmu0;
    } else {
      d1[i] -= dlogit * mu1;
      d0[i] += dlogit * mu0;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  result.l1_term = l1_sum * inv_n;
  result.l2_term = l2_sum * inv_n;
  result.total = result.l1_term + result.l2_term;
  if (with_grads) {
    result.grads = net.backward(cache, d1, d0);
    result.grads *= inv_n;
  }
  return result;
}

GradCheckResult check_gradients(const TwinParams& params, const Batch& batch, LossKind kind,
                                double h) {
  const auto base = uplift_loss_batch(params, batch, kind);

  auto pattern_of = [&](const TwinParams& probe) {
    ForwardCache cache;
    Vector z1, z0;
    TwinNet(probe).logits(batch.x, z1, z0, &cache);
    return activation_pattern(cache);
  };
  const auto base_pattern = pattern_of(params);

  GradCheckResult result;
  TwinParams probe = params;
  for_each_coordinate(probe, base.grads, [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double up = uplift_loss_batch(TwinNet(probe), batch, kind, 1.0, false).total;
    const bool kink_up = pattern_of(probe) != base_pattern;
    slot = saved - h;
    const double down = uplift_loss_batch(TwinNet(probe), batch, kind, 1.0, false).total;
    const bool kink_down = pattern_of(probe) != base_pattern;
    slot = saved;
    if (kink_up || kink_down) {
      ++result.masked;
      return;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
    result.max_rel_error = std::max(result.max_rel_error, err);
    ++result.checked;
  });
  return result;
}

}  // namespace upliftlab
