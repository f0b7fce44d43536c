#include "upliftlab/twin_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "upliftlab/random.hpp"

namespace upliftlab {
namespace {

using Eigen::Index;

Matrix row_matrix(std::span<const double> x) {
  Matrix m(1, static_cast<Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) m(0, static_cast<Index>(j)) = x[j];
  return m;
}

void check_t(int t) {
  if (t != 0 && t != 1) throw std::invalid_argument("treatment must be 0 or 1");
}

SplitVector uniform_split(std::size_t size, double bound, Rng& rng) {
  Vector v(static_cast<Index>(size));
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
  return SplitVector::from_values(v);
}

}  // namespace

SplitVector SplitVector::from_values(const Vector& values) {
  SplitVector s;
  s.pos = values.cwiseMax(0.0);
  s.neg = (-values).cwiseMax(0.0);
  return s;
}

void SplitVector::set(std::size_t i, double v) {
  pos[Index(i)] = std::max(v, 0.0);
  neg[Index(i)] = std::max(-v, 0.0);
}

bool SplitVector::nonnegative() const {
  return (pos.array() >= 0.0).all() && (neg.array() >= 0.0).all();
}

TwinParams TwinParams::interaction(std::size_t p) {
  TwinParams params;
  params.arch = Arch::kInteraction;
  params.p = p;
  params.output = SplitVector(2 * p + 1);
  return params;
}

TwinParams TwinParams::interaction(double theta0, const Vector& theta) {
  if (theta.size() < 3 || theta.size() % 2 == 0) {
    throw std::invalid_argument("interaction coefficients must have length 2p+1 with p >= 1");
  }
  TwinParams params;
  params.arch = Arch::kInteraction;
  params.p = static_cast<std::size_t>((theta.size() - 1) / 2);
  params.output = SplitVector::from_values(theta);
  params.intercept = theta0;
  return params;
}

TwinParams TwinParams::hidden(std::size_t p, std::span<const std::size_t> widths,
                              std::uint64_t seed) {
  if (p == 0) throw std::invalid_argument("hidden network needs p >= 1");
  if (widths.empty() || widths.size() > 2) {
    throw std::invalid_argument("hidden network supports one or two hidden layers");
  }
  Rng rng(seed, StreamTag::kInit);
  TwinParams params;
  params.arch = Arch::kHidden;
  params.p = p;
  std::size_t inputs = p + 1;
  for (const auto units : widths) {
    if (units == 0) throw std::invalid_argument("hidden layer width must be positive");
    HiddenLayer layer;
    layer.inputs = inputs;
    layer.units = units;
    const double bound = std::sqrt(6.0 / static_cast<double>(inputs + units));
    layer.weights = uniform_split(inputs * units, bound, rng);
    layer.bias = Vector::Zero(static_cast<Index>(units));
    layer.scale = SplitVector::from_values(Vector::Ones(static_cast<Index>(units)));
    params.layers.push_back(std::move(layer));
    inputs = units;
  }
  params.output = uniform_split(inputs, std::sqrt(6.0 / static_cast<double>(inputs + 1)), rng);
  return params;
}

std::vector<std::size_t> TwinParams::widths() const {
  std::vector<std::size_t> w;
  for (const auto& layer : layers) w.push_back(layer.units);
  return w;
}

void TwinParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("twin params: " + what); };
  if (p == 0) fail("p must be positive");
  if (output.pos.size() != output.neg.size()) fail("output split halves differ in length");
  if (arch == Arch::kInteraction) {
    if (!layers.empty()) fail("interaction model cannot have hidden layers");
    if (output.size() != 2 * p + 1) fail("interaction model needs 2p+1 coefficients");
    return;
  }
  if (layers.empty() || layers.size() > 2) fail("hidden model needs one or two layers");
  std::size_t inputs = p + 1;
  for (const auto& layer : layers) {
    if (layer.inputs != inputs) fail("layer input width mismatch");
    if (layer.weights.size() != layer.inputs * layer.units ||
        layer.weights.neg.size() != layer.weights.pos.size()) {
      fail("layer weight array has wrong size");
    }
    if (static_cast<std::size_t>(layer.bias.size()) != layer.units) fail("layer bias has wrong size");
    if (layer.scale.size() != layer.units || layer.scale.neg.size() != layer.scale.pos.size()) {
      fail("layer scaling factors have wrong size");
    }
    inputs = layer.units;
  }
  if (output.size() != inputs) fail("output weights do not match last layer width");
}

bool TwinParams::nonnegative() const {
  if (!output.nonnegative()) return false;
  for (const auto& layer : layers) {
    if (!layer.weights.nonnegative() || !layer.scale.nonnegative()) return false;
  }
  return true;
}

ParamGrads ParamGrads::zeros_like(const TwinParams& params) {
  ParamGrads g;
  for (const auto& layer : params.layers) {
    g.layers.push_back({Vector::Zero(layer.weights.pos.size()), Vector::Zero(layer.bias.size()),
                        Vector::Zero(layer.scale.pos.size())});
  }
  g.output = Vector::Zero(params.output.pos.size());
  return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights += other.layers[l].weights;
    layers[l].bias += other.layers[l].bias;
    layers[l].scale += other.layers[l].scale;
  }
  output += other.output;
  intercept += other.intercept;
  return *this;
}

ParamGrads& ParamGrads::operator*=(double factor) {
  for (auto& layer : layers) {
    layer.weights *= factor;
    layer.bias *= factor;
    layer.scale *= factor;
  }
  output *= factor;
  intercept *= factor;
  return *this;
}

TwinNet::TwinNet(const TwinParams& params)
    : arch_(params.arch), p_(params.p), output_(params.output.values()), intercept_(params.intercept) {
  params.validate();
  for (const auto& layer : params.layers) {
    const Vector w = layer.weights.values();
    layers_.push_back({Eigen::Map<const Eigen::MatrixXd>(w.data(), Index(layer.inputs),
                                                         Index(layer.units)),
                       layer.bias, layer.scale.values()});
  }
}

void TwinNet::logits(const Matrix& x, Vector& logit1, Vector& logit0, ForwardCache* cache) const {
  if (static_cast<std::size_t>(x.cols()) != p_) {
    throw std::invalid_argument("covariate count " + std::to_string(x.cols()) +
                                " does not match model p=" + std::to_string(p_));
  }
  const Index p = static_cast<Index>(p_);
  if (cache) {
    cache->x = x;
    cache->pre.clear();
    cache->act.clear();
  }

  if (arch_ == Arch::kInteraction) {
    logit0 = (x * output_.head(p)).array() + intercept_;
    logit1 = logit0 + x * output_.segment(p, p);
    logit1.array() += output_[2 * p];
  } else {
    std::array<Matrix, 2> in;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      std::array<Matrix, 2> pre;
      if (l == 0) {
        pre[0] = x * layer.weights.topRows(p);
        pre[0].rowwise() += layer.bias.transpose();
        pre[1] = pre[0];
        pre[1].rowwise() += layer.weights.row(p);
      } else {
        for (int b = 0; b < 2; ++b) {
          pre[b] = in[b] * layer.weights;
          pre[b].rowwise() += layer.bias.transpose();
        }
      }
      std::array<Matrix, 2> act;
      for (int b = 0; b < 2; ++b) {
        act[b] = (pre[b].array().rowwise() * layer.scale.transpose().array()).cwiseMax(0.0);
      }
      if (cache) {
        cache->pre.push_back(pre);
        cache->act.push_back(act);
      }
      in = std::move(act);
    }
    logit1 = (in[1] * output_).array() + intercept_;
    logit0 = (in[0] * output_).array() + intercept_;
  }
  if (cache) {
    cache->logit[1] = logit1;
    cache->logit[0] = logit0;
  }
}

ParamGrads TwinNet::backward(const ForwardCache& cache, const Vector& d1, const Vector& d0) const {
  ParamGrads g;
  const Index p = static_cast<Index>(p_);
  const Matrix& x = cache.x;
  g.intercept = d1.sum() + d0.sum();

  if (arch_ == Arch::kInteraction) {
    g.output.resize(2 * p + 1);
    g.output.head(p) = x.transpose() * (d1 + d0);
    g.output.segment(p, p) = x.transpose() * d1;
    g.output[2 * p] = d1.sum();
    return g;
  }

  const std::size_t L = layers_.size();
  const auto& last = cache.act[L - 1];
  g.output = last[1].transpose() * d1 + last[0].transpose() * d0;
  g.layers.resize(L);

  std::array<Matrix, 2> dact{d0 * output_.transpose(), d1 * output_.transpose()};
  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = layers_[l];
    const auto& pre = cache.pre[l];
    const auto& act = cache.act[l];
    std::array<Matrix, 2> dpre;
    Vector dscale = Vector::Zero(layer.scale.size());
    for (int b = 0; b < 2; ++b) {
      // Subgradient 0 at the ReLU kink: act > 0 exactly when s * pre > 0.
      const Matrix dscaled = (dact[b].array() * (act[b].array() > 0.0).cast<double>()).matrix();
      dscale += (dscaled.array() * pre[b].array()).colwise().sum().transpose().matrix();
      dpre[b] = (dscaled.array().rowwise() * layer.scale.transpose().array()).matrix();
    }
    auto& lg = g.layers[l];
    lg.scale = dscale;
    lg.bias = (dpre[0] + dpre[1]).colwise().sum().transpose();
    Eigen::MatrixXd dw(layer.weights.rows(), layer.weights.cols());
    if (l == 0) {
      dw.topRows(p) = x.transpose() * (dpre[0] + dpre[1]);
      dw.row(p) = dpre[1].colwise().sum();
    } else {
      const auto& in = cache.act[l - 1];
      dw = in[1].transpose() * dpre[1] + in[0].transpose() * dpre[0];
      for (int b = 0; b < 2; ++b) dact[b] = dpre[b] * layer.weights.transpose();
    }
    lg.weights = Eigen::Map<const Vector>(dw.data(), dw.size());
  }
  return g;
}

TwinOutput TwinOutput::from_branches(double mu1, double mu0, int t) {
  check_t(t);
  return TwinOutput{mu1, mu0, mu1 - mu0, t == 1 ? mu1 : mu0};
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

TwinOutput twin_forward(const TwinParams& params, std::span<const double> x, int t) {
  check_t(t);
  if (x.size() != params.p) {
    throw std::invalid_argument("covariate count " + std::to_string(x.size()) +
                                " does not match model p=" + std::to_string(params.p));
  }
  const TwinNet net(params);
  Vector z1, z0;
  net.logits(row_matrix(x), z1, z0);
  return TwinOutput::from_branches(sigmoid(z1[0]), sigmoid(z0[0]), t);
}

double interaction_forward(const TwinParams& params, std::span<const double> x, int t) {
  if (params.arch != Arch::kInteraction) {
    throw std::invalid_argument("interaction_forward needs an interaction model");
  }
  return twin_forward(params, x, t).mu_t;
}

double nn_forward(const TwinParams& params, std::span<const double> x, int t) {
  if (params.arch != Arch::kHidden) throw std::invalid_argument("nn_forward needs a hidden-layer model");
  return twin_forward(params, x, t).mu_t;
}

Vector predict_uplift(const TwinParams& params, const Matrix& x) {
  const TwinNet net(params);
  Vector z1, z0;
  net.logits(x, z1, z0);
  return z1.unaryExpr(&sigmoid) - z0.unaryExpr(&sigmoid);
}

TwinParams construct_nn_from_interaction(double theta0, const Vector& theta, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("construction constant c must be positive and finite");
  }
  if (theta.size() < 3 || theta.size() % 2 == 0) {
    throw std::invalid_argument("interaction coefficients must have length 2p+1 with p >= 1");
  }
  const Index p = (theta.size() - 1) / 2;
  const Index m = 2 * p + 1;

  // Columns 0..p-1 pass x_k through, p..2p-1 gate x_k by t, 2p carries t.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p + 1, m);
  Vector bias = Vector::Zero(m);
  for (Index k = 0; k < p; ++k) {
    w(k, k) = 1.0;
    w(k, p + k) = 1.0;
    w(p, p + k) = c;
    bias[p + k] = -c;
  }
  w(p, 2 * p) = 1.0;

  TwinParams params;
  params.arch = Arch::kHidden;
  params.p = static_cast<std::size_t>(p);
  HiddenLayer layer;
  layer.inputs = static_cast<std::size_t>(p + 1);
  layer.units = static_cast<std::size_t>(m);
  layer.weights = SplitVector::from_values(Eigen::Map<const Vector>(w.data(), w.size()));
  layer.bias = bias;
  layer.scale = SplitVector::from_values(Vector::Ones(m));
  params.layers.push_back(std::move(layer));
  params.output = SplitVector::from_values(theta);
  params.intercept = theta0;
  return params;
}

std::vector<std::size_t> active_nodes_per_layer(const TwinParams& params) {
  std::vector<std::size_t> counts;
  for (const auto& layer : params.layers) {
    std::size_t active = 0;
    for (std::size_t k = 0; k < layer.units; ++k) active += layer.scale.value(k) != 0.0;
    counts.push_back(active);
  }
  return counts;
}

std::size_t active_nodes(const TwinParams& params) {
  std::size_t total = 0;
  for (const auto c : active_nodes_per_layer(params)) total += c;
  return total;
}

std::size_t zero_weight_count(const TwinParams& params) {
  std::size_t zeros = 0;
  auto count = [&zeros](const SplitVector& s) {
    for (std::size_t i = 0; i < s.size(); ++i) zeros += s.value(i) == 0.0;
  };
  for (const auto& layer : params.layers) count(layer.weights);
  count(params.output);
  return zeros;
}

}  // namespace upliftlab
