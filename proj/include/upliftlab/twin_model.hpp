#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "upliftlab/dataset.hpp"

namespace upliftlab {

// A real vector stored as its positive-part split: value = pos - neg with
// pos, neg >= 0 elementwise.
struct SplitVector {
  Vector pos;
  Vector neg;

  SplitVector() = default;
  explicit SplitVector(std::size_t size) : pos(Vector::Zero(Eigen::Index(size))), neg(pos) {}

  // Canonical split: pos = max(v, 0), neg = max(-v, 0).
  static SplitVector from_values(const Vector& values);

  std::size_t size() const { return static_cast<std::size_t>(pos.size()); }
  Vector values() const { return pos - neg; }
  double value(std::size_t i) const { return pos[Eigen::Index(i)] - neg[Eigen::Index(i)]; }
  void set(std::size_t i, double v);
  bool nonnegative() const;
};

// One fully connected ReLU layer with a per-unit scaling factor:
// h_k = ReLU(s_k * (bias_k + sum_j W_jk in_j)).
struct HiddenLayer {
  std::size_t inputs = 0;
  std::size_t units = 0;
  SplitVector weights;  // inputs x units, column-major (unit k is contiguous)
  Vector bias;          // never split, never penalized
  SplitVector scale;    // one scaling factor per unit
};

enum class Arch {
  // sigma(theta_o + sum theta_j x_j + sum theta_{p+j} t x_j + theta_{2p+1} t)
  kInteraction,
  // One or two ReLU hidden layers over the inputs (x, t).
  kHidden,
};

// All coefficients of a twin model. For kInteraction `layers` is empty and
// `output` has 2p+1 entries ordered (x_1..x_p, t x_1..t x_p, t). For kHidden
// the first layer reads p+1 inputs (x_1..x_p, t) and `output` connects the
// last hidden layer to the sigmoid unit.
struct TwinParams {
  Arch arch = Arch::kInteraction;
  std::size_t p = 0;
  std::vector<HiddenLayer> layers;
  SplitVector output;
  double intercept = 0.0;

  // All-zero interaction model.
  static TwinParams interaction(std::size_t p);
  // Interaction model from an intercept and a (2p+1)-vector of coefficients.
  static TwinParams interaction(double theta0, const Vector& theta);

  // Hidden-layer network with uniform Glorot weights, zero intercepts and
  // unit scaling factors. widths holds one or two layer sizes.
  static TwinParams hidden(std::size_t p, std::span<const std::size_t> widths,
                           std::uint64_t seed);

  std::vector<std::size_t> widths() const;
  // Throws std::invalid_argument when array sizes disagree with the arch.
  void validate() const;
  // True when every split component is >= 0.
  bool nonnegative() const;
};

// Gradient of a scalar loss with respect to the (unsplit) parameter values,
// shaped like TwinParams.
struct LayerGrads {
  Vector weights;
  Vector bias;
  Vector scale;
};

struct ParamGrads {
  std::vector<LayerGrads> layers;
  Vector output;
  double intercept = 0.0;

  static ParamGrads zeros_like(const TwinParams& params);
  ParamGrads& operator+=(const ParamGrads& other);
  ParamGrads& operator*=(double factor);
};

// Forward activations kept for backpropagation. Index 1 is the treated
// branch (t = 1), index 0 the control branch.
struct ForwardCache {
  Matrix x;                               // B x p
  std::vector<std::array<Matrix, 2>> pre; // per layer: bias + W^T in, before scaling
  std::vector<std::array<Matrix, 2>> act; // per layer: ReLU(s * pre)
  std::array<Vector, 2> logit;
};

// Dense snapshot of TwinParams (values u - v materialized once) used for
// batched evaluation.
class TwinNet {
 public:
  explicit TwinNet(const TwinParams& params);

  Arch arch() const { return arch_; }
  std::size_t p() const { return p_; }

  // Logits of both branches for every row of x. Fills cache when given.
  void logits(const Matrix& x, Vector& logit1, Vector& logit0, ForwardCache* cache = nullptr) const;

  // Backpropagates per-row logit sensitivities d loss / d logit_b through both
  // branches. Sums over rows (no averaging).
  ParamGrads backward(const ForwardCache& cache, const Vector& dlogit1, const Vector& dlogit0) const;

 private:
  struct Layer {
    Eigen::MatrixXd weights;  // inputs x units
    Vector bias;
    Vector scale;
  };
  Arch arch_;
  std::size_t p_;
  std::vector<Layer> layers_;
  Vector output_;
  double intercept_;
};

struct TwinOutput {
  double mu1 = 0.5;     // treated branch
  double mu0 = 0.5;     // control branch
  double uplift = 0.0;  // mu1 - mu0
  double mu_t = 0.5;    // branch selected by the observed t

  static TwinOutput from_branches(double mu1, double mu0, int t);
};

double sigmoid(double z);

// Single-observation forwards. Throw std::invalid_argument on dimension
// mismatch, arch mismatch or t outside {0, 1}.
double interaction_forward(const TwinParams& params, std::span<const double> x, int t);
double nn_forward(const TwinParams& params, std::span<const double> x, int t);
// Evaluates both branches with shared weights. t selects mu_t.
TwinOutput twin_forward(const TwinParams& params, std::span<const double> x, int t = 1);

// Predicted uplift mu1 - mu0 for every row of x.
Vector predict_uplift(const TwinParams& params, const Matrix& x);

// Hidden-layer network (m = 2p+1, unit scaling) reproducing the interaction
// model exactly on x in [0, c]^p. Throws for c <= 0 or non-finite c.
TwinParams construct_nn_from_interaction(double theta0, const Vector& theta, double c);

// Hidden units with a nonzero scaling factor, summed over layers.
std::size_t active_nodes(const TwinParams& params);
std::vector<std::size_t> active_nodes_per_layer(const TwinParams& params);

// Penalized weights (layer weights and output weights) that are exactly zero.
std::size_t zero_weight_count(const TwinParams& params);

}  // namespace upliftlab
