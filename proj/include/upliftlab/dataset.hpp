#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace upliftlab {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// A randomized-trial sample: covariates, binary treatment, binary outcome and,
// for synthetic data, the per-row true uplift. Immutable once built.
class Dataset {
 public:
  Dataset() = default;
  // Throws std::invalid_argument on inconsistent row counts, non-binary t/y,
  // or true uplift values outside (-1, 1).
  Dataset(Matrix x, std::vector<int> t, std::vector<int> y,
          std::optional<Vector> true_uplift = std::nullopt);

  std::size_t n() const { return t_.size(); }
  std::size_t p() const { return static_cast<std::size_t>(x_.cols()); }

  const Matrix& x() const { return x_; }
  std::span<const int> t() const { return t_; }
  std::span<const int> y() const { return y_; }

  bool has_true_uplift() const { return true_uplift_.has_value(); }
  // Throws std::logic_error when absent.
  const Vector& true_uplift() const;

  // Randomized trial with e(x) = 1/2.
  static constexpr double propensity() { return 0.5; }

  std::size_t treated_count() const;

  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  Matrix x_;
  std::vector<int> t_;
  std::vector<int> y_;
  std::optional<Vector> true_uplift_;
};

}  // namespace upliftlab
