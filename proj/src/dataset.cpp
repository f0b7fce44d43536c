#include "upliftlab/dataset.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace upliftlab {

Dataset::Dataset(Matrix x, std::vector<int> t, std::vector<int> y,
                 std::optional<Vector> true_uplift)
    : x_(std::move(x)), t_(std::move(t)), y_(std::move(y)), true_uplift_(std::move(true_uplift)) {
  const auto n = t_.size();
  if (static_cast<std::size_t>(x_.rows()) != n || y_.size() != n) {
    throw std::invalid_argument("dataset: row counts differ (x=" + std::to_string(x_.rows()) +
                                ", t=" + std::to_string(n) + ", y=" + std::to_string(y_.size()) +
                                ")");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if ((t_[i] != 0 && t_[i] != 1) || (y_[i] != 0 && y_[i] != 1)) {
      throw std::invalid_argument("dataset: row " + std::to_string(i + 1) +
                                  " has non-binary treatment or outcome");
    }
  }
  if (true_uplift_) {
    if (static_cast<std::size_t>(true_uplift_->size()) != n) {
      throw std::invalid_argument("dataset: true uplift length differs from row count");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (*true_uplift_)[static_cast<Eigen::Index>(i)];
      if (!(u > -1.0 && u < 1.0)) {
        throw std::invalid_argument("dataset: row " + std::to_string(i + 1) +
                                    " true uplift outside (-1, 1)");
      }
    }
  }
}

const Vector& Dataset::true_uplift() const {
  if (!true_uplift_) throw std::logic_error("dataset has no true uplift column");
  return *true_uplift_;
}

std::size_t Dataset::treated_count() const {
  return static_cast<std::size_t>(std::accumulate(t_.begin(), t_.end(), 0));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Matrix x(static_cast<Eigen::Index>(rows.size()), x_.cols());
  std::vector<int> t(rows.size()), y(rows.size());
  std::optional<Vector> u;
  if (true_uplift_) u = Vector(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = rows[r];
    if (i >= n()) throw std::out_of_range("dataset subset: row index out of range");
    x.row(static_cast<Eigen::Index>(r)) = x_.row(static_cast<Eigen::Index>(i));
    t[r] = t_[i];
    y[r] = y_[i];
    if (u) (*u)[static_cast<Eigen::Index>(r)] = (*true_uplift_)[static_cast<Eigen::Index>(i)];
  }
  return Dataset(std::move(x), std::move(t), std::move(y), std::move(u));
}

}  // namespace upliftlab
