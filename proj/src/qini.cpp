#include "upliftlab/qini.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace upliftlab {
namespace {

void check_lengths(std::span<const double> predictions, std::span<const int> t,
                   std::span<const int> y) {
  if (predictions.size() != t.size() || predictions.size() != y.size()) {
    throw std::invalid_argument("predictions, treatment and outcome lengths differ");
  }
  if (predictions.empty()) throw std::invalid_argument("no observations to evaluate");
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

// ceil(phi n), robust to phi n landing a few ulps above an integer.
std::size_t top_count(double phi, std::size_t n) {
  const double scaled = phi * static_cast<double>(n);
  const double rounded = std::round(scaled);
  const double k = std::abs(scaled - rounded) <= 1e-9 * std::max(1.0, scaled) ? rounded
                                                                             : std::ceil(scaled);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

}  // namespace

std::vector<double> uniform_grid(std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("grid needs at least one bin");
  std::vector<double> grid(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    grid[k] = static_cast<double>(k) / static_cast<double>(bins);
  }
  return grid;
}

std::vector<std::size_t> uplift_order(std::span<const double> predictions) {
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a] > predictions[b];
  });
  return order;
}

std::vector<double> qini_curve(std::span<const double> predictions, std::span<const int> t,
                               std::span<const int> y, std::span<const double> grid) {
  check_lengths(predictions, t, y);
  if (grid.empty()) throw std::invalid_argument("qini curve: empty grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= 0.0 && grid[k] <= 1.0)) {
      throw std::invalid_argument("qini curve: grid proportions must lie in [0, 1]");
    }
    if (k > 0 && grid[k] < grid[k - 1]) throw std::invalid_argument("qini curve: grid not sorted");
  }
  const double treated_total = std::accumulate(t.begin(), t.end(), 0.0);
  if (treated_total == 0.0) throw std::invalid_argument("qini curve: no treated observations");

  const auto order = uplift_order(predictions);
  const std::size_t n = order.size();
  // Prefix sums over the sorted order.
  std::vector<double> yt(n + 1, 0.0), yc(n + 1, 0.0), nt(n + 1, 0.0), nc(n + 1, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = order[r];
    yt[r + 1] = yt[r] + y[i] * t[i];
    yc[r + 1] = yc[r] + y[i] * (1 - t[i]);
    nt[r + 1] = nt[r] + t[i];
    nc[r + 1] = nc[r] + (1 - t[i]);
  }

  std::vector<double> g(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto m = top_count(grid[k], n);
    const double control_term = nc[m] > 0.0 ? yc[m] * (nt[m] / nc[m]) : 0.0;
    g[k] = (yt[m] - control_term) / treated_total;
  }
  return g;
}

double qini_coefficient(std::span<const double> grid, std::span<const double> g) {
  if (grid.size() < 2 || grid.size() != g.size()) {
    throw std::invalid_argument("qini coefficient: need matching grid and curve with >= 2 points");
  }
  if (grid.front() != 0.0 || grid.back() != 1.0) {
    throw std::invalid_argument("qini coefficient: grid must run from 0 to 1");
  }
  const double g1 = g.back();
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double q_lo = g[k] - grid[k] * g1;
    const double q_hi = g[k + 1] - grid[k + 1] * g1;
    area += (grid[k + 1] - grid[k]) * (q_hi + q_lo);
  }
  return 0.5 * area * 100.0;
}

double kendall_from_bin_means(std::span<const double> predicted,
                              std::span<const std::optional<double>> observed) {
  const std::size_t k = predicted.size();
  if (k < 2 || observed.size() != k) {
    throw std::invalid_argument("kendall: need at least two bins with matching means");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (!observed[i] || !observed[j]) continue;
      sum += sign(predicted[i] - predicted[j]) * sign(*observed[i] - *observed[j]);
    }
  }
  return 2.0 * sum / (static_cast<double>(k) * static_cast<double>(k - 1));
}

KendallResult kendall_uplift_corr(std::span<const double> predictions, std::span<const int> t,
                                  std::span<const int> y, std::size_t bins) {
  check_lengths(predictions, t, y);
  const std::size_t n = predictions.size();
  if (bins < 2) throw std::invalid_argument("kendall: need at least two bins");
  if (bins > n) throw std::invalid_argument("kendall: more bins than observations");

  const auto order = uplift_order(predictions);
  KendallResult result;
  result.predicted.resize(bins);
  result.observed.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins;
    const std::size_t hi = (b + 1) * n / bins;
    double pred_sum = 0.0, yt = 0.0, yc = 0.0, nt = 0.0, nc = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      const auto i = order[r];
      pred_sum += predictions[i];
      yt += y[i] * t[i];
      yc += y[i] * (1 - t[i]);
      nt += t[i];
      nc += 1 - t[i];
    }
    result.predicted[b] = pred_sum / static_cast<double>(hi - lo);
    if (nt > 0.0 && nc > 0.0) {
      result.observed[b] = yt / nt - yc / nc;
    } else {
      ++result.warnings;
    }
  }
  result.rho = kendall_from_bin_means(result.predicted, result.observed);
  return result;
}

double adjusted_qini(double q_hat, double rho) {
  // Avoids -0.0 when rho < 0.
  return q_hat > 0.0 ? rho * q_hat : 0.0;
}

void QiniReport::write_curve_csv(std::ostream& out) const {
  const auto precision = out.precision(17);
  out << "phi,g,Q\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out << grid[k] << ',' << g_values[k] << ',' << q_values[k] << '\n';
  }
  out.precision(precision);
}

void QiniReport::write_scalars_csv(std::ostream& out) const {
  const auto precision = out.precision(17);
  out << "q_hat,rho_hat,q_adj,K,J,warnings\n";
  out << q_hat << ',' << rho_hat << ',' << q_adj << ',' << bins << ',' << grid_bins() << ','
      << warnings << '\n';
  out.precision(precision);
}

QiniReport evaluate_uplift(std::span<const double> predictions, std::span<const int> t,
                           std::span<const int> y, std::size_t grid_bins,
                           std::size_t kendall_bins) {
  QiniReport report;
  report.grid = uniform_grid(grid_bins);
  report.g_values = qini_curve(predictions, t, y, report.grid);
  const double g1 = report.g_values.back();
  report.q_values.resize(report.grid.size());
  for (std::size_t k = 0; k < report.grid.size(); ++k) {
    report.q_values[k] = report.g_values[k] - report.grid[k] * g1;
  }
  report.q_hat = qini_coefficient(report.grid, report.g_values);
  auto kendall = kendall_uplift_corr(predictions, t, y, kendall_bins);
  report.rho_hat = kendall.rho;
  report.bins = kendall_bins;
  report.bin_predicted = std::move(kendall.predicted);
  report.bin_observed = std::move(kendall.observed);
  report.warnings = kendall.warnings;
  report.q_adj = adjusted_qini(report.q_hat, report.rho_hat);
  return report;
}

}  // namespace upliftlab
