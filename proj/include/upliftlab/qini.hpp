#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace upliftlab {

// J+1 equally spaced proportions 0, 1/J, ..., 1.
std::vector<double> uniform_grid(std::size_t bins);

// Row indices sorted by descending prediction, ties by ascending index.
std::vector<std::size_t> uplift_order(std::span<const double> predictions);

// Qini curve g(phi) over `grid`. For each phi the top ceil(phi n) rows by
// predicted uplift form N_phi and
//   g = (sum_N y t - sum_N y (1-t) * sum_N t / sum_N (1-t)) / sum_all t,
// with the control term taken as 0 when N_phi holds no controls.
// Throws std::invalid_argument for mismatched lengths, an empty or unsorted
// grid, proportions outside [0, 1], or no treated rows.
std::vector<double> qini_curve(std::span<const double> predictions, std::span<const int> t,
                               std::span<const int> y, std::span<const double> grid);

// Trapezoid area of Q(phi) = g(phi) - phi g(1) in percent. grid must start
// at 0 and end at 1.
double qini_coefficient(std::span<const double> grid, std::span<const double> g);

struct KendallResult {
  double rho = 0.0;
  std::vector<double> predicted;               // mean predicted uplift per bin
  std::vector<std::optional<double>> observed; // treated minus control response rate
  std::size_t warnings = 0;                    // bins lacking treated or control rows
};

// Pairwise sign agreement over bin means, normalized by K(K-1)/2. Pairs that
// touch an undefined observed bin contribute 0.
double kendall_from_bin_means(std::span<const double> predicted,
                              std::span<const std::optional<double>> observed);

// K quantile bins of the prediction-sorted order (descending). Throws for
// K < 2 or K > n.
KendallResult kendall_uplift_corr(std::span<const double> predictions, std::span<const int> t,
                                  std::span<const int> y, std::size_t bins);

// rho * max(0, q_hat).
double adjusted_qini(double q_hat, double rho);

struct QiniReport {
  std::vector<double> grid;
  std::vector<double> g_values;
  std::vector<double> q_values;  // g(phi) - phi g(1)
  double q_hat = 0.0;
  double rho_hat = 0.0;
  double q_adj = 0.0;
  std::size_t bins = 0;          // K
  std::vector<double> bin_predicted;
  std::vector<std::optional<double>> bin_observed;
  std::size_t warnings = 0;

  std::size_t grid_bins() const { return grid.empty() ? 0 : grid.size() - 1; }
  // phi,g,Q
  void write_curve_csv(std::ostream& out) const;
  // q_hat,rho_hat,q_adj,K,J,warnings
  void write_scalars_csv(std::ostream& out) const;
};

QiniReport evaluate_uplift(std::span<const double> predictions, std::span<const int> t,
                           std::span<const int> y, std::size_t grid_bins = 20,
                           std::size_t kendall_bins = 10);

}  // namespace upliftlab
