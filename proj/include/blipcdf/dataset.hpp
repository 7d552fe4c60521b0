#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace blipcdf {

/// Observed data O = (W, A, Y) with Y already scaled into [0, 1].
struct Dataset {
  Eigen::MatrixXd W;                  // n x p confounders
  std::vector<int> A;                 // 0/1 treatment
  std::vector<double> Y;              // outcome on the [0, 1] scale
  std::pair<double, double> y_bounds{0.0, 1.0};  // original outcome range

  [[nodiscard]] std::size_t n() const { return A.size(); }
  [[nodiscard]] std::size_t p() const { return static_cast<std::size_t>(W.cols()); }

  /// Throws DataError naming the first offending row.
  void validate() const;
  /// Rows in `idx`, preserving order.
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& idx) const;
};

/// Maps raw outcomes onto [0, 1] with (y - lo) / (hi - lo). Bounds default to
/// the observed range; throws DataError for a constant outcome.
std::vector<double> scale_outcome(const std::vector<double>& raw, std::pair<double, double>& bounds,
                                  bool bounds_given);

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace blipcdf
