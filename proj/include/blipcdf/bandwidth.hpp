#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blipcdf/estimator.hpp"
#include "blipcdf/inference.hpp"

namespace blipcdf {

/// n^{-1/(2J+1)}: the MSE-rate-optimal bandwidth with unit constant.
double optimal_fixed_bandwidth(std::size_t n, int J);

/// h_i = i * h_max / steps, i = 1..steps.
std::vector<double> bandwidth_grid(double h_max, int steps = 20);

/// Consecutive grid indices [first, last] with monotone estimates.
struct MonotoneRun {
  std::size_t first = 0;
  std::size_t last = 0;
  /// Estimates fall (or stay flat) as the bandwidth shrinks.
  bool decreasing_as_h_shrinks = true;
  [[nodiscard]] std::size_t length() const { return last - first + 1; }
};

struct SelectedInterval {
  std::size_t index = 0;  // grid position
  double h = 0.0;
  double psi = 0.0;
  Interval ci;
  bool fallback = false;  // no monotone run; h_max used
};

struct BandwidthPath {
  std::vector<double> grid;           // strictly increasing, grid.back() == h_max
  std::vector<double> t;
  Eigen::MatrixXd estimates;          // grid x d
  Eigen::MatrixXd variances;          // grid x d, var(EIC) / n
  Eigen::MatrixXd monotonized;        // running max from h_max downward
  std::vector<std::optional<MonotoneRun>> runs;  // per t
  std::vector<bool> converged;        // per grid point
  std::vector<bool> loss_monotone;    // per grid point
  std::vector<SelectedInterval> chosen;          // filled by select_ci
};

struct ScanOptions {
  bool cross_validated = true;
  int min_run = 5;
  CvTmleOptions estimation;
};

/// Runs the estimator at every grid bandwidth. Nuisances (and the fold
/// split) are fit once and shared; only the smoothing changes.
BandwidthPath scan_path(const Dataset& data, const SmoothingSpec& spec_template, const Learner& learner,
                        const std::vector<double>& grid, const ScanOptions& opt = {});

/// Same, starting from already fitted nuisances.
BandwidthPath scan_path_from_fit(std::span<const int> a, std::span<const double> y, const NuisanceFit& nf,
                                 const SmoothingSpec& spec_template, const std::vector<double>& grid,
                                 const TmleOptions& tmle_opt = {}, int min_run = 5);

/// Per t, the smallest-bandwidth window of >= min_run consecutive monotone
/// estimates, extended upward while it stays monotone.
std::vector<std::optional<MonotoneRun>> find_monotone_runs(const Eigen::MatrixXd& estimates, int min_run = 5);

/// Running maximum of the variance scanning from h_max toward smaller h.
BandwidthPath monotonize_variance(BandwidthPath path);

/// Chooses per t the interval with the smallest upper bound (estimates
/// falling as h shrinks) or the largest lower bound (rising). Requires
/// monotonized variances.
std::vector<SelectedInterval> select_ci(const BandwidthPath& path, double level);

/// CSV with columns h,t,psi,var,var_monotone,in_run.
std::string path_to_csv(const BandwidthPath& path);

}  // namespace blipcdf
