#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "blipcdf/estimator.hpp"

namespace blipcdf {

using Interval = std::pair<double, double>;

struct CiReport {
  double level = 0.95;
  double z_pointwise = 0.0;
  double z_simultaneous = 0.0;
  Eigen::MatrixXd corr;
  std::vector<Interval> ci;        // unclipped
  std::vector<Interval> sim_ci;    // unclipped
  std::vector<bool> degenerate;    // zero-variance EIC column
  bool bonferroni_fallback = false;

  /// Clipped to [0, 1] for display.
  [[nodiscard]] static Interval clip(Interval iv);
};

/// Standard normal quantile.
double normal_quantile(double p);

/// psi_j +- z se_j with z at (1 + level) / 2. Throws ArgumentError for a
/// level outside (0, 1) or an empty EIC.
CiReport pointwise_ci(const TmleResult& result, double level);

/// Adds the max-|Z| simultaneous band, Z ~ N(0, corr(EIC)), estimated from
/// `mc_draws` seeded draws. Draws are generated in fixed-size blocks with
/// per-block seeds, so the quantile is independent of the thread count.
CiReport simultaneous_ci(const TmleResult& result, double level, std::size_t mc_draws, std::uint64_t seed);

/// Correlation of the EIC columns; zero-variance columns get a unit diagonal
/// and zero off-diagonals.
Eigen::MatrixXd eic_correlation(const Eigen::MatrixXd& eic);

/// Empirical `level` quantile of max_j |Z_j| for Z ~ N(0, corr). Returns
/// false (and leaves z untouched) when corr is not PSD within 1e-8.
bool max_abs_normal_quantile(const Eigen::MatrixXd& corr, double level, std::size_t draws, std::uint64_t seed,
                             double& z);

struct Diagnostics {
  std::vector<double> abs_mean_eic;
  std::vector<double> tolerance;
  std::vector<double> se;
  int iterations = 0;
  bool converged = false;
  bool all_solved = false;           // every |mean EIC_j| within its tolerance
  bool g_reported = true;            // false in known-g runs
  double g_truncation_rate = 0.0;
  double g_min = 0.0;
  double g_max = 0.0;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;    // conditions that cannot be checked from data
};

/// Computable proxies for the efficiency conditions.
Diagnostics diagnostics(const TmleResult& result);

nlohmann::json diagnostics_to_json(const Diagnostics& dg);

/// {t, psi, se, ci_lo, ci_hi, sim_ci_lo, sim_ci_hi, iterations, converged, initial_psi, ...}
nlohmann::json result_to_json(const TmleResult& result, const CiReport& ci);

}  // namespace blipcdf
