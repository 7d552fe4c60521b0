#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blipcdf/dgp.hpp"
#include "blipcdf/estimator.hpp"

namespace blipcdf {

/// Parsed estimator label: `<cvtmle|tmle|plugin>_<glm|hal>[_gknown][_select]`.
/// `_gknown` plugs in the true propensity; `_select` applies the bandwidth
/// selector with the configured delta as h_max.
struct EstimatorSpec {
  enum class Kind { kCvTmle, kTmle, kPlugin };
  std::string label;
  Kind kind = Kind::kCvTmle;
  std::string learner = "glm";
  bool known_g = false;
  bool select = false;
};

EstimatorSpec parse_estimator(const std::string& label);

struct CampaignConfig {
  DgpName dgp = DgpName::kWellSpecified;
  std::size_t n = 1000;
  int reps = 200;
  int kernel_K = 0;
  double kernel_R = 1.0;
  std::optional<double> delta;  // empty: n^{-1/(2J+1)}
  std::vector<double> t;
  std::vector<std::string> estimators{"cvtmle_glm"};
  int V = 10;
  int hal_folds = 5;
  std::uint64_t seed = 1;
  double level = 0.95;
  bool simultaneous = true;
  std::size_t mc_draws = 100000;
  std::size_t n_truth = 1000000;
  std::uint64_t truth_seed = 20181231;
  double g_truncation = 0.01;
  int max_iter = 100;
  int grid_steps = 20;
  int min_run = 5;
};

/// Accepts "delta": number or "auto". Unknown keys are rejected.
CampaignConfig campaign_from_json(const nlohmann::json& j);
nlohmann::json campaign_to_json(const CampaignConfig& cfg);

struct EstimatorSummary {
  std::string label;
  std::vector<double> mean_psi;
  std::vector<double> bias;
  std::vector<double> variance;      // population variance of the error over replicates
  std::vector<double> mse;
  std::vector<double> coverage;      // of the smoothed truth
  std::vector<double> coverage_true; // of F(t)
  std::vector<double> mean_h;        // bandwidth used, averaged over replicates
  std::optional<double> sim_coverage;
  int reps_ok = 0;
  int failures = 0;
  int converged = 0;
  int loss_monotone = 0;
  double mean_iterations = 0.0;
  double max_abs_mean_eic_ratio = 0.0;  // worst |P_n D*_j| / tolerance_j over converged runs
  std::vector<std::string> failure_messages;  // first few distinct messages
};

struct SimReport {
  CampaignConfig config;
  double delta = 0.0;
  int kernel_order = 0;
  std::vector<double> truth_cdf;
  std::vector<double> truth_smoothed;  // at delta
  std::vector<EstimatorSummary> estimators;
  [[nodiscard]] const EstimatorSummary& at(const std::string& label) const;
};

/// Replicates run on concurrent workers with per-replicate derived seeds;
/// aggregation is serial in replicate order.
SimReport run_campaign(const CampaignConfig& cfg);

/// One row per (t, estimator).
std::string report_to_csv(const SimReport& rep);
nlohmann::json report_to_json(const SimReport& rep);

struct OrderCheckConfig {
  DgpName dgp = DgpName::kMisspecified;
  int kernel_K = 0;
  double kernel_R = 1.0;
  std::vector<double> deltas{0.4, 0.2, 0.1, 0.05};
  double t = 0.0;
  std::size_t n = 5000;
  int reps = 100;
  std::string estimator = "tmle_hal";
  int V = 10;
  int hal_folds = 5;
  std::uint64_t seed = 7;
  std::size_t n_truth = 1000000;
  std::uint64_t truth_seed = 20181231;
  double g_truncation = 0.01;
};

struct OrderReport {
  int kernel_order = 0;
  std::vector<double> deltas;
  std::vector<double> variances;   // of psi over replicates
  std::vector<double> truth_bias;  // |Psi_delta(P0) - F(t)|
  double variance_slope = 0.0;
  double bias_slope = 0.0;
  int reps_ok = 0;
  int targeting_runs = 0;  // (replicate, delta) fits that ran targeting
  int loss_monotone = 0;   // of those, how many never raised the loss
};

/// Throws ArgumentError unless there are >= 4 distinct deltas spanning a factor >= 8.
OrderReport order_checks(const OrderCheckConfig& cfg);
OrderCheckConfig order_from_json(const nlohmann::json& j);
nlohmann::json order_to_json(const OrderReport& rep);

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace blipcdf
