#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blipcdf/dataset.hpp"
#include "blipcdf/kernels.hpp"
#include "blipcdf/learners.hpp"

namespace blipcdf {

/// Kernel, bandwidth and the blip values at which the smoothed CDF is wanted.
struct SmoothingSpec {
  PolyKernel kernel;
  double delta = 0.0;
  std::vector<double> t;

  /// Throws ArgumentError unless delta > 0 and t is nonempty and strictly increasing.
  void validate() const;
  [[nodiscard]] std::size_t d() const { return t.size(); }
};

enum class Submodel { kCanonical, kMultivariate };

struct TmleOptions {
  /// Absolute bound on |mean EIC_j|; default is se_j / (sqrt(n) log n) per column.
  std::optional<double> stopping_tol;
  int max_iter = 100;
  Submodel submodel = Submodel::kCanonical;
  /// Canonical submodel only: number of recent mean-EIC directions fitted
  /// jointly per step (1 = plain one-dimensional clfm).
  int memory = 4;
};

struct TmleResult {
  std::vector<double> t;
  std::vector<double> psi;
  std::vector<double> initial_psi;
  Eigen::MatrixXd eic;              // n x d, at the final fit
  std::vector<double> se;           // sd(EIC_j) / sqrt(n)
  std::vector<double> mean_eic;     // P_n D*_j at the final fit
  std::vector<double> tolerance;    // stopping bound used per column
  std::vector<double> epsilon;      // per update: step along the current direction (all d for lfm)
  int iterations = 0;               // EIC evaluations, including the final one
  bool converged = false;
  bool aborted = false;             // non-finite fluctuation
  double loss_initial = 0.0;        // mean NLL of Y under the initial Qbar
  double loss_final = 0.0;
  bool loss_monotone = true;        // loss never rose across updates
  // Propensity diagnostics carried through for reporting.
  double g_min = 0.0;
  double g_max = 0.0;
  double g_truncation = 0.0;
  std::size_t g_truncated = 0;
  bool g_known = false;

  [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(eic.rows()); }
};

/// b_i = q1_i - q0_i.
std::vector<double> blip(const NuisanceFit& nf);

// The per-observation kernels below run as OpenMP loops over rows; results
// do not depend on the thread count.

/// Psi_j = mean_i [1 - kernel_cdf((b_i - t_j) / delta)].
std::vector<double> smoothed_cdf_plugin(std::span<const double> b, const SmoothingSpec& spec);

/// H_ij = -(1/delta) k((b_i - t_j)/delta) (2 a_i - 1) / g(a_i | W_i).
Eigen::MatrixXd clever_covariate(std::span<const double> b, std::span<const double> g1, std::span<const int> a,
                                 const SmoothingSpec& spec);

/// D*_ij = H_ij (y_i - qbar_i) + [1 - kernel_cdf((b_i - t_j)/delta)] - psi_j.
Eigen::MatrixXd eic(std::span<const double> b, std::span<const double> q0, std::span<const double> q1,
                    std::span<const double> g1, std::span<const int> a, std::span<const double> y,
                    std::span<const double> psi, const SmoothingSpec& spec);

/// Iterated fluctuation of logit Qbar along the least favorable direction
/// until the EIC equation is solved to tolerance.
TmleResult tmle_update(std::span<const int> a, std::span<const double> y, const NuisanceFit& nf,
                       const SmoothingSpec& spec, const TmleOptions& opt = {});

/// Untargeted plug-in with EIC-based standard errors.
TmleResult plugin_estimate(std::span<const int> a, std::span<const double> y, const NuisanceFit& nf,
                           const SmoothingSpec& spec);

/// Validation-set nuisance predictions pooled over V folds.
struct CrossFit {
  NuisanceFit pooled;      // row i predicted by the fit that excluded row i
  std::vector<int> folds;
  int attempts = 1;        // fold draws needed to keep both arms in every training set
};

/// Throws ArgumentError for V < 2, DataError when no valid split is found in 10 draws.
CrossFit cross_fit(const Dataset& data, const Learner& learner, int V, std::uint64_t seed,
                   const NuisanceOptions& opt);

struct CvTmleOptions {
  int V = 10;
  std::uint64_t seed = 1;
  NuisanceOptions nuisance;
  TmleOptions tmle;
};

/// CV-TMLE with one pooled fluctuation across folds.
TmleResult cv_tmle(const Dataset& data, const SmoothingSpec& spec, const Learner& learner,
                   const CvTmleOptions& opt = {});

/// TMLE on nuisances fit and evaluated on the full sample.
TmleResult tmle(const Dataset& data, const SmoothingSpec& spec, const Learner& learner,
                const CvTmleOptions& opt = {});

/// Mean quasi-binomial NLL of y under qbar = q1 if a else q0.
double pooled_loss(std::span<const int> a, std::span<const double> y, std::span<const double> q0,
                   std::span<const double> q1);

}  // namespace blipcdf
