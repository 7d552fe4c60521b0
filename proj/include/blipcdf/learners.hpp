#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "blipcdf/dataset.hpp"
#include "blipcdf/lasso.hpp"

namespace blipcdf {

/// A fitted regression for a [0, 1] response given W, and optionally A.
class FittedModel {
 public:
  virtual ~FittedModel() = default;
  /// Probabilities at the rows of W; `a` is ignored by propensity models.
  [[nodiscard]] virtual std::vector<double> predict(const Eigen::MatrixXd& W, std::span<const int> a) const = 0;
  [[nodiscard]] virtual nlohmann::json dump() const = 0;
};

/// Pluggable nuisance learner. `with_treatment` selects the outcome
/// regression (A, W) -> Y versus the propensity W -> A.
class Learner {
 public:
  virtual ~Learner() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::unique_ptr<FittedModel> fit(const Eigen::MatrixXd& W, std::span<const int> a,
                                                         std::span<const double> y, bool with_treatment,
                                                         std::uint64_t seed) const = 0;
};

/// Logistic regression with main terms and treatment interactions:
/// outcome design (1, W, A, A*W), propensity design (1, W).
class GlmLearner final : public Learner {
 public:
  [[nodiscard]] std::string name() const override { return "glm"; }
  [[nodiscard]] std::unique_ptr<FittedModel> fit(const Eigen::MatrixXd& W, std::span<const int> a,
                                                 std::span<const double> y, bool with_treatment,
                                                 std::uint64_t seed) const override;
};

/// One-dimensional highly adaptive lasso over zero-order spline indicators.
class HalLearner final : public Learner {
 public:
  explicit HalLearner(int cv_folds = 5, int lambda_count = 50) : cv_folds_(cv_folds), lambda_count_(lambda_count) {}
  [[nodiscard]] std::string name() const override { return "hal"; }
  [[nodiscard]] std::unique_ptr<FittedModel> fit(const Eigen::MatrixXd& W, std::span<const int> a,
                                                 std::span<const double> y, bool with_treatment,
                                                 std::uint64_t seed) const override;

 private:
  int cv_folds_;
  int lambda_count_;
};

/// "glm" or "hal"; throws ArgumentError otherwise.
std::unique_ptr<Learner> make_learner(const std::string& name, int hal_folds = 5);

/// Design (1, W) or (1, W, A, A*W) used by GlmLearner.
Eigen::MatrixXd glm_design(const Eigen::MatrixXd& W, std::span<const int> a, bool with_treatment);

/// Fitted nuisances evaluated on a set of rows.
struct NuisanceFit {
  std::vector<double> q0;  // Qbar(0, W_i)
  std::vector<double> q1;  // Qbar(1, W_i)
  std::vector<double> g1;  // g(1 | W_i), truncated
  double g_truncation = 0.01;
  std::size_t g_truncated = 0;  // rows sitting at a truncation bound
  bool g_known = false;

  [[nodiscard]] std::size_t n() const { return q0.size(); }
};

struct NuisanceOptions {
  double g_truncation = 0.01;
  std::optional<std::vector<double>> known_g;  // g(1|W) for the evaluation rows
  std::uint64_t seed = 1;
};

/// Outcome predictions are clamped into [1e-6, 1 - 1e-6].
constexpr double kQClamp = 1e-6;

/// Fits g and Qbar on `train` and evaluates them on `eval`. Throws DataError
/// when the training treatment is constant (positivity violated).
NuisanceFit fit_nuisance(const Dataset& train, const Dataset& eval, const Learner& learner,
                         const NuisanceOptions& opt);

inline NuisanceFit fit_nuisance(const Dataset& data, const Learner& learner, const NuisanceOptions& opt) {
  return fit_nuisance(data, data, learner, opt);
}

/// Clamps g1 into [bound, 1 - bound], returning how many entries moved or sit on a bound.
std::size_t truncate_propensity(std::vector<double>& g1, double bound);

}  // namespace blipcdf
