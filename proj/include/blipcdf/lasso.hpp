#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace blipcdf {

/// Column access needed by the coordinate-descent solver. The intercept is
/// implicit and never part of the design.
class LassoDesign {
 public:
  virtual ~LassoDesign() = default;
  [[nodiscard]] virtual std::size_t rows() const = 0;
  [[nodiscard]] virtual std::size_t cols() const = 0;
  /// out = X beta
  virtual void predict(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const = 0;
  /// out = X^T v
  virtual void crossprod(const Eigen::VectorXd& v, Eigen::VectorXd& out) const = 0;
  /// Prepares weighted Gram entries for the current weights.
  virtual void set_weights(const Eigen::VectorXd& w) = 0;
  /// sum_i w_i x_ij x_ik under the last set_weights call.
  [[nodiscard]] virtual double gram(std::size_t j, std::size_t k) const = 0;
  /// sum_i w_i x_ij
  [[nodiscard]] virtual double gram_intercept(std::size_t j) const = 0;
  [[nodiscard]] virtual std::unique_ptr<LassoDesign> subset(const std::vector<std::size_t>& rows) const = 0;
};

/// Arbitrary dense design; Gram is formed explicitly, so keep columns few.
class DenseDesign final : public LassoDesign {
 public:
  explicit DenseDesign(Eigen::MatrixXd X);
  [[nodiscard]] std::size_t rows() const override { return static_cast<std::size_t>(X_.rows()); }
  [[nodiscard]] std::size_t cols() const override { return static_cast<std::size_t>(X_.cols()); }
  void predict(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const override;
  void crossprod(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override;
  void set_weights(const Eigen::VectorXd& w) override;
  [[nodiscard]] double gram(std::size_t j, std::size_t k) const override { return gram_(j, k); }
  [[nodiscard]] double gram_intercept(std::size_t j) const override { return gram0_[j]; }
  [[nodiscard]] std::unique_ptr<LassoDesign> subset(const std::vector<std::size_t>& rows) const override;
  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return X_; }

 private:
  Eigen::MatrixXd X_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd gram0_;
};

/// Zero-order spline basis I(w >= knot_j) in one covariate, optionally with
/// a treatment main term and treatment-by-indicator interactions. Columns are
/// [I(w>=k_1..k_m)] or [I(w>=k_1..k_m), a, a*I(w>=k_1..k_m)].
///
/// Every column is a (masked) suffix of the rows sorted by w, so products,
/// Gram entries and predictions reduce to prefix/suffix sums: O(n + m) per
/// pass and O(1) per Gram entry.
class IndicatorDesign final : public LassoDesign {
 public:
  IndicatorDesign(std::vector<double> w, std::vector<int> a, std::vector<double> knots, bool with_treatment);
  [[nodiscard]] std::size_t rows() const override { return w_.size(); }
  [[nodiscard]] std::size_t cols() const override;
  void predict(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const override;
  void crossprod(const Eigen::VectorXd& v, Eigen::VectorXd& out) const override;
  void set_weights(const Eigen::VectorXd& w) override;
  [[nodiscard]] double gram(std::size_t j, std::size_t k) const override;
  [[nodiscard]] double gram_intercept(std::size_t j) const override;
  [[nodiscard]] std::unique_ptr<LassoDesign> subset(const std::vector<std::size_t>& rows) const override;
  [[nodiscard]] Eigen::MatrixXd to_dense() const;
  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] const std::vector<double>& w() const { return w_; }
  [[nodiscard]] const std::vector<int>& a() const { return a_; }
  [[nodiscard]] bool with_treatment() const { return with_treatment_; }

 private:
  enum class Kind { kMain, kTreat, kInteract };
  [[nodiscard]] Kind kind(std::size_t j, std::size_t& knot) const;

  std::vector<double> w_;
  std::vector<int> a_;
  std::vector<double> knots_;
  bool with_treatment_;
  std::vector<std::size_t> order_;  // rows sorted by w
  std::vector<std::size_t> start_;  // first sorted position with w >= knot_j
  std::vector<double> suffix_w_;    // suffix sums of weights over sorted rows
  std::vector<double> suffix_wa_;   // same, restricted to a == 1
};

struct LassoFit {
  std::vector<double> knots;           // empty unless fitted on an indicator design
  double intercept = 0.0;
  Eigen::VectorXd beta;                // penalized coefficients
  double lambda = 0.0;
  std::vector<double> lambda_grid;
  std::vector<double> cv_loss_path;    // mean validation deviance per lambda
  std::size_t selected = 0;            // index into lambda_grid

  [[nodiscard]] Eigen::VectorXd linear_predictor(const LassoDesign& X) const;
};

struct LassoOptions {
  double tol = 1e-7;
  int max_outer = 100;
  int max_inner = 10000;
};

/// Penalized quasi-binomial fit at one lambda, warm-started from
/// (intercept, beta). Objective: mean NLL + lambda * sum |beta_j|.
///
/// IRLS outer loop with backtracking. On an IndicatorDesign each quadratic
/// subproblem is solved by exact block coordinate descent: the main-term and
/// interaction blocks are each a weighted 1-D fused lasso over knot bins.
/// Other designs use covariance-update coordinate descent.
void lasso_solve(LassoDesign& X, std::span<const double> y, double lambda, double& intercept,
                 Eigen::VectorXd& beta, const LassoOptions& opt = {});

/// Weighted fused lasso signal approximator, solved exactly by dynamic
/// programming: argmin sum_b W_b (theta_b - z_b)^2 / 2 + lambda sum_b |theta_{b+1} - theta_b|
/// (+ lambda |theta_0| when `anchored`). Requires W_b > 0.
std::vector<double> fused_lasso_1d(const std::vector<double>& z, const std::vector<double>& W, double lambda,
                                   bool anchored = false);

/// Smallest lambda with an all-zero penalized fit.
double lambda_max(LassoDesign& X, std::span<const double> y);

/// `count` log-spaced values from lambda_max down to lambda_max * ratio.
std::vector<double> default_lambda_grid(LassoDesign& X, std::span<const double> y, int count = 50,
                                        double ratio = 1e-4);

/// V-fold CV over a descending lambda grid with warm starts, then refit on
/// all rows at the CV-minimizing lambda. Empty grid means default grid.
LassoFit fit_lasso_logistic(LassoDesign& X, std::span<const double> y, std::vector<double> lambda_grid, int V,
                            std::uint64_t seed, const LassoOptions& opt = {});

/// Unique sorted values, or 200 quantile-spaced observed values when there are more.
std::vector<double> hal_knots(std::span<const double> w, std::size_t cap = 200);

/// HAL basis for one-dimensional W. `a` empty means no treatment columns.
/// Throws ArgumentError for more than one covariate column.
IndicatorDesign make_hal_design(const Eigen::MatrixXd& W, std::span<const int> a, bool with_treatment,
                                std::vector<double> knots = {});

}  // namespace blipcdf
