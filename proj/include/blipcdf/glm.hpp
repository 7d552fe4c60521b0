#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

namespace blipcdf {

struct GlmFit {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
  bool jittered = false;  // information matrix needed a ridge to invert
};

/// Quasi-binomial logistic regression by damped Newton-Raphson.
///
/// Maximizes sum y log(mu) + (1 - y) log(1 - mu), mu = expit(offset + X beta),
/// for fractional y in [0, 1]. Stops when the largest coefficient change falls
/// below `tol`. Non-convergence (separation) returns the last iterate with
/// `converged == false`.
GlmFit fit_glm_logistic(const Eigen::MatrixXd& X, std::span<const double> y,
                        std::optional<std::span<const double>> offset = std::nullopt,
                        double tol = 1e-10, int max_iter = 100);

/// Mean quasi-binomial negative log-likelihood of y under probabilities mu.
double mean_logistic_loss(std::span<const double> y, std::span<const double> mu);

}  // namespace blipcdf
