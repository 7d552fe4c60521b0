#include "blipcdf/glm.hpp"

#include <cmath>

#include "blipcdf/dataset.hpp"
#include "blipcdf/errors.hpp"

namespace blipcdf {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double loss_at(const Eigen::VectorXd& eta, std::span<const double> y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += softplus(eta[i]) - y[i] * eta[i];
  return s;
}

}  // namespace

double mean_logistic_loss(std::span<const double> y, std::span<const double> mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = std::clamp(mu[i], 1e-15, 1.0 - 1e-15);
    s -= y[i] * std::log(m) + (1.0 - y[i]) * std::log1p(-m);
  }
  return s / static_cast<double>(y.size());
}

GlmFit fit_glm_logistic(const Eigen::MatrixXd& X, std::span<const double> y,
                        std::optional<std::span<const double>> offset, double tol, int max_iter) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw ArgumentError("design and response lengths differ");
  if (offset && offset->size() != y.size()) throw ArgumentError("offset length differs from response");
  if (!X.allFinite()) throw ArgumentError("design matrix has non-finite entries");

  GlmFit fit;
  fit.beta = Eigen::VectorXd::Zero(q);
  if (q == 0) {
    fit.converged = true;
    return fit;
  }
  Eigen::VectorXd off = Eigen::VectorXd::Zero(n);
  if (offset) {
    for (Eigen::Index i = 0; i < n; ++i) off[i] = (*offset)[static_cast<std::size_t>(i)];
  }

  Eigen::VectorXd eta = off;
  double loss = loss_at(eta, y);
  for (int it = 1; it <= max_iter; ++it) {
    fit.iterations = it;
    Eigen::VectorXd grad(q);
    Eigen::VectorXd wts(n);
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = expit(eta[i]);
      resid[i] = y[static_cast<std::size_t>(i)] - mu;
      wts[i] = mu * (1.0 - mu);
    }
    grad.noalias() = X.transpose() * resid;
    Eigen::MatrixXd info = X.transpose() * wts.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      info.diagonal().array() += 1e-8;
      ldlt.compute(info);
      fit.jittered = true;
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) break;

    // Step halving keeps every accepted iterate a likelihood improvement.
    double scale = 1.0;
    Eigen::VectorXd beta_new;
    Eigen::VectorXd eta_new;
    double loss_new = loss;
    for (int h = 0; h < 40; ++h) {
      beta_new = fit.beta + scale * step;
      eta_new = off + X * beta_new;
      loss_new = loss_at(eta_new, y);
      if (loss_new <= loss + 1e-12 * std::max(1.0, std::fabs(loss))) break;
      scale *= 0.5;
    }
    const double change = (beta_new - fit.beta).cwiseAbs().maxCoeff();
    if (loss_new > loss + 1e-12 * std::max(1.0, std::fabs(loss))) break;  // no descent possible
    fit.beta = beta_new;
    eta = eta_new;
    loss = loss_new;
    if (change < tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

}  // namespace blipcdf
