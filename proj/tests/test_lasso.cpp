#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "blipcdf/dgp.hpp"
#include "blipcdf/glm.hpp"
#include "blipcdf/lasso.hpp"
#include "oracles.hpp"

using namespace blipcdf;

namespace {

// Subgradient certificate for
//   min sum W_b (th_b - z_b)^2 / 2 + lam sum |th_{b+1} - th_b| (+ lam |th_0|).
// Suffix sums r_k = sum_{b>=k} W_b (z_b - th_b) must lie in lam * d|th_k - th_{k-1}|
// for k >= 1, and r_0 in lam * d|th_0| (anchored) or equal 0.
double certificate_violation(const std::vector<double>& z, const std::vector<double>& W, double lam,
                             bool anchored, const std::vector<double>& th) {
  const std::size_t m = z.size();
  std::vector<double> r(m + 1, 0.0);
  for (std::size_t b = m; b-- > 0;) r[b] = r[b + 1] + W[b] * (z[b] - th[b]);
  double worst = 0.0;
  auto check = [&](double rk, double jump) {
    if (std::fabs(jump) > 1e-9) {
      worst = std::max(worst, std::fabs(rk - lam * (jump > 0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::max(0.0, std::fabs(rk) - lam));
    }
  };
  for (std::size_t k = 1; k < m; ++k) check(r[k], th[k] - th[k - 1]);
  if (anchored) {
    check(r[0], th[0]);
  } else {
    worst = std::max(worst, std::fabs(r[0]));
  }
  return worst;
}

double objective(const Eigen::MatrixXd& X, std::span<const double> y, double lam, double b0,
                 const Eigen::VectorXd& beta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double e = b0 + X.row(i).dot(beta);
    s += std::log1p(std::exp(-std::fabs(e))) + std::max(e, 0.0) - y[static_cast<std::size_t>(i)] * e;
  }
  return s / static_cast<double>(X.rows()) + lam * beta.lpNorm<1>();
}

struct Sim {
  Eigen::MatrixXd W;
  std::vector<int> A;
  std::vector<double> Y;
};

Sim misspecified(std::size_t n, std::uint64_t seed) {
  const Dataset d = draw({DgpName::kMisspecified, n, seed});
  return {d.W, d.A, d.Y};
}

}  // namespace

TEST_CASE("fused lasso DP satisfies the optimality certificate") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nrm;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t m = 1 + rep % 40;
    std::vector<double> z(m), W(m);
    for (std::size_t b = 0; b < m; ++b) {
      z[b] = nrm(rng) + (b > m / 2 ? 2.0 : 0.0);
      W[b] = u(rng);
    }
    const double lam = std::exp(nrm(rng));
    for (bool anchored : {false, true}) {
      CAPTURE(rep);
      CAPTURE(anchored);
      const auto th = fused_lasso_1d(z, W, lam, anchored);
      REQUIRE(th.size() == m);
      CHECK(certificate_violation(z, W, lam, anchored, th) < 1e-8);
    }
  }
}

TEST_CASE("fused lasso limits") {
  const std::vector<double> z{1.0, 3.0, -2.0, 5.0};
  const std::vector<double> W{1.0, 2.0, 1.0, 0.5};
  const auto free = fused_lasso_1d(z, W, 0.0);
  for (std::size_t b = 0; b < z.size(); ++b) CHECK(free[b] == doctest::Approx(z[b]));
  const auto flat = fused_lasso_1d(z, W, 1e6);
  const double mean = (1.0 * 1 + 2.0 * 3 - 2.0 + 0.5 * 5) / 4.5;
  for (double v : flat) CHECK(v == doctest::Approx(mean));
  const auto zero = fused_lasso_1d(z, W, 1e6, true);
  for (double v : zero) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("indicator basis rows and knots") {
  Eigen::MatrixXd w(3, 1);
  w << 1, 2, 3;
  const IndicatorDesign X = make_hal_design(w, {}, false);
  CHECK(X.knots().size() == 3);
  Eigen::MatrixXd expect(3, 3);
  expect << 1, 0, 0, 1, 1, 0, 1, 1, 1;
  CHECK((X.to_dense() - expect).cwiseAbs().maxCoeff() == 0.0);

  const std::vector<double> ties{1.0, 1.0, 2.0};
  CHECK(hal_knots(ties).size() == 2);
  std::vector<double> many(500);
  std::iota(many.begin(), many.end(), 0.0);
  CHECK(hal_knots(many).size() == 200);
}

TEST_CASE("indicator design products match the dense matrix") {
  const Sim s = misspecified(120, 9);
  IndicatorDesign X = make_hal_design(s.W, s.A, true, hal_knots(std::vector<double>(s.W.data(), s.W.data() + 120), 30));
  const Eigen::MatrixXd D = X.to_dense();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nrm;
  Eigen::VectorXd beta(D.cols()), v(D.rows()), w(D.rows());
  for (auto& x : beta) x = nrm(rng);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = nrm(rng);
    w[i] = std::fabs(nrm(rng));
  }
  Eigen::VectorXd out;
  X.predict(beta, out);
  CHECK((out - D * beta).cwiseAbs().maxCoeff() < 1e-10);
  X.crossprod(v, out);
  CHECK((out - D.transpose() * v).cwiseAbs().maxCoeff() < 1e-10);
  X.set_weights(w);
  const Eigen::MatrixXd G = D.transpose() * w.asDiagonal() * D;
  for (std::size_t j = 0; j < X.cols(); j += 7) {
    for (std::size_t k = 0; k < X.cols(); k += 5) CHECK(X.gram(j, k) == doctest::Approx(G(j, k)));
    CHECK(X.gram_intercept(j) == doctest::Approx((D.col(j).array() * w.array()).sum()));
  }
}

TEST_CASE("lambda above lambda_max shrinks everything") {
  const Sim s = misspecified(200, 4);
  IndicatorDesign X = make_hal_design(s.W, s.A, true);
  const double lmax = lambda_max(X, s.Y);
  double b0 = 0.0;
  Eigen::VectorXd beta;
  lasso_solve(X, s.Y, lmax * 1.01, b0, beta);
  CHECK(beta.cwiseAbs().maxCoeff() == 0.0);
  const double ybar = std::accumulate(s.Y.begin(), s.Y.end(), 0.0) / 200.0;
  CHECK(b0 == doctest::Approx(std::log(ybar / (1 - ybar))).epsilon(1e-6));
}

TEST_CASE("lambda = 0 on a small dense design matches the GLM") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nrm;
  std::uniform_real_distribution<double> u;
  const int n = 400;
  Eigen::MatrixXd Z(n, 3), Xg(n, 4);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) Z(i, j) = nrm(rng);
    Xg(i, 0) = 1.0;
    Xg.row(i).tail(3) = Z.row(i);
    y[i] = u(rng) < oracle::expit(0.4 + Z(i, 0) - 0.5 * Z(i, 2)) ? 1.0 : 0.0;
  }
  DenseDesign X(Z);
  double b0 = 0.0;
  Eigen::VectorXd beta;
  LassoOptions opt;
  opt.tol = 1e-10;
  lasso_solve(X, y, 0.0, b0, beta, opt);
  const GlmFit g = fit_glm_logistic(Xg, y);
  CHECK(std::fabs(b0 - g.beta[0]) < 1e-4);
  for (int j = 0; j < 3; ++j) CHECK(std::fabs(beta[j] - g.beta[j + 1]) < 1e-4);
}

TEST_CASE("indicator solver meets KKT and agrees with the dense solver") {
  const Sim s = misspecified(150, 21);
  std::vector<double> wv(s.W.data(), s.W.data() + 150);
  IndicatorDesign X = make_hal_design(s.W, s.A, true, hal_knots(wv, 25));
  const Eigen::MatrixXd D = X.to_dense();
  DenseDesign XD(D);
  const double lmax = lambda_max(X, s.Y);
  LassoOptions opt;
  opt.tol = 1e-9;
  for (double frac : {0.5, 0.1, 0.02}) {
    CAPTURE(frac);
    const double lam = lmax * frac;
    double b0 = 0.0, c0 = 0.0;
    Eigen::VectorXd beta, gamma;
    lasso_solve(X, s.Y, lam, b0, beta, opt);
    lasso_solve(XD, s.Y, lam, c0, gamma, opt);
    const double f1 = objective(D, s.Y, lam, b0, beta);
    const double f2 = objective(D, s.Y, lam, c0, gamma);
    CHECK(std::fabs(f1 - f2) < 1e-6 * std::fabs(f2));

    // KKT: gradient of the mean NLL within lambda, tight where beta != 0.
    Eigen::VectorXd resid(150);
    for (Eigen::Index i = 0; i < 150; ++i) resid[i] = s.Y[static_cast<std::size_t>(i)] - oracle::expit(b0 + D.row(i).dot(beta));
    const Eigen::VectorXd grad = D.transpose() * resid / 150.0;
    CHECK(std::fabs(resid.mean()) < 1e-5);
    for (Eigen::Index j = 0; j < grad.size(); ++j) {
      if (beta[j] != 0.0) {
        CHECK(std::fabs(grad[j] - lam * (beta[j] > 0 ? 1.0 : -1.0)) < 1e-3 * lam + 1e-6);
      } else {
        CHECK(std::fabs(grad[j]) <= lam * (1.0 + 1e-3) + 1e-6);
      }
    }
  }
}

TEST_CASE("HAL outcome fit beats the main-terms GLM on the misspecified design") {
  const Sim s = misspecified(1000, 17);
  IndicatorDesign X = make_hal_design(s.W, s.A, true);
  const LassoFit fit = fit_lasso_logistic(X, s.Y, {}, 5, 3);
  const Eigen::VectorXd eta = fit.linear_predictor(X);

  Eigen::MatrixXd G(1000, 4);
  for (int i = 0; i < 1000; ++i) G.row(i) << 1.0, s.W(i, 0), s.A[i], s.A[i] * s.W(i, 0);
  const GlmFit glm = fit_glm_logistic(G, s.Y);

  double mse_hal = 0.0, mse_glm = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double truth = true_outcome(DgpName::kMisspecified, s.A[i], s.W(i, 0));
    mse_hal += std::pow(oracle::expit(eta[i]) - truth, 2);
    mse_glm += std::pow(oracle::expit(G.row(i).dot(glm.beta)) - truth, 2);
  }
  CHECK(mse_hal < mse_glm);
  CHECK(fit.selected < fit.lambda_grid.size());
  CHECK(fit.cv_loss_path.size() == fit.lambda_grid.size());
}
