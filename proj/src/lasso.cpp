#include "blipcdf/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "blipcdf/dataset.hpp"
#include "blipcdf/errors.hpp"
#include "blipcdf/folds.hpp"

namespace blipcdf {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

double clamped_logit(double p) { return logit(std::clamp(p, 1e-6, 1.0 - 1e-6)); }

double objective(const Eigen::VectorXd& eta, std::span<const double> y, const Eigen::VectorXd& beta,
                 double lambda) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += softplus(eta[i]) - y[i] * eta[i];
  return s / static_cast<double>(eta.size()) + lambda * beta.cwiseAbs().sum();
}

double mean_deviance(const Eigen::VectorXd& eta, std::span<const double> y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += softplus(eta[i]) - y[i] * eta[i];
  return 2.0 * s / static_cast<double>(eta.size());
}

std::vector<double> gather(std::span<const double> v, const std::vector<std::size_t>& idx) {
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

}  // namespace

// ---------------------------------------------------------------- DenseDesign

DenseDesign::DenseDesign(Eigen::MatrixXd X) : X_(std::move(X)) {
  if (!X_.allFinite()) throw ArgumentError("lasso design has non-finite entries");
}

void DenseDesign::predict(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const { out.noalias() = X_ * beta; }

void DenseDesign::crossprod(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
  out.noalias() = X_.transpose() * v;
}

void DenseDesign::set_weights(const Eigen::VectorXd& w) {
  gram_.noalias() = X_.transpose() * w.asDiagonal() * X_;
  gram0_.noalias() = X_.transpose() * w;
}

std::unique_ptr<LassoDesign> DenseDesign::subset(const std::vector<std::size_t>& rows) const {
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), X_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = X_.row(static_cast<Eigen::Index>(rows[i]));
  return std::make_unique<DenseDesign>(std::move(sub));
}

// ------------------------------------------------------------ IndicatorDesign

IndicatorDesign::IndicatorDesign(std::vector<double> w, std::vector<int> a, std::vector<double> knots,
                                 bool with_treatment)
    : w_(std::move(w)), a_(std::move(a)), knots_(std::move(knots)), with_treatment_(with_treatment) {
  if (with_treatment_ && a_.size() != w_.size()) throw ArgumentError("treatment length differs from covariate");
  for (double v : w_) {
    if (!std::isfinite(v)) throw ArgumentError("HAL design covariate has non-finite entries");
  }
  std::sort(knots_.begin(), knots_.end());
  order_.resize(w_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t l, std::size_t r) { return w_[l] < w_[r]; });
  std::vector<double> sorted(w_.size());
  for (std::size_t i = 0; i < w_.size(); ++i) sorted[i] = w_[order_[i]];
  start_.resize(knots_.size());
  for (std::size_t j = 0; j < knots_.size(); ++j) {
    start_[j] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), knots_[j]) - sorted.begin());
  }
  suffix_w_.assign(w_.size() + 1, 0.0);
  suffix_wa_.assign(w_.size() + 1, 0.0);
}

std::size_t IndicatorDesign::cols() const { return with_treatment_ ? 2 * knots_.size() + 1 : knots_.size(); }

IndicatorDesign::Kind IndicatorDesign::kind(std::size_t j, std::size_t& knot) const {
  const std::size_t m = knots_.size();
  if (j < m) {
    knot = j;
    return Kind::kMain;
  }
  if (j == m) {
    knot = 0;
    return Kind::kTreat;
  }
  knot = j - m - 1;
  return Kind::kInteract;
}

void IndicatorDesign::predict(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const {
  const std::size_t n = w_.size();
  const std::size_t m = knots_.size();
  std::vector<double> dm(n + 1, 0.0);
  std::vector<double> da(n + 1, 0.0);
  for (std::size_t j = 0; j < m; ++j) dm[start_[j]] += beta[static_cast<Eigen::Index>(j)];
  double treat = 0.0;
  if (with_treatment_) {
    treat = beta[static_cast<Eigen::Index>(m)];
    for (std::size_t j = 0; j < m; ++j) da[start_[j]] += beta[static_cast<Eigen::Index>(m + 1 + j)];
  }
  out.resize(static_cast<Eigen::Index>(n));
  double cm = 0.0;
  double ca = treat;
  for (std::size_t pos = 0; pos < n; ++pos) {
    cm += dm[pos];
    ca += da[pos];
    const std::size_t i = order_[pos];
    out[static_cast<Eigen::Index>(i)] = cm + (with_treatment_ && a_[i] == 1 ? ca : 0.0);
  }
}

void IndicatorDesign::crossprod(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
  const std::size_t n = w_.size();
  const std::size_t m = knots_.size();
  std::vector<double> sv(n + 1, 0.0);
  std::vector<double> sva(n + 1, 0.0);
  for (std::size_t pos = n; pos-- > 0;) {
    const std::size_t i = order_[pos];
    sv[pos] = sv[pos + 1] + v[static_cast<Eigen::Index>(i)];
    sva[pos] = sva[pos + 1] + (with_treatment_ && a_[i] == 1 ? v[static_cast<Eigen::Index>(i)] : 0.0);
  }
  out.resize(static_cast<Eigen::Index>(cols()));
  for (std::size_t j = 0; j < m; ++j) out[static_cast<Eigen::Index>(j)] = sv[start_[j]];
  if (with_treatment_) {
    out[static_cast<Eigen::Index>(m)] = sva[0];
    for (std::size_t j = 0; j < m; ++j) out[static_cast<Eigen::Index>(m + 1 + j)] = sva[start_[j]];
  }
}

void IndicatorDesign::set_weights(const Eigen::VectorXd& w) {
  const std::size_t n = w_.size();
  suffix_w_[n] = 0.0;
  suffix_wa_[n] = 0.0;
  for (std::size_t pos = n; pos-- > 0;) {
    const std::size_t i = order_[pos];
    const double wi = w[static_cast<Eigen::Index>(i)];
    suffix_w_[pos] = suffix_w_[pos + 1] + wi;
    suffix_wa_[pos] = suffix_wa_[pos + 1] + (with_treatment_ && a_[i] == 1 ? wi : 0.0);
  }
}

double IndicatorDesign::gram(std::size_t j, std::size_t k) const {
  std::size_t kj = 0;
  std::size_t kk = 0;
  const Kind tj = kind(j, kj);
  const Kind tk = kind(k, kk);
  if (tj == Kind::kTreat && tk == Kind::kTreat) return suffix_wa_[0];
  if (tj == Kind::kTreat) return suffix_wa_[start_[kk]];
  if (tk == Kind::kTreat) return suffix_wa_[start_[kj]];
  const std::size_t s = std::max(start_[kj], start_[kk]);
  if (tj == Kind::kMain && tk == Kind::kMain) return suffix_w_[s];
  return suffix_wa_[s];
}

double IndicatorDesign::gram_intercept(std::size_t j) const {
  std::size_t kj = 0;
  switch (kind(j, kj)) {
    case Kind::kMain:
      return suffix_w_[start_[kj]];
    case Kind::kTreat:
      return suffix_wa_[0];
    case Kind::kInteract:
      return suffix_wa_[start_[kj]];
  }
  return 0.0;
}

std::unique_ptr<LassoDesign> IndicatorDesign::subset(const std::vector<std::size_t>& rows) const {
  std::vector<double> w(rows.size());
  std::vector<int> a(with_treatment_ ? rows.size() : 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    w[i] = w_[rows[i]];
    if (with_treatment_) a[i] = a_[rows[i]];
  }
  return std::make_unique<IndicatorDesign>(std::move(w), std::move(a), knots_, with_treatment_);
}

Eigen::MatrixXd IndicatorDesign::to_dense() const {
  const std::size_t n = w_.size();
  const std::size_t m = knots_.size();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double ind = w_[i] >= knots_[j] ? 1.0 : 0.0;
      X(r, static_cast<Eigen::Index>(j)) = ind;
      if (with_treatment_) X(r, static_cast<Eigen::Index>(m + 1 + j)) = a_[i] * ind;
    }
    if (with_treatment_) X(r, static_cast<Eigen::Index>(m)) = a_[i];
  }
  return X;
}

// ------------------------------------------------------------------- solver

Eigen::VectorXd LassoFit::linear_predictor(const LassoDesign& X) const {
  Eigen::VectorXd eta;
  X.predict(beta, eta);
  eta.array() += intercept;
  return eta;
}

double lambda_max(LassoDesign& X, std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  Eigen::VectorXd r(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) r[static_cast<Eigen::Index>(i)] = y[i] - ybar;
  Eigen::VectorXd g;
  X.crossprod(r, g);
  return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff() / n;
}

std::vector<double> default_lambda_grid(LassoDesign& X, std::span<const double> y, int count, double ratio) {
  const double top = lambda_max(X, y);
  std::vector<double> grid;
  if (!(top > 0.0)) return grid;
  grid.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid.push_back(top * std::pow(ratio, frac));
  }
  return grid;
}

std::vector<double> fused_lasso_1d(const std::vector<double>& z, const std::vector<double>& W, double lambda,
                                   bool anchored) {
  // Forward pass keeps the derivative of the partial objective as a
  // piecewise-linear function: a left piece (aL, cL), a right piece (aR, cR)
  // and breakpoints that each add da*x + dc to the piece on their left.
  struct Break {
    double x, da, dc;
  };
  const std::size_t m = z.size();
  if (W.size() != m) throw ArgumentError("fused lasso weights and targets differ in length");
  std::vector<double> theta(m);
  if (m == 0) return theta;
  std::vector<double> lo(m), hi(m);
  std::deque<Break> q;
  double aL = 0.0, cL = 0.0, aR = 0.0, cR = 0.0;
  if (anchored) {
    cL = -lambda;
    cR = lambda;
    q.push_back({0.0, 0.0, 2.0 * lambda});
  }
  // First x where the derivative reaches `target`, scanning from the left.
  auto from_left = [&](double target, double& a, double& c) {
    while (!q.empty()) {
      const Break k = q.front();
      if (a * k.x + c >= target) break;
      a += k.da;
      c += k.dc;
      q.pop_front();
      if (a * k.x + c >= target) return k.x;  // jump straddles the target
    }
    return (target - c) / a;
  };
  // Mirror image: last x where the derivative is still <= target.
  auto from_right = [&](double target, double& a, double& c) {
    while (!q.empty()) {
      const Break k = q.back();
      if (a * k.x + c <= target) break;
      a -= k.da;
      c -= k.dc;
      q.pop_back();
      if (a * k.x + c <= target) return k.x;
    }
    return (target - c) / a;
  };
  for (std::size_t b = 0; b < m; ++b) {
    if (!(W[b] > 0.0)) throw ArgumentError("fused lasso weights must be positive");
    aL += W[b];
    cL -= W[b] * z[b];
    aR += W[b];
    cR -= W[b] * z[b];
    if (b + 1 == m) break;
    {
      double a = aL, c = cL;
      const double x = from_left(-lambda, a, c);
      lo[b] = x;
      q.push_front({x, a, c + lambda});
      aL = 0.0;
      cL = -lambda;
    }
    {
      double a = aR, c = cR;
      const double x = from_right(lambda, a, c);
      hi[b] = x;
      q.push_back({x, -a, lambda - c});
      aR = 0.0;
      cR = lambda;
    }
  }
  {
    double a = aL, c = cL;
    theta[m - 1] = from_left(0.0, a, c);
  }
  for (std::size_t b = m - 1; b-- > 0;) theta[b] = std::clamp(theta[b + 1], lo[b], hi[b]);
  return theta;
}

namespace {

// IRLS with exact block updates for the indicator design; see lasso.hpp.
void lasso_solve_indicator(const IndicatorDesign& X, std::span<const double> y, double lambda, double& intercept,
                           Eigen::VectorXd& beta, const LassoOptions& opt) {
  const std::vector<double>& w = X.w();
  const std::vector<int>& a = X.a();
  const std::vector<double>& knots = X.knots();
  const bool treat = X.with_treatment();
  const std::size_t n = w.size();
  const std::size_t m = knots.size();
  const std::size_t nb = m + 1;  // bin 0: below the first knot; bin j: [k_j, k_{j+1})
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<std::size_t> bin(n);
  for (std::size_t i = 0; i < n; ++i) {
    bin[i] = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), w[i]) - knots.begin());
  }
  std::vector<char> occupied(nb, 0), occupied1(nb, 0);
  for (std::size_t i = 0; i < n; ++i) {
    occupied[bin[i]] = 1;
    if (treat && a[i] == 1) occupied1[bin[i]] = 1;
  }

  // Bin levels: main function f and treatment shift g.
  std::vector<double> f(nb), g(nb, 0.0);
  if (beta.size() != static_cast<Eigen::Index>(X.cols())) beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.cols()));
  f[0] = intercept;
  for (std::size_t j = 1; j < nb; ++j) f[j] = f[j - 1] + beta[static_cast<Eigen::Index>(j - 1)];
  if (treat) {
    g[0] = beta[static_cast<Eigen::Index>(m)];
    for (std::size_t j = 1; j < nb; ++j) g[j] = g[j - 1] + beta[static_cast<Eigen::Index>(m + j)];
  }

  auto penalty = [&](const std::vector<double>& ff, const std::vector<double>& gg) {
    double p = 0.0;
    for (std::size_t j = 1; j < nb; ++j) p += std::fabs(ff[j] - ff[j - 1]);
    if (treat) {
      p += std::fabs(gg[0]);
      for (std::size_t j = 1; j < nb; ++j) p += std::fabs(gg[j] - gg[j - 1]);
    }
    return lambda * p;
  };
  auto eta_of = [&](const std::vector<double>& ff, const std::vector<double>& gg, std::size_t i) {
    return ff[bin[i]] + (treat && a[i] == 1 ? gg[bin[i]] : 0.0);
  };
  auto objective_of = [&](const std::vector<double>& ff, const std::vector<double>& gg) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = eta_of(ff, gg, i);
      s += softplus(e) - y[i] * e;
    }
    return s * inv_n + penalty(ff, gg);
  };

  // Solves the fused lasso over occupied bins and spreads the levels into
  // empty bins (constant continuation: no extra variation).
  auto block = [&](const std::vector<double>& sw, const std::vector<double>& swz, const std::vector<char>& occ,
                   bool anchored, std::vector<double>& level) {
    std::vector<double> zz, ww;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < nb; ++j) {
      if (occ[j] && sw[j] > 0.0) {
        idx.push_back(j);
        ww.push_back(sw[j]);
        zz.push_back(swz[j] / sw[j]);
      }
    }
    if (idx.empty()) return;
    const std::vector<double> th = fused_lasso_1d(zz, ww, lambda, anchored);
    std::size_t k = 0;
    for (std::size_t j = 0; j < nb; ++j) {
      if (k + 1 < idx.size() && j >= idx[k + 1]) ++k;
      level[j] = j < idx[0] ? th[0] : th[k];
    }
  };

  std::vector<double> wt(n), z(n), sw(nb), swz(nb);
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    const double obj_old = objective_of(f, g);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = eta_of(f, g, i);
      const double mu = expit(e);
      const double v = std::max(mu * (1.0 - mu), 1e-5);
      wt[i] = v * inv_n;
      z[i] = e + (y[i] - mu) / v;
    }
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) wsum += wt[i];
    // Weighted (objective-scale) change, as in glmnet: flat directions, where
    // only the penalty decides between f and g, need no further sweeps.
    const double inner_tol = opt.tol * 1e-2 * wsum;
    std::vector<double> nf = f, ng = g;
    for (int sweep = 0; sweep < opt.max_inner; ++sweep) {
      double change = 0.0;
      std::fill(sw.begin(), sw.end(), 0.0);
      std::fill(swz.begin(), swz.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double off = treat && a[i] == 1 ? ng[bin[i]] : 0.0;
        sw[bin[i]] += wt[i];
        swz[bin[i]] += wt[i] * (z[i] - off);
      }
      std::vector<double> prev = nf;
      block(sw, swz, occupied, false, nf);
      for (std::size_t j = 0; j < nb; ++j) change = std::max(change, sw[j] * (nf[j] - prev[j]) * (nf[j] - prev[j]));
      if (treat) {
        std::fill(sw.begin(), sw.end(), 0.0);
        std::fill(swz.begin(), swz.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (a[i] != 1) continue;
          sw[bin[i]] += wt[i];
          swz[bin[i]] += wt[i] * (z[i] - nf[bin[i]]);
        }
        prev = ng;
        block(sw, swz, occupied1, true, ng);
        for (std::size_t j = 0; j < nb; ++j) change = std::max(change, sw[j] * (ng[j] - prev[j]) * (ng[j] - prev[j]));
      }
      if (change < inner_tol) break;
    }

    // Backtrack along the segment towards the subproblem solution.
    double scale = 1.0;
    std::vector<double> tf(nb), tg(nb);
    for (int h = 0; h < 30; ++h) {
      for (std::size_t j = 0; j < nb; ++j) {
        tf[j] = f[j] + scale * (nf[j] - f[j]);
        tg[j] = g[j] + scale * (ng[j] - g[j]);
      }
      if (objective_of(tf, tg) <= obj_old + 1e-13) break;
      scale *= 0.5;
    }
    double change = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      change = std::max({change, std::fabs(tf[j] - f[j]), std::fabs(tg[j] - g[j])});
    }
    const double obj_new = objective_of(tf, tg);
    f = tf;
    g = tg;
    if (change < opt.tol || obj_old - obj_new < opt.tol * 1e-2 * std::fabs(obj_new)) break;
  }

  intercept = f[0];
  for (std::size_t j = 1; j < nb; ++j) beta[static_cast<Eigen::Index>(j - 1)] = f[j] - f[j - 1];
  if (treat) {
    beta[static_cast<Eigen::Index>(m)] = g[0];
    for (std::size_t j = 1; j < nb; ++j) beta[static_cast<Eigen::Index>(m + j)] = g[j] - g[j - 1];
  }
}

}  // namespace

void lasso_solve(LassoDesign& X, std::span<const double> y, double lambda, double& intercept,
                 Eigen::VectorXd& beta, const LassoOptions& opt) {
  if (const auto* ind = dynamic_cast<const IndicatorDesign*>(&X)) {
    lasso_solve_indicator(*ind, y, lambda, intercept, beta, opt);
    return;
  }
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (beta.size() != static_cast<Eigen::Index>(p)) beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));

  Eigen::VectorXd eta(static_cast<Eigen::Index>(n));
  Eigen::VectorXd resid(static_cast<Eigen::Index>(n));
  Eigen::VectorXd wts(static_cast<Eigen::Index>(n));
  Eigen::VectorXd grad;
  std::vector<char> active(p, 0);

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    X.predict(beta, eta);
    eta.array() += intercept;
    const double obj_old = objective(eta, y, beta, lambda);
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = expit(eta[static_cast<Eigen::Index>(i)]);
      resid[static_cast<Eigen::Index>(i)] = y[i] - mu;
      wts[static_cast<Eigen::Index>(i)] = std::max(mu * (1.0 - mu), 1e-5) * inv_n;
    }
    X.set_weights(wts);
    X.crossprod(resid, grad);
    grad *= inv_n;
    double grad0 = resid.sum() * inv_n;
    const double g00 = wts.sum();

    double b0 = intercept;
    Eigen::VectorXd b = beta;
    for (std::size_t j = 0; j < p; ++j) {
      active[j] = (b[static_cast<Eigen::Index>(j)] != 0.0 || std::fabs(grad[static_cast<Eigen::Index>(j)]) > lambda);
    }

    auto apply_delta = [&](std::size_t j, double d) {
      for (std::size_t k = 0; k < p; ++k) grad[static_cast<Eigen::Index>(k)] -= X.gram(k, j) * d;
      grad0 -= X.gram_intercept(j) * d;
    };

    for (int round = 0; round < 100; ++round) {
      for (int sweep = 0; sweep < opt.max_inner; ++sweep) {
        double max_change = 0.0;
        const double d0 = grad0 / g00;
        if (d0 != 0.0) {
          b0 += d0;
          for (std::size_t k = 0; k < p; ++k) grad[static_cast<Eigen::Index>(k)] -= X.gram_intercept(k) * d0;
          grad0 -= g00 * d0;
          max_change = std::fabs(d0);
        }
        for (std::size_t j = 0; j < p; ++j) {
          if (!active[j]) continue;
          const auto jj = static_cast<Eigen::Index>(j);
          const double gjj = X.gram(j, j);
          if (gjj <= 0.0) continue;
          const double updated = soft_threshold(grad[jj] + gjj * b[jj], lambda) / gjj;
          const double d = updated - b[jj];
          if (d == 0.0) continue;
          b[jj] = updated;
          apply_delta(j, d);
          max_change = std::max(max_change, std::fabs(d));
        }
        if (max_change < opt.tol * 0.1) break;
      }
      bool added = false;
      for (std::size_t j = 0; j < p; ++j) {
        if (!active[j] && std::fabs(grad[static_cast<Eigen::Index>(j)]) > lambda) {
          active[j] = 1;
          added = true;
        }
      }
      if (!added) break;
    }

    // Backtrack along the proposed step until the true objective decreases.
    Eigen::VectorXd step = b - beta;
    double step0 = b0 - intercept;
    double scale = 1.0;
    Eigen::VectorXd trial_beta = b;
    double trial_b0 = b0;
    for (int h = 0; h < 30; ++h) {
      trial_beta = beta + scale * step;
      trial_b0 = intercept + scale * step0;
      X.predict(trial_beta, eta);
      eta.array() += trial_b0;
      if (objective(eta, y, trial_beta, lambda) <= obj_old + 1e-13) break;
      scale *= 0.5;
    }
    const double change = std::max(scale * (step.size() ? step.cwiseAbs().maxCoeff() : 0.0), scale * std::fabs(step0));
    beta = trial_beta;
    intercept = trial_b0;
    if (change < opt.tol) break;
  }
}

LassoFit fit_lasso_logistic(LassoDesign& X, std::span<const double> y, std::vector<double> lambda_grid, int V,
                            std::uint64_t seed, const LassoOptions& opt) {
  const std::size_t n = X.rows();
  if (y.size() != n) throw ArgumentError("lasso design and response lengths differ");
  if (V < 2) throw ArgumentError("lasso cross-validation needs at least 2 folds");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] < lambda_grid[i - 1]) || !(lambda_grid[i] > 0.0)) {
      throw ArgumentError("lambda grid must be positive and strictly descending");
    }
  }
  LassoFit fit;
  fit.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.cols()));
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  fit.intercept = clamped_logit(ybar);

  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*ymin == *ymax) return fit;  // constant response: intercept only

  if (lambda_grid.empty()) lambda_grid = default_lambda_grid(X, y);
  if (lambda_grid.empty()) return fit;
  fit.lambda_grid = lambda_grid;

  const std::size_t L = lambda_grid.size();
  std::vector<double> total_loss(L, 0.0);
  const std::vector<int> folds = make_folds(n, V, seed);
  for (int v = 0; v < V; ++v) {
    const auto train = fold_rows(folds, v, true);
    const auto valid = fold_rows(folds, v, false);
    if (valid.empty() || train.empty()) continue;
    auto Xt = X.subset(train);
    auto Xv = X.subset(valid);
    const auto yt = gather(y, train);
    const auto yv = gather(y, valid);
    double b0 = clamped_logit(std::accumulate(yt.begin(), yt.end(), 0.0) / static_cast<double>(yt.size()));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.cols()));
    Eigen::VectorXd eta;
    for (std::size_t l = 0; l < L; ++l) {
      lasso_solve(*Xt, yt, lambda_grid[l], b0, b, opt);
      Xv->predict(b, eta);
      eta.array() += b0;
      total_loss[l] += mean_deviance(eta, yv) * static_cast<double>(valid.size());
    }
  }
  fit.cv_loss_path.resize(L);
  for (std::size_t l = 0; l < L; ++l) fit.cv_loss_path[l] = total_loss[l] / static_cast<double>(n);
  fit.selected = static_cast<std::size_t>(
      std::min_element(fit.cv_loss_path.begin(), fit.cv_loss_path.end()) - fit.cv_loss_path.begin());
  fit.lambda = lambda_grid[fit.selected];

  for (std::size_t l = 0; l <= fit.selected; ++l) lasso_solve(X, y, lambda_grid[l], fit.intercept, fit.beta, opt);
  return fit;
}

std::vector<double> hal_knots(std::span<const double> w, std::size_t cap) {
  std::vector<double> u(w.begin(), w.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (u.size() <= cap || cap < 2) return u;
  std::vector<double> knots(cap);
  for (std::size_t j = 0; j < cap; ++j) {
    knots[j] = u[(j * (u.size() - 1)) / (cap - 1)];
  }
  return knots;
}

IndicatorDesign make_hal_design(const Eigen::MatrixXd& W, std::span<const int> a, bool with_treatment,
                                std::vector<double> knots) {
  if (W.cols() != 1) {
    throw ArgumentError("HAL learner supports a single covariate column (got " + std::to_string(W.cols()) +
                        "); supply a custom Learner for multi-dimensional W");
  }
  std::vector<double> w(W.col(0).data(), W.col(0).data() + W.rows());
  if (knots.empty()) knots = hal_knots(w);
  std::vector<int> av;
  if (with_treatment) {
    if (a.size() != w.size()) throw ArgumentError("treatment length differs from covariate");
    av.assign(a.begin(), a.end());
  }
  return IndicatorDesign(std::move(w), std::move(av), std::move(knots), with_treatment);
}

}  // namespace blipcdf
