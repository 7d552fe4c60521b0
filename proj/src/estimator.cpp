#include "blipcdf/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blipcdf/errors.hpp"
#include "blipcdf/folds.hpp"
#include "blipcdf/glm.hpp"

namespace blipcdf {

namespace {

// Column means, summed serially so the result is thread-count independent.
std::vector<double> column_means(const Eigen::MatrixXd& M) {
  std::vector<double> out(static_cast<std::size_t>(M.cols()), 0.0);
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < M.rows(); ++i) s += M(i, j);
    out[static_cast<std::size_t>(j)] = s / static_cast<double>(M.rows());
  }
  return out;
}

std::vector<double> column_sd(const Eigen::MatrixXd& M, const std::vector<double>& mean) {
  std::vector<double> out(static_cast<std::size_t>(M.cols()), 0.0);
  const double n = static_cast<double>(M.rows());
  if (M.rows() < 2) return out;
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      const double d = M(i, j) - mean[static_cast<std::size_t>(j)];
      s += d * d;
    }
    out[static_cast<std::size_t>(j)] = std::sqrt(s / (n - 1.0));
  }
  return out;
}

// Everything the targeting loop needs at the current outcome regression.
struct TargetingState {
  std::vector<double> psi;
  Eigen::MatrixXd kern;     // (1/delta) k((b_i - t_j)/delta)
  Eigen::MatrixXd D;        // EIC
  std::vector<double> mean;
  std::vector<double> se;
};

TargetingState evaluate(std::span<const int> a, std::span<const double> y, std::span<const double> q0,
                        std::span<const double> q1, std::span<const double> g1, const SmoothingSpec& spec) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto d = static_cast<Eigen::Index>(spec.d());
  TargetingState st;
  Eigen::MatrixXd smooth(n, d);
  st.kern.resize(n, d);
  const double inv_delta = 1.0 / spec.delta;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double b = q1[ii] - q0[ii];
    for (Eigen::Index j = 0; j < d; ++j) {
      const double u = (b - spec.t[static_cast<std::size_t>(j)]) * inv_delta;
      smooth(i, j) = 1.0 - spec.kernel.cdf(u);
      st.kern(i, j) = inv_delta * spec.kernel.eval(u);
    }
  }
  st.psi = column_means(smooth);
  st.D.resize(n, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const bool treated = a[ii] == 1;
    const double resid = y[ii] - (treated ? q1[ii] : q0[ii]);
    const double weight = treated ? -1.0 / g1[ii] : 1.0 / (1.0 - g1[ii]);
    for (Eigen::Index j = 0; j < d; ++j) {
      st.D(i, j) = st.kern(i, j) * weight * resid + smooth(i, j) - st.psi[static_cast<std::size_t>(j)];
    }
  }
  st.mean = column_means(st.D);
  st.se = column_sd(st.D, st.mean);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (double& s : st.se) s /= root_n;
  return st;
}

void fill_g_diagnostics(TmleResult& res, const NuisanceFit& nf) {
  if (!nf.g1.empty()) {
    const auto [lo, hi] = std::minmax_element(nf.g1.begin(), nf.g1.end());
    res.g_min = *lo;
    res.g_max = *hi;
  }
  res.g_truncation = nf.g_truncation;
  res.g_truncated = nf.g_truncated;
  res.g_known = nf.g_known;
}

void check_inputs(std::span<const int> a, std::span<const double> y, const NuisanceFit& nf,
                  const SmoothingSpec& spec) {
  spec.validate();
  const std::size_t n = y.size();
  if (a.size() != n || nf.q0.size() != n || nf.q1.size() != n || nf.g1.size() != n) {
    throw ArgumentError("nuisance fit and data lengths differ");
  }
  if (n < 2) throw ArgumentError("targeting needs at least 2 observations");
}

}  // namespace

void SmoothingSpec::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ArgumentError("bandwidth delta must be positive");
  if (t.empty()) throw ArgumentError("at least one blip value t is required");
  for (std::size_t j = 1; j < t.size(); ++j) {
    if (!(t[j] > t[j - 1])) throw ArgumentError("blip values t must be strictly increasing");
  }
  if (kernel.coefficients.empty()) throw ArgumentError("smoothing kernel is not initialised");
}

std::vector<double> blip(const NuisanceFit& nf) {
  std::vector<double> b(nf.n());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = nf.q1[i] - nf.q0[i];
  return b;
}

std::vector<double> smoothed_cdf_plugin(std::span<const double> b, const SmoothingSpec& spec) {
  const auto n = static_cast<Eigen::Index>(b.size());
  const auto d = static_cast<Eigen::Index>(spec.d());
  Eigen::MatrixXd smooth(n, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      smooth(i, j) = 1.0 - spec.kernel.cdf((b[static_cast<std::size_t>(i)] - spec.t[static_cast<std::size_t>(j)]) /
                                           spec.delta);
    }
  }
  return column_means(smooth);
}

Eigen::MatrixXd clever_covariate(std::span<const double> b, std::span<const double> g1, std::span<const int> a,
                                 const SmoothingSpec& spec) {
  const auto n = static_cast<Eigen::Index>(b.size());
  const auto d = static_cast<Eigen::Index>(spec.d());
  Eigen::MatrixXd H(n, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double g = a[ii] == 1 ? g1[ii] : 1.0 - g1[ii];
    const double sign = 2.0 * a[ii] - 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double kv = spec.kernel.eval((b[ii] - spec.t[static_cast<std::size_t>(j)]) / spec.delta);
      H(i, j) = -(1.0 / spec.delta) * kv * sign / g;
    }
  }
  return H;
}

Eigen::MatrixXd eic(std::span<const double> b, std::span<const double> q0, std::span<const double> q1,
                    std::span<const double> g1, std::span<const int> a, std::span<const double> y,
                    std::span<const double> psi, const SmoothingSpec& spec) {
  const Eigen::MatrixXd H = clever_covariate(b, g1, a, spec);
  const auto n = static_cast<Eigen::Index>(b.size());
  const auto d = static_cast<Eigen::Index>(spec.d());
  Eigen::MatrixXd D(n, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double resid = y[ii] - (a[ii] == 1 ? q1[ii] : q0[ii]);
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      D(i, j) = H(i, j) * resid + (1.0 - spec.kernel.cdf((b[ii] - spec.t[jj]) / spec.delta)) - psi[jj];
    }
  }
  return D;
}

double pooled_loss(std::span<const int> a, std::span<const double> y, std::span<const double> q0,
                   std::span<const double> q1) {
  std::vector<double> qbar(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) qbar[i] = a[i] == 1 ? q1[i] : q0[i];
  return mean_logistic_loss(y, qbar);
}

TmleResult plugin_estimate(std::span<const int> a, std::span<const double> y, const NuisanceFit& nf,
                           const SmoothingSpec& spec) {
  check_inputs(a, y, nf, spec);
  const TargetingState st = evaluate(a, y, nf.q0, nf.q1, nf.g1, spec);
  TmleResult res;
  res.t = spec.t;
  res.psi = st.psi;
  res.initial_psi = st.psi;
  res.eic = st.D;
  res.se = st.se;
  res.mean_eic = st.mean;
  res.tolerance.assign(spec.d(), 0.0);
  res.iterations = 1;
  res.converged = false;
  res.loss_initial = res.loss_final = pooled_loss(a, y, nf.q0, nf.q1);
  fill_g_diagnostics(res, nf);
  return res;
}

TmleResult tmle_update(std::span<const int> a, std::span<const double> y, const NuisanceFit& nf,
                       const SmoothingSpec& spec, const TmleOptions& opt) {
  check_inputs(a, y, nf, spec);
  if (opt.max_iter < 0) throw ArgumentError("max_iter must be nonnegative");
  if (opt.memory < 1) throw ArgumentError("memory must be at least 1");
  const std::size_t n = y.size();
  const std::size_t d = spec.d();
  const double root_n = std::sqrt(static_cast<double>(n));
  const double log_n = std::log(static_cast<double>(n));

  std::vector<double> q0 = nf.q0;
  std::vector<double> q1 = nf.q1;
  std::vector<double> logit0(n);
  std::vector<double> logit1(n);
  for (std::size_t i = 0; i < n; ++i) {
    logit0[i] = logit(std::clamp(q0[i], kQClamp, 1.0 - kQClamp));
    logit1[i] = logit(std::clamp(q1[i], kQClamp, 1.0 - kQClamp));
    q0[i] = expit(logit0[i]);
    q1[i] = expit(logit1[i]);
  }

  TmleResult res;
  res.t = spec.t;
  res.loss_initial = pooled_loss(a, y, q0, q1);
  double loss = res.loss_initial;
  fill_g_diagnostics(res, nf);

  std::vector<double> offset(n);
  std::vector<Eigen::VectorXd> hist;  // recent directions, newest first
  for (int pass = 1;; ++pass) {
    TargetingState st = evaluate(a, y, q0, q1, nf.g1, spec);
    if (pass == 1) res.initial_psi = st.psi;
    res.iterations = pass;
    res.psi = st.psi;
    res.se = st.se;
    res.mean_eic = st.mean;
    res.tolerance.resize(d);
    bool done = true;
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      // Floor keeps a constant column (se = 0) from failing on rounding noise.
      res.tolerance[j] = std::max(opt.stopping_tol ? *opt.stopping_tol : st.se[j] / (root_n * log_n), 1e-12);
      if (std::fabs(st.mean[j]) > res.tolerance[j]) done = false;
      norm += st.mean[j] * st.mean[j];
    }
    norm = std::sqrt(norm);
    res.eic = std::move(st.D);
    if (done) {
      res.converged = true;
      break;
    }
    if (pass > opt.max_iter) break;

    for (std::size_t i = 0; i < n; ++i) offset[i] = a[i] == 1 ? logit1[i] : logit0[i];
    const auto rows = static_cast<Eigen::Index>(n);
    // Per-row fluctuation directions with A set to 1 and to 0.
    Eigen::MatrixXd h1(rows, 1);
    Eigen::MatrixXd h0(rows, 1);
    Eigen::MatrixXd X;
    Eigen::VectorXd eps;
    if (opt.submodel == Submodel::kCanonical) {
      Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(st.mean.data(), static_cast<Eigen::Index>(d)) / norm;
      // Fluctuate jointly along the current and the last few directions. With
      // memory 1 this is the plain one-dimensional clfm step; a short memory
      // stops the zig-zag that overlapping kernel columns otherwise cause.
      hist.insert(hist.begin(), c);
      if (hist.size() > static_cast<std::size_t>(opt.memory)) hist.resize(static_cast<std::size_t>(opt.memory));
      Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(hist.size()));
      Eigen::Index rc = 0;
      for (const auto& v : hist) {
        Eigen::VectorXd u = v;
        for (Eigen::Index l = 0; l < rc; ++l) u -= basis.col(l).dot(u) * basis.col(l);
        if (u.norm() > 1e-3) basis.col(rc++) = u / u.norm();
      }
      const Eigen::MatrixXd s = st.kern * basis.leftCols(rc);
      h1.resize(rows, rc);
      h0.resize(rows, rc);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        h1.row(i) = -s.row(i) / nf.g1[ii];
        h0.row(i) = s.row(i) / (1.0 - nf.g1[ii]);
      }
    } else {
      h1.resize(rows, static_cast<Eigen::Index>(d));
      h0.resize(rows, static_cast<Eigen::Index>(d));
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        h1.row(i) = -st.kern.row(i) / nf.g1[ii];
        h0.row(i) = st.kern.row(i) / (1.0 - nf.g1[ii]);
      }
    }
    X.resize(rows, h1.cols());
    for (Eigen::Index i = 0; i < rows; ++i) X.row(i) = a[static_cast<std::size_t>(i)] == 1 ? h1.row(i) : h0.row(i);
    const GlmFit fluct = fit_glm_logistic(X, y, std::span<const double>(offset));
    eps = fluct.beta;
    if (!eps.allFinite()) {
      res.aborted = true;
      break;
    }
    const Eigen::VectorXd step1 = h1 * eps;
    const Eigen::VectorXd step0 = h0 * eps;
    for (std::size_t i = 0; i < n; ++i) {
      logit1[i] += step1[static_cast<Eigen::Index>(i)];
      logit0[i] += step0[static_cast<Eigen::Index>(i)];
      q1[i] = expit(logit1[i]);
      q0[i] = expit(logit0[i]);
    }
    if (opt.submodel == Submodel::kCanonical) {
      res.epsilon.push_back(eps[0]);  // step along the current direction
    } else {
      for (Eigen::Index k = 0; k < eps.size(); ++k) res.epsilon.push_back(eps[k]);
    }
    const double updated = pooled_loss(a, y, q0, q1);
    if (updated > loss + 1e-12) res.loss_monotone = false;
    loss = updated;
  }
  res.loss_final = loss;
  return res;
}

CrossFit cross_fit(const Dataset& data, const Learner& learner, int V, std::uint64_t seed,
                   const NuisanceOptions& opt) {
  if (V < 2) throw ArgumentError("CV-TMLE needs at least 2 folds");
  if (static_cast<std::size_t>(V) > data.n()) throw ArgumentError("more folds than observations");
  if (opt.known_g && opt.known_g->size() != data.n()) throw ArgumentError("known propensity length differs from data");
  CrossFit cf;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const std::uint64_t fold_seed = attempt == 0 ? seed : mix_seed(seed, 100 + static_cast<std::uint64_t>(attempt));
    std::vector<int> folds = make_folds(data.n(), V, fold_seed);
    bool ok = true;
    for (int v = 0; v < V && ok; ++v) {
      const auto train = fold_rows(folds, v, true);
      std::size_t treated = 0;
      for (std::size_t i : train) treated += static_cast<std::size_t>(data.A[i]);
      ok = treated > 0 && treated < train.size();
    }
    if (ok) {
      cf.folds = std::move(folds);
      cf.attempts = attempt + 1;
      break;
    }
  }
  if (cf.folds.empty()) throw DataError("could not split folds with both treatment arms in every training set");

  const std::size_t n = data.n();
  NuisanceFit& pooled = cf.pooled;
  pooled.q0.assign(n, 0.0);
  pooled.q1.assign(n, 0.0);
  pooled.g1.assign(n, 0.0);
  pooled.g_truncation = opt.g_truncation;
  pooled.g_known = opt.known_g.has_value();
  for (int v = 0; v < V; ++v) {
    const auto train = fold_rows(cf.folds, v, true);
    const auto valid = fold_rows(cf.folds, v, false);
    NuisanceOptions fold_opt;
    fold_opt.g_truncation = opt.g_truncation;
    fold_opt.seed = mix_seed(opt.seed, static_cast<std::uint64_t>(v));
    if (opt.known_g) {
      std::vector<double> g(valid.size());
      for (std::size_t k = 0; k < valid.size(); ++k) g[k] = (*opt.known_g)[valid[k]];
      fold_opt.known_g = std::move(g);
    }
    const NuisanceFit fit = fit_nuisance(data.subset(train), data.subset(valid), learner, fold_opt);
    for (std::size_t k = 0; k < valid.size(); ++k) {
      pooled.q0[valid[k]] = fit.q0[k];
      pooled.q1[valid[k]] = fit.q1[k];
      pooled.g1[valid[k]] = fit.g1[k];
    }
    pooled.g_truncated += fit.g_truncated;
  }
  return cf;
}

TmleResult cv_tmle(const Dataset& data, const SmoothingSpec& spec, const Learner& learner,
                   const CvTmleOptions& opt) {
  spec.validate();
  NuisanceOptions nopt = opt.nuisance;
  nopt.seed = mix_seed(opt.seed, 1);
  const CrossFit cf = cross_fit(data, learner, opt.V, opt.seed, nopt);
  return tmle_update(data.A, data.Y, cf.pooled, spec, opt.tmle);
}

TmleResult tmle(const Dataset& data, const SmoothingSpec& spec, const Learner& learner, const CvTmleOptions& opt) {
  spec.validate();
  NuisanceOptions nopt = opt.nuisance;
  nopt.seed = mix_seed(opt.seed, 1);
  const NuisanceFit nf = fit_nuisance(data, learner, nopt);
  return tmle_update(data.A, data.Y, nf, spec, opt.tmle);
}

}  // namespace blipcdf
