#include "blipcdf/learners.hpp"

#include <algorithm>
#include <numeric>

#include "blipcdf/errors.hpp"
#include "blipcdf/folds.hpp"
#include "blipcdf/glm.hpp"

namespace blipcdf {

namespace {

class GlmModel final : public FittedModel {
 public:
  GlmModel(Eigen::VectorXd beta, bool with_treatment, bool converged)
      : beta_(std::move(beta)), with_treatment_(with_treatment), converged_(converged) {}

  [[nodiscard]] std::vector<double> predict(const Eigen::MatrixXd& W, std::span<const int> a) const override {
    const Eigen::VectorXd eta = glm_design(W, a, with_treatment_) * beta_;
    std::vector<double> out(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = expit(eta[i]);
    return out;
  }

  [[nodiscard]] nlohmann::json dump() const override {
    return {{"learner", "glm"},
            {"with_treatment", with_treatment_},
            {"converged", converged_},
            {"beta", std::vector<double>(beta_.data(), beta_.data() + beta_.size())}};
  }

 private:
  Eigen::VectorXd beta_;
  bool with_treatment_;
  bool converged_;
};

class HalModel final : public FittedModel {
 public:
  HalModel(LassoFit fit, bool with_treatment) : fit_(std::move(fit)), with_treatment_(with_treatment) {}

  [[nodiscard]] std::vector<double> predict(const Eigen::MatrixXd& W, std::span<const int> a) const override {
    const IndicatorDesign X = make_hal_design(W, a, with_treatment_, fit_.knots);
    const Eigen::VectorXd eta = fit_.linear_predictor(X);
    std::vector<double> out(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = expit(eta[i]);
    return out;
  }

  [[nodiscard]] nlohmann::json dump() const override {
    return {{"learner", "hal"},
            {"with_treatment", with_treatment_},
            {"lambda", fit_.lambda},
            {"intercept", fit_.intercept},
            {"knots", fit_.knots},
            {"beta", std::vector<double>(fit_.beta.data(), fit_.beta.data() + fit_.beta.size())},
            {"cv_loss_path", fit_.cv_loss_path}};
  }

 private:
  LassoFit fit_;
  bool with_treatment_;
};

}  // namespace

Eigen::MatrixXd glm_design(const Eigen::MatrixXd& W, std::span<const int> a, bool with_treatment) {
  const Eigen::Index n = W.rows();
  const Eigen::Index p = W.cols();
  Eigen::MatrixXd X(n, with_treatment ? 2 * p + 2 : p + 1);
  X.col(0).setOnes();
  X.middleCols(1, p) = W;
  if (with_treatment) {
    if (static_cast<Eigen::Index>(a.size()) != n) throw ArgumentError("treatment length differs from covariates");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ai = a[static_cast<std::size_t>(i)];
      X(i, p + 1) = ai;
      X.block(i, p + 2, 1, p) = ai * W.row(i);
    }
  }
  return X;
}

std::unique_ptr<FittedModel> GlmLearner::fit(const Eigen::MatrixXd& W, std::span<const int> a,
                                             std::span<const double> y, bool with_treatment,
                                             std::uint64_t /*seed*/) const {
  const Eigen::MatrixXd X = glm_design(W, a, with_treatment);
  GlmFit fit = fit_glm_logistic(X, y);
  return std::make_unique<GlmModel>(std::move(fit.beta), with_treatment, fit.converged);
}

std::unique_ptr<FittedModel> HalLearner::fit(const Eigen::MatrixXd& W, std::span<const int> a,
                                             std::span<const double> y, bool with_treatment,
                                             std::uint64_t seed) const {
  IndicatorDesign X = make_hal_design(W, a, with_treatment);
  std::vector<double> grid = default_lambda_grid(X, y, lambda_count_);
  LassoFit fit = fit_lasso_logistic(X, y, std::move(grid), cv_folds_, seed);
  fit.knots = X.knots();
  return std::make_unique<HalModel>(std::move(fit), with_treatment);
}

std::unique_ptr<Learner> make_learner(const std::string& name, int hal_folds) {
  if (name == "glm") return std::make_unique<GlmLearner>();
  if (name == "hal") return std::make_unique<HalLearner>(hal_folds);
  throw ArgumentError("unknown learner '" + name + "' (expected glm or hal)");
}

std::size_t truncate_propensity(std::vector<double>& g1, double bound) {
  std::size_t hits = 0;
  for (double& g : g1) {
    if (g <= bound || g >= 1.0 - bound) ++hits;
    g = std::clamp(g, bound, 1.0 - bound);
  }
  return hits;
}

NuisanceFit fit_nuisance(const Dataset& train, const Dataset& eval, const Learner& learner,
                         const NuisanceOptions& opt) {
  if (!(opt.g_truncation > 0.0 && opt.g_truncation < 0.5)) {
    throw ArgumentError("g truncation must lie in (0, 0.5)");
  }
  const std::size_t treated = static_cast<std::size_t>(std::count(train.A.begin(), train.A.end(), 1));
  if (treated == 0 || treated == train.n()) {
    throw DataError(std::string("positivity violated: every training unit has A=") + (treated == 0 ? "0" : "1"));
  }

  NuisanceFit nf;
  nf.g_truncation = opt.g_truncation;
  if (opt.known_g) {
    if (opt.known_g->size() != eval.n()) throw ArgumentError("known propensity length differs from data");
    nf.g1 = *opt.known_g;
    nf.g_known = true;
  } else {
    std::vector<double> a_as_y(train.A.begin(), train.A.end());
    const auto gmodel = learner.fit(train.W, {}, a_as_y, false, mix_seed(opt.seed, 11));
    nf.g1 = gmodel->predict(eval.W, {});
  }
  nf.g_truncated = truncate_propensity(nf.g1, opt.g_truncation);

  const auto qmodel = learner.fit(train.W, train.A, train.Y, true, mix_seed(opt.seed, 12));
  const std::vector<int> zeros(eval.n(), 0);
  const std::vector<int> ones(eval.n(), 1);
  nf.q0 = qmodel->predict(eval.W, zeros);
  nf.q1 = qmodel->predict(eval.W, ones);
  for (auto* q : {&nf.q0, &nf.q1}) {
    for (double& v : *q) v = std::clamp(v, kQClamp, 1.0 - kQClamp);
  }
  return nf;
}

}  // namespace blipcdf
