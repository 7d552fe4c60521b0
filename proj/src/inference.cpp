#include "blipcdf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "blipcdf/errors.hpp"
#include "blipcdf/folds.hpp"

namespace blipcdf {

namespace {

constexpr std::size_t kBlock = 4096;

}  // namespace

Interval CiReport::clip(Interval iv) { return {std::clamp(iv.first, 0.0, 1.0), std::clamp(iv.second, 0.0, 1.0)}; }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal(), p);
}

CiReport pointwise_ci(const TmleResult& result, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must lie in (0, 1)");
  if (result.eic.size() == 0 || result.psi.empty()) throw ArgumentError("result has no influence curve");
  CiReport rep;
  rep.level = level;
  rep.z_pointwise = normal_quantile((1.0 + level) / 2.0);
  rep.z_simultaneous = rep.z_pointwise;
  const std::size_t d = result.psi.size();
  rep.ci.resize(d);
  rep.degenerate.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double half = rep.z_pointwise * result.se[j];
    rep.ci[j] = {result.psi[j] - half, result.psi[j] + half};
    rep.degenerate[j] = !(result.se[j] > 0.0);
  }
  rep.sim_ci = rep.ci;
  return rep;
}

Eigen::MatrixXd eic_correlation(const Eigen::MatrixXd& eic) {
  const Eigen::Index d = eic.cols();
  const Eigen::MatrixXd centered = eic.rowwise() - eic.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = 0; k < d; ++k) {
      if (j == k) continue;
      const double denom = std::sqrt(cov(j, j) * cov(k, k));
      corr(j, k) = denom > 0.0 ? std::clamp(cov(j, k) / denom, -1.0, 1.0) : 0.0;
    }
  }
  return corr;
}

bool max_abs_normal_quantile(const Eigen::MatrixXd& corr, double level, std::size_t draws, std::uint64_t seed,
                             double& z) {
  const Eigen::Index d = corr.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-8) return false;
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = eig.eigenvectors() * root.asDiagonal();

  std::vector<double> maxima(draws);
  const std::size_t blocks = (draws + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    std::mt19937_64 rng(mix_seed(seed, blk));
    std::normal_distribution<double> normal;
    Eigen::VectorXd e(d);
    const std::size_t end = std::min(draws, (blk + 1) * kBlock);
    for (std::size_t r = blk * kBlock; r < end; ++r) {
      for (Eigen::Index k = 0; k < d; ++k) e[k] = normal(rng);
      maxima[r] = (factor * e).cwiseAbs().maxCoeff();
    }
  }
  const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(draws))) - 1;
  std::nth_element(maxima.begin(), maxima.begin() + static_cast<std::ptrdiff_t>(k), maxima.end());
  z = maxima[k];
  return true;
}

CiReport simultaneous_ci(const TmleResult& result, double level, std::size_t mc_draws, std::uint64_t seed) {
  if (mc_draws < 10000) throw ArgumentError("simultaneous bands need at least 10^4 Monte Carlo draws");
  CiReport rep = pointwise_ci(result, level);
  rep.corr = eic_correlation(result.eic);
  double z = 0.0;
  if (max_abs_normal_quantile(rep.corr, level, mc_draws, seed, z)) {
    // The max over columns dominates any single column; clamp away MC noise.
    rep.z_simultaneous = std::max(z, rep.z_pointwise);
  } else {
    rep.bonferroni_fallback = true;
    const double d = static_cast<double>(result.psi.size());
    rep.z_simultaneous = normal_quantile(1.0 - (1.0 - level) / (2.0 * d));
  }
  for (std::size_t j = 0; j < result.psi.size(); ++j) {
    const double half = rep.z_simultaneous * result.se[j];
    rep.sim_ci[j] = {result.psi[j] - half, result.psi[j] + half};
  }
  return rep;
}

Diagnostics diagnostics(const TmleResult& result) {
  Diagnostics dg;
  dg.iterations = result.iterations;
  dg.converged = result.converged;
  dg.se = result.se;
  dg.tolerance = result.tolerance;
  dg.all_solved = true;
  for (std::size_t j = 0; j < result.mean_eic.size(); ++j) {
    dg.abs_mean_eic.push_back(std::fabs(result.mean_eic[j]));
    if (j < result.tolerance.size() && dg.abs_mean_eic.back() > result.tolerance[j]) dg.all_solved = false;
  }
  dg.g_reported = !result.g_known;
  if (dg.g_reported) {
    const double n = static_cast<double>(std::max<std::size_t>(result.n(), 1));
    dg.g_truncation_rate = static_cast<double>(result.g_truncated) / n;
    dg.g_min = result.g_min;
    dg.g_max = result.g_max;
    if (dg.g_truncation_rate > 0.05) {
      dg.warnings.push_back("positivity: more than 5% of propensity estimates sit at the truncation bound");
    }
  }
  if (!result.converged) dg.warnings.push_back("targeting did not reach the stopping tolerance");
  if (result.aborted) dg.warnings.push_back("fluctuation produced a non-finite step; targeting aborted");
  dg.notes = {
      "Donsker condition on the influence curve is not checkable from data; CV-TMLE does not require it.",
      "Second-order remainder and L2 convergence of the influence curve are assumptions, not computed claims."};
  return dg;
}

nlohmann::json diagnostics_to_json(const Diagnostics& dg) {
  nlohmann::json j{{"abs_mean_eic", dg.abs_mean_eic},
                   {"tolerance", dg.tolerance},
                   {"se", dg.se},
                   {"iterations", dg.iterations},
                   {"converged", dg.converged},
                   {"all_solved", dg.all_solved},
                   {"warnings", dg.warnings},
                   {"notes", dg.notes}};
  if (dg.g_reported) {
    j["g"] = {{"truncation_rate", dg.g_truncation_rate}, {"min", dg.g_min}, {"max", dg.g_max}};
  } else {
    j["g"] = nullptr;
  }
  return j;
}

nlohmann::json result_to_json(const TmleResult& result, const CiReport& ci) {
  std::vector<double> lo, hi, slo, shi, lo_raw, hi_raw, slo_raw, shi_raw;
  for (std::size_t j = 0; j < result.psi.size(); ++j) {
    const Interval c = CiReport::clip(ci.ci[j]);
    const Interval s = CiReport::clip(ci.sim_ci[j]);
    lo.push_back(c.first);
    hi.push_back(c.second);
    slo.push_back(s.first);
    shi.push_back(s.second);
    lo_raw.push_back(ci.ci[j].first);
    hi_raw.push_back(ci.ci[j].second);
    slo_raw.push_back(ci.sim_ci[j].first);
    shi_raw.push_back(ci.sim_ci[j].second);
  }
  return nlohmann::json{{"t", result.t},
                        {"psi", result.psi},
                        {"se", result.se},
                        {"ci_lo", lo},
                        {"ci_hi", hi},
                        {"sim_ci_lo", slo},
                        {"sim_ci_hi", shi},
                        {"unclipped", {{"ci_lo", lo_raw}, {"ci_hi", hi_raw}, {"sim_ci_lo", slo_raw}, {"sim_ci_hi", shi_raw}}},
                        {"level", ci.level},
                        {"z_pointwise", ci.z_pointwise},
                        {"z_simultaneous", ci.z_simultaneous},
                        {"bonferroni_fallback", ci.bonferroni_fallback},
                        {"degenerate", ci.degenerate},
                        {"iterations", result.iterations},
                        {"converged", result.converged},
                        {"initial_psi", result.initial_psi},
                        {"mean_eic", result.mean_eic},
                        {"epsilon", result.epsilon},
                        {"loss_initial", result.loss_initial},
                        {"loss_final", result.loss_final}};
}

}  // namespace blipcdf
