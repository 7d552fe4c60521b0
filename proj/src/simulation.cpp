#include "blipcdf/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "blipcdf/bandwidth.hpp"
#include "blipcdf/errors.hpp"
#include "blipcdf/folds.hpp"
#include "blipcdf/inference.hpp"

namespace blipcdf {

namespace {

struct Outcome {
  bool ok = false;
  std::string error;
  std::vector<double> psi, lo, hi, h, truth;
  std::optional<bool> sim_covered;
  bool converged = false;
  bool monotone = true;
  int iterations = 0;
  double eic_ratio = 0.0;
};

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

EstimatorSpec parse_estimator(const std::string& label) {
  EstimatorSpec spec;
  spec.label = label;
  std::vector<std::string> parts;
  std::stringstream ss(label);
  for (std::string part; std::getline(ss, part, '_');) parts.push_back(part);
  if (parts.size() < 2) throw ArgumentError("estimator label '" + label + "' needs <kind>_<learner>");
  if (parts[0] == "cvtmle") {
    spec.kind = EstimatorSpec::Kind::kCvTmle;
  } else if (parts[0] == "tmle") {
    spec.kind = EstimatorSpec::Kind::kTmle;
  } else if (parts[0] == "plugin") {
    spec.kind = EstimatorSpec::Kind::kPlugin;
  } else {
    throw ArgumentError("unknown estimator kind '" + parts[0] + "' in '" + label + "'");
  }
  spec.learner = parts[1];
  if (spec.learner != "glm" && spec.learner != "hal") {
    throw ArgumentError("unknown learner '" + spec.learner + "' in '" + label + "'");
  }
  for (std::size_t k = 2; k < parts.size(); ++k) {
    if (parts[k] == "gknown") {
      spec.known_g = true;
    } else if (parts[k] == "select") {
      spec.select = true;
    } else {
      throw ArgumentError("unknown estimator modifier '" + parts[k] + "' in '" + label + "'");
    }
  }
  return spec;
}

CampaignConfig campaign_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"dgp",        "n",          "reps",        "kernel_K",     "kernel_R",
                                           "delta",      "t",          "estimators",  "V",            "hal_folds",
                                           "seed",       "level",      "simultaneous", "mc_draws",    "n_truth",
                                           "truth_seed", "g_truncation", "max_iter",  "grid_steps",   "min_run"};
  if (!j.is_object()) throw ArgumentError("campaign config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ArgumentError("unknown campaign config key '" + key + "'");
  }
  CampaignConfig cfg;
  try {
    cfg.dgp = parse_dgp(get_or<std::string>(j, "dgp", "well_specified"));
    cfg.n = get_or<std::size_t>(j, "n", cfg.n);
    cfg.reps = get_or<int>(j, "reps", cfg.reps);
    cfg.kernel_K = get_or<int>(j, "kernel_K", cfg.kernel_K);
    cfg.kernel_R = get_or<double>(j, "kernel_R", cfg.kernel_R);
    if (j.contains("delta")) {
      const auto& dj = j.at("delta");
      if (dj.is_string()) {
        if (dj.get<std::string>() != "auto") throw ArgumentError("delta must be a number or \"auto\"");
      } else {
        cfg.delta = dj.get<double>();
      }
    }
    if (!j.contains("t")) throw ArgumentError("campaign config needs a t grid");
    cfg.t = j.at("t").get<std::vector<double>>();
    cfg.estimators = get_or<std::vector<std::string>>(j, "estimators", cfg.estimators);
    cfg.V = get_or<int>(j, "V", cfg.V);
    cfg.hal_folds = get_or<int>(j, "hal_folds", cfg.hal_folds);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.level = get_or<double>(j, "level", cfg.level);
    cfg.simultaneous = get_or<bool>(j, "simultaneous", cfg.simultaneous);
    cfg.mc_draws = get_or<std::size_t>(j, "mc_draws", cfg.mc_draws);
    cfg.n_truth = get_or<std::size_t>(j, "n_truth", cfg.n_truth);
    cfg.truth_seed = get_or<std::uint64_t>(j, "truth_seed", cfg.truth_seed);
    cfg.g_truncation = get_or<double>(j, "g_truncation", cfg.g_truncation);
    cfg.max_iter = get_or<int>(j, "max_iter", cfg.max_iter);
    cfg.grid_steps = get_or<int>(j, "grid_steps", cfg.grid_steps);
    cfg.min_run = get_or<int>(j, "min_run", cfg.min_run);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed campaign config: ") + e.what());
  }
  if (cfg.reps < 2) throw ArgumentError("a campaign needs at least 2 replicates");
  for (const auto& e : cfg.estimators) parse_estimator(e);
  return cfg;
}

nlohmann::json campaign_to_json(const CampaignConfig& cfg) {
  nlohmann::json j{{"dgp", to_string(cfg.dgp)},   {"n", cfg.n},
                   {"reps", cfg.reps},            {"kernel_K", cfg.kernel_K},
                   {"kernel_R", cfg.kernel_R},    {"t", cfg.t},
                   {"estimators", cfg.estimators}, {"V", cfg.V},
                   {"hal_folds", cfg.hal_folds},  {"seed", cfg.seed},
                   {"level", cfg.level},          {"simultaneous", cfg.simultaneous},
                   {"mc_draws", cfg.mc_draws},    {"n_truth", cfg.n_truth},
                   {"truth_seed", cfg.truth_seed}, {"g_truncation", cfg.g_truncation},
                   {"max_iter", cfg.max_iter},    {"grid_steps", cfg.grid_steps},
                   {"min_run", cfg.min_run}};
  if (cfg.delta) {
    j["delta"] = *cfg.delta;
  } else {
    j["delta"] = "auto";
  }
  return j;
}

const EstimatorSummary& SimReport::at(const std::string& label) const {
  for (const auto& e : estimators) {
    if (e.label == label) return e;
  }
  throw ArgumentError("no estimator '" + label + "' in report");
}

SimReport run_campaign(const CampaignConfig& cfg) {
  if (cfg.reps < 2) throw ArgumentError("a campaign needs at least 2 replicates");
  if (cfg.estimators.empty()) throw ArgumentError("campaign lists no estimators");
  std::vector<EstimatorSpec> specs;
  for (const auto& e : cfg.estimators) specs.push_back(parse_estimator(e));

  SimReport rep;
  rep.config = cfg;
  SmoothingSpec smoothing;
  smoothing.kernel = build_kernel(cfg.kernel_K, cfg.kernel_R);
  smoothing.t = cfg.t;
  rep.kernel_order = smoothing.kernel.order;
  rep.delta = cfg.delta ? *cfg.delta : optimal_fixed_bandwidth(cfg.n, smoothing.kernel.order);
  smoothing.delta = rep.delta;
  smoothing.validate();

  const std::size_t d = cfg.t.size();
  const TruthSample truth(cfg.dgp, cfg.n_truth, cfg.truth_seed);
  for (double tj : cfg.t) {
    rep.truth_cdf.push_back(truth.cdf(tj));
    rep.truth_smoothed.push_back(truth.smoothed(tj, smoothing.kernel, rep.delta));
  }
  const bool any_select = std::any_of(specs.begin(), specs.end(), [](const auto& s) { return s.select; });
  std::vector<double> grid;
  std::vector<std::vector<double>> grid_truth;  // [k][j]
  if (any_select) {
    grid = bandwidth_grid(rep.delta, cfg.grid_steps);
    for (double h : grid) {
      std::vector<double> row;
      for (double tj : cfg.t) row.push_back(truth.smoothed(tj, smoothing.kernel, h));
      grid_truth.push_back(std::move(row));
    }
  }

  std::map<std::string, std::unique_ptr<Learner>> learners;
  for (const auto& s : specs) {
    if (!learners.contains(s.learner)) learners[s.learner] = make_learner(s.learner, cfg.hal_folds);
  }

  const auto reps = static_cast<std::size_t>(cfg.reps);
  std::vector<std::vector<Outcome>> outcomes(reps, std::vector<Outcome>(specs.size()));

#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < reps; ++r) {
    const std::uint64_t rep_seed = mix_seed(cfg.seed, r);
    const Dataset data = draw({cfg.dgp, cfg.n, rep_seed});
    const std::uint64_t fit_seed = mix_seed(rep_seed, 2);
    std::map<std::string, NuisanceFit> cache;
    std::map<std::string, std::string> cache_errors;

    for (std::size_t e = 0; e < specs.size(); ++e) {
      const EstimatorSpec& spec = specs[e];
      Outcome& out = outcomes[r][e];
      try {
        const bool cv = spec.kind == EstimatorSpec::Kind::kCvTmle;
        const std::string key = (cv ? "cv_" : "full_") + spec.learner + (spec.known_g ? "_g" : "");
        if (!cache.contains(key)) {
          NuisanceOptions nopt;
          nopt.g_truncation = cfg.g_truncation;
          nopt.seed = mix_seed(fit_seed, 1);
          if (spec.known_g) nopt.known_g = true_propensity(cfg.dgp, data);
          const Learner& learner = *learners.at(spec.learner);
          cache[key] = cv ? cross_fit(data, learner, cfg.V, fit_seed, nopt).pooled : fit_nuisance(data, learner, nopt);
        }
        const NuisanceFit& nf = cache.at(key);
        TmleOptions topt;
        topt.max_iter = cfg.max_iter;

        if (spec.select) {
          if (spec.kind == EstimatorSpec::Kind::kPlugin) throw ArgumentError("bandwidth selection needs targeting");
          const BandwidthPath path = scan_path_from_fit(data.A, data.Y, nf, smoothing, grid, topt, cfg.min_run);
          const auto chosen = select_ci(path, cfg.level);
          out.converged = std::all_of(path.converged.begin(), path.converged.end(), [](bool c) { return c; });
          out.monotone = std::all_of(path.loss_monotone.begin(), path.loss_monotone.end(), [](bool m) { return m; });
          for (std::size_t j = 0; j < d; ++j) {
            out.psi.push_back(chosen[j].psi);
            out.lo.push_back(chosen[j].ci.first);
            out.hi.push_back(chosen[j].ci.second);
            out.h.push_back(chosen[j].h);
            out.truth.push_back(grid_truth[chosen[j].index][j]);
          }
        } else {
          const TmleResult res = spec.kind == EstimatorSpec::Kind::kPlugin
                                     ? plugin_estimate(data.A, data.Y, nf, smoothing)
                                     : tmle_update(data.A, data.Y, nf, smoothing, topt);
          const CiReport ci = cfg.simultaneous
                                  ? simultaneous_ci(res, cfg.level, cfg.mc_draws, mix_seed(rep_seed, 3))
                                  : pointwise_ci(res, cfg.level);
          out.converged = res.converged;
          out.monotone = res.loss_monotone && res.loss_final <= res.loss_initial + 1e-12;
          out.iterations = res.iterations;
          for (std::size_t j = 0; j < d; ++j) {
            out.psi.push_back(res.psi[j]);
            out.lo.push_back(ci.ci[j].first);
            out.hi.push_back(ci.ci[j].second);
            out.h.push_back(rep.delta);
            out.truth.push_back(rep.truth_smoothed[j]);
            if (res.converged) {
              out.eic_ratio = std::max(out.eic_ratio, std::fabs(res.mean_eic[j]) / res.tolerance[j]);
            }
          }
          if (cfg.simultaneous) {
            bool all = true;
            for (std::size_t j = 0; j < d; ++j) {
              all = all && ci.sim_ci[j].first <= rep.truth_smoothed[j] && rep.truth_smoothed[j] <= ci.sim_ci[j].second;
            }
            out.sim_covered = all;
          }
        }
        out.ok = true;
      } catch (const std::exception& ex) {
        out.ok = false;
        out.error = ex.what();
      }
    }
  }

  for (std::size_t e = 0; e < specs.size(); ++e) {
    EstimatorSummary s;
    s.label = specs[e].label;
    s.mean_psi.assign(d, 0.0);
    s.bias.assign(d, 0.0);
    s.variance.assign(d, 0.0);
    s.mse.assign(d, 0.0);
    s.coverage.assign(d, 0.0);
    s.coverage_true.assign(d, 0.0);
    s.mean_h.assign(d, 0.0);
    int sim_hits = 0;
    int sim_total = 0;
    double iterations = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Outcome& o = outcomes[r][e];
      if (!o.ok) {
        ++s.failures;
        if (s.failure_messages.size() < 5 &&
            std::find(s.failure_messages.begin(), s.failure_messages.end(), o.error) == s.failure_messages.end()) {
          s.failure_messages.push_back(o.error);
        }
        continue;
      }
      ++s.reps_ok;
      s.converged += o.converged ? 1 : 0;
      s.loss_monotone += o.monotone ? 1 : 0;
      iterations += o.iterations;
      s.max_abs_mean_eic_ratio = std::max(s.max_abs_mean_eic_ratio, o.eic_ratio);
      if (o.sim_covered) {
        ++sim_total;
        sim_hits += *o.sim_covered ? 1 : 0;
      }
      for (std::size_t j = 0; j < d; ++j) {
        const double err = o.psi[j] - o.truth[j];
        s.mean_psi[j] += o.psi[j];
        s.bias[j] += err;
        s.mse[j] += err * err;
        s.coverage[j] += (o.lo[j] <= o.truth[j] && o.truth[j] <= o.hi[j]) ? 1.0 : 0.0;
        s.coverage_true[j] += (o.lo[j] <= rep.truth_cdf[j] && rep.truth_cdf[j] <= o.hi[j]) ? 1.0 : 0.0;
        s.mean_h[j] += o.h[j];
      }
    }
    if (s.reps_ok > 0) {
      const double m = s.reps_ok;
      for (std::size_t j = 0; j < d; ++j) {
        s.mean_psi[j] /= m;
        s.bias[j] /= m;
        s.mse[j] /= m;
        s.coverage[j] /= m;
        s.coverage_true[j] /= m;
        s.mean_h[j] /= m;
      }
      // Second pass for the variance so MSE = bias^2 + variance up to rounding.
      for (std::size_t r = 0; r < reps; ++r) {
        const Outcome& o = outcomes[r][e];
        if (!o.ok) continue;
        for (std::size_t j = 0; j < d; ++j) {
          const double c = o.psi[j] - o.truth[j] - s.bias[j];
          s.variance[j] += c * c;
        }
      }
      for (double& v : s.variance) v /= m;
      s.mean_iterations = iterations / m;
    }
    if (sim_total > 0) s.sim_coverage = static_cast<double>(sim_hits) / sim_total;
    rep.estimators.push_back(std::move(s));
  }
  return rep;
}

std::string report_to_csv(const SimReport& rep) {
  std::ostringstream os;
  os << "t,estimator,truth_smoothed,truth_cdf,mean_psi,bias,variance,mse,coverage,coverage_true,mean_h,"
        "sim_coverage,reps,failures\n";
  for (std::size_t j = 0; j < rep.config.t.size(); ++j) {
    for (const auto& s : rep.estimators) {
      os << fmt(rep.config.t[j]) << ',' << s.label << ',' << fmt(rep.truth_smoothed[j]) << ','
         << fmt(rep.truth_cdf[j]) << ',' << fmt(s.mean_psi[j]) << ',' << fmt(s.bias[j]) << ','
         << fmt(s.variance[j]) << ',' << fmt(s.mse[j]) << ',' << fmt(s.coverage[j]) << ','
         << fmt(s.coverage_true[j]) << ',' << fmt(s.mean_h[j]) << ','
         << (s.sim_coverage ? fmt(*s.sim_coverage) : std::string("NA")) << ',' << s.reps_ok << ',' << s.failures
         << '\n';
    }
  }
  return os.str();
}

nlohmann::json report_to_json(const SimReport& rep) {
  nlohmann::json est = nlohmann::json::array();
  for (const auto& s : rep.estimators) {
    nlohmann::json e{{"estimator", s.label},
                     {"mean_psi", s.mean_psi},
                     {"bias", s.bias},
                     {"variance", s.variance},
                     {"mse", s.mse},
                     {"coverage", s.coverage},
                     {"coverage_true", s.coverage_true},
                     {"mean_h", s.mean_h},
                     {"reps_ok", s.reps_ok},
                     {"failures", s.failures},
                     {"failure_messages", s.failure_messages},
                     {"converged", s.converged},
                     {"loss_monotone", s.loss_monotone},
                     {"mean_iterations", s.mean_iterations},
                     {"max_abs_mean_eic_ratio", s.max_abs_mean_eic_ratio}};
    e["sim_coverage"] = s.sim_coverage ? nlohmann::json(*s.sim_coverage) : nlohmann::json(nullptr);
    est.push_back(std::move(e));
  }
  return nlohmann::json{{"config", campaign_to_json(rep.config)},
                        {"delta", rep.delta},
                        {"kernel_order", rep.kernel_order},
                        {"t", rep.config.t},
                        {"truth_cdf", rep.truth_cdf},
                        {"truth_smoothed", rep.truth_smoothed},
                        {"estimators", est}};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("slope needs two equal-length series of >= 2 points");
  double mx = 0.0;
  double my = 0.0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / m;
    my += std::log(y[i]) / m;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

OrderCheckConfig order_from_json(const nlohmann::json& j) {
  OrderCheckConfig cfg;
  try {
    cfg.dgp = parse_dgp(get_or<std::string>(j, "dgp", "misspecified"));
    cfg.kernel_K = get_or<int>(j, "kernel_K", cfg.kernel_K);
    cfg.kernel_R = get_or<double>(j, "kernel_R", cfg.kernel_R);
    cfg.deltas = get_or<std::vector<double>>(j, "deltas", cfg.deltas);
    cfg.t = get_or<double>(j, "t_order", cfg.t);
    cfg.n = get_or<std::size_t>(j, "n", cfg.n);
    cfg.reps = get_or<int>(j, "reps", cfg.reps);
    cfg.estimator = get_or<std::string>(j, "order_estimator", cfg.estimator);
    cfg.V = get_or<int>(j, "V", cfg.V);
    cfg.hal_folds = get_or<int>(j, "hal_folds", cfg.hal_folds);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.n_truth = get_or<std::size_t>(j, "n_truth", cfg.n_truth);
    cfg.truth_seed = get_or<std::uint64_t>(j, "truth_seed", cfg.truth_seed);
    cfg.g_truncation = get_or<double>(j, "g_truncation", cfg.g_truncation);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed order-check config: ") + e.what());
  }
  return cfg;
}

OrderReport order_checks(const OrderCheckConfig& cfg) {
  std::vector<double> sorted = cfg.deltas;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.size() < 4 || !(sorted.front() > 0.0) || sorted.back() / sorted.front() < 8.0 - 1e-12) {
    throw ArgumentError("order checks need >= 4 distinct positive deltas spanning a factor of 8");
  }
  if (cfg.reps < 2) throw ArgumentError("order checks need at least 2 replicates");
  const EstimatorSpec est = parse_estimator(cfg.estimator);
  if (est.select) throw ArgumentError("order checks use fixed bandwidths");

  OrderReport rep;
  rep.deltas = sorted;
  SmoothingSpec spec;
  spec.kernel = build_kernel(cfg.kernel_K, cfg.kernel_R);
  spec.t = {cfg.t};
  rep.kernel_order = spec.kernel.order;

  const TruthSample truth(cfg.dgp, cfg.n_truth, cfg.truth_seed);
  const double F = truth.cdf(cfg.t);
  for (double delta : sorted) rep.truth_bias.push_back(std::fabs(truth.smoothed(cfg.t, spec.kernel, delta) - F));

  const auto reps = static_cast<std::size_t>(cfg.reps);
  const std::size_t nd = sorted.size();
  std::vector<std::vector<double>> psi(reps, std::vector<double>(nd, NAN));
  std::vector<std::vector<char>> monotone(reps, std::vector<char>(nd, -1));  // -1: no targeting run
  const auto learner = make_learner(est.learner, cfg.hal_folds);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < reps; ++r) {
    try {
      const std::uint64_t rep_seed = mix_seed(cfg.seed, r);
      const Dataset data = draw({cfg.dgp, cfg.n, rep_seed});
      NuisanceOptions nopt;
      nopt.g_truncation = cfg.g_truncation;
      nopt.seed = mix_seed(mix_seed(rep_seed, 2), 1);
      if (est.known_g) nopt.known_g = true_propensity(cfg.dgp, data);
      const NuisanceFit nf = est.kind == EstimatorSpec::Kind::kCvTmle
                                 ? cross_fit(data, *learner, cfg.V, mix_seed(rep_seed, 2), nopt).pooled
                                 : fit_nuisance(data, *learner, nopt);
      for (std::size_t k = 0; k < nd; ++k) {
        SmoothingSpec s = spec;
        s.delta = sorted[k];
        const TmleResult res = est.kind == EstimatorSpec::Kind::kPlugin ? plugin_estimate(data.A, data.Y, nf, s)
                                                                        : tmle_update(data.A, data.Y, nf, s);
        psi[r][k] = res.psi[0];
        if (est.kind != EstimatorSpec::Kind::kPlugin) {
          monotone[r][k] = res.loss_monotone && res.loss_final <= res.loss_initial + 1e-12;
        }
      }
    } catch (const std::exception&) {
      // Failed replicates stay NaN and are excluded below.
    }
  }

  for (const auto& row : monotone) {
    for (char m : row) {
      if (m < 0) continue;
      ++rep.targeting_runs;
      rep.loss_monotone += m;
    }
  }
  rep.variances.assign(nd, 0.0);
  for (std::size_t k = 0; k < nd; ++k) {
    double mean = 0.0;
    int count = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      if (std::isfinite(psi[r][k])) {
        mean += psi[r][k];
        ++count;
      }
    }
    mean /= std::max(count, 1);
    double ss = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      if (std::isfinite(psi[r][k])) ss += (psi[r][k] - mean) * (psi[r][k] - mean);
    }
    rep.variances[k] = ss / std::max(count - 1, 1);
    rep.reps_ok = k == 0 ? count : std::min(rep.reps_ok, count);
  }
  rep.variance_slope = loglog_slope(rep.deltas, rep.variances);
  rep.bias_slope = loglog_slope(rep.deltas, rep.truth_bias);
  return rep;
}

nlohmann::json order_to_json(const OrderReport& rep) {
  return nlohmann::json{{"kernel_order", rep.kernel_order}, {"deltas", rep.deltas},
                        {"variances", rep.variances},       {"truth_bias", rep.truth_bias},
                        {"variance_slope", rep.variance_slope}, {"bias_slope", rep.bias_slope},
                        {"reps_ok", rep.reps_ok},               {"targeting_runs", rep.targeting_runs},
                        {"loss_monotone", rep.loss_monotone}};
}

}  // namespace blipcdf
