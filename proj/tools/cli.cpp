#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "blipcdf/bandwidth.hpp"
#include "blipcdf/dgp.hpp"
#include "blipcdf/errors.hpp"
#include "blipcdf/estimator.hpp"
#include "blipcdf/folds.hpp"
#include "blipcdf/inference.hpp"
#include "blipcdf/io.hpp"
#include "blipcdf/kernels.hpp"
#include "blipcdf/learners.hpp"
#include "blipcdf/simulation.hpp"

namespace blipcdf::cli {
namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback = 1) {
  if (flag) return *flag;
  if (const char* env = std::getenv("BLIPCDF_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ArgumentError(std::string("BLIPCDF_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return fallback;
}

json provenance(const std::string& command, const json& config, const std::string& input_hash, std::uint64_t seed) {
  return json{{"tool", "blipcdf"},
              {"version", kVersion},
              {"command", command},
              {"config", config},
              {"config_hash", content_hash(config.dump())},
              {"input_hash", input_hash},
              {"seed", seed}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Options shared by estimate and bandwidth.
struct DataArgs {
  std::string data;
  std::string treatment = "A";
  std::string outcome = "Y";
  std::vector<std::string> covariates;
  std::string g_known;
  std::vector<double> y_bounds;
  int kernel_K = 0;
  double kernel_R = 1.0;
  std::string delta = "auto";
  std::string t = "quantiles:8";
  std::string learner = "glm";
  std::string estimator = "cvtmle";
  int folds = 10;
  int hal_folds = 5;
  double level = 0.95;
  std::optional<std::uint64_t> seed;
  double g_truncation = 0.01;
  int max_iter = 100;
  std::size_t mc_draws = 100000;
  std::string out = ".";
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "input CSV (header; W columns, A, Y)")->required();
  cmd->add_option("--treatment", a.treatment, "treatment column")->capture_default_str();
  cmd->add_option("--outcome", a.outcome, "outcome column")->capture_default_str();
  cmd->add_option("--covariates", a.covariates, "covariate columns (default: all others)")->delimiter(',');
  cmd->add_option("--g-known", a.g_known, "known propensity: col:NAME or dgp:well_specified|misspecified");
  cmd->add_option("--y-bounds", a.y_bounds, "outcome bounds lo,hi for scaling")->delimiter(',')->expected(2);
  cmd->add_option("--kernel-K", a.kernel_K, "kernel construction index (even)")->capture_default_str();
  cmd->add_option("--kernel-R", a.kernel_R, "kernel support half-width")->capture_default_str();
  cmd->add_option("--delta", a.delta, "bandwidth, or 'auto' for n^(-1/(2J+1))")->capture_default_str();
  cmd->add_option("--t", a.t, "blip points: comma list or quantiles:d")->capture_default_str();
  cmd->add_option("--learner", a.learner, "nuisance learner")
      ->check(CLI::IsMember({"glm", "hal"}))
      ->capture_default_str();
  cmd->add_option("--estimator", a.estimator, "cvtmle or tmle")
      ->check(CLI::IsMember({"cvtmle", "tmle"}))
      ->capture_default_str();
  cmd->add_option("--folds", a.folds, "cross-fitting folds V")->capture_default_str();
  cmd->add_option("--hal-folds", a.hal_folds, "HAL inner CV folds")->capture_default_str();
  cmd->add_option("--level", a.level, "confidence level")->capture_default_str();
  cmd->add_option("--seed", a.seed, "seed (falls back to BLIPCDF_SEED, then 1)");
  cmd->add_option("--g-truncation", a.g_truncation, "propensity truncation bound")->capture_default_str();
  cmd->add_option("--max-iter", a.max_iter, "targeting iteration cap")->capture_default_str();
  cmd->add_option("--mc-draws", a.mc_draws, "Monte Carlo draws for the simultaneous band")->capture_default_str();
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
}

struct Prepared {
  LoadedData loaded;
  std::string input_hash;
  PolyKernel kernel;
  double delta = 0.0;
  std::uint64_t seed = 1;
  std::unique_ptr<Learner> learner;
  NuisanceFit nf;
  int fold_attempts = 0;
  std::vector<double> t;
  json config;
};

std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument("bad");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ArgumentError(what + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw ArgumentError(what + " is empty");
  return out;
}

/// Quantiles at levels j / (d + 1), j = 1..d, of the initial blip estimate.
std::vector<double> blip_quantiles(std::vector<double> b, int d) {
  std::sort(b.begin(), b.end());
  std::vector<double> t;
  for (int j = 1; j <= d; ++j) {
    const double pos = static_cast<double>(j) / (d + 1) * static_cast<double>(b.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, b.size() - 1);
    const double v = b[lo] + (pos - static_cast<double>(lo)) * (b[hi] - b[lo]);
    if (t.empty() || v > t.back()) t.push_back(v);
  }
  return t;
}

Prepared prepare(const DataArgs& a) {
  Prepared p;
  const std::string text = read_file(a.data);
  p.input_hash = content_hash(text);

  LoadOptions lo;
  lo.treatment_column = a.treatment;
  lo.outcome_column = a.outcome;
  lo.covariate_columns = a.covariates;
  std::optional<DgpName> g_dgp;
  if (!a.g_known.empty()) {
    if (a.g_known.rfind("col:", 0) == 0) {
      lo.propensity_column = a.g_known.substr(4);
    } else if (a.g_known.rfind("dgp:", 0) == 0) {
      g_dgp = parse_dgp(a.g_known.substr(4));
    } else {
      throw ArgumentError("--g-known expects col:NAME or dgp:NAME, got '" + a.g_known + "'");
    }
  }
  if (!a.y_bounds.empty()) lo.y_bounds = std::make_pair(a.y_bounds[0], a.y_bounds[1]);
  p.loaded = load_dataset(parse_csv(text), lo);
  const Dataset& data = p.loaded.data;
  if (g_dgp) {
    if (data.p() != 1) throw ArgumentError("--g-known dgp:... needs exactly one covariate column");
    p.loaded.known_g = true_propensity(*g_dgp, data);
  }

  p.kernel = build_kernel(a.kernel_K, a.kernel_R);
  if (a.delta == "auto") {
    p.delta = optimal_fixed_bandwidth(data.n(), p.kernel.order);
  } else {
    p.delta = parse_number_list(a.delta, "--delta").at(0);
    if (!(p.delta > 0.0)) throw ArgumentError("--delta must be positive");
  }
  if (!(a.level > 0.0 && a.level < 1.0)) throw ArgumentError("--level must lie in (0, 1)");
  if (a.folds < 2 && a.estimator == "cvtmle") throw ArgumentError("--folds must be at least 2");
  if (a.hal_folds < 2) throw ArgumentError("--hal-folds must be at least 2");
  if (a.max_iter < 1) throw ArgumentError("--max-iter must be positive");
  if (a.mc_draws < 10000) throw ArgumentError("--mc-draws must be at least 10000");
  p.seed = resolve_seed(a.seed);
  p.learner = make_learner(a.learner, a.hal_folds);

  // Same seed derivation as cv_tmle / tmle, so library and CLI agree.
  NuisanceOptions nopt;
  nopt.g_truncation = a.g_truncation;
  nopt.known_g = p.loaded.known_g;
  nopt.seed = mix_seed(p.seed, 1);
  if (a.estimator == "cvtmle") {
    CrossFit cf = cross_fit(data, *p.learner, a.folds, p.seed, nopt);
    p.nf = std::move(cf.pooled);
    p.fold_attempts = cf.attempts;
  } else {
    p.nf = fit_nuisance(data, *p.learner, nopt);
  }

  if (a.t.rfind("quantiles:", 0) == 0) {
    int d = 0;
    try {
      d = std::stoi(a.t.substr(10));
    } catch (const std::exception&) {
      throw ArgumentError("--t quantiles:d needs an integer d");
    }
    if (d < 1) throw ArgumentError("--t quantiles:d needs d >= 1");
    p.t = blip_quantiles(blip(p.nf), d);
  } else {
    p.t = parse_number_list(a.t, "--t");
  }

  p.config = json{{"data", std::filesystem::path(a.data).filename().string()},
                  {"treatment", a.treatment},
                  {"outcome", a.outcome},
                  {"covariates", p.loaded.covariate_columns},
                  {"g_known", a.g_known},
                  {"kernel_K", a.kernel_K},
                  {"kernel_R", a.kernel_R},
                  {"delta", a.delta},
                  {"delta_resolved", p.delta},
                  {"t", a.t},
                  {"t_resolved", p.t},
                  {"learner", a.learner},
                  {"estimator", a.estimator},
                  {"folds", a.folds},
                  {"hal_folds", a.hal_folds},
                  {"level", a.level},
                  {"g_truncation", a.g_truncation},
                  {"max_iter", a.max_iter},
                  {"mc_draws", a.mc_draws}};
  return p;
}

json data_summary(const Prepared& p) {
  const Dataset& d = p.loaded.data;
  return json{{"n", d.n()},
              {"p", d.p()},
              {"covariates", p.loaded.covariate_columns},
              {"outcome_scaled", p.loaded.outcome_scaled},
              {"y_bounds", {d.y_bounds.first, d.y_bounds.second}},
              {"fold_attempts", p.fold_attempts}};
}

int cmd_estimate(const DataArgs& a) {
  Prepared p = prepare(a);
  SmoothingSpec spec{p.kernel, p.delta, p.t};
  spec.validate();
  TmleOptions topt;
  topt.max_iter = a.max_iter;
  const TmleResult res = tmle_update(p.loaded.data.A, p.loaded.data.Y, p.nf, spec, topt);
  const CiReport ci = simultaneous_ci(res, a.level, a.mc_draws, mix_seed(p.seed, 3));
  const Diagnostics dg = diagnostics(res);

  json out{{"provenance", provenance("estimate", p.config, p.input_hash, p.seed)},
           {"data", data_summary(p)},
           {"kernel", kernel_to_json(p.kernel)},
           {"delta", p.delta},
           {"result", result_to_json(res, ci)},
           {"diagnostics", diagnostics_to_json(dg)}};

  std::ostringstream csv;
  csv << "t,psi,se,ci_lo,ci_hi,sim_ci_lo,sim_ci_hi,initial_psi,mean_eic,tolerance\n";
  for (std::size_t j = 0; j < res.t.size(); ++j) {
    const Interval c = CiReport::clip(ci.ci[j]);
    const Interval s = CiReport::clip(ci.sim_ci[j]);
    csv << fmt(res.t[j]) << ',' << fmt(res.psi[j]) << ',' << fmt(res.se[j]) << ',' << fmt(c.first) << ','
        << fmt(c.second) << ',' << fmt(s.first) << ',' << fmt(s.second) << ',' << fmt(res.initial_psi[j]) << ','
        << fmt(res.mean_eic[j]) << ',' << fmt(res.tolerance[j]) << '\n';
  }
  ensure_dir(a.out);
  write_file(join(a.out, "result.json"), out.dump(2) + "\n");
  write_file(join(a.out, "estimates.csv"), csv.str());

  std::cout << "n=" << p.loaded.data.n() << " delta=" << fmt(p.delta) << " J=" << p.kernel.order
            << " iterations=" << res.iterations << (res.converged ? " converged" : " NOT converged") << "\n";
  for (std::size_t j = 0; j < res.t.size(); ++j) {
    std::cout << "  t=" << fmt(res.t[j]) << "  psi=" << fmt(res.psi[j]) << "  se=" << fmt(res.se[j]) << "\n";
  }
  for (const auto& w : dg.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_bandwidth(const DataArgs& a, int steps, int min_run) {
  if (steps < 2) throw ArgumentError("--steps must be at least 2");
  if (min_run < 2) throw ArgumentError("--min-run must be at least 2");
  Prepared p = prepare(a);
  SmoothingSpec spec{p.kernel, p.delta, p.t};
  spec.validate();
  TmleOptions topt;
  topt.max_iter = a.max_iter;
  const std::vector<double> grid = bandwidth_grid(p.delta, steps);
  BandwidthPath path = scan_path_from_fit(p.loaded.data.A, p.loaded.data.Y, p.nf, spec, grid, topt, min_run);
  path = monotonize_variance(std::move(path));
  const std::vector<SelectedInterval> chosen = select_ci(path, a.level);

  json sel = json::array();
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    const SelectedInterval& c = chosen[j];
    const Interval clipped = CiReport::clip(c.ci);
    json run = nullptr;
    if (path.runs[j]) {
      run = json{{"h_first", grid[path.runs[j]->first]},
                 {"h_last", grid[path.runs[j]->last]},
                 {"length", path.runs[j]->length()},
                 {"decreasing_as_h_shrinks", path.runs[j]->decreasing_as_h_shrinks}};
    }
    sel.push_back(json{{"t", p.t[j]},
                       {"chosen_h", c.h},
                       {"psi", c.psi},
                       {"ci_lo", clipped.first},
                       {"ci_hi", clipped.second},
                       {"unclipped", {{"ci_lo", c.ci.first}, {"ci_hi", c.ci.second}}},
                       {"fallback", c.fallback},
                       {"run", run}});
  }
  json cfg = p.config;
  cfg["steps"] = steps;
  cfg["min_run"] = min_run;
  json out{{"provenance", provenance("bandwidth", cfg, p.input_hash, p.seed)},
           {"data", data_summary(p)},
           {"kernel", kernel_to_json(p.kernel)},
           {"h_max", p.delta},
           {"level", a.level},
           {"selected", sel}};
  ensure_dir(a.out);
  write_file(join(a.out, "bandwidth_path.csv"), path_to_csv(path));
  write_file(join(a.out, "selected.json"), out.dump(2) + "\n");

  for (std::size_t j = 0; j < chosen.size(); ++j) {
    std::cout << "t=" << fmt(p.t[j]) << "  h=" << fmt(chosen[j].h) << "  ci=[" << fmt(chosen[j].ci.first) << ", "
              << fmt(chosen[j].ci.second) << "]" << (chosen[j].fallback ? "  (fallback: no monotone run)" : "")
              << "\n";
  }
  return 0;
}

int cmd_kernel(int K, double R, const std::string& out_path) {
  const PolyKernel k = build_kernel(K, R);
  json j = kernel_to_json(k);
  j["provenance"] = provenance("kernel", json{{"K", K}, {"R", R}}, "", 0);
  if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
  std::cout << "K=" << K << " R=" << fmt(R) << " measured order J=" << k.order << "\n";
  std::cout << "coefficients (x^0, x^2, ...):";
  for (double c : k.coefficients) std::cout << " " << fmt(c);
  std::cout << "\nmoments:\n";
  for (int r = 0; r <= k.order; r += 2) std::cout << "  r=" << r << "  " << fmt(kernel_moment(k, r)) << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& check, const std::optional<std::uint64_t>& seed,
                 const std::string& out) {
  const std::string text = read_file(config_path);
  json cfg_json;
  try {
    cfg_json = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!cfg_json.is_object()) throw ArgumentError("config must be a JSON object");
  const std::uint64_t fallback = cfg_json.contains("seed") ? cfg_json.at("seed").get<std::uint64_t>() : 1;
  const std::uint64_t resolved = seed ? *seed : (cfg_json.contains("seed") ? fallback : resolve_seed(std::nullopt));
  cfg_json["seed"] = resolved;
  ensure_dir(out);

  if (check == "order") {
    const OrderCheckConfig cfg = order_from_json(cfg_json);
    const OrderReport rep = order_checks(cfg);
    json j{{"provenance", provenance("simulate --check order", cfg_json, content_hash(text), resolved)},
           {"report", order_to_json(rep)}};
    write_file(join(out, "order_check.json"), j.dump(2) + "\n");
    std::cout << "kernel order J=" << rep.kernel_order << "  bias slope=" << fmt(rep.bias_slope)
              << "  variance slope=" << fmt(rep.variance_slope) << "\n";
    return 0;
  }
  if (!check.empty()) throw ArgumentError("unknown --check '" + check + "' (expected 'order')");

  const CampaignConfig cfg = campaign_from_json(cfg_json);
  const SimReport rep = run_campaign(cfg);
  json j{{"provenance", provenance("simulate", campaign_to_json(cfg), content_hash(text), resolved)},
         {"report", report_to_json(rep)}};
  write_file(join(out, "report.json"), j.dump(2) + "\n");
  write_file(join(out, "report.csv"), report_to_csv(rep));
  std::cout << report_to_csv(rep);
  return 0;
}

int cmd_draw(const std::string& dgp, std::size_t n, const std::optional<std::uint64_t>& seed, bool with_g,
             const std::string& out_path) {
  DgpSpec spec{parse_dgp(dgp), n, resolve_seed(seed)};
  const Dataset data = draw(spec);
  const std::vector<double> g = true_propensity(spec.name, data);
  const std::string csv = dataset_to_csv(data, with_g ? &g : nullptr);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_file(out_path, csv);
  }
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Smoothed blip CDF estimation by targeted learning"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: all cores)");

  int kK = 0;
  double kR = 1.0;
  std::string k_out;
  auto* kernel = app.add_subcommand("kernel", "build a polynomial kernel and print its moments");
  kernel->add_option("--K", kK, "construction index (even)")->capture_default_str();
  kernel->add_option("--R", kR, "support half-width")->capture_default_str();
  kernel->add_option("--out", k_out, "write kernel JSON here");

  DataArgs est_args;
  auto* estimate = app.add_subcommand("estimate", "CV-TMLE of the smoothed blip CDF");
  add_data_options(estimate, est_args);
  estimate->add_option("--threads", threads, "worker threads");

  DataArgs bw_args;
  int steps = 20;
  int min_run = 5;
  auto* bandwidth = app.add_subcommand("bandwidth", "scan a bandwidth grid and select intervals");
  add_data_options(bandwidth, bw_args);
  bandwidth->add_option("--steps", steps, "grid size")->capture_default_str();
  bandwidth->add_option("--min-run", min_run, "monotone run length")->capture_default_str();
  bandwidth->add_option("--threads", threads, "worker threads");

  std::string sim_config;
  std::string sim_check;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out = ".";
  auto* simulate = app.add_subcommand("simulate", "run a simulation campaign from a JSON config");
  simulate->add_option("config", sim_config, "campaign config JSON")->required();
  simulate->add_option("--check", sim_check, "'order' runs the bias/variance order checks");
  simulate->add_option("--seed", sim_seed, "overrides the config seed");
  simulate->add_option("--out", sim_out, "output directory")->capture_default_str();
  simulate->add_option("--threads", threads, "worker threads");

  std::string d_dgp = "well_specified";
  std::size_t d_n = 1000;
  std::optional<std::uint64_t> d_seed;
  bool d_with_g = false;
  std::string d_out;
  auto* drawcmd = app.add_subcommand("draw", "sample a simulation data set to CSV");
  drawcmd->add_option("--dgp", d_dgp, "well_specified or misspecified")->capture_default_str();
  drawcmd->add_option("--n", d_n, "rows")->capture_default_str();
  drawcmd->add_option("--seed", d_seed, "seed (falls back to BLIPCDF_SEED, then 1)");
  drawcmd->add_flag("--with-g", d_with_g, "append the true propensity as column g");
  drawcmd->add_option("--out", d_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads < 0) throw ArgumentError("--threads must be nonnegative");
    omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
    if (*kernel) return cmd_kernel(kK, kR, k_out);
    if (*estimate) return cmd_estimate(est_args);
    if (*bandwidth) return cmd_bandwidth(bw_args, steps, min_run);
    if (*drawcmd) return cmd_draw(d_dgp, d_n, d_seed, d_with_g, d_out);
    if (*simulate) return cmd_simulate(sim_config, sim_check, sim_seed, sim_out);
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace blipcdf::cli
