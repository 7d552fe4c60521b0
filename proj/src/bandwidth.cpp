#include "blipcdf/bandwidth.hpp"

#include <cmath>
#include <sstream>

#include "blipcdf/errors.hpp"
#include "blipcdf/folds.hpp"

namespace blipcdf {

namespace {

bool monotone(const Eigen::MatrixXd& e, Eigen::Index col, std::size_t lo, std::size_t hi, bool rising) {
  for (std::size_t k = lo + 1; k <= hi; ++k) {
    const double prev = e(static_cast<Eigen::Index>(k - 1), col);
    const double cur = e(static_cast<Eigen::Index>(k), col);
    if (rising ? cur < prev : cur > prev) return false;
  }
  return true;
}

std::size_t extend(const Eigen::MatrixXd& e, Eigen::Index col, std::size_t last, bool rising) {
  const auto g = static_cast<std::size_t>(e.rows());
  while (last + 1 < g && monotone(e, col, last, last + 1, rising)) ++last;
  return last;
}

}  // namespace

double optimal_fixed_bandwidth(std::size_t n, int J) {
  if (n < 2) throw ArgumentError("bandwidth rule needs n >= 2");
  if (J < 1) throw ArgumentError("kernel order must be positive");
  return std::pow(static_cast<double>(n), -1.0 / (2.0 * J + 1.0));
}

std::vector<double> bandwidth_grid(double h_max, int steps) {
  if (!(h_max > 0.0) || steps < 1) throw ArgumentError("bandwidth grid needs h_max > 0 and steps >= 1");
  std::vector<double> grid(static_cast<std::size_t>(steps));
  for (int i = 1; i <= steps; ++i) grid[static_cast<std::size_t>(i - 1)] = i * h_max / steps;
  grid.back() = h_max;
  return grid;
}

std::vector<std::optional<MonotoneRun>> find_monotone_runs(const Eigen::MatrixXd& estimates, int min_run) {
  if (min_run < 2) throw ArgumentError("monotone runs need at least 2 points");
  const auto g = static_cast<std::size_t>(estimates.rows());
  const auto width = static_cast<std::size_t>(min_run);
  std::vector<std::optional<MonotoneRun>> runs(static_cast<std::size_t>(estimates.cols()));
  for (Eigen::Index col = 0; col < estimates.cols(); ++col) {
    for (std::size_t s = 0; s + width <= g; ++s) {
      const std::size_t e = s + width - 1;
      const bool rising = monotone(estimates, col, s, e, true);    // nondecreasing in h
      const bool falling = monotone(estimates, col, s, e, false);  // nonincreasing in h
      if (!rising && !falling) continue;
      MonotoneRun run;
      run.first = s;
      const std::size_t end_rising = rising ? extend(estimates, col, e, true) : 0;
      const std::size_t end_falling = falling ? extend(estimates, col, e, false) : 0;
      // Rising in h means estimates fall as h shrinks; flat windows count as that.
      if (rising && (!falling || end_rising >= end_falling)) {
        run.last = end_rising;
        run.decreasing_as_h_shrinks = true;
      } else {
        run.last = end_falling;
        run.decreasing_as_h_shrinks = false;
      }
      runs[static_cast<std::size_t>(col)] = run;
      break;
    }
  }
  return runs;
}

BandwidthPath monotonize_variance(BandwidthPath path) {
  if (path.variances.size() == 0) throw ArgumentError("bandwidth path has no variances");
  path.monotonized = path.variances;
  for (Eigen::Index col = 0; col < path.monotonized.cols(); ++col) {
    for (Eigen::Index r = path.monotonized.rows() - 1; r-- > 0;) {
      path.monotonized(r, col) = std::max(path.monotonized(r, col), path.monotonized(r + 1, col));
    }
  }
  return path;
}

std::vector<SelectedInterval> select_ci(const BandwidthPath& path, double level) {
  if (path.monotonized.size() == 0) throw ArgumentError("select_ci needs monotonized variances");
  const double z = normal_quantile((1.0 + level) / 2.0);
  const auto d = static_cast<std::size_t>(path.estimates.cols());
  const std::size_t top = path.grid.size() - 1;
  std::vector<SelectedInterval> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    auto interval_at = [&](std::size_t k) {
      SelectedInterval s;
      s.index = k;
      s.h = path.grid[k];
      s.psi = path.estimates(static_cast<Eigen::Index>(k), col);
      const double half = z * std::sqrt(path.monotonized(static_cast<Eigen::Index>(k), col));
      s.ci = {s.psi - half, s.psi + half};
      return s;
    };
    const auto& run = path.runs.size() > j ? path.runs[j] : std::nullopt;
    if (!run) {
      out[j] = interval_at(top);
      out[j].fallback = true;
      continue;
    }
    SelectedInterval best = interval_at(run->first);
    for (std::size_t k = run->first + 1; k <= run->last; ++k) {
      const SelectedInterval cand = interval_at(k);
      if (run->decreasing_as_h_shrinks ? cand.ci.second < best.ci.second : cand.ci.first > best.ci.first) {
        best = cand;
      }
    }
    out[j] = best;
  }
  return out;
}

BandwidthPath scan_path_from_fit(std::span<const int> a, std::span<const double> y, const NuisanceFit& nf,
                                 const SmoothingSpec& spec_template, const std::vector<double>& grid,
                                 const TmleOptions& tmle_opt, int min_run) {
  if (grid.empty()) throw ArgumentError("bandwidth grid is empty");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw ArgumentError("bandwidth grid must be strictly increasing");
  }
  BandwidthPath path;
  path.grid = grid;
  path.t = spec_template.t;
  const auto g = static_cast<Eigen::Index>(grid.size());
  const auto d = static_cast<Eigen::Index>(spec_template.d());
  path.estimates.resize(g, d);
  path.variances.resize(g, d);
  path.converged.assign(grid.size(), false);
  path.loss_monotone.assign(grid.size(), true);
  std::vector<char> converged(grid.size(), 0);
  for (Eigen::Index k = 0; k < g; ++k) {
    SmoothingSpec spec = spec_template;
    spec.delta = grid[static_cast<std::size_t>(k)];
    const TmleResult res = tmle_update(a, y, nf, spec, tmle_opt);
    for (Eigen::Index j = 0; j < d; ++j) {
      path.estimates(k, j) = res.psi[static_cast<std::size_t>(j)];
      path.variances(k, j) = res.se[static_cast<std::size_t>(j)] * res.se[static_cast<std::size_t>(j)];
    }
    converged[static_cast<std::size_t>(k)] = res.converged;
    path.loss_monotone[static_cast<std::size_t>(k)] = res.loss_monotone && res.loss_final <= res.loss_initial + 1e-12;
  }
  for (std::size_t k = 0; k < grid.size(); ++k) path.converged[k] = converged[k] != 0;
  path.runs = find_monotone_runs(path.estimates, min_run);
  return monotonize_variance(std::move(path));
}

BandwidthPath scan_path(const Dataset& data, const SmoothingSpec& spec_template, const Learner& learner,
                        const std::vector<double>& grid, const ScanOptions& opt) {
  NuisanceOptions nopt = opt.estimation.nuisance;
  nopt.seed = mix_seed(opt.estimation.seed, 1);
  const NuisanceFit nf = opt.cross_validated
                             ? cross_fit(data, learner, opt.estimation.V, opt.estimation.seed, nopt).pooled
                             : fit_nuisance(data, learner, nopt);
  return scan_path_from_fit(data.A, data.Y, nf, spec_template, grid, opt.estimation.tmle, opt.min_run);
}

std::string path_to_csv(const BandwidthPath& path) {
  std::ostringstream os;
  os.precision(17);
  os << "h,t,psi,var,var_monotone,in_run\n";
  for (std::size_t j = 0; j < path.t.size(); ++j) {
    const auto& run = path.runs.size() > j ? path.runs[j] : std::nullopt;
    for (std::size_t k = 0; k < path.grid.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      const auto c = static_cast<Eigen::Index>(j);
      const bool in_run = run && k >= run->first && k <= run->last;
      os << path.grid[k] << ',' << path.t[j] << ',' << path.estimates(r, c) << ',' << path.variances(r, c) << ','
         << path.monotonized(r, c) << ',' << (in_run ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

}  // namespace blipcdf
