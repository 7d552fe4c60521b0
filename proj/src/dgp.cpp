#include "blipcdf/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "blipcdf/errors.hpp"
#include "blipcdf/folds.hpp"

namespace blipcdf {

DgpName parse_dgp(const std::string& name) {
  if (name == "well_specified") return DgpName::kWellSpecified;
  if (name == "misspecified") return DgpName::kMisspecified;
  throw ArgumentError("unknown data generating process '" + name + "' (expected well_specified or misspecified)");
}

std::string to_string(DgpName name) {
  return name == DgpName::kWellSpecified ? "well_specified" : "misspecified";
}

double true_propensity(DgpName name, double w) {
  if (name == DgpName::kWellSpecified) return expit(0.2 + 0.2 * w);
  const double tail = std::fabs(w) > 1.0 ? w * w : 0.0;
  return expit(-0.1 - 0.5 * std::sin(w) - 0.4 * tail);
}

double true_outcome(DgpName name, int a, double w) {
  if (name == DgpName::kWellSpecified) return expit(a + 2.5 * a * w + w);
  const double s = std::sin(w);
  return expit(0.3 * a + 5.0 * a * s * s - a * std::cos(w));
}

double true_blip(DgpName name, double w) { return true_outcome(name, 1, w) - true_outcome(name, 0, w); }

std::vector<double> true_blip(DgpName name, std::span<const double> w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = true_blip(name, w[i]);
  return out;
}

Dataset draw(const DgpSpec& spec) {
  if (spec.n < 10) throw ArgumentError("simulated sample size must be at least 10");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Dataset data;
  data.W.resize(static_cast<Eigen::Index>(spec.n), 1);
  data.A.resize(spec.n);
  data.Y.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double w = normal(rng);
    const int a = unif(rng) < true_propensity(spec.name, w) ? 1 : 0;
    const double y = unif(rng) < true_outcome(spec.name, a, w) ? 1.0 : 0.0;
    data.W(static_cast<Eigen::Index>(i), 0) = w;
    data.A[i] = a;
    data.Y[i] = y;
  }
  return data;
}

std::vector<double> true_propensity(DgpName name, const Dataset& data) {
  std::vector<double> g(data.n());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = true_propensity(name, data.W(static_cast<Eigen::Index>(i), 0));
  return g;
}

TruthSample::TruthSample(DgpName name, std::size_t n_truth, std::uint64_t seed) : seed_(seed) {
  constexpr std::size_t kBlock = 65536;
  blips_.resize(n_truth);
  const std::size_t blocks = (n_truth + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    std::mt19937_64 rng(mix_seed(seed, blk));
    std::normal_distribution<double> normal;
    const std::size_t end = std::min(n_truth, (blk + 1) * kBlock);
    for (std::size_t i = blk * kBlock; i < end; ++i) blips_[i] = true_blip(name, normal(rng));
  }
  std::sort(blips_.begin(), blips_.end());
}

double TruthSample::cdf(double t) const {
  const auto it = std::upper_bound(blips_.begin(), blips_.end(), t);
  return static_cast<double>(it - blips_.begin()) / static_cast<double>(blips_.size());
}

double TruthSample::smoothed(double t, const PolyKernel& kern, double delta) const {
  // Blips left of the window contribute 1, right of it 0.
  const double reach = delta * kern.R;
  const auto lo = std::upper_bound(blips_.begin(), blips_.end(), t - reach);
  const auto hi = std::lower_bound(lo, blips_.end(), t + reach);
  double acc = static_cast<double>(lo - blips_.begin());
  for (auto it = lo; it != hi; ++it) acc += 1.0 - kern.cdf((*it - t) / delta);
  return acc / static_cast<double>(blips_.size());
}

TrueTargets true_targets(DgpName name, const PolyKernel& kern, double delta, std::span<const double> t,
                         std::size_t n_truth, std::uint64_t seed) {
  if (n_truth < 1000000) throw ArgumentError("truth needs at least 10^6 Monte Carlo draws");
  if (!(delta > 0.0)) throw ArgumentError("bandwidth delta must be positive");
  const TruthSample sample(name, n_truth, seed);
  TrueTargets out;
  out.n_truth = n_truth;
  out.seed = seed;
  for (double tj : t) {
    out.cdf.push_back(sample.cdf(tj));
    out.smoothed.push_back(sample.smoothed(tj, kern, delta));
  }
  return out;
}

}  // namespace blipcdf
