#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blipcdf/dataset.hpp"
#include "blipcdf/kernels.hpp"

namespace blipcdf {

enum class DgpName { kWellSpecified, kMisspecified };

DgpName parse_dgp(const std::string& name);
std::string to_string(DgpName name);

struct DgpSpec {
  DgpName name = DgpName::kWellSpecified;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
};

/// Well specified:  W ~ N(0,1), g = expit(0.2 + 0.2 W), Qbar = expit(A + 2.5 A W + W).
/// Misspecified:    W ~ N(0,1), g = expit(-0.1 - 0.5 sin W - 0.4 I(|W| > 1) W^2),
///                  Qbar = expit(0.3 A + 5 A sin^2 W - A cos W).
double true_propensity(DgpName name, double w);
double true_outcome(DgpName name, int a, double w);
double true_blip(DgpName name, double w);
std::vector<double> true_blip(DgpName name, std::span<const double> w);

/// Deterministic in (name, n, seed). Throws ArgumentError for n < 10.
Dataset draw(const DgpSpec& spec);

/// g(1 | W_i) under the generating law, for known-propensity runs.
std::vector<double> true_propensity(DgpName name, const Dataset& data);

/// Large Monte Carlo sample of true blips, sorted, for truth evaluation.
class TruthSample {
 public:
  /// Draws in fixed blocks with per-block seeds; identical for any thread count.
  TruthSample(DgpName name, std::size_t n_truth, std::uint64_t seed);

  /// F(t) = Pr(b(W) <= t).
  [[nodiscard]] double cdf(double t) const;
  /// Psi_{delta,t} = mean [1 - kernel_cdf((b - t) / delta)].
  [[nodiscard]] double smoothed(double t, const PolyKernel& kern, double delta) const;
  [[nodiscard]] std::size_t size() const { return blips_.size(); }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] double min() const { return blips_.front(); }
  [[nodiscard]] double max() const { return blips_.back(); }

 private:
  std::vector<double> blips_;
  std::uint64_t seed_;
};

struct TrueTargets {
  std::vector<double> cdf;       // F(t_j)
  std::vector<double> smoothed;  // Psi_{delta, t_j}
  std::size_t n_truth = 0;
  std::uint64_t seed = 0;
};

/// Throws ArgumentError for n_truth < 10^6.
TrueTargets true_targets(DgpName name, const PolyKernel& kern, double delta, std::span<const double> t,
                         std::size_t n_truth = 1000000, std::uint64_t seed = 20181231);

}  // namespace blipcdf
