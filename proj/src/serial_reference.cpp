#include "blipcdf/serial_reference.hpp"

namespace blipcdf::serial {

std::vector<double> smoothed_cdf_plugin(std::span<const double> b, const SmoothingSpec& spec) {
  std::vector<double> psi(spec.d(), 0.0);
  for (std::size_t j = 0; j < spec.d(); ++j) {
    double acc = 0.0;
    for (double bi : b) acc += 1.0 - spec.kernel.cdf((bi - spec.t[j]) / spec.delta);
    psi[j] = acc / static_cast<double>(b.size());
  }
  return psi;
}

Eigen::MatrixXd clever_covariate(std::span<const double> b, std::span<const double> g1, std::span<const int> a,
                                 const SmoothingSpec& spec) {
  Eigen::MatrixXd H(static_cast<Eigen::Index>(b.size()), static_cast<Eigen::Index>(spec.d()));
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double g = a[i] == 1 ? g1[i] : 1.0 - g1[i];
    for (std::size_t j = 0; j < spec.d(); ++j) {
      const double k = spec.kernel.eval((b[i] - spec.t[j]) / spec.delta);
      H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -(1.0 / spec.delta) * k * (2.0 * a[i] - 1.0) / g;
    }
  }
  return H;
}

Eigen::MatrixXd eic(std::span<const double> b, std::span<const double> q0, std::span<const double> q1,
                    std::span<const double> g1, std::span<const int> a, std::span<const double> y,
                    std::span<const double> psi, const SmoothingSpec& spec) {
  const Eigen::MatrixXd H = serial::clever_covariate(b, g1, a, spec);
  Eigen::MatrixXd D(H.rows(), H.cols());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double qbar = a[i] == 1 ? q1[i] : q0[i];
    for (std::size_t j = 0; j < spec.d(); ++j) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      D(r, c) = H(r, c) * (y[i] - qbar) + (1.0 - spec.kernel.cdf((b[i] - spec.t[j]) / spec.delta)) - psi[j];
    }
  }
  return D;
}

}  // namespace blipcdf::serial
