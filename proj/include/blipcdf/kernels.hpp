#pragma once

#include <vector>

#include <json.hpp>

namespace blipcdf {

/// Symmetric polynomial kernel k(x) = sum_i a_i x^{2i} on [-R, R].
///
/// Built by solving endpoint, endpoint-derivative, moment-orthogonality and
/// normalization constraints. `order` is the measured degree of the first
/// nonzero moment, not the nominal construction index.
struct PolyKernel {
  int K = 0;
  double R = 1.0;
  std::vector<double> coefficients;  // a_0 .. a_{K+2}
  int order = 0;

  [[nodiscard]] double eval(double x) const;
  /// Integral of k over [-R, min(u, R)].
  [[nodiscard]] double cdf(double u) const;
  [[nodiscard]] double moment(int r) const;
  /// Derivative dk/dx on the support interior (used for endpoint checks).
  [[nodiscard]] double derivative(double x) const;
};

/// Throws ArgumentError for odd/negative K or R outside [0.1, 10],
/// NumericalError if the constraint system is singular.
PolyKernel build_kernel(int K, double R);

double eval_kernel(const PolyKernel& kern, double x);
double kernel_cdf(const PolyKernel& kern, double u);
double kernel_moment(const PolyKernel& kern, int r);

/// Smallest r >= 1 whose moment exceeds `tol` in magnitude. Scans up to r=64.
int measure_order(const PolyKernel& kern, double tol = 1e-8);

nlohmann::json kernel_to_json(const PolyKernel& kern);
/// Recomputes nothing: trusts the stored coefficients but re-measures order.
PolyKernel kernel_from_json(const nlohmann::json& j);

}  // namespace blipcdf
