#include "blipcdf/kernels.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "blipcdf/errors.hpp"

namespace blipcdf {

namespace {

// Dense Gaussian elimination with partial pivoting; overwrites `a` and `b`.
// Returns the ratio of smallest to largest pivot magnitude as a crude
// condition indicator (0 when singular).
double solve_dense(std::vector<std::vector<double>>& a, std::vector<double>& b) {
  const std::size_t m = b.size();
  double min_pivot = INFINITY;
  double max_pivot = 0.0;
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    const double p = std::fabs(a[piv][col]);
    min_pivot = std::min(min_pivot, p);
    max_pivot = std::max(max_pivot, p);
    if (p == 0.0) return 0.0;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < m; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = m; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < m; ++c) s -= a[i][c] * b[c];
    b[i] = s / a[i][i];
  }
  return min_pivot / max_pivot;
}

}  // namespace

double PolyKernel::eval(double x) const {
  if (std::fabs(x) > R) return 0.0;
  const double x2 = x * x;
  double acc = 0.0;
  for (std::size_t i = coefficients.size(); i-- > 0;) acc = acc * x2 + coefficients[i];
  return acc;
}

double PolyKernel::derivative(double x) const {
  if (std::fabs(x) > R) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < coefficients.size(); ++i) {
    acc += 2.0 * static_cast<double>(i) * coefficients[i] * std::pow(x, 2.0 * i - 1.0);
  }
  return acc;
}

double PolyKernel::cdf(double u) const {
  if (u <= -R) return 0.0;
  if (u >= R) return 1.0;
  // Odd antiderivative, so 0.5 + A(u) makes cdf(0) and cdf(-u) = 1 - cdf(u) exact.
  const double u2 = u * u;
  double acc = 0.0;
  for (std::size_t i = coefficients.size(); i-- > 0;) {
    acc = acc * u2 + coefficients[i] / static_cast<double>(2 * i + 1);
  }
  return 0.5 + acc * u;
}

double PolyKernel::moment(int r) const {
  if (r < 0) throw ArgumentError("kernel moment order must be nonnegative");
  if (r % 2 == 1) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    const double p = 2.0 * static_cast<double>(i) + 1.0 + r;
    acc += coefficients[i] * std::pow(R, p) / p;
  }
  return 2.0 * acc;
}

int measure_order(const PolyKernel& kern, double tol) {
  for (int r = 1; r <= 64; ++r) {
    if (std::fabs(kern.moment(r)) > tol) return r;
  }
  throw NumericalError("kernel has no nonzero moment up to degree 64");
}

PolyKernel build_kernel(int K, double R) {
  if (K < 0 || K % 2 != 0) {
    throw ArgumentError("kernel construction index K must be even and nonnegative, got " +
                        std::to_string(K));
  }
  if (!(R >= 0.1 && R <= 10.0)) {
    std::ostringstream os;
    os << "kernel support radius R must lie in [0.1, 10], got " << R;
    throw ArgumentError(os.str());
  }
  const std::size_t m = static_cast<std::size_t>(K) + 3;
  // Unknowns are scaled as b_i = a_i R^{2i+1}; every row is then free of R.
  std::vector<std::vector<double>> sys(m, std::vector<double>(m, 0.0));
  std::vector<double> rhs(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double di = static_cast<double>(i);
    sys[0][i] = 1.0;             // k(R) = 0, times R
    sys[1][i] = 2.0 * di;        // k'(R) = 0, times R^2
    for (int r = 2; r <= 2 * K; r += 2) {
      sys[1 + r / 2][i] = 2.0 / (2.0 * di + 1.0 + r);  // zero moment of order r
    }
    sys[m - 1][i] = 2.0 / (2.0 * di + 1.0);  // unit mass
  }
  rhs[m - 1] = 1.0;
  const double cond = solve_dense(sys, rhs);
  if (!(cond > 1e-14) || !std::isfinite(cond)) {
    std::ostringstream os;
    os << "kernel constraint system is singular (pivot ratio " << cond << ") for K=" << K;
    throw NumericalError(os.str());
  }
  PolyKernel kern;
  kern.K = K;
  kern.R = R;
  kern.coefficients.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    kern.coefficients[i] = rhs[i] / std::pow(R, 2.0 * static_cast<double>(i) + 1.0);
  }
  kern.order = measure_order(kern);
  return kern;
}

double eval_kernel(const PolyKernel& kern, double x) { return kern.eval(x); }
double kernel_cdf(const PolyKernel& kern, double u) { return kern.cdf(u); }
double kernel_moment(const PolyKernel& kern, int r) { return kern.moment(r); }

nlohmann::json kernel_to_json(const PolyKernel& kern) {
  return nlohmann::json{{"K", kern.K},
                        {"R", kern.R},
                        {"coefficients", kern.coefficients},
                        {"order", kern.order}};
}

PolyKernel kernel_from_json(const nlohmann::json& j) {
  PolyKernel kern;
  try {
    kern.K = j.at("K").get<int>();
    kern.R = j.at("R").get<double>();
    kern.coefficients = j.at("coefficients").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed kernel JSON: ") + e.what());
  }
  if (kern.coefficients.size() != static_cast<std::size_t>(kern.K) + 3 || kern.R <= 0.0) {
    throw ArgumentError("kernel JSON coefficient count does not match K");
  }
  kern.order = measure_order(kern);
  return kern;
}

}  // namespace blipcdf
