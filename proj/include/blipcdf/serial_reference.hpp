#pragma once

// Single-threaded reference versions of the OpenMP kernels in estimator.hpp.
// Kept deliberately plain; tests compare the parallel kernels against them
// and the benchmark target times both.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "blipcdf/estimator.hpp"

namespace blipcdf::serial {

std::vector<double> smoothed_cdf_plugin(std::span<const double> b, const SmoothingSpec& spec);

Eigen::MatrixXd clever_covariate(std::span<const double> b, std::span<const double> g1, std::span<const int> a,
                                 const SmoothingSpec& spec);

Eigen::MatrixXd eic(std::span<const double> b, std::span<const double> q0, std::span<const double> q1,
                    std::span<const double> g1, std::span<const int> a, std::span<const double> y,
                    std::span<const double> psi, const SmoothingSpec& spec);

}  // namespace blipcdf::serial
