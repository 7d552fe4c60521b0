#pragma once

#include <cstdint>
#include <vector>

namespace blipcdf {

/// Fold label in [0, V) for each of n rows; a pure function of (seed, n, V).
std::vector<int> make_folds(std::size_t n, int V, std::uint64_t seed);

/// Row indices with label == v (or != v when `complement`).
std::vector<std::size_t> fold_rows(const std::vector<int>& folds, int v, bool complement);

/// SplitMix64 step; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace blipcdf
