#include "blipcdf/folds.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "blipcdf/errors.hpp"

namespace blipcdf {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<int> make_folds(std::size_t n, int V, std::uint64_t seed) {
  if (V < 1) throw ArgumentError("number of folds must be positive");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates by hand: std::shuffle's draw sequence is library-specific.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<int> folds(n);
  for (std::size_t pos = 0; pos < n; ++pos) folds[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(V));
  return folds;
}

std::vector<std::size_t> fold_rows(const std::vector<int>& folds, int v, bool complement) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if ((folds[i] == v) != complement) rows.push_back(i);
  }
  return rows;
}

}  // namespace blipcdf
