#include "blipcdf/dataset.hpp"

#include <algorithm>
#include <sstream>

#include "blipcdf/errors.hpp"

namespace blipcdf {

void Dataset::validate() const {
  const std::size_t rows = n();
  if (rows < 2) throw DataError("dataset needs at least 2 rows");
  if (Y.size() != rows || static_cast<std::size_t>(W.rows()) != rows) {
    throw DataError("W, A and Y have different lengths");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    std::ostringstream os;
    if (A[i] != 0 && A[i] != 1) {
      os << "row " << i + 1 << ": treatment must be 0 or 1";
      throw DataError(os.str());
    }
    if (!(Y[i] >= 0.0 && Y[i] <= 1.0)) {
      os << "row " << i + 1 << ": scaled outcome " << Y[i] << " outside [0, 1]";
      throw DataError(os.str());
    }
    if (!W.row(static_cast<Eigen::Index>(i)).allFinite()) {
      os << "row " << i + 1 << ": non-finite covariate";
      throw DataError(os.str());
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.y_bounds = y_bounds;
  out.W.resize(static_cast<Eigen::Index>(idx.size()), W.cols());
  out.A.resize(idx.size());
  out.Y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.W.row(static_cast<Eigen::Index>(i)) = W.row(static_cast<Eigen::Index>(idx[i]));
    out.A[i] = A[idx[i]];
    out.Y[i] = Y[idx[i]];
  }
  return out;
}

std::vector<double> scale_outcome(const std::vector<double>& raw, std::pair<double, double>& bounds,
                                  bool bounds_given) {
  if (raw.empty()) throw DataError("empty outcome column");
  if (!bounds_given) {
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    bounds = {*lo, *hi};
  }
  const double span = bounds.second - bounds.first;
  if (!(span > 0.0)) throw DataError("outcome is constant; nothing to estimate");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = (raw[i] - bounds.first) / span;
    if (out[i] < 0.0 || out[i] > 1.0) {
      std::ostringstream os;
      os << "observation " << i + 1 << ": outcome " << raw[i] << " outside the supplied bounds";
      throw DataError(os.str());
    }
  }
  return out;
}

}  // namespace blipcdf
