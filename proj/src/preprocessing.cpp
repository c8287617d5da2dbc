#include "revar/preprocessing.hpp"

#include <cmath>

#include "revar/error.hpp"
#include "revar/linalg.hpp"

namespace revar {

Normalization normalize(RowMatrix& frames, double floor_ratio) {
  if (frames.rows() < 2) throw InputError("normalisation needs at least two frames");
  if (!frames.allFinite()) throw InputError("frames contain non-finite values");
  Normalization out;
  out.mean = blocked_column_mean(frames);
  frames.rowwise() -= out.mean.transpose();
  // Squared deviations via the same blocking as the mean.
  RowMatrix squares = frames.cwiseAbs2();
  out.stddev = blocked_column_mean(squares).cwiseSqrt();
  const double largest = out.stddev.maxCoeff();
  const double floor = floor_ratio * largest;
  for (Eigen::Index i = 0; i < out.stddev.size(); ++i) {
    if (!(out.stddev[i] > floor) || !(out.stddev[i] > 0.0)) {
      throw DegeneratePixelError(static_cast<std::size_t>(i), out.stddev[i]);
    }
  }
  frames.array().rowwise() /= out.stddev.transpose().array();
  return out;
}

SpatialPca fit_spatial_pca(const RowMatrix& normalized, std::size_t threads) {
  if (normalized.rows() < 1) throw InputError("spatial PCA needs at least one frame");
  Matrix covariance = blocked_gram(normalized, Vector(), threads);
  covariance /= static_cast<double>(normalized.rows());
  auto eig = symmetric_eigen_descending(covariance);
  return {std::move(eig.vectors), std::move(eig.values)};
}

std::size_t select_subspace(const Vector& variances, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InputError("variance fraction must lie in (0, 1]");
  }
  const double total = variances.sum();
  if (!(total > 0.0)) throw InputError("all principal variances are zero");
  if (fraction == 1.0) {
    std::size_t last = 0;
    for (Eigen::Index i = 0; i < variances.size(); ++i) {
      if (variances[i] > 0.0) last = static_cast<std::size_t>(i);
    }
    return last + 1;
  }
  const double target = fraction * total;
  double running = 0.0;
  for (Eigen::Index i = 0; i < variances.size(); ++i) {
    running += variances[i];
    if (running >= target) return static_cast<std::size_t>(i) + 1;
  }
  return static_cast<std::size_t>(variances.size());
}

NormalizedSeries project(const RowMatrix& normalized, const Matrix& basis,
                         std::size_t components) {
  if (normalized.cols() != basis.rows()) throw InputError("basis does not match frame width");
  if (components < 1 || components > static_cast<std::size_t>(basis.cols())) {
    throw InputError("subspace size out of range");
  }
  return {normalized * basis, components};
}

}  // namespace revar
