#pragma once

#include <cstddef>

#include "revar/data_model.hpp"

namespace revar {

struct Normalization {
  Vector mean;    // mu_X
  Vector stddev;  // sigma_X, population convention
};

/// Subtracts the per-pixel mean and divides by the per-pixel population
/// standard deviation, in place. A pixel whose deviation is at or below
/// `floor_ratio` times the largest deviation raises DegeneratePixelError.
Normalization normalize(RowMatrix& frames, double floor_ratio = 1e-12);

struct SpatialPca {
  Matrix basis;      // E
  Vector variances;  // lambda, descending
};

/// Eigendecomposition of (1/N_T) sum_n x_n x_n^T for already-normalised frames.
SpatialPca fit_spatial_pca(const RowMatrix& normalized, std::size_t threads = 1);

/// Smallest N_c whose leading eigenvalues hold at least `fraction` of the total.
std::size_t select_subspace(const Vector& variances, double fraction);

/// Principal coefficients (row n is E^T x_n) and the size of the prediction
/// subspace; the first `components` columns are the top coefficients.
struct NormalizedSeries {
  RowMatrix coefficients;
  std::size_t components = 0;

  auto top() const { return coefficients.leftCols(static_cast<Eigen::Index>(components)); }
};

NormalizedSeries project(const RowMatrix& normalized, const Matrix& basis,
                         std::size_t components);

}  // namespace revar
