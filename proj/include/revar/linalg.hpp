#pragma once

#include <cstddef>

#include "revar/data_model.hpp"

namespace revar {

/// Frames per block when accumulating Gram matrices. Fixed so that the
/// summation order, and hence every bit of the result, is independent of the
/// number of worker threads.
inline constexpr std::size_t kGramBlockRows = 2048;

/// Sum over rows of (x - center)(x - center)^T, blocked with a pairwise
/// reduction across blocks. `center` may be empty for an uncentred sum.
Matrix blocked_gram(const RowMatrix& data, const Vector& center, std::size_t threads);

/// Column means accumulated with the same blocking as blocked_gram.
Vector blocked_column_mean(const RowMatrix& data);

struct SymmetricEigen {
  Matrix vectors;  // columns, orthonormal
  Vector values;   // descending, clamped at zero
};

/// Eigendecomposition of a symmetric PSD matrix with eigenvalues sorted
/// descending, tiny negative round-off clamped to 0, and each eigenvector's
/// largest-magnitude entry made positive (lowest index wins near-ties).
SymmetricEigen symmetric_eigen_descending(const Matrix& symmetric);

}  // namespace revar
