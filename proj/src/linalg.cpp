#include "revar/linalg.hpp"

#include <cmath>
#include <vector>

#include "revar/error.hpp"
#include "revar/parallel.hpp"

namespace revar {

namespace {

template <typename T>
T pairwise_reduce(std::vector<T>& parts) {
  for (std::size_t width = 1; width < parts.size(); width *= 2) {
    for (std::size_t i = 0; i + width < parts.size(); i += 2 * width) {
      parts[i] += parts[i + width];
    }
  }
  return parts.front();
}

std::size_t block_count(Eigen::Index rows) {
  return (static_cast<std::size_t>(rows) + kGramBlockRows - 1) / kGramBlockRows;
}

}  // namespace

Matrix blocked_gram(const RowMatrix& data, const Vector& center, std::size_t threads) {
  const Eigen::Index cols = data.cols();
  const std::size_t blocks = block_count(data.rows());
  if (blocks == 0) return Matrix::Zero(cols, cols);
  std::vector<Matrix> parts(blocks);
  parallel_chunks(blocks, threads, [&](std::size_t b) {
    const auto first = static_cast<Eigen::Index>(b * kGramBlockRows);
    const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(kGramBlockRows),
                                              data.rows() - first);
    Matrix block = data.middleRows(first, count);
    if (center.size() == cols) block.rowwise() -= center.transpose();
    Matrix g = Matrix::Zero(cols, cols);
    g.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    parts[b] = std::move(g);
  });
  return pairwise_reduce(parts);
}

Vector blocked_column_mean(const RowMatrix& data) {
  const std::size_t blocks = block_count(data.rows());
  if (blocks == 0) return Vector::Zero(data.cols());
  std::vector<Vector> parts(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto first = static_cast<Eigen::Index>(b * kGramBlockRows);
    const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(kGramBlockRows),
                                              data.rows() - first);
    parts[b] = data.middleRows(first, count).colwise().sum().transpose();
  }
  return pairwise_reduce(parts) / static_cast<double>(data.rows());
}

SymmetricEigen symmetric_eigen_descending(const Matrix& symmetric) {
  if (!symmetric.allFinite()) throw NumericalError("covariance matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  const Eigen::Index n = symmetric.rows();
  SymmetricEigen out{Matrix(n, n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = n - 1 - i;
    out.values[i] = std::max(0.0, solver.eigenvalues()[src]);
    Vector v = solver.eigenvectors().col(src);
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(v[k]) >= peak * (1.0 - 1e-12)) {
        if (v[k] < 0.0) v = -v;
        break;
      }
    }
    out.vectors.col(i) = v;
  }
  return out;
}

}  // namespace revar
