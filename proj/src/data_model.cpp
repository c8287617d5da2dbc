#include "revar/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "revar/error.hpp"

namespace revar {

ApertureGeometry::ApertureGeometry(std::size_t rows, std::size_t cols,
                                   std::vector<std::uint8_t> mask, double pitch_x,
                                   double pitch_y)
    : rows_(rows), cols_(cols), mask_(std::move(mask)), pitch_x_(pitch_x), pitch_y_(pitch_y) {
  if (rows_ == 0 || cols_ == 0) throw InputError("aperture must have positive rows and cols");
  if (mask_.size() != rows_ * cols_) {
    throw InputError("mask has " + std::to_string(mask_.size()) + " entries, expected " +
                     std::to_string(rows_ * cols_));
  }
  if (!(pitch_x_ > 0.0) || !(pitch_y_ > 0.0) || !std::isfinite(pitch_x_) ||
      !std::isfinite(pitch_y_)) {
    throw InputError("pixel pitch must be positive and finite");
  }
  index_.assign(rows_ * cols_, -1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      auto& m = mask_[r * cols_ + c];
      m = m ? 1 : 0;
      if (m) {
        index_[r * cols_ + c] = static_cast<std::int64_t>(coords_.size());
        coords_.push_back({r, c});
      }
    }
  }
  if (coords_.empty()) throw InputError("aperture mask selects no pixels");
}

ApertureGeometry ApertureGeometry::rectangle(std::size_t rows, std::size_t cols, double pitch_x,
                                             double pitch_y) {
  return ApertureGeometry(rows, cols, std::vector<std::uint8_t>(rows * cols, 1), pitch_x,
                          pitch_y);
}

ApertureGeometry ApertureGeometry::circle(std::size_t rows, std::size_t cols, double pitch_x,
                                          double pitch_y) {
  std::vector<std::uint8_t> mask(rows * cols, 0);
  const double cy = 0.5 * static_cast<double>(rows);
  const double cx = 0.5 * static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double dy = (static_cast<double>(r) + 0.5 - cy) / cy;
      const double dx = (static_cast<double>(c) + 0.5 - cx) / cx;
      mask[r * cols + c] = (dx * dx + dy * dy <= 1.0) ? 1 : 0;
    }
  }
  return ApertureGeometry(rows, cols, std::move(mask), pitch_x, pitch_y);
}

bool ApertureGeometry::contains(std::ptrdiff_t row, std::ptrdiff_t col) const noexcept {
  return pixel_index(row, col).has_value();
}

std::optional<std::size_t> ApertureGeometry::pixel_index(std::ptrdiff_t row,
                                                         std::ptrdiff_t col) const noexcept {
  if (row < 0 || col < 0 || static_cast<std::size_t>(row) >= rows_ ||
      static_cast<std::size_t>(col) >= cols_) {
    return std::nullopt;
  }
  const auto idx = index_[static_cast<std::size_t>(row) * cols_ + static_cast<std::size_t>(col)];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

Vector ApertureGeometry::flatten(std::span<const double> frame) const {
  if (frame.size() != rows_ * cols_) {
    throw InputError("frame has " + std::to_string(frame.size()) + " values, geometry expects " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  Vector out(static_cast<Eigen::Index>(coords_.size()));
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = frame[coords_[i].row * cols_ + coords_[i].col];
  }
  return out;
}

std::vector<double> ApertureGeometry::unflatten(std::span<const double> values,
                                                double fill) const {
  if (values.size() != coords_.size()) {
    throw InputError("vector has " + std::to_string(values.size()) + " values, geometry has " +
                     std::to_string(coords_.size()) + " pixels");
  }
  std::vector<double> frame(rows_ * cols_, fill);
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    frame[coords_[i].row * cols_ + coords_[i].col] = values[i];
  }
  return frame;
}

bool ApertureGeometry::operator==(const ApertureGeometry& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && mask_ == other.mask_ &&
         pitch_x_ == other.pitch_x_ && pitch_y_ == other.pitch_y_;
}

void PhaseScreenSeries::validate() const {
  if (frames.rows() < 1) throw InputError("phase-screen series has no frames");
  if (static_cast<std::size_t>(frames.cols()) != geometry.pixel_count()) {
    throw InputError("frames have " + std::to_string(frames.cols()) +
                     " pixels, geometry has " + std::to_string(geometry.pixel_count()));
  }
  if (!(sampling_frequency > 0.0) || !std::isfinite(sampling_frequency)) {
    throw InputError("sampling frequency must be positive");
  }
  if (!frames.allFinite()) {
    for (Eigen::Index n = 0; n < frames.rows(); ++n) {
      if (!frames.row(n).allFinite()) {
        throw InputError("frame " + std::to_string(n) + " contains non-finite values");
      }
    }
  }
}

PhaseScreenSeries PhaseScreenSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > frame_count()) {
    throw InputError("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") exceeds " + std::to_string(frame_count()) + " frames");
  }
  PhaseScreenSeries out;
  out.geometry = geometry;
  out.frames = frames.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
  out.sampling_frequency = sampling_frequency;
  out.label = label;
  out.units = units;
  return out;
}

double orthonormality_error(const Matrix& q) {
  const Matrix gram = q.transpose() * q;
  return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

namespace {

constexpr double kOrthoTolerance = 1e-8;

void require(bool ok, const std::string& what) {
  if (!ok) throw InputError("model invariant violated: " + what);
}

bool descending_nonnegative(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) return false;
    if (i > 0 && v[i] > v[i - 1]) return false;
  }
  return true;
}

void validate_shapes(const RevarModel& m) {
  const auto np = static_cast<Eigen::Index>(m.geometry.pixel_count());
  const auto nc = static_cast<Eigen::Index>(m.components);
  require(np > 0, "empty geometry");
  require(m.mean.size() == np, "mu_X length");
  require(m.scale.size() == np, "sigma_X length");
  require(m.basis.rows() == np && m.basis.cols() == np, "E shape");
  require(m.variances.size() == np, "lambda length");
  require(nc >= 1 && nc <= np, "N_c out of range");
  require(m.lags >= 1, "N_L must be positive");
  require(m.lag_weights.size() == m.lags, "A_X count");
  require(m.filter_weights.size() == m.alphas.size(), "A_Y count");
  for (const auto& a : m.lag_weights) {
    require(a.rows() == nc && a.cols() == nc, "A_X shape");
    require(a.allFinite(), "A_X finite");
  }
  for (const auto& a : m.filter_weights) {
    require(a.rows() == nc && a.cols() == nc, "A_Y shape");
    require(a.allFinite(), "A_Y finite");
  }
  for (double alpha : m.alphas) require(alpha > 0.0 && alpha <= 1.0, "alpha in (0,1]");
  require(m.residual_mean.size() == np, "mu_xi length");
  require(m.residual_basis.rows() == np && m.residual_basis.cols() == np, "U shape");
  require(m.residual_variances.size() == np, "sigma_xi length");
  require(m.mean.allFinite() && m.residual_mean.allFinite(), "means finite");
  require(m.basis.allFinite() && m.residual_basis.allFinite(), "bases finite");
  for (Eigen::Index i = 0; i < np; ++i) {
    require(m.scale[i] > 0.0 && std::isfinite(m.scale[i]), "sigma_X strictly positive");
  }
  require(descending_nonnegative(m.variances), "lambda descending and nonnegative");
  require(descending_nonnegative(m.residual_variances), "sigma_xi descending and nonnegative");
  const double total = m.variances.sum();
  require(total > 0.0, "lambda not all zero");
  const double kept = m.variances.head(nc).sum();
  require(kept / total >= m.provenance.variance_fraction - 1e-12,
          "retained variance below the fitted fraction");
}

}  // namespace

void RevarModel::validate() const {
  validate_shapes(*this);
  require(orthonormality_error(basis) < kOrthoTolerance, "E orthonormal");
  require(orthonormality_error(residual_basis) < kOrthoTolerance, "U orthonormal");
}

void RevarModel::validate_sampled(std::size_t pairs, std::uint64_t seed) const {
  validate_shapes(*this);
  const auto np = basis.cols();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, np - 1);
  auto check = [&](const Matrix& q, const char* name) {
    for (Eigen::Index i = 0; i < np; ++i) {
      require(std::abs(q.col(i).squaredNorm() - 1.0) < kOrthoTolerance,
              std::string(name) + " column norm");
    }
    for (std::size_t p = 0; p < pairs && np > 1; ++p) {
      const Eigen::Index a = pick(rng);
      Eigen::Index b = pick(rng);
      if (a == b) b = (a + 1) % np;
      require(std::abs(q.col(a).dot(q.col(b))) < kOrthoTolerance,
              std::string(name) + " columns orthogonal");
    }
  };
  check(basis, "E");
  check(residual_basis, "U");
}

}  // namespace revar
