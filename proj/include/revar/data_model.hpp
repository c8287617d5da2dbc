#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace revar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Time-major storage: one row per frame (or per time step).
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PixelCoord {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const PixelCoord&) const = default;
};

/// Rectangular grid with a validity mask. Masked pixels are numbered in
/// row-major order; that ordering is part of the on-disk formats.
class ApertureGeometry {
 public:
  ApertureGeometry() = default;
  ApertureGeometry(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> mask,
                   double pitch_x = 1.0, double pitch_y = 1.0);

  static ApertureGeometry rectangle(std::size_t rows, std::size_t cols,
                                    double pitch_x = 1.0, double pitch_y = 1.0);
  /// Pixels whose centre lies inside the inscribed ellipse.
  static ApertureGeometry circle(std::size_t rows, std::size_t cols,
                                 double pitch_x = 1.0, double pitch_y = 1.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t pixel_count() const noexcept { return coords_.size(); }
  double pitch_x() const noexcept { return pitch_x_; }
  double pitch_y() const noexcept { return pitch_y_; }
  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
  bool is_full_rectangle() const noexcept { return coords_.size() == rows_ * cols_; }

  bool contains(std::ptrdiff_t row, std::ptrdiff_t col) const noexcept;
  /// Flat index of a masked pixel, nullopt for unmasked or out-of-grid cells.
  std::optional<std::size_t> pixel_index(std::ptrdiff_t row, std::ptrdiff_t col) const noexcept;
  PixelCoord pixel_coord(std::size_t index) const { return coords_.at(index); }

  /// `frame` is rows*cols values, row-major.
  Vector flatten(std::span<const double> frame) const;
  std::vector<double> unflatten(std::span<const double> values, double fill) const;

  bool operator==(const ApertureGeometry& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> mask_;
  std::vector<std::int64_t> index_;  // -1 where unmasked
  std::vector<PixelCoord> coords_;
  double pitch_x_ = 1.0;
  double pitch_y_ = 1.0;
};

/// Time-ordered stack of aperture-masked frames (OPD in microns).
struct PhaseScreenSeries {
  ApertureGeometry geometry;
  RowMatrix frames;  // frame_count x pixel_count
  double sampling_frequency = 1.0;  // Hz
  std::string label;
  std::string units = "microns";
  /// Free-form provenance (seed, generator, model hash) carried into meta.json.
  std::string provenance_json;

  std::size_t frame_count() const noexcept { return static_cast<std::size_t>(frames.rows()); }
  std::size_t pixel_count() const noexcept { return geometry.pixel_count(); }

  /// Throws InputError when shapes disagree, values are non-finite, or f_s <= 0.
  void validate() const;
  /// Frames [first, first + count).
  PhaseScreenSeries slice(std::size_t first, std::size_t count) const;
};

/// Training metadata recorded alongside the fitted parameters.
struct FitProvenance {
  std::size_t training_frames = 0;
  double variance_fraction = 0.99;
  double cutoff_frequency = 0.0;  // cycles per time step; 0 when not estimated
  std::string alpha_rule = "linear";
  double sampling_frequency = 1.0;
  std::string label;
};

/// The full fitted parameter set: normalisation, first PCA, long-range AR
/// weights with filter gains, and the second (re-whitening) PCA.
struct RevarModel {
  ApertureGeometry geometry;
  Vector mean;          // mu_X, per pixel
  Vector scale;         // sigma_X, per pixel, > 0
  Matrix basis;         // E, columns are principal components
  Vector variances;     // lambda, descending
  std::size_t components = 0;  // N_c
  std::size_t lags = 0;        // N_L
  std::vector<double> alphas;  // filter gains, one per low-pass filter
  std::vector<Matrix> lag_weights;     // A_X, N_L matrices N_c x N_c
  std::vector<Matrix> filter_weights;  // A_Y, N_m matrices N_c x N_c
  Vector residual_mean;        // mu_xi
  Matrix residual_basis;       // U
  Vector residual_variances;   // sigma_xi, descending
  double inverse_floor = 1e-12;
  FitProvenance provenance;

  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(mean.size()); }
  std::size_t filter_count() const noexcept { return alphas.size(); }

  /// Full invariant check; throws InputError with a diagnostic.
  void validate() const;
  /// Cheaper check used on load: orthonormality on `pairs` random column pairs.
  void validate_sampled(std::size_t pairs, std::uint64_t seed) const;
};

/// Max-entry deviation of Q^T Q from the identity.
double orthonormality_error(const Matrix& q);

}  // namespace revar
