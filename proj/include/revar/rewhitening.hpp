#pragma once

#include <cstddef>
#include <span>

#include "revar/data_model.hpp"

namespace revar {

/// Second spatial PCA of the predictor residuals. Eigenvalues at or below
/// inverse_floor times the largest are treated as exactly zero: whiten()
/// maps those directions to 0 and unwhiten() injects nothing there.
struct WhiteningTransform {
  Vector mean;       // mu_xi
  Matrix basis;      // U
  Vector variances;  // sigma_xi, descending
  double inverse_floor = 1e-12;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(mean.size()); }
  /// Number of leading directions above the floor.
  std::size_t active_count() const;

  Vector whiten(const Vector& residual) const;
  Vector unwhiten(const Vector& white) const;
};

WhiteningTransform fit_whitening(const RowMatrix& residuals, double inverse_floor = 1e-12,
                                 std::size_t threads = 1);

/// sqrt of the variances with floored entries set to zero.
Vector floored_sqrt(const Vector& variances, double inverse_floor);

}  // namespace revar
