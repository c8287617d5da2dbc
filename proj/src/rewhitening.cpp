#include "revar/rewhitening.hpp"

#include <cmath>

#include "revar/error.hpp"
#include "revar/linalg.hpp"

namespace revar {

Vector floored_sqrt(const Vector& variances, double inverse_floor) {
  Vector out = Vector::Zero(variances.size());
  if (variances.size() == 0) return out;
  const double cutoff = inverse_floor * variances.maxCoeff();
  for (Eigen::Index i = 0; i < variances.size(); ++i) {
    if (variances[i] > cutoff && variances[i] > 0.0) out[i] = std::sqrt(variances[i]);
  }
  return out;
}

std::size_t WhiteningTransform::active_count() const {
  const Vector roots = floored_sqrt(variances, inverse_floor);
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < roots.size(); ++i) n += roots[i] > 0.0 ? 1 : 0;
  return n;
}

Vector WhiteningTransform::whiten(const Vector& residual) const {
  if (residual.size() != mean.size()) throw InputError("residual has the wrong dimension");
  const Vector roots = floored_sqrt(variances, inverse_floor);
  Vector out = basis.transpose() * (residual - mean);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = roots[i] > 0.0 ? out[i] / roots[i] : 0.0;
  return out;
}

Vector WhiteningTransform::unwhiten(const Vector& white) const {
  if (white.size() != mean.size()) throw InputError("noise vector has the wrong dimension");
  const Vector roots = floored_sqrt(variances, inverse_floor);
  return basis * roots.cwiseProduct(white) + mean;
}

WhiteningTransform fit_whitening(const RowMatrix& residuals, double inverse_floor,
                                 std::size_t threads) {
  if (residuals.rows() < 2) throw InputError("re-whitening needs at least two residual vectors");
  if (!residuals.allFinite()) throw InputError("residuals contain non-finite values");
  if (!(inverse_floor >= 0.0 && inverse_floor < 1.0)) {
    throw InputError("inverse floor must lie in [0, 1)");
  }
  WhiteningTransform out;
  out.inverse_floor = inverse_floor;
  out.mean = blocked_column_mean(residuals);
  Matrix covariance = blocked_gram(residuals, out.mean, threads);
  covariance /= static_cast<double>(residuals.rows());
  auto eig = symmetric_eigen_descending(covariance);
  out.basis = std::move(eig.vectors);
  out.variances = std::move(eig.values);
  return out;
}

}  // namespace revar
