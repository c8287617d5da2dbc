#include <doctest.h>

#include <cmath>

#include "revar/error.hpp"
#include "revar/linalg.hpp"
#include "revar/preprocessing.hpp"
#include "support/fixtures.hpp"

using namespace revar;

TEST_SUITE("preprocessing") {
  TEST_CASE("normalize uses the population convention") {
    RowMatrix x(2, 1);
    x << 0.0, 2.0;
    const auto n = normalize(x);
    CHECK(n.mean[0] == doctest::Approx(1.0));
    CHECK(n.stddev[0] == doctest::Approx(1.0));
    CHECK(x(0, 0) == doctest::Approx(-1.0));
    CHECK(x(1, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("normalize leaves standardised data alone") {
    RowMatrix x = fixtures::gaussian(1000, 4, 3);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      auto col = x.col(c);
      col.array() -= col.mean();
      col /= std::sqrt(col.squaredNorm() / static_cast<double>(col.size()));
    }
    const RowMatrix before = x;
    normalize(x);
    CHECK(fixtures::max_abs_diff(x, before) < 1e-10);
  }

  TEST_CASE("constant pixel is degenerate") {
    RowMatrix x = fixtures::gaussian(50, 3, 4);
    x.col(1).setConstant(2.5);
    try {
      normalize(x);
      FAIL("expected DegeneratePixelError");
    } catch (const DegeneratePixelError& e) {
      CHECK(e.pixel() == 1);
    }
  }

  TEST_CASE("two-pixel covariance has the closed-form eigenpairs") {
    // Rows (a, b) with R = [[2,1],[1,2]]: use +-(sqrt(3/2)(1,1)/sqrt2 ...) built from the
    // eigenbasis so the covariance is exact.
    const double s1 = std::sqrt(3.0), s2 = 1.0;
    const double r = 1.0 / std::sqrt(2.0);
    RowMatrix x(4, 2);
    x << s1 * r, s1 * r, -s1 * r, -s1 * r, s2 * r, -s2 * r, -s2 * r, s2 * r;
    x *= std::sqrt(2.0);
    const auto pca = fit_spatial_pca(x);
    CHECK(pca.variances[0] == doctest::Approx(3.0));
    CHECK(pca.variances[1] == doctest::Approx(1.0));
    CHECK(pca.basis(0, 0) == doctest::Approx(r));
    CHECK(pca.basis(1, 0) == doctest::Approx(r));
    CHECK(std::abs(pca.basis(0, 1)) == doctest::Approx(r));
    CHECK(pca.basis(0, 1) == doctest::Approx(-pca.basis(1, 1)));
  }

  TEST_CASE("identity covariance reconstructs") {
    RowMatrix x(4, 4);
    x.setIdentity();
    x *= 2.0;
    const auto pca = fit_spatial_pca(x);
    for (int k = 0; k < 4; ++k) CHECK(pca.variances[k] == doctest::Approx(1.0));
    const Matrix rebuilt = pca.basis * pca.variances.asDiagonal() * pca.basis.transpose();
    CHECK(fixtures::max_abs_diff(rebuilt, Matrix::Identity(4, 4)) < 1e-12);
  }

  TEST_CASE("rank-one data has one non-zero eigenvalue") {
    Vector v(3);
    v << 1.0, -2.0, 0.5;
    const RowMatrix c = fixtures::gaussian(500, 1, 5);
    RowMatrix x = c * v.transpose();
    const double second_moment = c.squaredNorm() / 500.0;
    const auto pca = fit_spatial_pca(x);
    CHECK(pca.variances[0] == doctest::Approx(v.squaredNorm() * second_moment));
    CHECK(std::abs(pca.variances[1]) < 1e-12);
    CHECK(std::abs(pca.variances[2]) < 1e-12);
    CHECK(pca.variances.minCoeff() >= 0.0);
  }

  TEST_CASE("decomposition matches the covariance and the sign convention") {
    RowMatrix x = fixtures::gaussian(3000, 12, 6);
    x.col(3) += 0.8 * x.col(1);
    x.col(7) -= 0.5 * x.col(2);
    normalize(x);
    const auto pca = fit_spatial_pca(x, 3);
    const Matrix r = x.transpose() * x / static_cast<double>(x.rows());
    const Matrix rebuilt = pca.basis * pca.variances.asDiagonal() * pca.basis.transpose();
    CHECK(fixtures::max_abs_diff(r, rebuilt) < 1e-8 * pca.variances[0]);
    CHECK(orthonormality_error(pca.basis) < 1e-10);
    for (Eigen::Index k = 1; k < pca.variances.size(); ++k) {
      CHECK(pca.variances[k] <= pca.variances[k - 1]);
    }
    for (Eigen::Index c = 0; c < pca.basis.cols(); ++c) {
      Eigen::Index arg;
      pca.basis.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(pca.basis(arg, c) > 0.0);
    }
    // Bit-identical regardless of threads.
    const auto again = fit_spatial_pca(x, 1);
    CHECK(again.basis == pca.basis);
    CHECK(again.variances == pca.variances);
  }

  TEST_CASE("select_subspace") {
    Vector a(3);
    a << 98, 1, 1;
    CHECK(select_subspace(a, 0.99) == 2);
    Vector b(5);
    b << 4, 3, 2, 0, 0;
    CHECK(select_subspace(b, 1.0) == 3);
    Vector c = Vector::Ones(4);
    CHECK(select_subspace(c, 0.5) == 2);

    const Vector d = Vector::LinSpaced(30, 5.0, 0.1);
    std::size_t prev = 0;
    for (double f = 0.05; f <= 1.0; f += 0.05) {
      const auto n = select_subspace(d, f);
      CHECK(n >= prev);
      prev = n;
    }
  }

  TEST_CASE("projection preserves energy and reconstructs") {
    RowMatrix raw = fixtures::gaussian(400, 6, 8);
    raw.col(2) += raw.col(0);
    raw.array() += 3.0;
    RowMatrix x = raw;
    const auto norm = normalize(x);
    const auto pca = fit_spatial_pca(x);
    const auto p = project(x, pca.basis, 3);
    CHECK(p.components == 3);
    CHECK(p.top().cols() == 3);
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
      CHECK(p.coefficients.row(n).norm() == doctest::Approx(x.row(n).norm()).epsilon(1e-10));
    }
    // Distinct coefficients are uncorrelated over the window.
    const Matrix cov = p.coefficients.transpose() * p.coefficients / static_cast<double>(x.rows());
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
      CHECK(cov(i, i) == doctest::Approx(pca.variances[i]));
      for (Eigen::Index j = 0; j < cov.cols(); ++j) {
        if (i != j) CHECK(std::abs(cov(i, j)) < 1e-6 * pca.variances[0]);
      }
    }
    RowMatrix back = p.coefficients * pca.basis.transpose();
    back = (back.array().rowwise() * norm.stddev.transpose().array()).rowwise() +
           norm.mean.transpose().array();
    CHECK(fixtures::max_abs_diff(back, raw) < 1e-8 * raw.cwiseAbs().maxCoeff());
  }

  TEST_CASE("projection special cases") {
    const RowMatrix x = fixtures::gaussian(5, 3, 9);
    CHECK(project(x, Matrix::Identity(3, 3), 3).coefficients == x);

    Matrix e(2, 2);
    const double r = 1.0 / std::sqrt(2.0);
    e << r, r, r, -r;
    RowMatrix one(1, 2);
    one << 1.0, 1.0;
    const auto p = project(one, e, 1);
    CHECK(p.coefficients(0, 0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(std::abs(p.coefficients(0, 1)) < 1e-15);
  }

  TEST_CASE("blocked Gram matrix is thread-count invariant") {
    const RowMatrix x = fixtures::gaussian(5000, 7, 10);
    const Vector mu = blocked_column_mean(x);
    const Matrix a = blocked_gram(x, mu, 1);
    const Matrix b = blocked_gram(x, mu, 4);
    CHECK(a == b);
    const RowMatrix centred = x.rowwise() - mu.transpose();
    CHECK(fixtures::max_abs_diff(a, centred.transpose() * centred) < 1e-9);
  }
}
