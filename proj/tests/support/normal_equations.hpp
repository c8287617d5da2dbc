#pragma once

// Brute-force reference for the long-range predictor least-squares problem.
// Shares no code with the library trainer: the regressors are rebuilt from
// the recursion directly and the normal equations are solved by Gaussian
// elimination in long double.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Table = std::vector<std::vector<double>>;  // [row][column]

// Row for target n: x_{n-1} .. x_{n-L}, then each filter state at n-1.
inline Table naive_regressors(const Table& x, const std::vector<double>& alphas, std::size_t lags,
                              std::size_t first_target) {
  const std::size_t d = x.front().size();
  std::vector<std::vector<double>> filt(alphas.size(), std::vector<double>(d, 0.0));
  // states[n][i] holds filter i after consuming x_n
  std::vector<std::vector<std::vector<double>>> states;
  for (std::size_t n = 0; n < x.size(); ++n) {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        filt[i][k] = (1.0 - alphas[i]) * filt[i][k] + alphas[i] * x[n][k];
      }
    }
    states.push_back(filt);
  }
  Table z;
  for (std::size_t n = first_target; n < x.size(); ++n) {
    std::vector<double> row;
    for (std::size_t l = 1; l <= lags; ++l) row.insert(row.end(), x[n - l].begin(), x[n - l].end());
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      row.insert(row.end(), states[n - 1][i].begin(), states[n - 1][i].end());
    }
    z.push_back(std::move(row));
  }
  return z;
}

// beta (p x m) minimizing |Z beta - Y|, via (Z^T Z) beta = Z^T Y.
inline Table solve_normal_equations(const Table& z, const Table& y) {
  const std::size_t p = z.front().size();
  const std::size_t m = y.front().size();
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + m, 0.0L));
  for (std::size_t r = 0; r < z.size(); ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) a[i][j] += (long double)z[r][i] * z[r][j];
      for (std::size_t j = 0; j < m; ++j) a[i][p + j] += (long double)z[r][i] * y[r][j];
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    if (a[piv][c] == 0.0L) throw std::runtime_error("singular normal equations");
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j < p + m; ++j) a[r][j] -= f * a[c][j];
    }
  }
  Table beta(p, std::vector<double>(m));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < m; ++j) beta[i][j] = static_cast<double>(a[i][p + j] / a[i][i]);
  }
  return beta;
}

}  // namespace oracle
