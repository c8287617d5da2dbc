#include "revar/longrange_ar.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "revar/error.hpp"

namespace revar {

void lowpass_step(std::span<double> state, std::span<const double> input, double alpha) {
  if (state.size() != input.size()) throw InputError("filter state and input differ in length");
  const double keep = 1.0 - alpha;
  for (std::size_t k = 0; k < state.size(); ++k) state[k] = keep * state[k] + alpha * input[k];
}

FilterBank::FilterBank(std::vector<double> alphas, std::size_t dimension)
    : alphas_(std::move(alphas)), dimension_(dimension), state_(alphas_.size() * dimension, 0.0) {
  for (double a : alphas_) {
    if (!(a > 0.0 && a <= 1.0)) throw InputError("filter gain must lie in (0, 1]");
  }
}

void FilterBank::reset() { std::fill(state_.begin(), state_.end(), 0.0); }

void FilterBank::step(std::span<const double> input, OpCounter* counter) {
  for (std::size_t i = 0; i < alphas_.size(); ++i) lowpass_step(state(i), input, alphas_[i]);
  if (counter) counter->add(2 * alphas_.size() * dimension_);
}

std::span<const double> FilterBank::state(std::size_t filter) const {
  return {state_.data() + filter * dimension_, dimension_};
}

std::span<double> FilterBank::state(std::size_t filter) {
  return {state_.data() + filter * dimension_, dimension_};
}

std::string to_string(AlphaRule rule) {
  return rule == AlphaRule::linear ? "linear" : "exact";
}

AlphaRule alpha_rule_from_string(const std::string& name) {
  if (name == "linear") return AlphaRule::linear;
  if (name == "exact") return AlphaRule::exact;
  throw InputError("unknown alpha rule '" + name + "' (expected linear or exact)");
}

std::vector<double> alphas_for_peak(double peak_frequency, std::size_t filters, AlphaRule rule) {
  if (!(peak_frequency > 0.0 && peak_frequency <= 0.5)) {
    throw InputError("peak frequency must lie in (0, 0.5] cycles per step");
  }
  const double omega = 2.0 * std::numbers::pi * peak_frequency / 10.0;
  const double first = rule == AlphaRule::linear ? omega : -std::expm1(-omega);
  if (!(first < 1.0)) throw Error(ErrorKind::internal, "derived filter gain is not below 1");
  std::vector<double> out;
  double alpha = first;
  for (std::size_t k = 0; k < filters; ++k) {
    out.push_back(alpha);
    alpha /= 10.0;
  }
  return out;
}

CutoffEstimate estimate_alphas(const RowMatrix& top, std::size_t filters, const WelchConfig& welch,
                               AlphaRule rule, std::size_t threads) {
  CutoffEstimate out;
  out.spectrum = welch_average(top, welch, std::nullopt, threads);
  out.peak_frequency = out.spectrum.frequencies[out.spectrum.peak_bin()];
  out.alphas = alphas_for_peak(out.peak_frequency, filters, rule);
  return out;
}

double lowpass_gain(double alpha, double frequency) {
  const std::complex<double> z =
      std::polar(1.0, -2.0 * std::numbers::pi * frequency);  // z^-1 on the unit circle
  return alpha / std::abs(1.0 - (1.0 - alpha) * z);
}

PredictorWeights PredictorWeights::zeros(std::size_t dimension, std::size_t lags,
                                         std::size_t filters) {
  const auto n = static_cast<Eigen::Index>(dimension);
  PredictorWeights out;
  out.lag.assign(lags, Matrix::Zero(n, n));
  out.filter.assign(filters, Matrix::Zero(n, n));
  return out;
}

Vector predict(std::span<const Vector> history, std::span<const Vector> filter_states,
               const PredictorWeights& weights, OpCounter* counter) {
  if (history.size() != weights.lag.size() || filter_states.size() != weights.filter.size()) {
    throw InputError("predictor inputs do not match the number of weight matrices");
  }
  const auto n = static_cast<Eigen::Index>(weights.dimension());
  Vector out = Vector::Zero(n);
  for (std::size_t l = 0; l < history.size(); ++l) {
    if (history[l].size() != n) throw InputError("lag vector has the wrong dimension");
    out.noalias() += weights.lag[l] * history[l];
  }
  for (std::size_t i = 0; i < filter_states.size(); ++i) {
    if (filter_states[i].size() != n) throw InputError("filter state has the wrong dimension");
    out.noalias() += weights.filter[i] * filter_states[i];
  }
  if (counter) {
    counter->add(static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n) *
                 (history.size() + filter_states.size()));
  }
  return out;
}

namespace {

/// Walks the series once, handing each regressor row (with its target
/// index) to `emit`. The filter bank sees x_n only after row n is emitted,
/// so the filter block of row n holds Y_{n-1}.
template <typename Emit>
void for_each_regressor_row(const RowMatrix& top, std::span<const double> alphas, std::size_t lags,
                            std::size_t first_target, Emit&& emit) {
  const auto nc = static_cast<std::size_t>(top.cols());
  const std::size_t width = nc * (lags + alphas.size());
  FilterBank filters(std::vector<double>(alphas.begin(), alphas.end()), nc);
  std::vector<double> row(width);
  std::vector<double> current(nc);
  for (Eigen::Index n = 0; n < top.rows(); ++n) {
    const auto step = static_cast<std::size_t>(n);
    if (step >= first_target) {
      for (std::size_t l = 1; l <= lags; ++l) {
        const auto src = top.row(n - static_cast<Eigen::Index>(l));
        std::copy(src.data(), src.data() + nc, row.begin() + static_cast<std::ptrdiff_t>((l - 1) * nc));
      }
      for (std::size_t i = 0; i < alphas.size(); ++i) {
        const auto s = filters.state(i);
        std::copy(s.begin(), s.end(), row.begin() + static_cast<std::ptrdiff_t>((lags + i) * nc));
      }
      emit(step, std::span<const double>(row));
    }
    for (std::size_t k = 0; k < nc; ++k) current[k] = top(n, static_cast<Eigen::Index>(k));
    filters.step(current);
  }
}

void check_training_shape(const RowMatrix& top, std::span<const double> alphas, std::size_t lags,
                          std::size_t first_target) {
  if (lags < 1) throw InputError("the predictor needs at least one lag");
  if (top.cols() < 1) throw InputError("no coefficients to fit");
  if (first_target < lags) throw InputError("first target index must be at least N_L");
  if (!top.allFinite()) throw InputError("coefficients contain non-finite values");
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw InputError("filter gain must lie in (0, 1]");
  }
  const auto steps = static_cast<std::size_t>(top.rows());
  const std::size_t width = static_cast<std::size_t>(top.cols()) * (lags + alphas.size());
  const std::size_t targets = steps > first_target ? steps - first_target : 0;
  if (targets < width) {
    throw InputError("least-squares system is underdetermined: " + std::to_string(targets) +
                     " targets for " + std::to_string(width) +
                     " regressors; need at least " + std::to_string(width + first_target) +
                     " training steps");
  }
}

constexpr double kRankThreshold = 1e-10;

}  // namespace

RowMatrix regressor_matrix(const RowMatrix& top, std::span<const double> alphas, std::size_t lags,
                           std::size_t first_target) {
  check_training_shape(top, alphas, lags, first_target);
  const auto width = static_cast<Eigen::Index>(static_cast<std::size_t>(top.cols()) *
                                               (lags + alphas.size()));
  RowMatrix z(top.rows() - static_cast<Eigen::Index>(first_target), width);
  for_each_regressor_row(top, alphas, lags, first_target,
                         [&](std::size_t n, std::span<const double> row) {
                           const auto r = static_cast<Eigen::Index>(n - first_target);
                           for (Eigen::Index k = 0; k < width; ++k) z(r, k) = row[static_cast<std::size_t>(k)];
                         });
  return z;
}

TrainingResult fit_weights(const RowMatrix& top, std::span<const double> alphas, std::size_t lags,
                           const TrainerOptions& options) {
  const std::size_t first_target = options.first_target.value_or(lags);
  check_training_shape(top, alphas, lags, first_target);
  const auto nc = top.cols();
  const auto width = static_cast<Eigen::Index>(static_cast<std::size_t>(nc) * (lags + alphas.size()));
  const auto block = static_cast<Eigen::Index>(std::max<std::size_t>(options.block_rows, 1));

  // Running factorisation: after each block, [R; 0] = Q^T [Z_seen] and
  // rhs = Q^T [targets_seen]; only the top `width` rows are kept.
  Matrix r = Matrix::Zero(width, width);
  Matrix rhs = Matrix::Zero(width, nc);
  Vector sse = Vector::Zero(nc);
  Matrix zblock(block, width);
  Matrix tblock(block, nc);
  Eigen::Index filled = 0;

  auto fold = [&]() {
    if (filled == 0) return;
    Matrix stacked(width + filled, width);
    stacked.topRows(width) = r;
    stacked.bottomRows(filled) = zblock.topRows(filled);
    Matrix stacked_rhs(width + filled, nc);
    stacked_rhs.topRows(width) = rhs;
    stacked_rhs.bottomRows(filled) = tblock.topRows(filled);
    Eigen::HouseholderQR<Matrix> qr(stacked);
    stacked_rhs.applyOnTheLeft(qr.householderQ().adjoint());
    r = qr.matrixQR().topRows(width).triangularView<Eigen::Upper>();
    rhs = stacked_rhs.topRows(width);
    sse += stacked_rhs.bottomRows(filled).colwise().squaredNorm().transpose();
    filled = 0;
  };

  for_each_regressor_row(top, alphas, lags, first_target,
                         [&](std::size_t n, std::span<const double> row) {
                           for (Eigen::Index k = 0; k < width; ++k) {
                             zblock(filled, k) = row[static_cast<std::size_t>(k)];
                           }
                           tblock.row(filled) = top.row(static_cast<Eigen::Index>(n));
                           if (++filled == block) fold();
                         });
  fold();

  TrainingResult out;
  out.regressors = static_cast<std::size_t>(width);
  out.targets = static_cast<std::size_t>(top.rows()) - first_target;

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(kRankThreshold);
  cod.compute(r);
  out.rank = static_cast<std::size_t>(cod.rank());
  const Matrix beta = cod.solve(rhs);
  if (out.rank < out.regressors) {
    out.warnings.push_back("regressor matrix is rank deficient (rank " +
                           std::to_string(out.rank) + " of " + std::to_string(out.regressors) +
                           "); using the minimum-norm least-squares solution");
  }
  if (!beta.allFinite()) throw NumericalError("least-squares solution is not finite");

  // Residual of the reduced system adds to the discarded-row residual.
  sse += (rhs - r * beta).colwise().squaredNorm().transpose();
  out.component_mse = sse / static_cast<double>(out.targets);
  out.training_mse = out.component_mse.mean();

  out.weights = PredictorWeights::zeros(static_cast<std::size_t>(nc), lags, alphas.size());
  for (std::size_t l = 0; l < lags; ++l) {
    out.weights.lag[l] = beta.middleRows(static_cast<Eigen::Index>(l) * nc, nc).transpose();
  }
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    out.weights.filter[i] =
        beta.middleRows(static_cast<Eigen::Index>(lags + i) * nc, nc).transpose();
  }
  return out;
}

RowMatrix residuals(const RowMatrix& coefficients, std::span<const double> alphas,
                    const PredictorWeights& weights) {
  const std::size_t lags = weights.lag.size();
  const auto nc = static_cast<Eigen::Index>(weights.dimension());
  if (lags < 1) throw InputError("weights have no lag matrices");
  if (weights.filter.size() != alphas.size()) throw InputError("one weight matrix per filter");
  if (nc > coefficients.cols()) throw InputError("predictor is wider than the coefficients");
  if (static_cast<std::size_t>(coefficients.rows()) <= lags) {
    throw InputError("series is too short for the number of lags");
  }
  RowMatrix out = coefficients.bottomRows(coefficients.rows() - static_cast<Eigen::Index>(lags));
  FilterBank filters(std::vector<double>(alphas.begin(), alphas.end()),
                     static_cast<std::size_t>(nc));
  std::vector<Vector> history(lags);
  std::vector<Vector> states(alphas.size());
  std::vector<double> current(static_cast<std::size_t>(nc));
  for (Eigen::Index n = 0; n < coefficients.rows(); ++n) {
    if (n >= static_cast<Eigen::Index>(lags)) {
      for (std::size_t l = 1; l <= lags; ++l) {
        history[l - 1] = coefficients.row(n - static_cast<Eigen::Index>(l)).head(nc).transpose();
      }
      for (std::size_t i = 0; i < alphas.size(); ++i) {
        const auto s = filters.state(i);
        states[i] = Eigen::Map<const Vector>(s.data(), nc);
      }
      out.row(n - static_cast<Eigen::Index>(lags)).head(nc) -=
          predict(history, states, weights).transpose();
    }
    for (Eigen::Index k = 0; k < nc; ++k) current[static_cast<std::size_t>(k)] = coefficients(n, k);
    filters.step(current);
  }
  return out;
}

}  // namespace revar
