#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revar/data_model.hpp"
#include "revar/metrics.hpp"

namespace revar {

/// Counts scalar multiplications performed by the predictor and synthesis
/// kernels. Pass nullptr to skip counting.
struct OpCounter {
  std::uint64_t multiplies = 0;
  void add(std::uint64_t n) noexcept { multiplies += n; }
};

/// Y <- (1 - alpha) Y + alpha x, elementwise.
void lowpass_step(std::span<double> state, std::span<const double> input, double alpha);

/// First-order low-pass filters H_i(z) = alpha_i / (1 - (1 - alpha_i) z^-1)
/// applied in parallel to one vector signal. State starts at zero.
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(std::vector<double> alphas, std::size_t dimension);

  void reset();
  void step(std::span<const double> input, OpCounter* counter = nullptr);

  std::size_t size() const noexcept { return alphas_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  std::span<const double> state(std::size_t filter) const;
  std::span<double> state(std::size_t filter);

 private:
  std::vector<double> alphas_;
  std::size_t dimension_ = 0;
  std::vector<double> state_;  // filter-major
};

enum class AlphaRule {
  linear,  // alpha_1 = 2 pi f_c / 10
  exact,   // alpha_1 = 1 - exp(-2 pi f_c / 10)
};

std::string to_string(AlphaRule rule);
AlphaRule alpha_rule_from_string(const std::string& name);

struct CutoffEstimate {
  double peak_frequency = 0.0;  // cycles per time step
  std::vector<double> alphas;   // alpha_k = alpha_1 / 10^(k-1)
  SpectrumEstimate spectrum;
};

/// Gains for `filters` low-pass filters whose cut-offs sit one, two, ...
/// decades below `peak_frequency` (cycles per step).
std::vector<double> alphas_for_peak(double peak_frequency, std::size_t filters, AlphaRule rule);

/// Locates the peak of the component-averaged Welch spectrum of the top
/// coefficients (DC excluded) and derives the filter gains from it.
CutoffEstimate estimate_alphas(const RowMatrix& top, std::size_t filters,
                               const WelchConfig& welch = {}, AlphaRule rule = AlphaRule::linear,
                               std::size_t threads = 1);

/// |H(e^{j 2 pi f})| for a single filter gain.
double lowpass_gain(double alpha, double frequency);

/// Prediction weights: `lag[l-1]` multiplies the coefficients l steps back,
/// `filter[i]` multiplies the one-step-delayed state of filter i.
struct PredictorWeights {
  std::vector<Matrix> lag;
  std::vector<Matrix> filter;

  std::size_t dimension() const {
    return lag.empty() ? 0 : static_cast<std::size_t>(lag.front().rows());
  }
  static PredictorWeights zeros(std::size_t dimension, std::size_t lags, std::size_t filters);
};

/// x_hat = sum_l A_X,l * history[l-1] + sum_i A_Y,i * filter_states[i].
/// `history[0]` is the most recent vector (lag 1).
Vector predict(std::span<const Vector> history, std::span<const Vector> filter_states,
               const PredictorWeights& weights, OpCounter* counter = nullptr);

struct TrainerOptions {
  /// First target index of the least-squares sum. Defaults to N_L; a larger
  /// value puts models with different lag counts on a common sample.
  std::optional<std::size_t> first_target;
  /// Rows of the regressor matrix folded into the running factorisation at a time.
  std::size_t block_rows = 4096;
};

struct TrainingResult {
  PredictorWeights weights;
  double training_mse = 0.0;  // mean over targets and components
  Vector component_mse;       // per component
  std::size_t rank = 0;
  std::size_t regressors = 0;
  std::size_t targets = 0;
  std::vector<std::string> warnings;
};

/// Least-squares fit of the long-range predictor on the top coefficients
/// (rows are time steps). All components share one regressor matrix, which
/// is factored once by a blocked sequential Householder QR; rank-deficient
/// problems fall back to the minimum-norm solution with a warning.
TrainingResult fit_weights(const RowMatrix& top, std::span<const double> alphas, std::size_t lags,
                           const TrainerOptions& options = {});

/// The regressor matrix Z explicitly: row for target n holds the top
/// coefficients at n-1 .. n-N_L followed by the filter states at n-1.
RowMatrix regressor_matrix(const RowMatrix& top, std::span<const double> alphas, std::size_t lags,
                           std::size_t first_target);

/// Residuals xi_n = x_n - pad(x_hat_n) for n = N_L .. N_T-1; coefficient
/// columns beyond the predictor dimension pass through unchanged.
RowMatrix residuals(const RowMatrix& coefficients, std::span<const double> alphas,
                    const PredictorWeights& weights);

}  // namespace revar
