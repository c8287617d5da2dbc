#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "revar/data_model.hpp"
#include "revar/longrange_ar.hpp"

namespace revar {

/// Synthetic datasets with known structure, used to check the estimators.
enum class OracleKind {
  longrange_ar,  // diagonal long-range AR dynamics in a known orthonormal basis
  white,         // i.i.d. Gaussian frames
  translating,   // frozen sinusoidal pattern advected along x
  sinusoid,      // one temporal sinusoid per pixel with random phase
};

std::string to_string(OracleKind kind);
OracleKind oracle_kind_from_string(const std::string& name);

struct OracleSpec {
  OracleKind kind = OracleKind::longrange_ar;
  std::size_t rows = 8;
  std::size_t cols = 8;
  double pitch = 1.0;
  std::size_t frames = 10000;
  std::uint64_t seed = 0;
  double sampling_frequency = 1.0;
  double amplitude = 1.0;    // per-pixel scale
  double mean_offset = 0.1;  // std of the per-pixel means

  // longrange_ar
  std::size_t components = 20;
  std::size_t lags = 3;
  std::size_t filters = 2;
  double peak_frequency = 0.05;  // cycles per step
  double frequency_jitter = 0.03;  // relative spread of the per-component resonance
  double pole_radius = 0.95;
  double extra_lag_weight = 0.05;  // weight on lags beyond the second
  double filter_weight = -0.03;
  double variance_spread = 0.5;  // smallest / largest top-component variance
  double tail_fraction = 0.003;  // variance share of the components outside the top set
  AlphaRule alpha_rule = AlphaRule::linear;
  std::optional<std::size_t> burn_in;  // default: ten slowest filter time constants

  // translating / sinusoid
  double velocity = 0.5;     // pixels per step along x
  double wavelength = 8.0;   // pixels
  double frequency = 0.05;   // cycles per step (sinusoid)
  double noise = 0.0;        // additive white noise std
};

nlohmann::json to_json(const OracleSpec& spec);
OracleSpec oracle_spec_from_json(const nlohmann::json& j);

struct OracleDataset {
  PhaseScreenSeries series;
  /// Ground-truth parameters (longrange_ar only), in the same layout as a
  /// fitted model: basis columns ordered by decreasing stationary variance.
  std::optional<RevarModel> truth;
  /// Noise-free top coefficients of every frame (longrange_ar only).
  RowMatrix coefficients;
};

/// Deterministic in the spec (including seed). Throws StabilityError when
/// the requested dynamics diverge.
OracleDataset make_oracle(const OracleSpec& spec);

/// Orthonormal basis: normalised Sylvester-Hadamard when n is a power of two
/// (every pixel then carries the same variance), otherwise Q of a seeded
/// Gaussian matrix.
Matrix oracle_basis(std::size_t n, std::uint64_t seed);

/// Largest eigenvalue modulus of the joint lag/filter state transition.
double predictor_spectral_radius(const PredictorWeights& weights, std::span<const double> alphas);

/// Dense random weights rescaled so the joint transition has the given
/// spectral radius (within 1e-6).
PredictorWeights random_stable_weights(std::size_t dimension, std::size_t lags,
                                       std::span<const double> alphas, double radius,
                                       std::uint64_t seed);

/// Runs x_n = predictor(x_{n-1..n-L}, Y_{n-1}) + e_n from the given initial
/// history (most recent first) with filters started at zero. `innovation_std`
/// empty means e == 0. Rows of the result are x_0 .. x_{steps-1}.
RowMatrix simulate_predictor(const PredictorWeights& weights, std::span<const double> alphas,
                             std::span<const Vector> initial_history, std::size_t steps,
                             const Vector& innovation_std, std::uint64_t seed);

}  // namespace revar
