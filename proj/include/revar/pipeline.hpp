#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revar/data_model.hpp"
#include "revar/longrange_ar.hpp"
#include "revar/metrics.hpp"
#include "revar/synthesis.hpp"

namespace revar {

struct FitConfig {
  std::size_t lags = 4;
  std::size_t filters = 2;
  double variance_fraction = 0.99;
  double train_fraction = 0.8;
  WelchConfig welch;
  AlphaRule alpha_rule = AlphaRule::linear;
  /// Skips cut-off estimation; must hold `filters` gains in (0, 1].
  std::optional<std::vector<double>> alphas;
  /// Full-space single-lag VAR: N_L = 1, N_m = 0, all components.
  bool baseline = false;
  std::size_t threads = 1;
  double pixel_floor = 1e-12;
  double inverse_floor = 1e-12;
  /// See TrainerOptions::first_target.
  std::optional<std::size_t> first_target;

  void validate() const;
  /// The configuration actually used (baseline applied).
  FitConfig effective() const;
};

struct WhitenessStats {
  std::size_t samples = 0;
  std::size_t active_components = 0;
  std::size_t max_lag = 0;
  double max_offdiagonal_covariance = 0.0;
  double max_autocorrelation = 0.0;
  double bound = 0.0;  // 5 / sqrt(samples)
};

/// Sample covariance and lag-1..max_lag autocorrelation of the whitened
/// residuals, restricted to directions above the inverse floor.
WhitenessStats whiteness(const RowMatrix& residuals, const RevarModel& model, std::size_t max_lag);

struct FitReport {
  std::size_t total_frames = 0;
  std::size_t training_frames = 0;
  std::size_t held_out_frames = 0;
  std::size_t pixels = 0;
  std::size_t components = 0;
  std::size_t lags = 0;
  std::size_t filters = 0;
  double variance_fraction = 0.0;
  double retained_variance = 0.0;
  std::optional<double> cutoff_frequency;  // cycles per step
  std::vector<double> alphas;
  double training_mse = 0.0;
  std::vector<double> component_mse;
  std::size_t rank = 0;
  std::size_t regressors = 0;
  bool baseline = false;
  WhitenessStats whiteness;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

struct FitResult {
  RevarModel model;
  FitReport report;
};

struct SeriesSplit {
  PhaseScreenSeries training;
  std::optional<PhaseScreenSeries> held_out;
};

/// First floor(fraction * N_T) frames train, the rest are held out.
SeriesSplit split_series(const PhaseScreenSeries& series, double train_fraction);

/// Runs the full estimation on the training split of `series`. Errors are
/// rethrown with the name of the failing stage.
FitResult fit_model(const PhaseScreenSeries& series, const FitConfig& config);

struct ReplicateOptions {
  std::size_t replicates = 20;
  double length_factor = 20.0;         // replicate length relative to the reference
  std::optional<std::size_t> length;   // overrides length_factor
  std::uint64_t seed = 0;              // replicate r uses seed + r
  StreamOptions stream;
  EvaluationConfig evaluation;
};

std::size_t replicate_length(std::size_t reference_frames, const ReplicateOptions& options);

/// Generates replicates from `model` (concurrently, streamed straight into
/// the statistics accumulators) and scores them against `reference`.
EvaluationReport evaluate_model(const PhaseScreenSeries& reference, const RevarModel& model,
                                const ReplicateOptions& options);
EvaluationReport evaluate_model(const SeriesStatistics& reference, const RevarModel& model,
                                std::size_t length, const ReplicateOptions& options);

struct SweepRow {
  std::size_t lags = 0;
  double training_mse = 0.0;
  std::optional<EvaluationReport> evaluation;
  FitReport fit;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t first_target = 0;
  bool evaluated = false;

  nlohmann::json to_json() const;
};

/// Fits one model per lag count on a common estimation sample (targets from
/// max(lags) on), so training MSE is comparable across rows. When the split
/// leaves held-out frames and replicates > 0, each model is also evaluated.
SweepResult sweep_lags(const PhaseScreenSeries& series, std::vector<std::size_t> lags,
                       const FitConfig& config, const ReplicateOptions& replicates);

}  // namespace revar
