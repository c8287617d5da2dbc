#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "revar/data_model.hpp"
#include "revar/longrange_ar.hpp"
#include "revar/noise.hpp"

namespace revar {

/// How the low-pass filter states are seeded before the first output frame.
enum class FilterInit {
  warm_from_initial,  // run the filters over the N_L initial vectors (default)
  zero,               // leave the states at zero
};

/// Distribution of the N_L initial coefficient vectors.
enum class InitialVectors {
  first_pca,       // P Lambda^{1/2} W (default)
  residual_stats,  // P (U Sigma^{1/2} W + mu_xi)
};

std::string to_string(FilterInit v);
std::string to_string(InitialVectors v);
FilterInit filter_init_from_string(const std::string& name);
InitialVectors initial_vectors_from_string(const std::string& name);

struct StreamOptions {
  FilterInit filter_init = FilterInit::warm_from_initial;
  InitialVectors initial = InitialVectors::first_pca;
  std::size_t burn_in = 0;
};

struct SynthesisConfig {
  std::size_t length = 0;  // N_s
  std::uint64_t seed = 0;
  bool emit_coefficients = false;
  StreamOptions options;
};

struct SynthesisResult {
  PhaseScreenSeries series;
  RowMatrix coefficients;  // N_s x N_c, only when emit_coefficients
};

/// Sequential synthetic frame source. Frame k equals frame k of generate()
/// with the same seed and options.
class SynthesisStream {
 public:
  /// Everything that evolves: noise cursor, lag buffer and filter states.
  struct Checkpoint {
    NoiseSource::State noise;
    std::vector<std::vector<double>> history;  // most recent first
    std::vector<std::vector<double>> filters;
    std::uint64_t position = 0;
    StreamOptions options;
  };

  SynthesisStream(std::shared_ptr<const RevarModel> model, std::uint64_t seed,
                  StreamOptions options = {});

  static SynthesisStream restore(std::shared_ptr<const RevarModel> model,
                                 const Checkpoint& checkpoint);

  /// Writes the next frame (length N_p). Optionally also the top N_c
  /// synthetic principal coefficients of that frame.
  void next(Vector& frame, Vector* top_coefficients = nullptr, OpCounter* counter = nullptr);

  std::uint64_t position() const noexcept { return position_; }
  Checkpoint checkpoint() const;
  const RevarModel& model() const noexcept { return *model_; }

 private:
  SynthesisStream(std::shared_ptr<const RevarModel> model, StreamOptions options,
                  NoiseSource noise);
  void prepare();
  void initialise();
  void advance(Vector& frame, Vector* top, OpCounter* counter);

  std::shared_ptr<const RevarModel> model_;
  StreamOptions options_;
  NoiseSource noise_;
  std::uint64_t position_ = 0;

  // Derived once from the model.
  PredictorWeights weights_;
  Vector sqrt_lambda_;
  Matrix residual_columns_;  // U columns above the floor, scaled by sqrt(sigma_xi)
  std::vector<Eigen::Index> residual_active_;
  double divergence_limit_ = 0.0;

  std::vector<Vector> history_;  // history_[0] is lag 1
  FilterBank filters_;
  std::vector<Vector> filter_view_;
  Vector white_;
  Vector coefficients_;
};

/// Runs the synthesis recursion for config.length frames.
SynthesisResult generate(const RevarModel& model, const SynthesisConfig& config,
                         OpCounter* counter = nullptr);

}  // namespace revar
