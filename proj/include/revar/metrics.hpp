#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revar/data_model.hpp"

namespace revar {

enum class WindowKind { hamming, hann, rectangular };

std::string to_string(WindowKind kind);
WindowKind window_from_string(const std::string& name);

/// Averaged-periodogram settings shared by every spectrum in the project.
struct WelchConfig {
  std::size_t segment_length = 1024;
  double overlap = 0.5;
  WindowKind window = WindowKind::hamming;
};

/// One-sided power spectral density. `power` is energy per time step per unit
/// frequency, normalised so that sum(power) * bin_width equals the variance
/// (mean square) of the input.
struct SpectrumEstimate {
  std::vector<double> frequencies;
  std::vector<double> power;
  WelchConfig config;
  std::optional<double> sampling_frequency;  // nullopt: cycles per time step

  double bin_width() const;
  double integrated_power() const;
  /// Index of the largest bin, excluding DC.
  std::size_t peak_bin() const;
};

/// Welch estimate of each column of `data` (rows are time steps), averaged
/// over columns. Throws InputError when the series is shorter than a segment.
SpectrumEstimate welch_average(const RowMatrix& data, const WelchConfig& config,
                               std::optional<double> sampling_frequency,
                               std::size_t threads = 1);

/// Temporal power spectrum of a phase-screen series, averaged over pixels.
SpectrumEstimate tps(const PhaseScreenSeries& series, const WelchConfig& config,
                     std::size_t threads = 1);

/// Streamwise (x, i.e. along-row) derivative of every frame. Central
/// differences where both neighbours are valid, one-sided at mask edges;
/// pixels with no valid x-neighbour are dropped from the output geometry.
PhaseScreenSeries streamwise_slopes(const PhaseScreenSeries& series);

/// Root mean square over all pixels and frames. With remove_piston the
/// per-frame spatial mean is subtracted first.
double opd_rms(const PhaseScreenSeries& series, bool remove_piston = false);

struct StructureFunction2D {
  std::ptrdiff_t max_dx = 0;
  std::ptrdiff_t max_dy = 0;
  double pitch_x = 1.0;
  double pitch_y = 1.0;
  /// (2*max_dy+1) x (2*max_dx+1), row-major, dy outer. Offsets with no pairs
  /// carry count 0 and value 0.
  std::vector<double> values;
  std::vector<std::size_t> counts;

  std::size_t width() const { return static_cast<std::size_t>(2 * max_dx + 1); }
  std::size_t height() const { return static_cast<std::size_t>(2 * max_dy + 1); }
  std::size_t offset_index(std::ptrdiff_t dx, std::ptrdiff_t dy) const;
  double at(std::ptrdiff_t dx, std::ptrdiff_t dy) const { return values[offset_index(dx, dy)]; }
  std::size_t count(std::ptrdiff_t dx, std::ptrdiff_t dy) const {
    return counts[offset_index(dx, dy)];
  }
};

/// Mean squared OPD difference over all frames and all masked pixel pairs at
/// each offset. Negative max_* means the full grid extent. `counts` holds
/// spatial pairs per offset (per frame).
StructureFunction2D structure_function(const PhaseScreenSeries& series, std::ptrdiff_t max_dx = -1,
                                       std::ptrdiff_t max_dy = -1, std::size_t threads = 1);

/// sqrt(mean((estimate - reference)^2)) / sqrt(mean(reference^2)).
double nrmse(std::span<const double> estimate, std::span<const double> reference);

struct StrouhalCurve {
  std::vector<double> strouhal;
  std::vector<double> premultiplied;
};

/// Abscissa St = f * delta / U_c, ordinate St * S(St) with S the spectrum
/// re-expressed per unit Strouhal number. Bins above `cap` are dropped.
StrouhalCurve premultiplied_strouhal(const SpectrumEstimate& spectrum, double delta,
                                     double convective_velocity,
                                     std::optional<double> cap = std::nullopt);

struct EvaluationConfig {
  WelchConfig welch;
  std::ptrdiff_t max_dx = -1;
  std::ptrdiff_t max_dy = -1;
  std::size_t min_pairs = 100;
  bool remove_piston = false;
  std::size_t threads = 1;
};

struct EvaluationReport {
  double slopes_tps_nrmse = 0.0;
  double opd_tps_nrmse = 0.0;
  double opd_rms_relative_error = 0.0;
  double structure_function_nrmse = 0.0;
  std::size_t replicates = 1;

  // Curves for plotting; synthetic curves are averaged over replicates.
  SpectrumEstimate reference_opd_tps, synthetic_opd_tps;
  SpectrumEstimate reference_slopes_tps, synthetic_slopes_tps;
  StructureFunction2D reference_structure, synthetic_structure;
  double reference_opd_rms = 0.0;
  double synthetic_opd_rms = 0.0;
  EvaluationConfig config;
};

/// The curves and scalars evaluate() compares, for one series.
struct SeriesStatistics {
  ApertureGeometry geometry;
  double sampling_frequency = 1.0;
  std::size_t frames = 0;
  SpectrumEstimate opd_tps;
  SpectrumEstimate slopes_tps;
  StructureFunction2D structure;
  double opd_rms = 0.0;
};

/// Builds SeriesStatistics one frame at a time. Memory is bounded by one
/// Welch segment, one Gram block and a logarithmic stack of partial Gram
/// matrices, so arbitrarily long synthetic runs can be scored. Reductions
/// happen in a fixed order, so results do not depend on `threads`.
class StatisticsAccumulator {
 public:
  StatisticsAccumulator(const ApertureGeometry& geometry, double sampling_frequency,
                        const EvaluationConfig& config);
  ~StatisticsAccumulator();
  StatisticsAccumulator(StatisticsAccumulator&&) noexcept;
  StatisticsAccumulator& operator=(StatisticsAccumulator&&) noexcept;

  void push(std::span<const double> frame);
  void push(const PhaseScreenSeries& series);
  std::size_t frames() const noexcept;
  /// Throws InputError when fewer frames than one Welch segment were pushed.
  SeriesStatistics finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SeriesStatistics series_statistics(const PhaseScreenSeries& series, const EvaluationConfig& config);

/// Scores replicate statistics against a reference; scalar errors are the
/// mean of the per-replicate errors and synthetic curves are averaged.
EvaluationReport compare_statistics(const SeriesStatistics& reference,
                                    std::span<const SeriesStatistics> replicates,
                                    const EvaluationConfig& config);

EvaluationReport evaluate(const PhaseScreenSeries& reference, const PhaseScreenSeries& synthetic,
                          const EvaluationConfig& config);

/// Scalar errors are the mean of the per-replicate errors.
EvaluationReport evaluate(const PhaseScreenSeries& reference,
                          std::span<const PhaseScreenSeries> replicates,
                          const EvaluationConfig& config);

}  // namespace revar
