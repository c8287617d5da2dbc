#include "revar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "revar/error.hpp"
#include "revar/linalg.hpp"
#include "revar/parallel.hpp"

namespace revar {

std::string to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::hamming: return "hamming";
    case WindowKind::hann: return "hann";
    case WindowKind::rectangular: return "rectangular";
  }
  return "unknown";
}

WindowKind window_from_string(const std::string& name) {
  if (name == "hamming") return WindowKind::hamming;
  if (name == "hann" || name == "hanning") return WindowKind::hann;
  if (name == "rectangular" || name == "boxcar") return WindowKind::rectangular;
  throw InputError("unknown window '" + name + "' (expected hamming, hann or rectangular)");
}

double SpectrumEstimate::bin_width() const {
  const double fs = sampling_frequency.value_or(1.0);
  return fs / static_cast<double>(config.segment_length);
}

double SpectrumEstimate::integrated_power() const {
  double total = 0.0;
  for (double p : power) total += p;
  return total * bin_width();
}

std::size_t SpectrumEstimate::peak_bin() const {
  if (power.size() < 2) throw NumericalError("spectrum has no non-DC bins");
  std::size_t best = 1;
  double lowest = power[1];
  for (std::size_t k = 2; k < power.size(); ++k) {
    if (power[k] > power[best]) best = k;
    lowest = std::min(lowest, power[k]);
  }
  if (!(power[best] > 0.0) || power[best] <= lowest * (1.0 + 1e-12) ||
      !std::isfinite(power[best])) {
    throw NumericalError("spectrum is flat (no peak above DC)");
  }
  return best;
}

namespace {

std::vector<double> make_window(WindowKind kind, std::size_t length) {
  std::vector<double> w(length, 1.0);
  const double n = static_cast<double>(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    switch (kind) {
      case WindowKind::hamming: w[i] = 0.54 - 0.46 * std::cos(phase); break;
      case WindowKind::hann: w[i] = 0.5 - 0.5 * std::cos(phase); break;
      case WindowKind::rectangular: break;
    }
  }
  return w;
}

constexpr std::size_t kChannelsPerChunk = 8;

}  // namespace

SpectrumEstimate welch_average(const RowMatrix& data, const WelchConfig& config,
                               std::optional<double> sampling_frequency, std::size_t threads) {
  const std::size_t length = config.segment_length;
  const auto steps = static_cast<std::size_t>(data.rows());
  if (length < 2) throw InputError("Welch segment length must be at least 2");
  if (!(config.overlap >= 0.0 && config.overlap < 1.0)) {
    throw InputError("Welch overlap must lie in [0, 1)");
  }
  if (steps < length) {
    throw InputError("series has " + std::to_string(steps) + " steps but the Welch segment is " +
                     std::to_string(length) + "; use a shorter --segment-length");
  }
  if (data.cols() < 1) throw InputError("no channels to average");
  const double fs = sampling_frequency.value_or(1.0);
  if (!(fs > 0.0)) throw InputError("sampling frequency must be positive");

  const auto hop = std::max<std::size_t>(
      1, length - static_cast<std::size_t>(std::llround(config.overlap * static_cast<double>(length))));
  const std::size_t segments = (steps - length) / hop + 1;
  const std::size_t bins = length / 2 + 1;
  const auto window = make_window(config.window, length);
  double window_power = 0.0;
  for (double w : window) window_power += w * w;

  const auto channels = static_cast<std::size_t>(data.cols());
  const std::size_t chunks = (channels + kChannelsPerChunk - 1) / kChannelsPerChunk;
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(bins, 0.0));

  parallel_chunks(chunks, threads, [&](std::size_t chunk) {
    Eigen::FFT<double> fft;
    std::vector<double> segment(length);
    std::vector<std::complex<double>> spectrum;
    auto& acc = partial[chunk];
    const std::size_t first = chunk * kChannelsPerChunk;
    const std::size_t last = std::min(channels, first + kChannelsPerChunk);
    for (std::size_t ch = first; ch < last; ++ch) {
      for (std::size_t s = 0; s < segments; ++s) {
        const std::size_t start = s * hop;
        for (std::size_t i = 0; i < length; ++i) {
          segment[i] = data(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(ch)) *
                       window[i];
        }
        fft.fwd(spectrum, segment);
        for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spectrum[k]);
      }
    }
  });

  SpectrumEstimate out;
  out.config = config;
  out.sampling_frequency = sampling_frequency;
  out.frequencies.resize(bins);
  out.power.assign(bins, 0.0);
  for (const auto& acc : partial) {
    for (std::size_t k = 0; k < bins; ++k) out.power[k] += acc[k];
  }
  const double scale =
      1.0 / (fs * window_power * static_cast<double>(segments) * static_cast<double>(channels));
  for (std::size_t k = 0; k < bins; ++k) {
    out.frequencies[k] = static_cast<double>(k) * fs / static_cast<double>(length);
    const bool unpaired = (k == 0) || (length % 2 == 0 && k == bins - 1);
    out.power[k] *= scale * (unpaired ? 1.0 : 2.0);
  }
  return out;
}

SpectrumEstimate tps(const PhaseScreenSeries& series, const WelchConfig& config,
                     std::size_t threads) {
  return welch_average(series.frames, config, series.sampling_frequency, threads);
}

namespace {

struct SlopeStencil {
  std::size_t left, right;
  double scale;
};

struct SlopeLayout {
  ApertureGeometry geometry;
  std::vector<SlopeStencil> stencils;
};

SlopeLayout slope_layout(const ApertureGeometry& geo) {
  std::vector<std::uint8_t> mask(geo.rows() * geo.cols(), 0);
  SlopeLayout out;
  for (std::size_t i = 0; i < geo.pixel_count(); ++i) {
    const auto [r, c] = geo.pixel_coord(i);
    const auto row = static_cast<std::ptrdiff_t>(r);
    const auto col = static_cast<std::ptrdiff_t>(c);
    const auto left = geo.pixel_index(row, col - 1);
    const auto right = geo.pixel_index(row, col + 1);
    if (left && right) {
      out.stencils.push_back({*left, *right, 0.5 / geo.pitch_x()});
    } else if (right) {
      out.stencils.push_back({i, *right, 1.0 / geo.pitch_x()});
    } else if (left) {
      out.stencils.push_back({*left, i, 1.0 / geo.pitch_x()});
    } else {
      continue;
    }
    mask[r * geo.cols() + c] = 1;
  }
  if (out.stencils.empty()) throw InputError("no aperture row has two adjacent masked pixels");
  out.geometry = ApertureGeometry(geo.rows(), geo.cols(), std::move(mask), geo.pitch_x(),
                                  geo.pitch_y());
  return out;
}

}  // namespace

PhaseScreenSeries streamwise_slopes(const PhaseScreenSeries& series) {
  auto layout = slope_layout(series.geometry);
  PhaseScreenSeries out;
  out.geometry = std::move(layout.geometry);
  out.sampling_frequency = series.sampling_frequency;
  out.label = series.label.empty() ? "slopes" : series.label + " slopes";
  out.units = series.units + "/pixel_pitch";
  out.frames.resize(series.frames.rows(), static_cast<Eigen::Index>(layout.stencils.size()));
  for (std::size_t k = 0; k < layout.stencils.size(); ++k) {
    const auto& st = layout.stencils[k];
    out.frames.col(static_cast<Eigen::Index>(k)) =
        (series.frames.col(static_cast<Eigen::Index>(st.right)) -
         series.frames.col(static_cast<Eigen::Index>(st.left))) *
        st.scale;
  }
  return out;
}

double opd_rms(const PhaseScreenSeries& series, bool remove_piston) {
  if (series.frames.size() == 0) throw InputError("OPD_rms of an empty series");
  RowMatrix centered = series.frames;
  if (remove_piston) {
    const Vector piston = centered.rowwise().mean();
    centered.colwise() -= piston;
  }
  RowMatrix squares = centered.cwiseAbs2();
  return std::sqrt(blocked_column_mean(squares).mean());
}

std::size_t StructureFunction2D::offset_index(std::ptrdiff_t dx, std::ptrdiff_t dy) const {
  if (std::abs(dx) > max_dx || std::abs(dy) > max_dy) {
    throw InputError("structure-function offset outside the computed range");
  }
  return static_cast<std::size_t>((dy + max_dy) * (2 * max_dx + 1) + (dx + max_dx));
}

namespace {

std::pair<std::ptrdiff_t, std::ptrdiff_t> displacement_range(const ApertureGeometry& geo,
                                                             std::ptrdiff_t max_dx,
                                                             std::ptrdiff_t max_dy) {
  const auto extent_x = static_cast<std::ptrdiff_t>(geo.cols()) - 1;
  const auto extent_y = static_cast<std::ptrdiff_t>(geo.rows()) - 1;
  if (max_dx < 0) max_dx = extent_x;
  if (max_dy < 0) max_dy = extent_y;
  if (max_dx > extent_x || max_dy > extent_y) {
    throw InputError("maximum displacement exceeds the grid extent");
  }
  return {max_dx, max_dy};
}

// sum_t (x_i - x_j)^2 = G_ii + G_jj - 2 G_ij, averaged per offset.
StructureFunction2D structure_from_gram(const ApertureGeometry& geo, const Matrix& gram,
                                        std::size_t frames, std::ptrdiff_t max_dx,
                                        std::ptrdiff_t max_dy) {
  StructureFunction2D out;
  out.max_dx = max_dx;
  out.max_dy = max_dy;
  out.pitch_x = geo.pitch_x();
  out.pitch_y = geo.pitch_y();
  out.values.assign(out.width() * out.height(), 0.0);
  out.counts.assign(out.width() * out.height(), 0);

  // Each unordered pair is visited once and credited to +offset and -offset.
  for (std::size_t i = 0; i < geo.pixel_count(); ++i) {
    const auto [r, c] = geo.pixel_coord(i);
    for (std::ptrdiff_t dy = 0; dy <= max_dy; ++dy) {
      for (std::ptrdiff_t dx = -max_dx; dx <= max_dx; ++dx) {
        if (dy == 0 && dx <= 0) continue;
        const auto j = geo.pixel_index(static_cast<std::ptrdiff_t>(r) + dy,
                                       static_cast<std::ptrdiff_t>(c) + dx);
        if (!j) continue;
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(*j);
        const double sq = std::max(0.0, gram(a, a) + gram(b, b) - 2.0 * gram(a, b));
        const auto plus = out.offset_index(dx, dy);
        const auto minus = out.offset_index(-dx, -dy);
        out.values[plus] += sq;
        out.values[minus] += sq;
        ++out.counts[plus];
        ++out.counts[minus];
      }
    }
  }
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    if (out.counts[k] > 0) {
      out.values[k] /= static_cast<double>(out.counts[k]) * static_cast<double>(frames);
    }
  }
  return out;
}

}  // namespace

StructureFunction2D structure_function(const PhaseScreenSeries& series, std::ptrdiff_t max_dx,
                                       std::ptrdiff_t max_dy, std::size_t threads) {
  if (series.frames.rows() < 1) throw InputError("structure function of an empty series");
  const auto [dx, dy] = displacement_range(series.geometry, max_dx, max_dy);
  const Matrix gram = blocked_gram(series.frames, Vector(), threads);
  return structure_from_gram(series.geometry, gram, series.frame_count(), dx, dy);
}

double nrmse(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) {
    throw InputError("NRMSE curves are sampled on different grids (" +
                     std::to_string(estimate.size()) + " vs " +
                     std::to_string(reference.size()) + " points)");
  }
  if (reference.empty()) throw InputError("NRMSE of empty curves");
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = estimate[i] - reference[i];
    err += d * d;
    ref += reference[i] * reference[i];
  }
  if (!(ref > 0.0)) throw NumericalError("NRMSE reference curve is identically zero");
  return std::sqrt(err / ref);
}

StrouhalCurve premultiplied_strouhal(const SpectrumEstimate& spectrum, double delta,
                                     double convective_velocity, std::optional<double> cap) {
  if (!spectrum.sampling_frequency) {
    throw InputError("Strouhal scaling needs a spectrum in physical frequency units");
  }
  if (!(delta > 0.0) || !(convective_velocity > 0.0)) {
    throw InputError("boundary-layer length and convective velocity must be positive");
  }
  StrouhalCurve out;
  for (std::size_t k = 0; k < spectrum.frequencies.size(); ++k) {
    const double f = spectrum.frequencies[k];
    const double st = f * delta / convective_velocity;
    if (cap && st > *cap) break;
    // S(St) = S(f) U_c / delta, so St * S(St) = f * S(f).
    out.strouhal.push_back(st);
    out.premultiplied.push_back(f * spectrum.power[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Streaming statistics

struct StatisticsAccumulator::Impl {
  ApertureGeometry geometry;
  double fs = 1.0;
  EvaluationConfig config;
  SlopeLayout slopes;
  std::ptrdiff_t max_dx = 0, max_dy = 0;

  // Welch state: ring of the last segment_length frames (OPD then slopes).
  std::size_t length = 0, hop = 0;
  std::vector<double> window;
  double window_power = 0.0;
  std::size_t opd_channels = 0, slope_channels = 0;
  RowMatrix ring;
  std::vector<std::vector<double>> opd_partial, slope_partial;  // per channel chunk
  std::size_t segments = 0;

  // Gram state: current block plus a binary-counter stack of partial sums.
  RowMatrix block;
  Eigen::Index block_fill = 0;
  std::vector<std::pair<int, Matrix>> gram_stack;

  double square_sum = 0.0;
  std::size_t count = 0;

  void flush_block() {
    if (block_fill == 0) return;
    const auto cols = block.cols();
    Matrix g = Matrix::Zero(cols, cols);
    g.selfadjointView<Eigen::Lower>().rankUpdate(block.topRows(block_fill).transpose());
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    block_fill = 0;
    gram_stack.emplace_back(0, std::move(g));
    while (gram_stack.size() >= 2 &&
           gram_stack[gram_stack.size() - 1].first == gram_stack[gram_stack.size() - 2].first) {
      auto top = std::move(gram_stack.back());
      gram_stack.pop_back();
      gram_stack.back().second += top.second;
      ++gram_stack.back().first;
    }
  }

  void process_segment() {
    const std::size_t bins = length / 2 + 1;
    // OPD and slope channels are chunked separately so every chunk owns one
    // partial-sum buffer.
    const std::size_t opd_chunks = opd_partial.size();
    const std::size_t chunks = opd_chunks + slope_partial.size();
    // Oldest frame of the segment sits at ring row (count % length).
    const std::size_t oldest = count % length;
    parallel_chunks(chunks, config.threads, [&](std::size_t chunk) {
      Eigen::FFT<double> fft;
      std::vector<double> segment(length);
      std::vector<std::complex<double>> spectrum;
      const bool opd = chunk < opd_chunks;
      const std::size_t local = opd ? chunk : chunk - opd_chunks;
      const std::size_t base = opd ? 0 : opd_channels;
      const std::size_t first = base + local * kChannelsPerChunk;
      const std::size_t last =
          std::min(base + (opd ? opd_channels : slope_channels), first + kChannelsPerChunk);
      auto& acc = opd ? opd_partial[local] : slope_partial[local];
      for (std::size_t ch = first; ch < last; ++ch) {
        for (std::size_t i = 0; i < length; ++i) {
          segment[i] = ring(static_cast<Eigen::Index>((oldest + i) % length),
                            static_cast<Eigen::Index>(ch)) * window[i];
        }
        fft.fwd(spectrum, segment);
        for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spectrum[k]);
      }
    });
    ++segments;
  }

  SpectrumEstimate spectrum(const std::vector<std::vector<double>>& partial,
                            std::size_t channels) const {
    const std::size_t bins = length / 2 + 1;
    SpectrumEstimate out;
    out.config = config.welch;
    out.sampling_frequency = fs;
    out.frequencies.resize(bins);
    out.power.assign(bins, 0.0);
    for (const auto& acc : partial) {
      for (std::size_t k = 0; k < bins; ++k) out.power[k] += acc[k];
    }
    const double scale =
        1.0 / (fs * window_power * static_cast<double>(segments) * static_cast<double>(channels));
    for (std::size_t k = 0; k < bins; ++k) {
      out.frequencies[k] = static_cast<double>(k) * fs / static_cast<double>(length);
      const bool unpaired = (k == 0) || (length % 2 == 0 && k == bins - 1);
      out.power[k] *= scale * (unpaired ? 1.0 : 2.0);
    }
    return out;
  }
};

StatisticsAccumulator::StatisticsAccumulator(const ApertureGeometry& geometry,
                                             double sampling_frequency,
                                             const EvaluationConfig& config)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  if (!(sampling_frequency > 0.0)) throw InputError("sampling frequency must be positive");
  const auto& welch = config.welch;
  if (welch.segment_length < 2) throw InputError("Welch segment length must be at least 2");
  if (!(welch.overlap >= 0.0 && welch.overlap < 1.0)) {
    throw InputError("Welch overlap must lie in [0, 1)");
  }
  m.geometry = geometry;
  m.fs = sampling_frequency;
  m.config = config;
  m.slopes = slope_layout(geometry);
  std::tie(m.max_dx, m.max_dy) = displacement_range(geometry, config.max_dx, config.max_dy);
  m.length = welch.segment_length;
  m.hop = std::max<std::size_t>(
      1, m.length - static_cast<std::size_t>(
                        std::llround(welch.overlap * static_cast<double>(m.length))));
  m.window = make_window(welch.window, m.length);
  for (double w : m.window) m.window_power += w * w;
  m.opd_channels = geometry.pixel_count();
  m.slope_channels = m.slopes.stencils.size();
  m.ring.resize(static_cast<Eigen::Index>(m.length),
                static_cast<Eigen::Index>(m.opd_channels + m.slope_channels));
  const std::size_t bins = m.length / 2 + 1;
  m.opd_partial.assign((m.opd_channels + kChannelsPerChunk - 1) / kChannelsPerChunk,
                       std::vector<double>(bins, 0.0));
  m.slope_partial.assign((m.slope_channels + kChannelsPerChunk - 1) / kChannelsPerChunk,
                         std::vector<double>(bins, 0.0));
  m.block.resize(static_cast<Eigen::Index>(kGramBlockRows),
                 static_cast<Eigen::Index>(m.opd_channels));
}

StatisticsAccumulator::~StatisticsAccumulator() = default;
StatisticsAccumulator::StatisticsAccumulator(StatisticsAccumulator&&) noexcept = default;
StatisticsAccumulator& StatisticsAccumulator::operator=(StatisticsAccumulator&&) noexcept = default;

std::size_t StatisticsAccumulator::frames() const noexcept { return impl_->count; }

void StatisticsAccumulator::push(std::span<const double> frame) {
  auto& m = *impl_;
  if (frame.size() != m.opd_channels) {
    throw InputError("frame has " + std::to_string(frame.size()) + " pixels, expected " +
                     std::to_string(m.opd_channels));
  }
  const auto slot = static_cast<Eigen::Index>(m.count % m.length);
  for (std::size_t p = 0; p < m.opd_channels; ++p) {
    m.ring(slot, static_cast<Eigen::Index>(p)) = frame[p];
  }
  for (std::size_t k = 0; k < m.slope_channels; ++k) {
    const auto& st = m.slopes.stencils[k];
    m.ring(slot, static_cast<Eigen::Index>(m.opd_channels + k)) =
        (frame[st.right] - frame[st.left]) * st.scale;
  }

  m.block.row(m.block_fill) = Eigen::Map<const Eigen::RowVectorXd>(
      frame.data(), static_cast<Eigen::Index>(frame.size()));
  if (++m.block_fill == m.block.rows()) m.flush_block();

  double piston = 0.0;
  if (m.config.remove_piston) {
    for (double v : frame) piston += v;
    piston /= static_cast<double>(frame.size());
  }
  double squares = 0.0;
  for (double v : frame) squares += (v - piston) * (v - piston);
  m.square_sum += squares;

  ++m.count;
  if (m.count >= m.length && (m.count - m.length) % m.hop == 0) m.process_segment();
}

void StatisticsAccumulator::push(const PhaseScreenSeries& series) {
  if (!(series.geometry == impl_->geometry)) {
    throw InputError("series geometry differs from the accumulator's");
  }
  for (Eigen::Index n = 0; n < series.frames.rows(); ++n) {
    push(std::span<const double>(series.frames.row(n).data(),
                                 static_cast<std::size_t>(series.frames.cols())));
  }
}

SeriesStatistics StatisticsAccumulator::finish() {
  auto& m = *impl_;
  if (m.segments == 0) {
    throw InputError("series has " + std::to_string(m.count) +
                     " steps but the Welch segment is " + std::to_string(m.length) +
                     "; use a shorter --segment-length");
  }
  m.flush_block();
  Matrix gram = std::move(m.gram_stack.back().second);
  for (std::size_t k = m.gram_stack.size() - 1; k-- > 0;) gram += m.gram_stack[k].second;
  m.gram_stack.clear();
  m.gram_stack.emplace_back(0, gram);

  SeriesStatistics out;
  out.geometry = m.geometry;
  out.sampling_frequency = m.fs;
  out.frames = m.count;
  out.opd_tps = m.spectrum(m.opd_partial, m.opd_channels);
  out.slopes_tps = m.spectrum(m.slope_partial, m.slope_channels);
  out.structure = structure_from_gram(m.geometry, gram, m.count, m.max_dx, m.max_dy);
  out.opd_rms = std::sqrt(m.square_sum /
                          (static_cast<double>(m.count) * static_cast<double>(m.opd_channels)));
  return out;
}

SeriesStatistics series_statistics(const PhaseScreenSeries& series,
                                   const EvaluationConfig& config) {
  StatisticsAccumulator acc(series.geometry, series.sampling_frequency, config);
  acc.push(series);
  return acc.finish();
}

namespace {

double structure_nrmse(const StructureFunction2D& synthetic, const StructureFunction2D& reference,
                       std::size_t min_pairs) {
  if (synthetic.values.size() != reference.values.size()) {
    throw InputError("structure functions cover different displacement ranges");
  }
  std::vector<double> est;
  std::vector<double> ref;
  const auto zero = reference.offset_index(0, 0);
  // Apertures too small to reach the pair threshold anywhere fall back to the
  // best-populated offsets instead of having no comparison at all.
  std::size_t best = 0;
  for (std::size_t k = 0; k < reference.values.size(); ++k) {
    if (k != zero) best = std::max(best, std::min(reference.counts[k], synthetic.counts[k]));
  }
  const std::size_t threshold = std::max<std::size_t>(1, std::min(min_pairs, best));
  for (std::size_t k = 0; k < reference.values.size(); ++k) {
    if (k == zero) continue;
    if (reference.counts[k] < threshold || synthetic.counts[k] < threshold) continue;
    est.push_back(std::sqrt(synthetic.values[k]));
    ref.push_back(std::sqrt(reference.values[k]));
  }
  if (ref.empty()) {
    throw InputError("no non-zero displacement has any pixel pairs");
  }
  return nrmse(est, ref);
}

void check_compatible(const SeriesStatistics& reference, const SeriesStatistics& synthetic) {
  if (!(reference.geometry == synthetic.geometry)) {
    throw InputError("reference and synthetic series have different aperture geometry");
  }
  if (reference.sampling_frequency != synthetic.sampling_frequency) {
    throw InputError("reference and synthetic series have different sampling frequencies");
  }
  if (reference.opd_tps.power.size() != synthetic.opd_tps.power.size()) {
    throw InputError("reference and synthetic spectra use different Welch settings");
  }
}

}  // namespace

EvaluationReport compare_statistics(const SeriesStatistics& reference,
                                    std::span<const SeriesStatistics> replicates,
                                    const EvaluationConfig& config) {
  if (replicates.empty()) throw InputError("evaluation needs at least one synthetic series");
  if (!(reference.opd_rms > 0.0)) throw NumericalError("reference OPD_rms is zero");
  for (const auto& r : replicates) check_compatible(reference, r);

  EvaluationReport report;
  report.config = config;
  report.replicates = replicates.size();
  report.reference_opd_tps = reference.opd_tps;
  report.reference_slopes_tps = reference.slopes_tps;
  report.reference_structure = reference.structure;
  report.reference_opd_rms = reference.opd_rms;
  report.synthetic_opd_tps = replicates[0].opd_tps;
  report.synthetic_slopes_tps = replicates[0].slopes_tps;
  report.synthetic_structure = replicates[0].structure;
  std::fill(report.synthetic_opd_tps.power.begin(), report.synthetic_opd_tps.power.end(), 0.0);
  std::fill(report.synthetic_slopes_tps.power.begin(), report.synthetic_slopes_tps.power.end(), 0.0);
  std::fill(report.synthetic_structure.values.begin(), report.synthetic_structure.values.end(), 0.0);

  const double inv = 1.0 / static_cast<double>(replicates.size());
  for (const auto& r : replicates) {
    report.slopes_tps_nrmse += nrmse(r.slopes_tps.power, reference.slopes_tps.power) * inv;
    report.opd_tps_nrmse += nrmse(r.opd_tps.power, reference.opd_tps.power) * inv;
    report.opd_rms_relative_error += std::abs(r.opd_rms - reference.opd_rms) / reference.opd_rms * inv;
    report.structure_function_nrmse +=
        structure_nrmse(r.structure, reference.structure, config.min_pairs) * inv;
    report.synthetic_opd_rms += r.opd_rms * inv;
    for (std::size_t k = 0; k < r.opd_tps.power.size(); ++k) {
      report.synthetic_opd_tps.power[k] += r.opd_tps.power[k] * inv;
    }
    for (std::size_t k = 0; k < r.slopes_tps.power.size(); ++k) {
      report.synthetic_slopes_tps.power[k] += r.slopes_tps.power[k] * inv;
    }
    for (std::size_t k = 0; k < r.structure.values.size(); ++k) {
      report.synthetic_structure.values[k] += r.structure.values[k] * inv;
    }
  }
  return report;
}

EvaluationReport evaluate(const PhaseScreenSeries& reference, const PhaseScreenSeries& synthetic,
                          const EvaluationConfig& config) {
  return evaluate(reference, std::span<const PhaseScreenSeries>(&synthetic, 1), config);
}

EvaluationReport evaluate(const PhaseScreenSeries& reference,
                          std::span<const PhaseScreenSeries> replicates,
                          const EvaluationConfig& config) {
  if (replicates.empty()) throw InputError("evaluation needs at least one synthetic series");
  const SeriesStatistics ref = series_statistics(reference, config);
  std::vector<SeriesStatistics> stats(replicates.size());
  EvaluationConfig inner = config;
  inner.threads = replicates.size() == 1 ? config.threads : 1;
  // Outer parallelism over replicates; each slot is written by one worker.
  parallel_chunks(replicates.size(), config.threads, [&](std::size_t r) {
    stats[r] = series_statistics(replicates[r], inner);
  });
  return compare_statistics(ref, stats, config);
}

}  // namespace revar
