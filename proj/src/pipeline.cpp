#include "revar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "revar/error.hpp"
#include "revar/linalg.hpp"
#include "revar/parallel.hpp"
#include "revar/preprocessing.hpp"
#include "revar/report.hpp"
#include "revar/rewhitening.hpp"

namespace revar {

using nlohmann::json;

void FitConfig::validate() const {
  if (lags < 1) throw InputError("number of lags must be at least 1");
  if (filters > 8) throw InputError("at most 8 low-pass filters are supported");
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) {
    throw InputError("variance fraction must lie in (0, 1]");
  }
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw InputError("train fraction must lie in (0, 1]");
  }
  if (alphas) {
    if (alphas->size() != filters) {
      throw InputError("explicit alphas: got " + std::to_string(alphas->size()) +
                       " gains for " + std::to_string(filters) + " filters");
    }
    for (double a : *alphas) {
      if (!(a > 0.0 && a <= 1.0)) throw InputError("filter gains must lie in (0, 1]");
    }
  }
}

FitConfig FitConfig::effective() const {
  FitConfig out = *this;
  if (baseline) {
    out.lags = 1;
    out.filters = 0;
    out.variance_fraction = 1.0;
    out.alphas.reset();
  }
  return out;
}

SeriesSplit split_series(const PhaseScreenSeries& series, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw InputError("train fraction must lie in (0, 1]");
  }
  const std::size_t total = series.frame_count();
  const auto train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(total) + 1e-9));
  if (train < 2) throw InputError("training split holds fewer than two frames");
  SeriesSplit out;
  out.training = train == total ? series : series.slice(0, train);
  if (train < total) out.held_out = series.slice(train, total - train);
  return out;
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DegeneratePixelError&) {
    throw;
  } catch (const StabilityError& e) {
    throw StabilityError(std::string(name) + ": " + e.what(), e.step());
  } catch (const Error& e) {
    const std::string what = std::string(name) + ": " + e.what();
    switch (e.kind()) {
      case ErrorKind::input: throw InputError(what);
      case ErrorKind::format: throw FormatError(what);
      case ErrorKind::io: throw IoError(what);
      case ErrorKind::numerical: throw NumericalError(what);
      default: throw Error(e.kind(), what);
    }
  }
}

// Everything that does not depend on N_L.
struct Prepared {
  FitConfig config;
  std::size_t total_frames = 0;
  std::size_t held_out_frames = 0;
  ApertureGeometry geometry;
  double sampling_frequency = 1.0;
  std::string label;
  Normalization normalization;
  SpatialPca pca;
  NormalizedSeries projected;
  RowMatrix top;
  std::vector<double> alphas;
  std::optional<double> cutoff;
  std::vector<std::string> warnings;
};

Prepared prepare(const PhaseScreenSeries& series, const FitConfig& requested) {
  Prepared p;
  p.config = requested.effective();
  p.config.validate();
  stage("input", [&] { series.validate(); });
  auto split = stage("split", [&] { return split_series(series, p.config.train_fraction); });
  p.total_frames = series.frame_count();
  p.held_out_frames = split.held_out ? split.held_out->frame_count() : 0;
  p.geometry = series.geometry;
  p.sampling_frequency = series.sampling_frequency;
  p.label = series.label;

  RowMatrix x = std::move(split.training.frames);
  p.normalization = stage("preprocessing", [&] { return normalize(x, p.config.pixel_floor); });
  p.pca = stage("spatial PCA", [&] { return fit_spatial_pca(x, p.config.threads); });
  const std::size_t nc =
      stage("subspace selection",
            [&] { return select_subspace(p.pca.variances, p.config.variance_fraction); });
  p.projected = stage("projection", [&] { return project(x, p.pca.basis, nc); });
  x.resize(0, 0);
  p.top = p.projected.top();

  if (p.config.filters > 0) {
    if (p.config.alphas) {
      p.alphas = *p.config.alphas;
    } else {
      auto est = stage("cut-off estimation", [&] {
        return estimate_alphas(p.top, p.config.filters, p.config.welch, p.config.alpha_rule,
                               p.config.threads);
      });
      p.alphas = est.alphas;
      p.cutoff = est.peak_frequency;
    }
  }
  return p;
}

FitResult finish(const Prepared& p, std::size_t lags, std::optional<std::size_t> first_target) {
  const auto& cfg = p.config;
  TrainerOptions options;
  options.first_target = first_target;
  auto trained = stage("long-range AR", [&] { return fit_weights(p.top, p.alphas, lags, options); });
  RowMatrix xi = stage("residuals", [&] {
    return residuals(p.projected.coefficients, p.alphas, trained.weights);
  });
  auto white = stage("re-whitening", [&] { return fit_whitening(xi, cfg.inverse_floor, cfg.threads); });

  FitResult out;
  auto& m = out.model;
  m.geometry = p.geometry;
  m.mean = p.normalization.mean;
  m.scale = p.normalization.stddev;
  m.basis = p.pca.basis;
  m.variances = p.pca.variances;
  m.components = p.projected.components;
  m.lags = lags;
  m.alphas = p.alphas;
  m.lag_weights = trained.weights.lag;
  m.filter_weights = trained.weights.filter;
  m.residual_mean = white.mean;
  m.residual_basis = white.basis;
  m.residual_variances = white.variances;
  m.inverse_floor = cfg.inverse_floor;
  m.provenance.training_frames = static_cast<std::size_t>(p.projected.coefficients.rows());
  m.provenance.variance_fraction = cfg.variance_fraction;
  m.provenance.cutoff_frequency = p.cutoff.value_or(0.0);
  m.provenance.alpha_rule = cfg.alphas ? "explicit" : to_string(cfg.alpha_rule);
  m.provenance.sampling_frequency = p.sampling_frequency;
  m.provenance.label = p.label;
  stage("model validation", [&] { m.validate(); });

  auto& r = out.report;
  r.total_frames = p.total_frames;
  r.training_frames = m.provenance.training_frames;
  r.held_out_frames = p.held_out_frames;
  r.pixels = m.pixel_count();
  r.components = m.components;
  r.lags = lags;
  r.filters = m.alphas.size();
  r.variance_fraction = cfg.variance_fraction;
  const double total = m.variances.sum();
  r.retained_variance =
      total > 0.0 ? m.variances.head(static_cast<Eigen::Index>(m.components)).sum() / total : 0.0;
  r.cutoff_frequency = p.cutoff;
  r.alphas = m.alphas;
  r.training_mse = trained.training_mse;
  r.component_mse.assign(trained.component_mse.data(),
                         trained.component_mse.data() + trained.component_mse.size());
  r.rank = trained.rank;
  r.regressors = trained.regressors;
  r.baseline = cfg.baseline;
  r.warnings = p.warnings;
  r.warnings.insert(r.warnings.end(), trained.warnings.begin(), trained.warnings.end());
  if (p.held_out_frames == 0) r.warnings.push_back("no held-out split: all frames used for training");
  r.whiteness = whiteness(xi, m, std::max<std::size_t>(5, lags));
  return out;
}

}  // namespace

FitResult fit_model(const PhaseScreenSeries& series, const FitConfig& config) {
  const Prepared p = prepare(series, config);
  return finish(p, p.config.lags, p.config.first_target);
}

WhitenessStats whiteness(const RowMatrix& residuals, const RevarModel& model, std::size_t max_lag) {
  const Vector roots = floored_sqrt(model.residual_variances, model.inverse_floor);
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    if (roots[i] > 0.0) active.push_back(i);
  }
  WhitenessStats out;
  out.samples = static_cast<std::size_t>(residuals.rows());
  out.active_components = active.size();
  out.max_lag = max_lag;
  if (active.empty() || residuals.rows() == 0) return out;
  out.bound = 5.0 / std::sqrt(static_cast<double>(out.samples));

  const auto a = static_cast<Eigen::Index>(active.size());
  Matrix projector(residuals.cols(), a);
  for (Eigen::Index k = 0; k < a; ++k) {
    projector.col(k) = model.residual_basis.col(active[static_cast<std::size_t>(k)]) /
                       roots[active[static_cast<std::size_t>(k)]];
  }
  const auto lag = static_cast<Eigen::Index>(max_lag);
  Matrix gram = Matrix::Zero(a, a);
  Matrix lagged = Matrix::Zero(lag + 1, a);  // row k: sum_n w_n * w_{n-k}
  RowMatrix tail(0, a);
  const auto block = static_cast<Eigen::Index>(kGramBlockRows);
  for (Eigen::Index first = 0; first < residuals.rows(); first += block) {
    const auto count = std::min(block, residuals.rows() - first);
    RowMatrix w = (residuals.middleRows(first, count).rowwise() -
                   model.residual_mean.transpose()) * projector;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
    RowMatrix ext(tail.rows() + count, a);
    ext.topRows(tail.rows()) = tail;
    ext.bottomRows(count) = w;
    for (Eigen::Index k = 0; k <= lag; ++k) {
      const auto later = std::max(tail.rows(), k);
      const auto n = ext.rows() - later;
      if (n <= 0) continue;
      lagged.row(k) +=
          ext.middleRows(later, n).cwiseProduct(ext.middleRows(later - k, n)).colwise().sum();
    }
    const auto keep = std::min<Eigen::Index>(lag, ext.rows());
    tail = ext.bottomRows(keep);
  }
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  gram /= static_cast<double>(out.samples);
  for (Eigen::Index i = 0; i < a; ++i) {
    for (Eigen::Index j = 0; j < a; ++j) {
      if (i != j) out.max_offdiagonal_covariance = std::max(out.max_offdiagonal_covariance, std::abs(gram(i, j)));
    }
  }
  for (Eigen::Index c = 0; c < a; ++c) {
    const double energy = lagged(0, c);
    if (!(energy > 0.0)) continue;
    for (Eigen::Index k = 1; k <= lag; ++k) {
      out.max_autocorrelation = std::max(out.max_autocorrelation, std::abs(lagged(k, c) / energy));
    }
  }
  return out;
}

json FitReport::to_json() const {
  json j;
  j["total_frames"] = total_frames;
  j["training_frames"] = training_frames;
  j["held_out_frames"] = held_out_frames;
  j["held_out_split"] = held_out_frames > 0;
  j["pixels"] = pixels;
  j["components"] = components;
  j["lags"] = lags;
  j["filters"] = filters;
  j["variance_fraction"] = variance_fraction;
  j["retained_variance"] = retained_variance;
  j["cutoff_frequency"] = cutoff_frequency ? json(*cutoff_frequency) : json(nullptr);
  j["alphas"] = alphas;
  j["training_mse"] = training_mse;
  j["component_mse"] = component_mse;
  j["rank"] = rank;
  j["regressors"] = regressors;
  j["baseline"] = baseline;
  j["whiteness"] = {{"samples", whiteness.samples},
                    {"active_components", whiteness.active_components},
                    {"max_lag", whiteness.max_lag},
                    {"max_offdiagonal_covariance", whiteness.max_offdiagonal_covariance},
                    {"max_autocorrelation", whiteness.max_autocorrelation},
                    {"bound", whiteness.bound}};
  j["warnings"] = warnings;
  return j;
}

std::size_t replicate_length(std::size_t reference_frames, const ReplicateOptions& options) {
  if (options.length) {
    if (*options.length == 0) throw InputError("replicate length must be positive");
    return *options.length;
  }
  if (!(options.length_factor > 0.0)) throw InputError("length factor must be positive");
  const auto n = static_cast<std::size_t>(
      std::llround(options.length_factor * static_cast<double>(reference_frames)));
  if (n == 0) throw InputError("replicate length rounds to zero frames");
  return n;
}

EvaluationReport evaluate_model(const PhaseScreenSeries& reference, const RevarModel& model,
                                const ReplicateOptions& options) {
  const auto length = replicate_length(reference.frame_count(), options);
  const auto stats = series_statistics(reference, options.evaluation);
  return evaluate_model(stats, model, length, options);
}

EvaluationReport evaluate_model(const SeriesStatistics& reference, const RevarModel& model,
                                std::size_t length, const ReplicateOptions& options) {
  if (options.replicates == 0) throw InputError("need at least one replicate");
  if (!(model.geometry == reference.geometry)) {
    throw InputError("model and reference series have different aperture geometry");
  }
  if (model.provenance.sampling_frequency != reference.sampling_frequency) {
    throw InputError("model and reference series have different sampling frequencies");
  }
  std::shared_ptr<const RevarModel> handle(std::shared_ptr<const RevarModel>(), &model);
  EvaluationConfig inner = options.evaluation;
  inner.threads = options.replicates == 1 ? options.evaluation.threads : 1;
  std::vector<SeriesStatistics> stats(options.replicates);
  parallel_chunks(options.replicates, options.evaluation.threads, [&](std::size_t r) {
    SynthesisStream stream(handle, options.seed + r, options.stream);
    StatisticsAccumulator acc(model.geometry, model.provenance.sampling_frequency, inner);
    Vector frame;
    for (std::size_t n = 0; n < length; ++n) {
      stream.next(frame);
      acc.push(std::span<const double>(frame.data(), static_cast<std::size_t>(frame.size())));
    }
    stats[r] = acc.finish();
  });
  return compare_statistics(reference, stats, options.evaluation);
}

SweepResult sweep_lags(const PhaseScreenSeries& series, std::vector<std::size_t> lags,
                       const FitConfig& config, const ReplicateOptions& replicates) {
  if (lags.empty()) throw InputError("lag list is empty");
  if (config.baseline) throw InputError("a lag sweep cannot run in baseline mode");
  for (auto l : lags) {
    if (l == 0) throw InputError("lag counts must be at least 1");
  }
  const Prepared p = prepare(series, config);
  SweepResult out;
  out.first_target =
      std::max(*std::max_element(lags.begin(), lags.end()), config.first_target.value_or(0));

  std::optional<SeriesStatistics> reference;
  std::size_t length = 0;
  if (replicates.replicates > 0 && p.held_out_frames > 0) {
    const auto split = split_series(series, p.config.train_fraction);
    reference = stage("evaluation", [&] {
      return series_statistics(*split.held_out, replicates.evaluation);
    });
    length = replicate_length(p.held_out_frames, replicates);
    out.evaluated = true;
  }
  for (auto l : lags) {
    auto fit = finish(p, l, out.first_target);
    SweepRow row;
    row.lags = l;
    row.training_mse = fit.report.training_mse;
    if (reference) {
      row.evaluation = stage("evaluation", [&] {
        return evaluate_model(*reference, fit.model, length, replicates);
      });
    }
    row.fit = std::move(fit.report);
    out.rows.push_back(std::move(row));
  }
  return out;
}

json SweepResult::to_json() const {
  json j;
  j["first_target"] = first_target;
  j["evaluated"] = evaluated;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row = {{"lags", r.lags}, {"training_mse", r.training_mse}, {"fit", r.fit.to_json()}};
    if (r.evaluation) row["evaluation"] = revar::to_json(*r.evaluation);
    j["rows"].push_back(std::move(row));
  }
  return j;
}

}  // namespace revar
