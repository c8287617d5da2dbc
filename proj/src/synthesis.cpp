#include "revar/synthesis.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "revar/error.hpp"
#include "revar/persistence.hpp"
#include "revar/rewhitening.hpp"

namespace revar {

std::string to_string(FilterInit v) {
  return v == FilterInit::warm_from_initial ? "warm" : "zero";
}

std::string to_string(InitialVectors v) {
  return v == InitialVectors::first_pca ? "first-pca" : "residual";
}

FilterInit filter_init_from_string(const std::string& name) {
  if (name == "warm") return FilterInit::warm_from_initial;
  if (name == "zero") return FilterInit::zero;
  throw InputError("unknown filter initialisation '" + name + "' (expected warm or zero)");
}

InitialVectors initial_vectors_from_string(const std::string& name) {
  if (name == "first-pca") return InitialVectors::first_pca;
  if (name == "residual") return InitialVectors::residual_stats;
  throw InputError("unknown initial-vector mode '" + name + "' (expected first-pca or residual)");
}

namespace {
constexpr double kDivergenceFactor = 1e6;
}

SynthesisStream::SynthesisStream(std::shared_ptr<const RevarModel> model, std::uint64_t seed,
                                 StreamOptions options)
    : SynthesisStream(std::move(model), options, NoiseSource(seed)) {
  initialise();
  Vector discard;
  for (std::size_t k = 0; k < options_.burn_in; ++k) advance(discard, nullptr, nullptr);
}

SynthesisStream::SynthesisStream(std::shared_ptr<const RevarModel> model, StreamOptions options,
                                 NoiseSource noise)
    : model_(std::move(model)), options_(options), noise_(std::move(noise)) {
  if (!model_) throw InputError("synthesis needs a model");
  prepare();
}

void SynthesisStream::prepare() {
  const auto& m = *model_;
  if (m.lag_weights.size() != m.lags || m.filter_weights.size() != m.alphas.size()) {
    throw InputError("model weights are inconsistent with N_L / N_m");
  }
  const auto np = static_cast<Eigen::Index>(m.pixel_count());
  const auto nc = static_cast<Eigen::Index>(m.components);
  if (np != static_cast<Eigen::Index>(m.geometry.pixel_count()) || m.basis.rows() != np ||
      m.residual_basis.rows() != np || nc < 1 || nc > np) {
    throw InputError("model arrays are inconsistent with its geometry");
  }
  weights_ = PredictorWeights{m.lag_weights, m.filter_weights};
  sqrt_lambda_ = m.variances.head(nc).cwiseMax(0.0).cwiseSqrt();
  const Vector roots = floored_sqrt(m.residual_variances, m.inverse_floor);
  residual_active_.clear();
  for (Eigen::Index i = 0; i < np; ++i) {
    if (roots[i] > 0.0) residual_active_.push_back(i);
  }
  residual_columns_.resize(np, static_cast<Eigen::Index>(residual_active_.size()));
  for (std::size_t k = 0; k < residual_active_.size(); ++k) {
    const auto i = residual_active_[k];
    residual_columns_.col(static_cast<Eigen::Index>(k)) = m.residual_basis.col(i) * roots[i];
  }
  divergence_limit_ = kDivergenceFactor * std::sqrt(m.variances.sum());

  history_.assign(m.lags, Vector::Zero(nc));
  filters_ = FilterBank(m.alphas, static_cast<std::size_t>(nc));
  filter_view_.assign(m.alphas.size(), Vector::Zero(nc));
  white_.resize(np);
  coefficients_.resize(np);
}

void SynthesisStream::initialise() {
  const auto& m = *model_;
  const auto nc = static_cast<Eigen::Index>(m.components);
  const auto np = static_cast<Eigen::Index>(m.pixel_count());
  // White vectors for n = -N_L .. -1, drawn oldest first.
  std::vector<Vector> initial(m.lags);
  for (std::size_t k = 0; k < m.lags; ++k) {
    noise_.fill(std::span<double>(white_.data(), static_cast<std::size_t>(np)));
    if (options_.initial == InitialVectors::first_pca) {
      initial[k] = sqrt_lambda_.cwiseProduct(white_.head(nc));
    } else {
      Vector xi = m.residual_mean;
      for (std::size_t a = 0; a < residual_active_.size(); ++a) {
        xi.noalias() += residual_columns_.col(static_cast<Eigen::Index>(a)) *
                        white_[residual_active_[a]];
      }
      initial[k] = xi.head(nc);
    }
  }
  for (std::size_t k = 0; k < m.lags; ++k) history_[k] = initial[m.lags - 1 - k];
  filters_.reset();
  if (options_.filter_init == FilterInit::warm_from_initial) {
    for (const auto& v : initial) filters_.step(std::span<const double>(v.data(), v.size()));
  }
}

void SynthesisStream::advance(Vector& frame, Vector* top, OpCounter* counter) {
  const auto& m = *model_;
  const auto nc = static_cast<Eigen::Index>(m.components);
  const auto np = static_cast<Eigen::Index>(m.pixel_count());

  noise_.fill(std::span<double>(white_.data(), static_cast<std::size_t>(np)));
  coefficients_ = m.residual_mean;
  for (std::size_t a = 0; a < residual_active_.size(); ++a) {
    const auto i = residual_active_[a];
    coefficients_.noalias() += residual_columns_.col(static_cast<Eigen::Index>(a)) * white_[i];
  }
  if (counter) counter->add(static_cast<std::uint64_t>(np) * residual_active_.size());

  for (std::size_t i = 0; i < filter_view_.size(); ++i) {
    const auto s = filters_.state(i);
    filter_view_[i] = Eigen::Map<const Vector>(s.data(), nc);
  }
  coefficients_.head(nc) += predict(history_, filter_view_, weights_, counter);

  const double norm = coefficients_.norm();
  if (!std::isfinite(norm) || norm > divergence_limit_) {
    throw StabilityError("synthesis diverged at step " + std::to_string(position_) +
                             " (coefficient norm " + std::to_string(norm) + ")",
                         static_cast<std::size_t>(position_));
  }

  for (std::size_t l = history_.size(); l-- > 1;) history_[l].swap(history_[l - 1]);
  history_[0] = coefficients_.head(nc);
  filters_.step(std::span<const double>(history_[0].data(), static_cast<std::size_t>(nc)), counter);

  frame = m.scale.cwiseProduct(m.basis * coefficients_) + m.mean;
  if (counter) counter->add(static_cast<std::uint64_t>(np) * static_cast<std::uint64_t>(np + 1));
  if (top) *top = history_[0];
}

void SynthesisStream::next(Vector& frame, Vector* top_coefficients, OpCounter* counter) {
  advance(frame, top_coefficients, counter);
  ++position_;
}

SynthesisStream::Checkpoint SynthesisStream::checkpoint() const {
  Checkpoint out;
  out.noise = noise_.state();
  out.position = position_;
  out.options = options_;
  for (const auto& h : history_) out.history.emplace_back(h.data(), h.data() + h.size());
  for (std::size_t i = 0; i < filters_.size(); ++i) {
    const auto s = filters_.state(i);
    out.filters.emplace_back(s.begin(), s.end());
  }
  return out;
}

SynthesisStream SynthesisStream::restore(std::shared_ptr<const RevarModel> model,
                                         const Checkpoint& checkpoint) {
  SynthesisStream out(std::move(model), checkpoint.options, NoiseSource::restore(checkpoint.noise));
  const auto& m = *out.model_;
  if (checkpoint.history.size() != m.lags || checkpoint.filters.size() != m.alphas.size()) {
    throw FormatError("checkpoint does not match the model's lag and filter counts");
  }
  for (std::size_t l = 0; l < m.lags; ++l) {
    const auto& h = checkpoint.history[l];
    if (h.size() != m.components) throw FormatError("checkpoint lag vector has the wrong length");
    out.history_[l] = Eigen::Map<const Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
  }
  for (std::size_t i = 0; i < m.alphas.size(); ++i) {
    const auto& f = checkpoint.filters[i];
    if (f.size() != m.components) throw FormatError("checkpoint filter state has the wrong length");
    std::copy(f.begin(), f.end(), out.filters_.state(i).begin());
  }
  out.position_ = checkpoint.position;
  return out;
}

SynthesisResult generate(const RevarModel& model, const SynthesisConfig& config,
                         OpCounter* counter) {
  if (config.length == 0) throw InputError("synthesis length must be at least one frame");
  // Non-owning handle; the stream does not outlive this call.
  std::shared_ptr<const RevarModel> handle(std::shared_ptr<const RevarModel>(), &model);
  SynthesisStream stream(handle, config.seed, config.options);

  const auto np = static_cast<Eigen::Index>(model.pixel_count());
  const auto nc = static_cast<Eigen::Index>(model.components);
  SynthesisResult out;
  out.series.geometry = model.geometry;
  out.series.sampling_frequency = model.provenance.sampling_frequency;
  out.series.label = "synthetic";
  out.series.frames.resize(static_cast<Eigen::Index>(config.length), np);
  if (config.emit_coefficients) {
    out.coefficients.resize(static_cast<Eigen::Index>(config.length), nc);
  }
  Vector frame(np);
  Vector top(nc);
  for (std::size_t n = 0; n < config.length; ++n) {
    stream.next(frame, config.emit_coefficients ? &top : nullptr, counter);
    out.series.frames.row(static_cast<Eigen::Index>(n)) = frame.transpose();
    if (config.emit_coefficients) out.coefficients.row(static_cast<Eigen::Index>(n)) = top.transpose();
  }

  nlohmann::json prov;
  prov["seed"] = config.seed;
  prov["generator"] = std::string(NoiseSource::kGeneratorName);
  prov["model_hash"] = model_content_hash(model);
  prov["burn_in"] = config.options.burn_in;
  prov["filter_init"] = to_string(config.options.filter_init);
  prov["initial_vectors"] = to_string(config.options.initial);
  out.series.provenance_json = prov.dump();
  return out;
}

}  // namespace revar
