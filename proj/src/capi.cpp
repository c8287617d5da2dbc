#include "revar/revar.h"

#include <cstring>
#include <memory>
#include <new>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "revar/error.hpp"
#include "revar/metrics.hpp"
#include "revar/oracle.hpp"
#include "revar/persistence.hpp"
#include "revar/pipeline.hpp"
#include "revar/report.hpp"
#include "revar/synthesis.hpp"

using nlohmann::json;

struct revar_series {
  revar::PhaseScreenSeries series;
  revar::RowMatrix coefficients;
};

struct revar_model {
  std::shared_ptr<const revar::RevarModel> model;
  json report;
};

struct revar_stream {
  std::shared_ptr<const revar::RevarModel> model;
  revar::SynthesisStream stream;
};

struct revar_evaluation {
  revar::EvaluationReport report;
};

struct revar_sweep {
  revar::SweepResult result;
};

namespace {

thread_local std::string g_last_error;

constexpr const char* kVersion = "1.0.0";

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

int code_for(revar::ErrorKind kind) {
  switch (kind) {
    case revar::ErrorKind::input: return REVAR_ERROR_INPUT;
    case revar::ErrorKind::format: return REVAR_ERROR_FORMAT;
    case revar::ErrorKind::io: return REVAR_ERROR_IO;
    case revar::ErrorKind::numerical: return REVAR_ERROR_NUMERICAL;
    case revar::ErrorKind::stability: return REVAR_ERROR_STABILITY;
    case revar::ErrorKind::internal: return REVAR_ERROR_UNKNOWN;
  }
  return REVAR_ERROR_UNKNOWN;
}

struct NullArgument {};

// An output array shorter than the result.
struct ShortBuffer : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename... P>
void require(const P*... pointers) {
  if (((pointers == nullptr) || ...)) throw NullArgument{};
}

void require_capacity(size_t have, size_t need) {
  if (have < need) {
    throw ShortBuffer("output holds " + std::to_string(have) + " values, need " +
                      std::to_string(need));
  }
}

template <typename F>
int call(F&& f) {
  try {
    g_last_error.clear();
    f();
    return REVAR_OK;
  } catch (const NullArgument&) {
    return fail(REVAR_ERROR_NULL_POINTER, "required pointer argument is NULL");
  } catch (const ShortBuffer& e) {
    return fail(REVAR_ERROR_INSUFFICIENT_BUFFER, e.what());
  } catch (const revar::Error& e) {
    return fail(code_for(e.kind()), e.what());
  } catch (const json::exception& e) {
    return fail(REVAR_ERROR_INPUT, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(REVAR_ERROR_UNKNOWN, "out of memory");
  } catch (const std::exception& e) {
    return fail(REVAR_ERROR_UNKNOWN, e.what());
  } catch (...) {
    return fail(REVAR_ERROR_UNKNOWN, "unknown failure");
  }
}

// Copies `text` under the size-query protocol. Throws nothing.
int emit(const std::string& text, char* buf, size_t* len) {
  const size_t need = text.size() + 1;
  if (buf == nullptr || *len < need) {
    *len = need;
    return fail(REVAR_ERROR_INSUFFICIENT_BUFFER,
                "output buffer needs " + std::to_string(need) + " bytes");
  }
  std::memcpy(buf, text.c_str(), need);
  *len = need;
  return REVAR_OK;
}

// Reads a JSON options object, rejecting keys nobody asked for.
class Options {
 public:
  explicit Options(const char* text) {
    if (text != nullptr && *text != '\0') {
      try {
        j_ = json::parse(text);
      } catch (const json::parse_error& e) {
        throw revar::InputError(std::string("options are not valid JSON: ") + e.what());
      }
      if (!j_.is_object()) throw revar::InputError("options must be a JSON object");
    } else {
      j_ = json::object();
    }
  }

  bool has(const char* key) {
    used_.insert(key);
    return j_.contains(key) && !j_[key].is_null();
  }

  template <typename T>
  T get(const char* key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_[key].get<T>();
    } catch (const json::exception&) {
      throw revar::InputError(std::string("option '") + key + "' has the wrong type");
    }
  }

  const json& raw(const char* key) {
    used_.insert(key);
    return j_[key];
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw revar::InputError("unknown option '" + key + "'");
    }
  }

 private:
  json j_;
  std::set<std::string> used_;
};

revar::WelchConfig read_welch(Options& o) {
  revar::WelchConfig w;
  w.segment_length = o.get<std::size_t>("segment_length", w.segment_length);
  w.overlap = o.get<double>("overlap", w.overlap);
  if (o.has("window")) w.window = revar::window_from_string(o.get<std::string>("window", ""));
  return w;
}

revar::FitConfig read_fit(Options& o) {
  revar::FitConfig c;
  c.lags = o.get<std::size_t>("lags", c.lags);
  c.filters = o.get<std::size_t>("filters", c.filters);
  c.variance_fraction = o.get<double>("variance_fraction", c.variance_fraction);
  c.train_fraction = o.get<double>("train_fraction", c.train_fraction);
  c.welch = read_welch(o);
  if (o.has("alpha_rule")) {
    c.alpha_rule = revar::alpha_rule_from_string(o.get<std::string>("alpha_rule", ""));
  }
  if (o.has("alphas")) c.alphas = o.get<std::vector<double>>("alphas", {});
  if (o.has("baseline")) {
    const auto& b = o.raw("baseline");
    if (b.is_boolean()) {
      c.baseline = b.get<bool>();
    } else if (b.is_string() && b.get<std::string>() == "vogel") {
      c.baseline = true;
    } else if (b.is_string() && b.get<std::string>() == "none") {
      c.baseline = false;
    } else {
      throw revar::InputError("baseline must be \"vogel\", \"none\" or a boolean");
    }
  }
  c.threads = o.get<std::size_t>("threads", c.threads);
  c.pixel_floor = o.get<double>("pixel_floor", c.pixel_floor);
  c.inverse_floor = o.get<double>("inverse_floor", c.inverse_floor);
  if (o.has("first_target")) c.first_target = o.get<std::size_t>("first_target", 0);
  return c;
}

revar::StreamOptions read_stream(Options& o) {
  revar::StreamOptions s;
  s.burn_in = o.get<std::size_t>("burn_in", s.burn_in);
  if (o.has("filter_init")) {
    s.filter_init = revar::filter_init_from_string(o.get<std::string>("filter_init", ""));
  }
  if (o.has("initial_vectors")) {
    s.initial = revar::initial_vectors_from_string(o.get<std::string>("initial_vectors", ""));
  }
  return s;
}

revar::EvaluationConfig read_evaluation(Options& o, const revar::WelchConfig& welch,
                                        std::size_t threads) {
  revar::EvaluationConfig e;
  e.welch = welch;
  e.max_dx = o.get<std::ptrdiff_t>("max_dx", e.max_dx);
  e.max_dy = o.get<std::ptrdiff_t>("max_dy", e.max_dy);
  e.min_pairs = o.get<std::size_t>("min_pairs", e.min_pairs);
  e.remove_piston = o.get<bool>("remove_piston", e.remove_piston);
  e.threads = threads;
  return e;
}

revar::ReplicateOptions read_replicates(Options& o, const revar::EvaluationConfig& evaluation,
                                        bool seed_required) {
  revar::ReplicateOptions r;
  if (seed_required && !o.has("seed")) {
    throw revar::InputError("a seed is required when generating replicates");
  }
  r.seed = o.get<std::uint64_t>("seed", 0);
  r.replicates = o.get<std::size_t>("replicates", r.replicates);
  r.length_factor = o.get<double>("length_factor", r.length_factor);
  if (o.has("length")) r.length = o.get<std::size_t>("length", 0);
  r.stream = read_stream(o);
  r.evaluation = evaluation;
  return r;
}

json geometry_summary(const revar::ApertureGeometry& g) {
  json j = revar::geometry_to_json(g);
  j["n_pixels"] = g.pixel_count();
  return j;
}

json model_summary(const revar::RevarModel& m) {
  json j;
  j["format"] = "revar-model";
  j["format_version"] = revar::kModelFormatVersion;
  j["geometry"] = geometry_summary(m.geometry);
  j["n_pixels"] = m.pixel_count();
  j["n_components"] = m.components;
  j["n_lags"] = m.lags;
  j["n_filters"] = m.filter_count();
  j["alphas"] = m.alphas;
  j["cutoff_frequency"] = m.provenance.cutoff_frequency;
  j["variance_fraction"] = m.provenance.variance_fraction;
  j["alpha_rule"] = m.provenance.alpha_rule;
  j["training_frames"] = m.provenance.training_frames;
  j["sampling_frequency_hz"] = m.provenance.sampling_frequency;
  j["label"] = m.provenance.label;
  j["content_hash"] = revar::model_content_hash(m);
  return j;
}

revar_series* wrap(revar::PhaseScreenSeries s, revar::RowMatrix coefficients = {}) {
  return new revar_series{std::move(s), std::move(coefficients)};
}

}  // namespace

extern "C" {

const char* revar_version(void) { return kVersion; }

const char* revar_error_name(int code) {
  switch (code) {
    case REVAR_OK: return "ok";
    case REVAR_ERROR_INPUT: return "input error";
    case REVAR_ERROR_FORMAT: return "format error";
    case REVAR_ERROR_IO: return "I/O error";
    case REVAR_ERROR_NUMERICAL: return "numerical error";
    case REVAR_ERROR_STABILITY: return "stability error";
    case REVAR_ERROR_NULL_POINTER: return "null pointer";
    case REVAR_ERROR_INSUFFICIENT_BUFFER: return "insufficient buffer";
    default: return "unknown error";
  }
}

const char* revar_last_error(void) { return g_last_error.c_str(); }

// ---- series ----

int revar_series_read(const char* path, revar_series** out) {
  return call([&] {
    require(path, out);
    *out = nullptr;
    *out = wrap(revar::read_pss(path));
  });
}

int revar_series_write(const revar_series* series, const char* path) {
  return call([&] {
    require(series, path);
    revar::write_pss(series->series, path,
                     series->coefficients.size() ? &series->coefficients : nullptr);
  });
}

int revar_series_create(size_t rows, size_t cols, const uint8_t* mask, double pitch_x,
                        double pitch_y, size_t frames, const double* data,
                        double sampling_frequency, revar_series** out) {
  return call([&] {
    require(out);
    *out = nullptr;
    if (frames > 0) require(data);
    revar::PhaseScreenSeries s;
    s.geometry = mask ? revar::ApertureGeometry(rows, cols,
                                                std::vector<std::uint8_t>(mask, mask + rows * cols),
                                                pitch_x, pitch_y)
                      : revar::ApertureGeometry::rectangle(rows, cols, pitch_x, pitch_y);
    s.sampling_frequency = sampling_frequency;
    const auto np = s.geometry.pixel_count();
    s.frames = Eigen::Map<const revar::RowMatrix>(data, static_cast<Eigen::Index>(frames),
                                                  static_cast<Eigen::Index>(np));
    s.validate();
    *out = wrap(std::move(s));
  });
}

void revar_series_destroy(revar_series* series) { delete series; }

int revar_series_dims(const revar_series* series, size_t* rows, size_t* cols, size_t* pixels,
                      size_t* frames) {
  return call([&] {
    require(series);
    const auto& s = series->series;
    if (rows) *rows = s.geometry.rows();
    if (cols) *cols = s.geometry.cols();
    if (pixels) *pixels = s.pixel_count();
    if (frames) *frames = s.frame_count();
  });
}

int revar_series_copy_frames(const revar_series* series, size_t first, size_t count, double* out,
                             size_t out_len) {
  return call([&] {
    require(series, out);
    const auto& s = series->series;
    if (first > s.frame_count() || count > s.frame_count() - first) {
      throw revar::InputError("frame range exceeds the series");
    }
    const size_t need = count * s.pixel_count();
    require_capacity(out_len, need);
    std::memcpy(out, s.frames.row(static_cast<Eigen::Index>(first)).data(),
                need * sizeof(double));
  });
}

int revar_series_coefficients(const revar_series* series, size_t* components, double* out,
                              size_t out_len) {
  return call([&] {
    require(series, components);
    const auto& c = series->coefficients;
    *components = static_cast<size_t>(c.cols());
    if (c.size() == 0) throw revar::InputError("series carries no coefficients");
    require_capacity(out == nullptr ? 0 : out_len, static_cast<size_t>(c.size()));
    std::memcpy(out, c.data(), static_cast<size_t>(c.size()) * sizeof(double));
  });
}

int revar_series_info_json(const revar_series* series, char* buf, size_t* len) {
  std::string text;
  const int rc = call([&] {
    require(series, len);
    const auto& s = series->series;
    json j = revar::geometry_to_json(s.geometry);
    j["format"] = "PSS";
    j["version"] = revar::kPssFormatVersion;
    j["n_pixels"] = s.pixel_count();
    j["n_frames"] = s.frame_count();
    j["sampling_frequency_hz"] = s.sampling_frequency;
    j["units"] = s.units;
    j["label"] = s.label;
    if (!s.provenance_json.empty()) j["provenance"] = json::parse(s.provenance_json, nullptr, false);
    revar::WelchConfig welch;
    if (s.frame_count() >= welch.segment_length) {
      const auto spectrum = revar::tps(s, welch);
      try {
        j["tps_peak_frequency_hz"] = spectrum.frequencies[spectrum.peak_bin()];
      } catch (const revar::NumericalError&) {
        j["tps_peak_frequency_hz"] = nullptr;
      }
    }
    if (series->coefficients.size()) j["coefficient_components"] = series->coefficients.cols();
    text = j.dump(2);
  });
  return rc == REVAR_OK ? emit(text, buf, len) : rc;
}

int revar_series_split(const revar_series* series, double train_fraction,
                       revar_series** training, revar_series** held_out) {
  return call([&] {
    require(series, training);
    *training = nullptr;
    if (held_out) *held_out = nullptr;
    auto split = revar::split_series(series->series, train_fraction);
    std::unique_ptr<revar_series> train(wrap(std::move(split.training)));
    if (held_out && split.held_out) *held_out = wrap(std::move(*split.held_out));
    *training = train.release();
  });
}

// ---- models ----

int revar_model_fit(const revar_series* series, const char* options_json, revar_model** out) {
  return call([&] {
    require(series, out);
    *out = nullptr;
    Options o(options_json);
    const auto config = read_fit(o);
    o.finish();
    auto fit = revar::fit_model(series->series, config);
    *out = new revar_model{std::make_shared<const revar::RevarModel>(std::move(fit.model)),
                           fit.report.to_json()};
  });
}

int revar_model_save(const revar_model* model, const char* path) {
  return call([&] {
    require(model, path);
    revar::save_model(*model->model, path, model->report);
  });
}

int revar_model_load(const char* path, revar_model** out) {
  return call([&] {
    require(path, out);
    *out = nullptr;
    auto m = revar::load_model(path);
    json report;
    const auto j = revar::read_json(std::filesystem::path(path) / "model.json");
    if (j.contains("fit_report")) report = j["fit_report"];
    *out = new revar_model{std::make_shared<const revar::RevarModel>(std::move(m)), report};
  });
}

void revar_model_destroy(revar_model* model) { delete model; }

int revar_model_info_json(const revar_model* model, char* buf, size_t* len) {
  std::string text;
  const int rc = call([&] {
    require(model, len);
    text = model_summary(*model->model).dump(2);
  });
  return rc == REVAR_OK ? emit(text, buf, len) : rc;
}

int revar_model_report_json(const revar_model* model, char* buf, size_t* len) {
  std::string text;
  const int rc = call([&] {
    require(model, len);
    text = model->report.dump(2);
  });
  return rc == REVAR_OK ? emit(text, buf, len) : rc;
}

// ---- synthesis ----

int revar_generate(const revar_model* model, size_t frames, uint64_t seed,
                   const char* options_json, revar_series** out) {
  return call([&] {
    require(model, out);
    *out = nullptr;
    Options o(options_json);
    revar::SynthesisConfig config;
    config.length = frames;
    config.seed = seed;
    config.options = read_stream(o);
    config.emit_coefficients = o.get<bool>("coefficients", false);
    o.finish();
    auto result = revar::generate(*model->model, config);
    *out = wrap(std::move(result.series), std::move(result.coefficients));
  });
}

int revar_stream_create(const revar_model* model, uint64_t seed, const char* options_json,
                        revar_stream** out) {
  return call([&] {
    require(model, out);
    *out = nullptr;
    Options o(options_json);
    const auto options = read_stream(o);
    o.finish();
    *out = new revar_stream{model->model, revar::SynthesisStream(model->model, seed, options)};
  });
}

int revar_stream_next(revar_stream* stream, double* frame, size_t frame_len) {
  return call([&] {
    require(stream, frame);
    const auto np = stream->model->pixel_count();
    require_capacity(frame_len, np);
    revar::Vector v;
    stream->stream.next(v);
    std::memcpy(frame, v.data(), np * sizeof(double));
  });
}

int revar_stream_position(const revar_stream* stream, uint64_t* position) {
  return call([&] {
    require(stream, position);
    *position = stream->stream.position();
  });
}

int revar_stream_checkpoint(const revar_stream* stream, char* buf, size_t* len) {
  std::string text;
  const int rc = call([&] {
    require(stream, len);
    auto j = revar::checkpoint_to_json(stream->stream.checkpoint());
    j["model_hash"] = revar::model_content_hash(*stream->model);
    text = j.dump();
  });
  return rc == REVAR_OK ? emit(text, buf, len) : rc;
}

int revar_stream_restore(const revar_model* model, const char* checkpoint_json,
                         revar_stream** out) {
  return call([&] {
    require(model, checkpoint_json, out);
    *out = nullptr;
    json j;
    try {
      j = json::parse(checkpoint_json);
    } catch (const json::parse_error& e) {
      throw revar::FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (j.contains("model_hash") &&
        j["model_hash"].get<std::string>() != revar::model_content_hash(*model->model)) {
      throw revar::FormatError("checkpoint was taken from a different model");
    }
    auto checkpoint = revar::checkpoint_from_json(j);
    *out = new revar_stream{model->model,
                            revar::SynthesisStream::restore(model->model, checkpoint)};
  });
}

void revar_stream_destroy(revar_stream* stream) { delete stream; }

// ---- evaluation ----

int revar_evaluate(const revar_series* reference, const revar_series* synthetic,
                   const char* options_json, revar_evaluation** out) {
  return call([&] {
    require(reference, synthetic, out);
    *out = nullptr;
    Options o(options_json);
    const auto welch = read_welch(o);
    const auto threads = o.get<std::size_t>("threads", 1);
    const auto config = read_evaluation(o, welch, threads);
    o.finish();
    *out = new revar_evaluation{revar::evaluate(reference->series, synthetic->series, config)};
  });
}

int revar_evaluate_model(const revar_series* reference, const revar_model* model,
                         const char* options_json, revar_evaluation** out) {
  return call([&] {
    require(reference, model, out);
    *out = nullptr;
    Options o(options_json);
    const auto welch = read_welch(o);
    const auto threads = o.get<std::size_t>("threads", 1);
    const auto config = read_evaluation(o, welch, threads);
    const auto replicates = read_replicates(o, config, true);
    const double train_fraction = o.get<double>("train_fraction", 0.8);
    o.finish();
    const auto split = revar::split_series(reference->series, train_fraction);
    const auto& target = split.held_out ? *split.held_out : split.training;
    *out = new revar_evaluation{revar::evaluate_model(target, *model->model, replicates)};
  });
}

int revar_evaluation_metrics(const revar_evaluation* evaluation, double metrics[4]) {
  return call([&] {
    require(evaluation, metrics);
    const auto& r = evaluation->report;
    metrics[0] = r.opd_tps_nrmse;
    metrics[1] = r.slopes_tps_nrmse;
    metrics[2] = r.opd_rms_relative_error;
    metrics[3] = r.structure_function_nrmse;
  });
}

int revar_evaluation_json(const revar_evaluation* evaluation, char* buf, size_t* len) {
  std::string text;
  const int rc = call([&] {
    require(evaluation, len);
    text = revar::to_json(evaluation->report).dump(2);
  });
  return rc == REVAR_OK ? emit(text, buf, len) : rc;
}

int revar_evaluation_write(const revar_evaluation* evaluation, const char* dir) {
  return call([&] {
    require(evaluation, dir);
    revar::write_evaluation_outputs(evaluation->report, dir);
  });
}

void revar_evaluation_destroy(revar_evaluation* evaluation) { delete evaluation; }

// ---- sweep ----

int revar_sweep_lags(const revar_series* series, const size_t* lags, size_t count,
                     const char* options_json, revar_sweep** out) {
  return call([&] {
    require(series, lags, out);
    *out = nullptr;
    Options o(options_json);
    const auto fit = read_fit(o);
    const auto config = read_evaluation(o, fit.welch, fit.threads);
    const auto replicates = read_replicates(o, config, false);
    if (replicates.replicates > 0 && !o.has("seed")) {
      throw revar::InputError("a seed is required when the sweep evaluates replicates");
    }
    o.finish();
    *out = new revar_sweep{
        revar::sweep_lags(series->series, std::vector<size_t>(lags, lags + count), fit, replicates)};
  });
}

int revar_sweep_json(const revar_sweep* sweep, char* buf, size_t* len) {
  std::string text;
  const int rc = call([&] {
    require(sweep, len);
    text = sweep->result.to_json().dump(2);
  });
  return rc == REVAR_OK ? emit(text, buf, len) : rc;
}

int revar_sweep_write(const revar_sweep* sweep, const char* dir) {
  return call([&] {
    require(sweep, dir);
    revar::write_sweep_outputs(sweep->result, dir);
  });
}

void revar_sweep_destroy(revar_sweep* sweep) { delete sweep; }

// ---- oracles and containers ----

int revar_make_oracle(const char* spec_json, revar_series** series, revar_model** truth) {
  return call([&] {
    require(series);
    *series = nullptr;
    if (truth) *truth = nullptr;
    json j = json::object();
    if (spec_json && *spec_json) {
      try {
        j = json::parse(spec_json);
      } catch (const json::parse_error& e) {
        throw revar::InputError(std::string("oracle spec is not valid JSON: ") + e.what());
      }
    }
    auto data = revar::make_oracle(revar::oracle_spec_from_json(j));
    std::unique_ptr<revar_series> s(wrap(std::move(data.series), std::move(data.coefficients)));
    if (truth && data.truth) {
      *truth = new revar_model{std::make_shared<const revar::RevarModel>(std::move(*data.truth)),
                               json()};
    }
    *series = s.release();
  });
}

int revar_detect_container(const char* path, int* kind) {
  return call([&] {
    require(path, kind);
    switch (revar::detect_container(path)) {
      case revar::ContainerKind::pss: *kind = REVAR_CONTAINER_PSS; break;
      case revar::ContainerKind::model: *kind = REVAR_CONTAINER_MODEL; break;
      case revar::ContainerKind::unknown: *kind = REVAR_CONTAINER_UNKNOWN; break;
    }
  });
}

}  // extern "C"
