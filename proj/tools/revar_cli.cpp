// revar command-line front end. Talks to the library only through revar.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "revar/revar.h"

using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kInput = 2, kNumerical = 3, kIo = 4 };

struct Failure {
  int code;
  std::string message;
};

int exit_code_for(int rc) {
  switch (rc) {
    case REVAR_ERROR_INPUT:
    case REVAR_ERROR_FORMAT:
      return kInput;
    case REVAR_ERROR_NUMERICAL:
    case REVAR_ERROR_STABILITY:
      return kNumerical;
    case REVAR_ERROR_IO:
      return kIo;
    default:
      return kOther;
  }
}

void check(int rc, const std::string& what) {
  if (rc == REVAR_OK) return;
  std::string msg = what + ": " + revar_error_name(rc);
  const std::string detail = revar_last_error();
  if (!detail.empty()) msg += ": " + detail;
  throw Failure{exit_code_for(rc), msg};
}

template <typename Handle, typename Fn>
std::string fetch_string(const Handle* h, Fn fn, const std::string& what) {
  size_t len = 0;
  int rc = fn(h, nullptr, &len);
  if (rc != REVAR_ERROR_INSUFFICIENT_BUFFER) check(rc, what);
  std::string out(len, '\0');
  check(fn(h, out.data(), &len), what);
  out.resize(len - 1);
  return out;
}

// RAII wrappers over the opaque handles.
template <typename T, void (*Destroy)(T*)>
struct Owned {
  T* p = nullptr;
  Owned() = default;
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  ~Owned() { Destroy(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Series = Owned<revar_series, revar_series_destroy>;
using Model = Owned<revar_model, revar_model_destroy>;
using Evaluation = Owned<revar_evaluation, revar_evaluation_destroy>;
using Sweep = Owned<revar_sweep, revar_sweep_destroy>;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kIo, "cannot open " + path};
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Failure{kInput, path + ": " + e.what()};
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out || !(out << text << '\n')) throw Failure{kIo, "cannot write " + path};
}

// Flag values that were actually given on the command line end up in the
// options object; everything else keeps the library default.
struct OptionSet {
  json j = json::object();

  template <typename T>
  void add(const char* key, const std::optional<T>& value) {
    if (value) j[key] = *value;
  }
  std::string dump() const { return j.dump(); }
};

struct FitFlags {
  std::optional<std::size_t> lags, filters, threads, first_target;
  std::optional<double> variance_fraction, train_fraction;
  std::optional<std::string> baseline, alpha_rule;
  std::vector<double> alphas;

  void attach(CLI::App* cmd, bool with_lags = true) {
    if (with_lags) cmd->add_option("--lags", lags, "number of time lags N_L (default 4)");
    cmd->add_option("--filters", filters, "number of low-pass filters N_m (default 2)");
    cmd->add_option("--variance-fraction", variance_fraction,
                    "variance retained by the top components (default 0.99)");
    cmd->add_option("--train-fraction", train_fraction,
                    "leading share of frames used for training (default 0.8)");
    cmd->add_option("--baseline", baseline, "vogel: full-space single-lag VAR")
        ->check(CLI::IsMember({"vogel", "none"}));
    cmd->add_option("--alpha-rule", alpha_rule, "filter coefficient rule: linear or exact")
        ->check(CLI::IsMember({"linear", "exact"}));
    cmd->add_option("--alphas", alphas, "explicit filter coefficients (overrides estimation)");
    cmd->add_option("--threads", threads, "worker threads (results do not depend on this)");
    cmd->add_option("--first-target", first_target,
                    "first frame used as a regression target (default N_L)");
  }

  void fill(OptionSet& o) const {
    o.add("lags", lags);
    o.add("filters", filters);
    o.add("variance_fraction", variance_fraction);
    o.add("train_fraction", train_fraction);
    o.add("baseline", baseline);
    o.add("alpha_rule", alpha_rule);
    if (!alphas.empty()) o.j["alphas"] = alphas;
    o.add("threads", threads);
    o.add("first_target", first_target);
  }
};

struct WelchFlags {
  std::optional<std::size_t> segment_length;
  std::optional<double> overlap;
  std::optional<std::string> window;

  void attach(CLI::App* cmd) {
    cmd->add_option("--segment-length", segment_length, "Welch segment length (default 1024)");
    cmd->add_option("--overlap", overlap, "Welch segment overlap fraction (default 0.5)");
    cmd->add_option("--window", window, "Welch window: hamming, hann or rectangular")
        ->check(CLI::IsMember({"hamming", "hann", "rectangular"}));
  }

  void fill(OptionSet& o) const {
    o.add("segment_length", segment_length);
    o.add("overlap", overlap);
    o.add("window", window);
  }
};

struct MetricFlags {
  std::optional<std::ptrdiff_t> max_dx, max_dy;
  std::optional<std::size_t> min_pairs;
  bool remove_piston = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--max-dx", max_dx, "largest structure-function offset along x");
    cmd->add_option("--max-dy", max_dy, "largest structure-function offset along y");
    cmd->add_option("--min-pairs", min_pairs, "minimum pixel pairs per offset");
    cmd->add_flag("--remove-piston", remove_piston, "subtract the per-frame mean first");
  }

  void fill(OptionSet& o) const {
    o.add("max_dx", max_dx);
    o.add("max_dy", max_dy);
    o.add("min_pairs", min_pairs);
    if (remove_piston) o.j["remove_piston"] = true;
  }
};

struct StreamFlags {
  std::optional<std::size_t> burn_in;
  std::optional<std::string> filter_init, initial_vectors;

  void attach(CLI::App* cmd) {
    cmd->add_option("--burn-in", burn_in, "frames discarded before output (default 0)");
    cmd->add_option("--filter-init", filter_init, "warm or zero")
        ->check(CLI::IsMember({"warm", "zero"}));
    cmd->add_option("--initial-vectors", initial_vectors, "first-pca or residual")
        ->check(CLI::IsMember({"first-pca", "residual"}));
  }

  void fill(OptionSet& o) const {
    o.add("burn_in", burn_in);
    o.add("filter_init", filter_init);
    o.add("initial_vectors", initial_vectors);
  }
};

struct ReplicateFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates, length;
  std::optional<double> length_factor;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "base seed; replicate r uses seed + r");
    cmd->add_option("--replicates", replicates, "synthetic replicates (default 20)");
    cmd->add_option("--length-factor", length_factor,
                    "replicate length as a multiple of the reference (default 20)");
    cmd->add_option("--length", length, "explicit replicate length in frames");
  }

  void fill(OptionSet& o) const {
    o.add("seed", seed);
    o.add("replicates", replicates);
    o.add("length", length);
    o.add("length_factor", length_factor);
  }
};

void print_metrics(const revar_evaluation* e) {
  double m[4];
  check(revar_evaluation_metrics(e, m), "evaluate");
  std::printf("OPD TPS NRMSE            %.4f%%\n", 100.0 * m[0]);
  std::printf("slopes TPS NRMSE         %.4f%%\n", 100.0 * m[1]);
  std::printf("OPD_rms relative error   %.4f%%\n", 100.0 * m[2]);
  std::printf("structure function NRMSE %.4f%%\n", 100.0 * m[3]);
}

int container_kind(const std::string& path) {
  int kind = REVAR_CONTAINER_UNKNOWN;
  check(revar_detect_container(path.c_str(), &kind), path);
  return kind;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"revar: fit, synthesize and evaluate aero-optic phase-screen models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(revar_version()));

  // fit
  auto* fit = app.add_subcommand("fit", "fit a model on the training split of a PSS series");
  std::string fit_input, fit_output, fit_report;
  FitFlags fit_flags;
  WelchFlags fit_welch;
  fit->add_option("input", fit_input, "PSS directory")->required();
  fit->add_option("-o,--output", fit_output, "model directory to write")->required();
  fit->add_option("--report", fit_report, "also write the fit report JSON here");
  fit_flags.attach(fit);
  fit_welch.attach(fit);

  // generate
  auto* gen = app.add_subcommand("generate", "synthesize a PSS series from a model");
  std::string gen_model, gen_output;
  std::size_t gen_frames = 0;
  std::uint64_t gen_seed = 0;
  bool gen_coefficients = false;
  StreamFlags gen_stream;
  gen->add_option("model", gen_model, "model directory")->required();
  gen->add_option("-n,--frames", gen_frames, "frames to synthesize")->required();
  gen->add_option("--seed", gen_seed, "noise seed")->required();
  gen->add_option("-o,--output", gen_output, "PSS directory to write")->required();
  gen->add_flag("--coefficients", gen_coefficients, "also store the top principal coefficients");
  gen_stream.attach(gen);

  // evaluate
  auto* eval = app.add_subcommand(
      "evaluate", "compare a reference series against a synthetic series or a model");
  std::string eval_reference, eval_candidate, eval_output;
  std::optional<double> eval_train_fraction;
  std::optional<std::size_t> eval_threads;
  WelchFlags eval_welch;
  MetricFlags eval_metrics;
  ReplicateFlags eval_replicates;
  StreamFlags eval_stream;
  eval->add_option("reference", eval_reference, "reference PSS directory")->required();
  eval->add_option("candidate", eval_candidate, "synthetic PSS directory or model directory")
      ->required();
  eval->add_option("-o,--output", eval_output, "directory for report.json, CSV and SVG");
  eval->add_option("--train-fraction", eval_train_fraction,
                   "with a model: frames after this split form the reference (default 0.8)");
  eval->add_option("--threads", eval_threads, "worker threads (results do not depend on this)");
  eval_welch.attach(eval);
  eval_metrics.attach(eval);
  eval_replicates.attach(eval);
  eval_stream.attach(eval);

  // sweep-lags
  auto* sweep = app.add_subcommand("sweep-lags", "fit and evaluate over a list of lag counts");
  std::string sweep_input, sweep_output;
  std::vector<std::size_t> sweep_lags{1, 2, 3, 4, 5, 6};
  FitFlags sweep_fit;
  WelchFlags sweep_welch;
  MetricFlags sweep_metrics;
  ReplicateFlags sweep_replicates;
  StreamFlags sweep_stream;
  sweep->add_option("input", sweep_input, "PSS directory")->required();
  sweep->add_option("-o,--output", sweep_output, "directory for sweep.json, CSV and SVG")
      ->required();
  sweep->add_option("--lags", sweep_lags, "lag counts to fit (default 1..6)")->delimiter(',');
  sweep_fit.attach(sweep, false);
  sweep_welch.attach(sweep);
  sweep_metrics.attach(sweep);
  sweep_replicates.attach(sweep);
  sweep_stream.attach(sweep);

  // make-oracle
  auto* oracle = app.add_subcommand("make-oracle", "write a synthetic dataset with known structure");
  std::string oracle_output, oracle_spec, oracle_truth;
  std::uint64_t oracle_seed = 0;
  std::optional<std::string> oracle_kind;
  std::optional<std::size_t> oracle_rows, oracle_cols, oracle_frames, oracle_components,
      oracle_lags, oracle_filters;
  std::optional<double> oracle_fs;
  oracle->add_option("-o,--output", oracle_output, "PSS directory to write")->required();
  oracle->add_option("--seed", oracle_seed, "dataset seed")->required();
  oracle->add_option("--spec", oracle_spec, "JSON file with oracle parameters");
  oracle->add_option("--truth", oracle_truth,
                     "model directory for the ground-truth parameters (longrange_ar only)");
  oracle->add_option("--kind", oracle_kind, "longrange_ar, white, translating or sinusoid")
      ->check(CLI::IsMember({"longrange_ar", "white", "translating", "sinusoid"}));
  oracle->add_option("--rows", oracle_rows);
  oracle->add_option("--cols", oracle_cols);
  oracle->add_option("--frames", oracle_frames);
  oracle->add_option("--components", oracle_components);
  oracle->add_option("--lags", oracle_lags);
  oracle->add_option("--filters", oracle_filters);
  oracle->add_option("--sampling-frequency", oracle_fs);

  // info
  auto* info = app.add_subcommand("info", "summarize a PSS series or model container");
  std::string info_path;
  info->add_option("path", info_path, "container directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      OptionSet o;
      fit_flags.fill(o);
      fit_welch.fill(o);
      Series input;
      check(revar_series_read(fit_input.c_str(), input.out()), "reading " + fit_input);
      Model model;
      check(revar_model_fit(input.get(), o.dump().c_str(), model.out()), "fit");
      check(revar_model_save(model.get(), fit_output.c_str()), "saving " + fit_output);
      const std::string report = fetch_string(model.get(), revar_model_report_json, "fit");
      if (!fit_report.empty()) write_text_file(fit_report, report);
      const auto r = json::parse(report);
      std::printf("model written to %s\n", fit_output.c_str());
      std::printf("components %s, lags %s, filters %s, training MSE %.6g\n",
                  r["components"].dump().c_str(), r["lags"].dump().c_str(),
                  r["filters"].dump().c_str(), r["training_mse"].get<double>());
      if (r.contains("alphas")) std::printf("alphas %s\n", r["alphas"].dump().c_str());
      for (const auto& w : r.value("warnings", json::array())) {
        std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
      }
    } else if (gen->parsed()) {
      OptionSet o;
      gen_stream.fill(o);
      if (gen_coefficients) o.j["coefficients"] = true;
      Model model;
      check(revar_model_load(gen_model.c_str(), model.out()), "loading " + gen_model);
      Series out;
      check(revar_generate(model.get(), gen_frames, gen_seed, o.dump().c_str(), out.out()),
            "generate");
      check(revar_series_write(out.get(), gen_output.c_str()), "writing " + gen_output);
      std::printf("%zu frames written to %s\n", gen_frames, gen_output.c_str());
    } else if (eval->parsed()) {
      OptionSet o;
      eval_welch.fill(o);
      eval_metrics.fill(o);
      o.add("threads", eval_threads);
      Series reference;
      check(revar_series_read(eval_reference.c_str(), reference.out()),
            "reading " + eval_reference);
      Evaluation result;
      if (container_kind(eval_candidate) == REVAR_CONTAINER_MODEL) {
        if (!eval_replicates.seed) throw Failure{kInput, "evaluate: --seed is required with a model"};
        eval_replicates.fill(o);
        eval_stream.fill(o);
        o.add("train_fraction", eval_train_fraction);
        Model model;
        check(revar_model_load(eval_candidate.c_str(), model.out()), "loading " + eval_candidate);
        check(revar_evaluate_model(reference.get(), model.get(), o.dump().c_str(), result.out()),
              "evaluate");
      } else {
        if (eval_replicates.seed || eval_replicates.replicates || eval_train_fraction) {
          throw Failure{kInput, "evaluate: replicate options need a model candidate"};
        }
        Series synthetic;
        check(revar_series_read(eval_candidate.c_str(), synthetic.out()),
              "reading " + eval_candidate);
        check(revar_evaluate(reference.get(), synthetic.get(), o.dump().c_str(), result.out()),
              "evaluate");
      }
      if (!eval_output.empty()) {
        check(revar_evaluation_write(result.get(), eval_output.c_str()), "writing " + eval_output);
      }
      print_metrics(result.get());
    } else if (sweep->parsed()) {
      OptionSet o;
      sweep_fit.fill(o);
      sweep_welch.fill(o);
      sweep_metrics.fill(o);
      sweep_replicates.fill(o);
      sweep_stream.fill(o);
      Series input;
      check(revar_series_read(sweep_input.c_str(), input.out()), "reading " + sweep_input);
      Sweep result;
      check(revar_sweep_lags(input.get(), sweep_lags.data(), sweep_lags.size(), o.dump().c_str(),
                             result.out()),
            "sweep-lags");
      check(revar_sweep_write(result.get(), sweep_output.c_str()), "writing " + sweep_output);
      const auto j = json::parse(fetch_string(result.get(), revar_sweep_json, "sweep-lags"));
      std::printf("%5s %14s %14s %14s\n", "lags", "training MSE", "OPD TPS", "slopes TPS");
      for (const auto& row : j["rows"]) {
        std::printf("%5zu %14.6g", row["lags"].get<std::size_t>(), row["training_mse"].get<double>());
        if (row.contains("evaluation") && !row["evaluation"].is_null()) {
          const auto& e = row["evaluation"];
          std::printf(" %13.4f%% %13.4f%%", 100.0 * e["opd_tps_nrmse"].get<double>(),
                      100.0 * e["slopes_tps_nrmse"].get<double>());
        }
        std::printf("\n");
      }
    } else if (oracle->parsed()) {
      json spec = oracle_spec.empty() ? json::object() : read_json_file(oracle_spec);
      spec["seed"] = oracle_seed;
      if (oracle_kind) spec["kind"] = *oracle_kind;
      if (oracle_rows) spec["rows"] = *oracle_rows;
      if (oracle_cols) spec["cols"] = *oracle_cols;
      if (oracle_frames) spec["frames"] = *oracle_frames;
      if (oracle_components) spec["components"] = *oracle_components;
      if (oracle_lags) spec["lags"] = *oracle_lags;
      if (oracle_filters) spec["filters"] = *oracle_filters;
      if (oracle_fs) spec["sampling_frequency"] = *oracle_fs;
      Series series;
      Model truth;
      check(revar_make_oracle(spec.dump().c_str(), series.out(),
                              oracle_truth.empty() ? nullptr : truth.out()),
            "make-oracle");
      check(revar_series_write(series.get(), oracle_output.c_str()), "writing " + oracle_output);
      std::printf("dataset written to %s\n", oracle_output.c_str());
      if (!oracle_truth.empty()) {
        if (!truth.get()) throw Failure{kInput, "make-oracle: this oracle kind has no parameters"};
        check(revar_model_save(truth.get(), oracle_truth.c_str()), "writing " + oracle_truth);
        std::printf("ground truth written to %s\n", oracle_truth.c_str());
      }
    } else if (info->parsed()) {
      const int kind = container_kind(info_path);
      if (kind == REVAR_CONTAINER_PSS) {
        Series s;
        check(revar_series_read(info_path.c_str(), s.out()), "reading " + info_path);
        std::cout << fetch_string(s.get(), revar_series_info_json, "info") << '\n';
      } else if (kind == REVAR_CONTAINER_MODEL) {
        Model m;
        check(revar_model_load(info_path.c_str(), m.out()), "loading " + info_path);
        std::cout << fetch_string(m.get(), revar_model_info_json, "info") << '\n';
      } else {
        throw Failure{kInput, info_path + ": not a PSS series or model container"};
      }
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "revar: %s\n", f.message.c_str());
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "revar: %s\n", e.what());
    return kOther;
  }
  return kOk;
}
