#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "revar/error.hpp"
#include "revar/oracle.hpp"
#include "revar/persistence.hpp"
#include "revar/pipeline.hpp"
#include "revar/report.hpp"
#include "support/fixtures.hpp"

using namespace revar;
namespace fs = std::filesystem;

namespace {

OracleSpec small_spec(std::uint64_t seed, std::size_t frames = 20000) {
  OracleSpec s;
  s.rows = 4;
  s.cols = 4;
  s.components = 6;
  s.frames = frames;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("oracle fit produces a valid model and report") {
    const auto data = make_oracle(small_spec(21));
    FitConfig cfg;
    cfg.lags = 3;
    const auto fit = fit_model(data.series, cfg);
    CHECK_NOTHROW(fit.model.validate());
    CHECK(fit.report.training_frames == 16000);
    CHECK(fit.report.held_out_frames == 4000);
    CHECK(fit.report.lags == 3);
    CHECK(fit.report.filters == 2);
    REQUIRE(fit.report.cutoff_frequency);
    CHECK(fit.report.alphas.size() == 2);
    CHECK(fit.report.retained_variance >= 0.99);
    const auto j = fit.report.to_json();
    CHECK(j["held_out_split"] == true);
    CHECK(j["whiteness"]["bound"].get<double>() > 0.0);
  }

  TEST_CASE("baseline is a single-lag full-space VAR") {
    FitConfig cfg;
    cfg.baseline = true;
    const auto e = cfg.effective();
    CHECK(e.lags == 1);
    CHECK(e.filters == 0);
    CHECK(e.variance_fraction == 1.0);
    const auto fit = fit_model(make_oracle(small_spec(22, 5000)).series, cfg);
    CHECK(fit.model.components == 16);
    CHECK(fit.model.lags == 1);
    CHECK(fit.model.filter_count() == 0);
    CHECK(fit.report.baseline);
  }

  TEST_CASE("training on every frame reports no held-out split") {
    FitConfig cfg;
    cfg.train_fraction = 1.0;
    const auto fit = fit_model(make_oracle(small_spec(23, 5000)).series, cfg);
    CHECK(fit.report.held_out_frames == 0);
    CHECK(fit.report.to_json()["held_out_split"] == false);
    bool warned = false;
    for (const auto& w : fit.report.warnings) warned |= w.find("held-out") != std::string::npos;
    CHECK(warned);
  }

  TEST_CASE("white-noise data gives near-zero weights") {
    auto spec = small_spec(24, 40000);
    spec.kind = OracleKind::white;
    const auto data = make_oracle(spec);
    FitConfig cfg;
    cfg.lags = 2;
    cfg.filters = 0;
    cfg.train_fraction = 1.0;
    const auto fit = fit_model(data.series, cfg);
    const double bound = 5.0 / std::sqrt(static_cast<double>(spec.frames));
    for (const auto& a : fit.model.lag_weights) CHECK(a.cwiseAbs().maxCoeff() < bound);
  }

  TEST_CASE("translating pattern puts the slope spectrum peak at v / wavelength") {
    OracleSpec spec;
    spec.kind = OracleKind::translating;
    spec.rows = 4;
    spec.cols = 16;
    spec.frames = 8192;
    spec.velocity = 0.5;
    spec.wavelength = 8.0;
    spec.seed = 25;
    const auto data = make_oracle(spec);
    const auto s = tps(streamwise_slopes(data.series), WelchConfig{});
    const double f = s.frequencies[s.peak_bin()];
    CHECK(std::abs(f - spec.velocity / spec.wavelength) <= s.bin_width());
  }

  TEST_CASE("oracle truth survives a save and load") {
    fixtures::TempDir tmp("truth");
    const auto data = make_oracle(small_spec(26, 3000));
    REQUIRE(data.truth);
    CHECK_NOTHROW(data.truth->validate());
    save_model(*data.truth, tmp / "truth");
    CHECK(model_content_hash(load_model(tmp / "truth")) == model_content_hash(*data.truth));
    CHECK(data.coefficients.rows() == 3000);

    const auto again = make_oracle(small_spec(26, 3000));
    CHECK(again.series.frames == data.series.frames);
    CHECK(oracle_spec_from_json(to_json(small_spec(26, 3000))).seed == 26);
  }

  TEST_CASE("a one-row sweep equals the plain fit") {
    const auto data = make_oracle(small_spec(27, 6000));
    FitConfig cfg;
    cfg.lags = 1;
    const auto fit = fit_model(data.series, cfg);
    const auto sweep = sweep_lags(data.series, {1}, cfg, ReplicateOptions{.replicates = 0});
    REQUIRE(sweep.rows.size() == 1);
    CHECK(sweep.rows[0].training_mse == fit.report.training_mse);
    CHECK_FALSE(sweep.evaluated);
  }

  TEST_CASE("training error plateaus once the true lag count is reached") {
    const auto data = make_oracle(small_spec(28, 30000));
    const auto sweep = sweep_lags(data.series, {1, 3, 5}, FitConfig{}, ReplicateOptions{.replicates = 0});
    CHECK(sweep.first_target == 5);
    const double m1 = sweep.rows[0].training_mse;
    const double m3 = sweep.rows[1].training_mse;
    const double m5 = sweep.rows[2].training_mse;
    CHECK(m3 < m1);
    CHECK(m5 <= m3);
    CHECK((m3 - m5) / m3 < 0.01);
  }

  TEST_CASE("replicate averaging matches separate single-replicate runs") {
    const auto data = make_oracle(small_spec(29, 6000));
    FitConfig cfg;
    cfg.lags = 2;
    const auto fit = fit_model(data.series, cfg);
    const auto ref = split_series(data.series, 0.8).held_out.value();
    ReplicateOptions two{.replicates = 2, .length = 3000, .seed = 40};
    ReplicateOptions first{.replicates = 1, .length = 3000, .seed = 40};
    ReplicateOptions second{.replicates = 1, .length = 3000, .seed = 41};
    const auto both = evaluate_model(ref, fit.model, two);
    const auto a = evaluate_model(ref, fit.model, first);
    const auto b = evaluate_model(ref, fit.model, second);
    CHECK(both.replicates == 2);
    CHECK(both.opd_tps_nrmse == doctest::Approx(0.5 * (a.opd_tps_nrmse + b.opd_tps_nrmse)));
    CHECK(both.structure_function_nrmse ==
          doctest::Approx(0.5 * (a.structure_function_nrmse + b.structure_function_nrmse)));
    CHECK(replicate_length(1000, ReplicateOptions{}) == 20000);
    CHECK_THROWS_AS(evaluate_model(ref, fit.model, ReplicateOptions{.replicates = 0}), InputError);
  }

  TEST_CASE("errors name the failing stage") {
    auto s = fixtures::white_series(2, 2, 100, 30);
    s.frames.col(3).setConstant(1.0);
    CHECK_THROWS_AS(fit_model(s, FitConfig{}), DegeneratePixelError);

    const auto tiny = fixtures::white_series(2, 2, 50, 31);
    FitConfig cfg;
    cfg.filters = 1;
    CHECK_THROWS_WITH_AS(fit_model(tiny, cfg), doctest::Contains("cut-off estimation"), InputError);

    FitConfig bad;
    bad.variance_fraction = 1.5;
    CHECK_THROWS_AS(fit_model(tiny, bad), InputError);
    FitConfig many;
    many.filters = 9;
    CHECK_THROWS_AS(fit_model(tiny, many), InputError);
    CHECK_THROWS_AS(sweep_lags(tiny, {}, FitConfig{}, {}), InputError);
    CHECK_THROWS_AS(sweep_lags(tiny, {0, 1}, FitConfig{}, {}), InputError);
  }

  TEST_CASE("evaluation and sweep outputs") {
    fixtures::TempDir tmp("outputs");
    const auto s = fixtures::white_series(4, 4, 3000, 32);
    const auto r = evaluate(s, fixtures::white_series(4, 4, 3000, 33), EvaluationConfig{});
    write_evaluation_outputs(r, tmp / "eval");
    const auto j = read_json(tmp / "eval" / "report.json");
    CHECK(j["replicates"] == 1);
    CHECK(j["opd_tps_nrmse"].get<double>() == doctest::Approx(r.opd_tps_nrmse));
    for (const char* f : {"opd_tps.csv", "slopes_tps.csv", "structure_function.csv", "opd_tps.svg",
                          "slopes_tps.svg", "structure_reference.svg", "structure_synthetic.svg"}) {
      CHECK(fs::file_size(tmp / "eval" / f) > 0);
    }
    const auto csv = spectrum_csv(r.reference_opd_tps, &r.synthetic_opd_tps);
    CHECK(csv.rfind("frequency_hz,reference,synthetic\n", 0) == 0);
    const auto svg = svg_line_chart({{"a", {1.0, 2.0}, {0.0, 3.0}}}, {.title = "t", .log_y = true});
    CHECK(svg.find("<svg") != std::string::npos);

    const auto data = make_oracle(small_spec(34, 3000));
    const auto sweep = sweep_lags(data.series, {1, 2}, FitConfig{}, ReplicateOptions{.replicates = 0});
    write_sweep_outputs(sweep, tmp / "sweep");
    CHECK(read_json(tmp / "sweep" / "sweep.json")["rows"].size() == 2);
    CHECK(fs::exists(tmp / "sweep" / "sweep.csv"));
  }
}
