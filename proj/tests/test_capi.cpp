// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "revar/revar.h"

namespace fs = std::filesystem;

namespace {

std::string fetch(int (*fn)(const void*, char*, size_t*), const void* handle) {
  size_t len = 0;
  REQUIRE(fn(handle, nullptr, &len) == REVAR_ERROR_INSUFFICIENT_BUFFER);
  std::string s(len, '\0');
  REQUIRE(fn(handle, s.data(), &len) == REVAR_OK);
  s.resize(len - 1);
  return s;
}

template <typename H>
std::string fetch(int (*fn)(const H*, char*, size_t*), const H* handle) {
  return fetch(reinterpret_cast<int (*)(const void*, char*, size_t*)>(fn), handle);
}

struct Scratch {
  fs::path path;
  Scratch() {
    path = fs::temp_directory_path() / ("revar-capi-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const char* name) const { return (path / name).string(); }
};

revar_series* oracle(std::uint64_t seed, std::size_t frames) {
  const auto spec = nlohmann::json{{"rows", 4}, {"cols", 4}, {"components", 6},
                                   {"frames", frames}, {"seed", seed}}.dump();
  revar_series* s = nullptr;
  REQUIRE(revar_make_oracle(spec.c_str(), &s, nullptr) == REVAR_OK);
  return s;
}

}  // namespace

TEST_CASE("error reporting") {
  CHECK(std::string(revar_error_name(REVAR_ERROR_FORMAT)) != "");
  CHECK(std::string(revar_version()).size() > 0);
  revar_series* s = nullptr;
  CHECK(revar_series_read("/nonexistent/revar/path", &s) == REVAR_ERROR_IO);
  CHECK(s == nullptr);
  CHECK(std::string(revar_last_error()).find("/nonexistent/revar/path") != std::string::npos);
  CHECK(revar_series_read(nullptr, &s) == REVAR_ERROR_NULL_POINTER);
  CHECK(revar_series_read("x", nullptr) == REVAR_ERROR_NULL_POINTER);
  CHECK(revar_series_dims(nullptr, nullptr, nullptr, nullptr, nullptr) == REVAR_ERROR_NULL_POINTER);
  revar_series_destroy(nullptr);
  revar_model_destroy(nullptr);
  revar_stream_destroy(nullptr);
}

TEST_CASE("series create, copy and buffer protocol") {
  std::vector<double> data(3 * 4);
  for (std::size_t k = 0; k < data.size(); ++k) data[k] = static_cast<double>(k);
  const uint8_t mask[6] = {1, 1, 0, 1, 1, 0};
  revar_series* s = nullptr;
  REQUIRE(revar_series_create(2, 3, mask, 1.0, 1.0, 3, data.data(), 100.0, &s) == REVAR_OK);
  size_t rows, cols, pixels, frames;
  REQUIRE(revar_series_dims(s, &rows, &cols, &pixels, &frames) == REVAR_OK);
  CHECK(rows == 2);
  CHECK(cols == 3);
  CHECK(pixels == 4);
  CHECK(frames == 3);

  std::vector<double> out(4);
  CHECK(revar_series_copy_frames(s, 1, 1, out.data(), out.size()) == REVAR_OK);
  CHECK(out[0] == 4.0);
  CHECK(out[3] == 7.0);
  CHECK(revar_series_copy_frames(s, 1, 2, out.data(), out.size()) == REVAR_ERROR_INSUFFICIENT_BUFFER);
  CHECK(revar_series_copy_frames(s, 2, 2, out.data(), 8) == REVAR_ERROR_INPUT);

  size_t len = 4;
  char tiny[4];
  CHECK(revar_series_info_json(s, tiny, &len) == REVAR_ERROR_INSUFFICIENT_BUFFER);
  CHECK(len > 4);
  const auto info = nlohmann::json::parse(fetch(revar_series_info_json, s));
  CHECK(info["n_pixels"] == 4);
  CHECK(info["n_frames"] == 3);

  revar_series *train = nullptr, *held = nullptr;
  CHECK(revar_series_split(s, 1.0, &train, &held) == REVAR_OK);
  CHECK(held == nullptr);
  revar_series_destroy(train);

  revar_series* bad = nullptr;
  CHECK(revar_series_create(2, 3, mask, 1.0, 1.0, 3, data.data(), 0.0, &bad) == REVAR_ERROR_INPUT);
  CHECK(bad == nullptr);
  revar_series_destroy(s);
}

TEST_CASE("fit, save, load and generate") {
  Scratch tmp;
  revar_series* s = oracle(5, 5000);
  revar_model* m = nullptr;
  CHECK(revar_model_fit(s, R"({"lags": 2, "bogus": 1})", &m) == REVAR_ERROR_INPUT);
  CHECK(std::string(revar_last_error()).find("bogus") != std::string::npos);
  CHECK(revar_model_fit(s, "[1,2]", &m) == REVAR_ERROR_INPUT);
  REQUIRE(revar_model_fit(s, R"({"lags": 2, "threads": 2})", &m) == REVAR_OK);
  const auto report = nlohmann::json::parse(fetch(revar_model_report_json, m));
  CHECK(report["lags"] == 2);

  REQUIRE(revar_model_save(m, (tmp / "model").c_str()) == REVAR_OK);
  int kind = -1;
  CHECK(revar_detect_container((tmp / "model").c_str(), &kind) == REVAR_OK);
  CHECK(kind == REVAR_CONTAINER_MODEL);
  revar_model* loaded = nullptr;
  REQUIRE(revar_model_load((tmp / "model").c_str(), &loaded) == REVAR_OK);
  CHECK(fetch(revar_model_info_json, m) == fetch(revar_model_info_json, loaded));

  revar_series *a = nullptr, *b = nullptr;
  REQUIRE(revar_generate(m, 40, 7, R"({"coefficients": true})", &a) == REVAR_OK);
  REQUIRE(revar_generate(loaded, 40, 7, nullptr, &b) == REVAR_OK);
  std::vector<double> fa(40 * 16), fb(40 * 16);
  revar_series_copy_frames(a, 0, 40, fa.data(), fa.size());
  revar_series_copy_frames(b, 0, 40, fb.data(), fb.size());
  CHECK(fa == fb);
  size_t comps = 0;
  CHECK(revar_series_coefficients(a, &comps, nullptr, 0) == REVAR_ERROR_INSUFFICIENT_BUFFER);
  CHECK(comps > 0);
  CHECK(revar_series_coefficients(b, &comps, nullptr, 0) == REVAR_ERROR_INPUT);

  REQUIRE(revar_series_write(a, (tmp / "gen").c_str()) == REVAR_OK);
  CHECK(revar_detect_container((tmp / "gen").c_str(), &kind) == REVAR_OK);
  CHECK(kind == REVAR_CONTAINER_PSS);
  CHECK(fs::exists(tmp.path / "gen" / "coeffs.f64"));

  fs::resize_file(tmp.path / "model" / "E.f64", 16);
  revar_model* broken = nullptr;
  CHECK(revar_model_load((tmp / "model").c_str(), &broken) == REVAR_ERROR_FORMAT);
  CHECK(broken == nullptr);

  revar_series_destroy(a);
  revar_series_destroy(b);
  revar_model_destroy(loaded);
  revar_model_destroy(m);
  revar_series_destroy(s);
}

TEST_CASE("stream checkpoint and restore") {
  revar_series* s = oracle(6, 4000);
  revar_model* m = nullptr;
  REQUIRE(revar_model_fit(s, R"({"lags": 2})", &m) == REVAR_OK);
  revar_stream* st = nullptr;
  REQUIRE(revar_stream_create(m, 3, R"({"burn_in": 5})", &st) == REVAR_OK);
  std::vector<double> frame(16), other(16);
  for (int k = 0; k < 10; ++k) REQUIRE(revar_stream_next(st, frame.data(), frame.size()) == REVAR_OK);
  CHECK(revar_stream_next(st, frame.data(), 3) == REVAR_ERROR_INSUFFICIENT_BUFFER);
  const auto cp = fetch(revar_stream_checkpoint, st);

  // The stream holds its own model reference.
  revar_model_destroy(m);
  m = nullptr;
  revar_model* m2 = nullptr;
  REQUIRE(revar_model_fit(s, R"({"lags": 2})", &m2) == REVAR_OK);
  revar_stream* re = nullptr;
  REQUIRE(revar_stream_restore(m2, cp.c_str(), &re) == REVAR_OK);
  uint64_t pos = 0;
  revar_stream_position(re, &pos);
  CHECK(pos == 10);
  for (int k = 0; k < 5; ++k) {
    revar_stream_next(st, frame.data(), frame.size());
    revar_stream_next(re, other.data(), other.size());
    CHECK(frame == other);
  }

  revar_model* m3 = nullptr;
  REQUIRE(revar_model_fit(s, R"({"lags": 3})", &m3) == REVAR_OK);
  revar_stream* wrong = nullptr;
  CHECK(revar_stream_restore(m3, cp.c_str(), &wrong) == REVAR_ERROR_FORMAT);
  CHECK(revar_stream_restore(m3, "not json", &wrong) == REVAR_ERROR_FORMAT);

  revar_stream_destroy(st);
  revar_stream_destroy(re);
  revar_model_destroy(m2);
  revar_model_destroy(m3);
  revar_series_destroy(s);
}

TEST_CASE("evaluation and sweep") {
  Scratch tmp;
  revar_series* s = oracle(7, 6000);
  revar_evaluation* e = nullptr;
  REQUIRE(revar_evaluate(s, s, nullptr, &e) == REVAR_OK);
  double metrics[4] = {1, 1, 1, 1};
  CHECK(revar_evaluation_metrics(e, metrics) == REVAR_OK);
  for (double v : metrics) CHECK(v == 0.0);
  CHECK(revar_evaluation_write(e, (tmp / "eval").c_str()) == REVAR_OK);
  CHECK(fs::exists(tmp.path / "eval" / "report.json"));
  revar_evaluation_destroy(e);

  revar_model* m = nullptr;
  REQUIRE(revar_model_fit(s, R"({"lags": 2})", &m) == REVAR_OK);
  CHECK(revar_evaluate_model(s, m, R"({"replicates": 1})", &e) == REVAR_ERROR_INPUT);
  REQUIRE(revar_evaluate_model(s, m, R"({"seed": 1, "replicates": 2, "length": 2048})", &e) ==
          REVAR_OK);
  const auto j = nlohmann::json::parse(fetch(revar_evaluation_json, e));
  CHECK(j["replicates"] == 2);
  CHECK(std::isfinite(j["opd_tps_nrmse"].get<double>()));
  revar_evaluation_destroy(e);

  const size_t lags[] = {1, 2};
  revar_sweep* sw = nullptr;
  REQUIRE(revar_sweep_lags(s, lags, 2, R"({"replicates": 0})", &sw) == REVAR_OK);
  const auto sj = nlohmann::json::parse(fetch(revar_sweep_json, sw));
  CHECK(sj["rows"].size() == 2);
  revar_sweep_destroy(sw);
  CHECK(revar_sweep_lags(s, lags, 0, nullptr, &sw) == REVAR_ERROR_INPUT);

  revar_model_destroy(m);
  revar_series_destroy(s);
}
