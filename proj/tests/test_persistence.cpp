#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "revar/error.hpp"
#include "revar/oracle.hpp"
#include "revar/persistence.hpp"
#include "revar/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace revar;
namespace fs = std::filesystem;

namespace {

const RevarModel& small_model() {
  static const RevarModel m = [] {
    OracleSpec s;
    s.rows = 4;
    s.cols = 4;
    s.components = 6;
    s.frames = 4000;
    s.seed = 3;
    FitConfig cfg;
    cfg.lags = 2;
    return fit_model(make_oracle(s).series, cfg).model;
  }();
  return m;
}

bool same_bits(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

void truncate(const fs::path& file, std::uintmax_t bytes) { fs::resize_file(file, bytes); }

}  // namespace

TEST_SUITE("persistence") {
  TEST_CASE("model round trip is bit exact") {
    fixtures::TempDir tmp("model");
    const auto& m = small_model();
    save_model(m, tmp / "m", nlohmann::json{{"note", 1}});
    const auto back = load_model(tmp / "m");
    CHECK(same_bits(back.mean, m.mean));
    CHECK(same_bits(back.scale, m.scale));
    CHECK(same_bits(back.basis, m.basis));
    CHECK(same_bits(back.variances, m.variances));
    CHECK(same_bits(back.residual_basis, m.residual_basis));
    CHECK(same_bits(back.residual_variances, m.residual_variances));
    CHECK(same_bits(back.residual_mean, m.residual_mean));
    for (std::size_t l = 0; l < m.lags; ++l) CHECK(same_bits(back.lag_weights[l], m.lag_weights[l]));
    for (std::size_t i = 0; i < m.filter_count(); ++i) {
      CHECK(same_bits(back.filter_weights[i], m.filter_weights[i]));
    }
    CHECK(back.alphas == m.alphas);
    CHECK(model_content_hash(back) == model_content_hash(m));
    CHECK(read_json(tmp / "m" / "model.json")["fit_report"]["note"] == 1);
    CHECK(detect_container(tmp / "m") == ContainerKind::model);

    const auto a = generate(m, {.length = 50, .seed = 4});
    const auto b = generate(back, {.length = 50, .seed = 4});
    CHECK(same_bits(a.series.frames, b.series.frames));
  }

  TEST_CASE("truncated array names the file and both sizes") {
    fixtures::TempDir tmp("trunc");
    const auto& m = small_model();
    save_model(m, tmp / "m");
    const auto file = tmp / "m" / "E.f64";
    const auto size = fs::file_size(file);
    truncate(file, size - 8);
    try {
      load_model(tmp / "m");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string what = e.what();
      CHECK(what.find("E.f64") != std::string::npos);
      CHECK(what.find(std::to_string(size)) != std::string::npos);
      CHECK(what.find(std::to_string(size - 8)) != std::string::npos);
    }
  }

  TEST_CASE("missing pieces") {
    fixtures::TempDir tmp("missing");
    CHECK_THROWS_AS(load_model(tmp / "nothing"), IoError);
    fs::create_directories(tmp / "empty");
    CHECK_THROWS_AS(load_model(tmp / "empty"), FormatError);
    CHECK_THROWS_AS(read_pss(tmp / "empty"), FormatError);
    CHECK(detect_container(tmp / "empty") == ContainerKind::unknown);
    CHECK_THROWS_AS(detect_container(tmp / "nothing"), IoError);

    save_model(small_model(), tmp / "m");
    fs::remove(tmp / "m" / "U.f64");
    CHECK_THROWS_AS(load_model(tmp / "m"), IoError);
  }

  TEST_CASE("tampered arrays are caught by the hash or by validation") {
    fixtures::TempDir tmp("tamper");
    const auto& m = small_model();
    save_model(m, tmp / "m");

    auto bent = m;
    bent.basis *= 1.5;
    const RowMatrix rows = bent.basis;
    write_f64(tmp / "m" / "E.f64",
              std::span<const double>(rows.data(), static_cast<std::size_t>(rows.size())));
    CHECK_THROWS_WITH_AS(load_model(tmp / "m"), doctest::Contains("hash mismatch"), FormatError);

    // A matching hash does not excuse a broken invariant.
    auto meta = read_json(tmp / "m" / "model.json");
    meta["content_hash"] = model_content_hash(bent);
    write_text(tmp / "m" / "model.json", meta.dump());
    CHECK_THROWS_WITH_AS(load_model(tmp / "m"), doctest::Contains("fails validation"), FormatError);

    auto wrong = read_json(tmp / "m" / "model.json");
    wrong["format_version"] = 99;
    write_text(tmp / "m" / "model.json", wrong.dump());
    CHECK_THROWS_AS(load_model(tmp / "m"), FormatError);

    write_text(tmp / "m" / "model.json", "{ not json");
    CHECK_THROWS_AS(load_model(tmp / "m"), FormatError);
  }

  TEST_CASE("PSS round trip, masked geometry and coefficients") {
    fixtures::TempDir tmp("pss");
    PhaseScreenSeries s;
    s.geometry = ApertureGeometry::circle(6, 6, 0.25);
    s.frames = fixtures::gaussian(40, s.geometry.pixel_count(), 9);
    s.sampling_frequency = 12500.0;
    s.label = "probe";
    s.provenance_json = R"({"seed":9})";
    const RowMatrix coeffs = fixtures::gaussian(40, 3, 10);
    write_pss(s, tmp / "s", &coeffs);
    CHECK(detect_container(tmp / "s") == ContainerKind::pss);
    const auto back = read_pss(tmp / "s");
    CHECK(back.geometry == s.geometry);
    CHECK(same_bits(back.frames, s.frames));
    CHECK(back.sampling_frequency == 12500.0);
    CHECK(back.label == "probe");
    const auto meta = read_json(tmp / "s" / "meta.json");
    CHECK(meta["n_frames"] == 40);
    CHECK(meta["provenance"]["seed"] == 9);
    CHECK(fs::file_size(tmp / "s" / "coeffs.f64") == 40 * 3 * 8);

    PssReader reader(tmp / "s");
    CHECK(reader.frame_count() == 40);
    std::vector<double> frame(s.pixel_count());
    Eigen::Index n = 0;
    while (reader.next(frame)) {
      for (std::size_t p = 0; p < frame.size(); ++p) {
        CHECK(frame[p] == s.frames(n, static_cast<Eigen::Index>(p)));
      }
      ++n;
    }
    CHECK(n == 40);
  }

  TEST_CASE("PSS header disagreements") {
    fixtures::TempDir tmp("pssbad");
    const auto s = fixtures::white_series(3, 3, 10, 11);
    write_pss(s, tmp / "s");
    auto meta = read_json(tmp / "s" / "meta.json");
    meta["n_frames"] = 11;
    write_text(tmp / "s" / "meta.json", meta.dump());
    CHECK_THROWS_WITH_AS(read_pss(tmp / "s"), doctest::Contains("frames.f64"), FormatError);
    meta["n_frames"] = 10;
    meta["n_pixels"] = 8;
    write_text(tmp / "s" / "meta.json", meta.dump());
    CHECK_THROWS_AS(read_pss(tmp / "s"), FormatError);
    meta["n_pixels"] = 9;
    meta["sampling_frequency_hz"] = 0.0;
    write_text(tmp / "s" / "meta.json", meta.dump());
    CHECK_THROWS_AS(read_pss(tmp / "s"), FormatError);
  }

  TEST_CASE("raw sidecars") {
    fixtures::TempDir tmp("f64");
    const std::vector<double> v{1.0, -0.0, 3.5e-300};
    write_f64(tmp / "a.f64", v);
    CHECK(fs::file_size(tmp / "a.f64") == 24);
    CHECK(read_f64(tmp / "a.f64", 3) == v);
    CHECK_THROWS_AS(read_f64(tmp / "a.f64", 4), FormatError);
    std::ifstream in(tmp / "a.f64", std::ios::binary);
    unsigned char first[8];
    in.read(reinterpret_cast<char*>(first), 8);
    // 1.0 little-endian: 00 .. 00 f0 3f
    CHECK(first[6] == 0xf0);
    CHECK(first[7] == 0x3f);
  }

  TEST_CASE("checkpoint JSON round trip and rejection") {
    SynthesisStream::Checkpoint c;
    c.noise.seed = 5;
    c.noise.draws = 17;
    c.noise.engine = "12 34";
    c.noise.has_spare = true;
    c.noise.spare = -0.123456789012345;
    c.history = {{1.0, 2.0}, {3.0, 4.0}};
    c.filters = {{0.1 + 0.2, 5.0}};
    c.position = 9;
    c.options.burn_in = 3;
    c.options.filter_init = FilterInit::zero;
    const auto back = checkpoint_from_json(nlohmann::json::parse(checkpoint_to_json(c).dump()));
    CHECK(back.noise.spare == c.noise.spare);
    CHECK(back.noise.engine == c.noise.engine);
    CHECK(back.history == c.history);
    CHECK(back.filters == c.filters);
    CHECK(back.position == 9);
    CHECK(back.options.burn_in == 3);
    CHECK(back.options.filter_init == FilterInit::zero);

    auto j = checkpoint_to_json(c);
    j["generator"] = "xorshift";
    CHECK_THROWS_AS(checkpoint_from_json(j), FormatError);
    CHECK_THROWS_AS(checkpoint_from_json(nlohmann::json::object()), FormatError);
  }

  TEST_CASE("atomic overwrite replaces or leaves the target intact") {
    fixtures::TempDir tmp("atomic");
    const auto a = fixtures::white_series(2, 2, 5, 12);
    const auto b = fixtures::white_series(2, 2, 7, 13);
    write_pss(a, tmp / "s");
    write_pss(b, tmp / "s");
    CHECK(read_pss(tmp / "s").frame_count() == 7);
    {
      AtomicDirectory staged(tmp / "s");
      write_text(staged.staging() / "junk", "x");
    }
    CHECK(read_pss(tmp / "s").frame_count() == 7);
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++entries;
    CHECK(entries == 1);
    CHECK_THROWS_AS(write_pss(a, tmp / "no" / "such" / "dir"), IoError);
  }
}
