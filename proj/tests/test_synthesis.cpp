#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>

#include "revar/error.hpp"
#include "revar/noise.hpp"
#include "revar/oracle.hpp"
#include "revar/persistence.hpp"
#include "revar/pipeline.hpp"
#include "revar/synthesis.hpp"
#include "support/fixtures.hpp"

using namespace revar;

// Live heap bytes, for the bounded-memory check.
namespace {
std::atomic<long long> g_live_bytes{0};
}

void* operator new(std::size_t n) {
  auto* p = static_cast<std::size_t*>(std::malloc(n + sizeof(std::max_align_t)));
  if (!p) throw std::bad_alloc();
  *p = n;
  g_live_bytes += static_cast<long long>(n);
  return reinterpret_cast<char*>(p) + sizeof(std::max_align_t);
}

void operator delete(void* q) noexcept {
  if (!q) return;
  auto* p = reinterpret_cast<std::size_t*>(static_cast<char*>(q) - sizeof(std::max_align_t));
  g_live_bytes -= static_cast<long long>(*p);
  std::free(p);
}

void operator delete(void* q, std::size_t) noexcept { operator delete(q); }

namespace {

std::shared_ptr<const RevarModel> identity_model(std::size_t np) {
  auto m = std::make_shared<RevarModel>();
  m->geometry = ApertureGeometry::rectangle(1, np);
  m->mean = Vector::Zero(np);
  m->scale = Vector::Ones(np);
  m->basis = Matrix::Identity(np, np);
  m->variances = Vector::Ones(np);
  m->components = np;
  m->lags = 2;
  m->lag_weights.assign(2, Matrix::Zero(np, np));
  m->alphas = {0.3};
  m->filter_weights.assign(1, Matrix::Zero(np, np));
  m->residual_mean = Vector::Zero(np);
  m->residual_basis = Matrix::Identity(np, np);
  m->residual_variances = Vector::Ones(np);
  m->provenance.variance_fraction = 1.0;
  m->validate();
  return m;
}

struct Fitted {
  OracleDataset data;
  std::shared_ptr<const RevarModel> model;
};

const Fitted& fitted_oracle() {
  static const Fitted f = [] {
    OracleSpec s;
    s.frames = 100000;
    s.seed = 99;
    Fitted out{make_oracle(s), nullptr};
    FitConfig cfg;
    cfg.train_fraction = 1.0;
    out.model = std::make_shared<const RevarModel>(fit_model(out.data.series, cfg).model);
    return out;
  }();
  return f;
}

}  // namespace

TEST_SUITE("synthesis") {
  TEST_CASE("identity model emits the noise stream") {
    const std::size_t np = 4;
    const auto model = identity_model(np);
    const auto out = generate(*model, {.length = 30, .seed = 5});
    NoiseSource noise(5);
    for (std::size_t k = 0; k < 2 * np; ++k) noise.next();  // initial vectors
    for (Eigen::Index n = 0; n < 30; ++n) {
      for (Eigen::Index p = 0; p < 4; ++p) CHECK(out.series.frames(n, p) == noise.next());
    }
  }

  TEST_CASE("same seed gives identical output") {
    const auto& f = fitted_oracle();
    const auto a = generate(*f.model, {.length = 500, .seed = 1});
    const auto b = generate(*f.model, {.length = 500, .seed = 1});
    const auto c = generate(*f.model, {.length = 500, .seed = 2});
    CHECK(std::memcmp(a.series.frames.data(), b.series.frames.data(),
                      sizeof(double) * a.series.frames.size()) == 0);
    CHECK(a.series.frames != c.series.frames);
  }

  TEST_CASE("stream equals batch") {
    const auto& f = fitted_oracle();
    StreamOptions opt{.burn_in = 7};
    const auto batch = generate(*f.model, {.length = 100, .seed = 3, .emit_coefficients = true, .options = opt});
    SynthesisStream stream(f.model, 3, opt);
    Vector frame, top;
    for (Eigen::Index n = 0; n < 100; ++n) {
      stream.next(frame, &top);
      CHECK(frame.transpose() == batch.series.frames.row(n));
      CHECK(top.transpose() == batch.coefficients.row(n));
    }
    CHECK(stream.position() == 100);
  }

  TEST_CASE("checkpoint restores the exact continuation") {
    const auto& f = fitted_oracle();
    SynthesisStream a(f.model, 11);
    Vector frame;
    for (int k = 0; k < 37; ++k) a.next(frame);
    const auto cp = a.checkpoint();
    auto b = SynthesisStream::restore(f.model, cp);
    auto c = SynthesisStream::restore(f.model, checkpoint_from_json(nlohmann::json::parse(
                                                   checkpoint_to_json(cp).dump())));
    Vector fb, fc;
    for (int k = 0; k < 50; ++k) {
      a.next(frame);
      b.next(fb);
      c.next(fc);
      CHECK(frame == fb);
      CHECK(frame == fc);
    }
    CHECK(c.position() == 87);

    auto wrong = cp;
    wrong.history.pop_back();
    CHECK_THROWS_AS(SynthesisStream::restore(f.model, wrong), FormatError);
  }

  TEST_CASE("memory does not grow with the number of frames") {
    const auto& f = fitted_oracle();
    SynthesisStream s(f.model, 4);
    Vector frame;
    for (int k = 0; k < 100; ++k) s.next(frame);
    const long long early = g_live_bytes.load();
    for (int k = 0; k < 20000; ++k) s.next(frame);
    CHECK(g_live_bytes.load() == early);
  }

  TEST_CASE("per-pixel variance matches the training data") {
    const auto& f = fitted_oracle();
    const auto& ref = f.data.series.frames;
    const auto syn = generate(*f.model, {.length = static_cast<std::size_t>(ref.rows()), .seed = 8});
    const auto& out = syn.series.frames;
    for (Eigen::Index p = 0; p < ref.cols(); ++p) {
      const double vr = (ref.col(p).array() - ref.col(p).mean()).square().mean();
      const double vs = (out.col(p).array() - out.col(p).mean()).square().mean();
      CHECK(std::abs(vs / vr - 1.0) < 0.03);
    }
  }

  TEST_CASE("top coefficient covariance matches the eigenvalues") {
    const auto& f = fitted_oracle();
    const auto syn = generate(*f.model, {.length = 100000, .seed = 12, .emit_coefficients = true});
    const auto& c = syn.coefficients;
    for (Eigen::Index i = 0; i < 10; ++i) {
      const double var = c.col(i).squaredNorm() / static_cast<double>(c.rows());
      CHECK(std::abs(var / f.model->variances[i] - 1.0) < 0.05);
    }
  }

  TEST_CASE("initial-vector and filter options all run") {
    const auto& f = fitted_oracle();
    for (auto init : {InitialVectors::first_pca, InitialVectors::residual_stats}) {
      for (auto filt : {FilterInit::warm_from_initial, FilterInit::zero}) {
        const auto out = generate(*f.model, {.length = 20, .seed = 1, .options = {filt, init, 0}});
        CHECK(out.series.frames.allFinite());
      }
    }
    CHECK(filter_init_from_string("zero") == FilterInit::zero);
    CHECK(initial_vectors_from_string("residual") == InitialVectors::residual_stats);
    CHECK_THROWS_AS(filter_init_from_string("hot"), InputError);
  }

  TEST_CASE("divergence is reported with its step") {
    auto m = std::make_shared<RevarModel>(*identity_model(3));
    m->lag_weights[0] = 1.8 * Matrix::Identity(3, 3);
    std::shared_ptr<const RevarModel> model = m;
    SynthesisStream s(model, 1);
    Vector frame;
    try {
      for (int k = 0; k < 10000; ++k) s.next(frame);
      FAIL("expected divergence");
    } catch (const StabilityError& e) {
      CHECK(e.step() > 0);
      CHECK(e.step() == s.position());
    }
  }

  TEST_CASE("per-step multiply count") {
    const auto& f = fitted_oracle();
    const auto& m = *f.model;
    SynthesisStream s(f.model, 2);
    Vector frame;
    OpCounter counter;
    s.next(frame, nullptr, &counter);
    const std::uint64_t nc = m.components, np = m.pixel_count(), nl = m.lags, nm = m.filter_count();
    std::uint64_t active = 0;
    for (Eigen::Index i = 0; i < m.residual_variances.size(); ++i) {
      active += m.residual_variances[i] > m.inverse_floor * m.residual_variances.maxCoeff();
    }
    CHECK(counter.multiplies == nc * nc * (nl + nm) + np * active + 2 * nm * nc + np * (np + 1));
  }

  TEST_CASE("generated series carries provenance") {
    const auto& f = fitted_oracle();
    const auto out = generate(*f.model, {.length = 3, .seed = 77});
    const auto prov = nlohmann::json::parse(out.series.provenance_json);
    CHECK(prov["seed"] == 77);
    CHECK(prov["model_hash"] == model_content_hash(*f.model));
    CHECK_THROWS_AS(generate(*f.model, {.length = 0, .seed = 1}), InputError);
  }
}
