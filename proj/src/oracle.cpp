#include "revar/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "revar/error.hpp"
#include "revar/noise.hpp"

namespace revar {

using nlohmann::json;

std::string to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::longrange_ar: return "longrange_ar";
    case OracleKind::white: return "white";
    case OracleKind::translating: return "translating";
    case OracleKind::sinusoid: return "sinusoid";
  }
  return "unknown";
}

OracleKind oracle_kind_from_string(const std::string& name) {
  for (auto k : {OracleKind::longrange_ar, OracleKind::white, OracleKind::translating,
                 OracleKind::sinusoid}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown oracle kind '" + name +
                   "' (expected longrange_ar, white, translating or sinusoid)");
}

json to_json(const OracleSpec& s) {
  json j = {{"kind", to_string(s.kind)},
            {"rows", s.rows},
            {"cols", s.cols},
            {"pitch", s.pitch},
            {"frames", s.frames},
            {"seed", s.seed},
            {"sampling_frequency", s.sampling_frequency},
            {"amplitude", s.amplitude},
            {"mean_offset", s.mean_offset},
            {"components", s.components},
            {"lags", s.lags},
            {"filters", s.filters},
            {"peak_frequency", s.peak_frequency},
            {"frequency_jitter", s.frequency_jitter},
            {"pole_radius", s.pole_radius},
            {"extra_lag_weight", s.extra_lag_weight},
            {"filter_weight", s.filter_weight},
            {"variance_spread", s.variance_spread},
            {"tail_fraction", s.tail_fraction},
            {"alpha_rule", to_string(s.alpha_rule)},
            {"velocity", s.velocity},
            {"wavelength", s.wavelength},
            {"frequency", s.frequency},
            {"noise", s.noise}};
  if (s.burn_in) j["burn_in"] = *s.burn_in;
  return j;
}

OracleSpec oracle_spec_from_json(const json& j) {
  if (!j.is_object()) throw InputError("oracle spec must be a JSON object");
  OracleSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") s.kind = oracle_kind_from_string(value.get<std::string>());
      else if (key == "rows") s.rows = value.get<std::size_t>();
      else if (key == "cols") s.cols = value.get<std::size_t>();
      else if (key == "pitch") s.pitch = value.get<double>();
      else if (key == "frames") s.frames = value.get<std::size_t>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "sampling_frequency") s.sampling_frequency = value.get<double>();
      else if (key == "amplitude") s.amplitude = value.get<double>();
      else if (key == "mean_offset") s.mean_offset = value.get<double>();
      else if (key == "components") s.components = value.get<std::size_t>();
      else if (key == "lags") s.lags = value.get<std::size_t>();
      else if (key == "filters") s.filters = value.get<std::size_t>();
      else if (key == "peak_frequency") s.peak_frequency = value.get<double>();
      else if (key == "frequency_jitter") s.frequency_jitter = value.get<double>();
      else if (key == "pole_radius") s.pole_radius = value.get<double>();
      else if (key == "extra_lag_weight") s.extra_lag_weight = value.get<double>();
      else if (key == "filter_weight") s.filter_weight = value.get<double>();
      else if (key == "variance_spread") s.variance_spread = value.get<double>();
      else if (key == "tail_fraction") s.tail_fraction = value.get<double>();
      else if (key == "alpha_rule") s.alpha_rule = alpha_rule_from_string(value.get<std::string>());
      else if (key == "burn_in") s.burn_in = value.get<std::size_t>();
      else if (key == "velocity") s.velocity = value.get<double>();
      else if (key == "wavelength") s.wavelength = value.get<double>();
      else if (key == "frequency") s.frequency = value.get<double>();
      else if (key == "noise") s.noise = value.get<double>();
      else throw InputError("unknown oracle spec field '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("oracle spec: ") + e.what());
  }
  return s;
}

Matrix oracle_basis(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("basis dimension must be positive");
  const auto ni = static_cast<Eigen::Index>(n);
  if ((n & (n - 1)) == 0) {
    Matrix h = Matrix::Ones(1, 1);
    while (h.rows() < ni) {
      const auto k = h.rows();
      Matrix next(2 * k, 2 * k);
      next << h, h, h, -h;
      h = std::move(next);
    }
    return h / std::sqrt(static_cast<double>(n));
  }
  NoiseSource noise(seed);
  Matrix g(ni, ni);
  for (Eigen::Index c = 0; c < ni; ++c) {
    for (Eigen::Index r = 0; r < ni; ++r) g(r, c) = noise.next();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(ni, ni);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < ni; ++c) {
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

namespace {

Matrix transition_matrix(const PredictorWeights& w, std::span<const double> alphas) {
  const auto d = static_cast<Eigen::Index>(w.dimension());
  const auto lags = static_cast<Eigen::Index>(w.lag.size());
  const auto filters = static_cast<Eigen::Index>(w.filter.size());
  if (static_cast<std::size_t>(filters) != alphas.size()) {
    throw InputError("filter weight count disagrees with the number of gains");
  }
  const auto blocks = lags + filters;
  Matrix m = Matrix::Zero(d * blocks, d * blocks);
  Matrix top(d, d * blocks);
  for (Eigen::Index l = 0; l < lags; ++l) top.middleCols(l * d, d) = w.lag[l];
  for (Eigen::Index i = 0; i < filters; ++i) top.middleCols((lags + i) * d, d) = w.filter[i];
  m.topRows(d) = top;
  for (Eigen::Index l = 1; l < lags; ++l) {
    m.block(l * d, (l - 1) * d, d, d).setIdentity();
  }
  for (Eigen::Index i = 0; i < filters; ++i) {
    const double a = alphas[static_cast<std::size_t>(i)];
    m.middleRows((lags + i) * d, d) = a * top;
    m.block((lags + i) * d, (lags + i) * d, d, d).diagonal().array() += 1.0 - a;
  }
  return m;
}

}  // namespace

double predictor_spectral_radius(const PredictorWeights& weights, std::span<const double> alphas) {
  if (weights.lag.empty()) throw InputError("predictor needs at least one lag");
  const Matrix m = transition_matrix(weights, alphas);
  Eigen::EigenSolver<Matrix> solver(m, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue iteration failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

PredictorWeights random_stable_weights(std::size_t dimension, std::size_t lags,
                                       std::span<const double> alphas, double radius,
                                       std::uint64_t seed) {
  if (dimension == 0 || lags == 0) throw InputError("dimension and lags must be positive");
  if (!(radius > 0.0 && radius < 1.0)) throw InputError("target radius must lie in (0, 1)");
  NoiseSource noise(seed);
  const auto d = static_cast<Eigen::Index>(dimension);
  const double spread = 1.0 / std::sqrt(static_cast<double>(dimension * (lags + alphas.size())));
  PredictorWeights base = PredictorWeights::zeros(dimension, lags, alphas.size());
  auto fill = [&](Matrix& m) {
    for (Eigen::Index c = 0; c < d; ++c) {
      for (Eigen::Index r = 0; r < d; ++r) m(r, c) = spread * noise.next();
    }
  };
  for (auto& m : base.lag) fill(m);
  for (auto& m : base.filter) fill(m);

  auto scaled = [&](double s) {
    PredictorWeights w = base;
    for (auto& m : w.lag) m *= s;
    for (auto& m : w.filter) m *= s;
    return w;
  };
  auto rho = [&](double s) { return predictor_spectral_radius(scaled(s), alphas); };
  if (rho(0.0) >= radius) {
    throw InputError("filter gains alone already exceed the requested spectral radius");
  }
  double lo = 0.0, hi = 1.0;
  for (int k = 0; rho(hi) < radius; ++k) {
    if (k > 60) throw NumericalError("could not bracket the requested spectral radius");
    lo = hi;
    hi *= 2.0;
  }
  for (int k = 0; k < 200 && hi - lo > 1e-14 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (rho(mid) < radius ? lo : hi) = mid;
  }
  return scaled(lo);
}

RowMatrix simulate_predictor(const PredictorWeights& weights, std::span<const double> alphas,
                             std::span<const Vector> initial_history, std::size_t steps,
                             const Vector& innovation_std, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(weights.dimension());
  const std::size_t lags = weights.lag.size();
  if (initial_history.size() != lags) throw InputError("initial history must hold N_L vectors");
  if (innovation_std.size() != 0 && innovation_std.size() != d) {
    throw InputError("innovation std must be empty or one entry per component");
  }
  std::vector<Vector> history(initial_history.begin(), initial_history.end());
  std::vector<Vector> filters(alphas.size(), Vector::Zero(d));
  NoiseSource noise(seed);
  RowMatrix out(static_cast<Eigen::Index>(steps), d);
  double peak = 1.0;
  for (const auto& h : history) peak = std::max(peak, h.norm());
  for (std::size_t n = 0; n < steps; ++n) {
    Vector x = Vector::Zero(d);
    for (std::size_t l = 0; l < lags; ++l) x.noalias() += weights.lag[l] * history[l];
    for (std::size_t i = 0; i < filters.size(); ++i) x.noalias() += weights.filter[i] * filters[i];
    if (innovation_std.size() != 0) {
      for (Eigen::Index k = 0; k < d; ++k) x[k] += innovation_std[k] * noise.next();
    }
    const double norm = x.norm();
    if (!std::isfinite(norm) || norm > 1e6 * peak) {
      throw StabilityError("simulation diverged at step " + std::to_string(n), n);
    }
    for (std::size_t i = 0; i < filters.size(); ++i) {
      filters[i] = (1.0 - alphas[i]) * filters[i] + alphas[i] * x;
    }
    for (std::size_t l = lags; l-- > 1;) history[l].swap(history[l - 1]);
    history[0] = x;
    out.row(static_cast<Eigen::Index>(n)) = x.transpose();
  }
  return out;
}

namespace {

// Scalar per-component long-range AR: lag weights a, filter weights b.
struct ComponentDynamics {
  std::vector<double> a;
  std::vector<double> b;
};

// Sum of squared impulse-response samples, i.e. stationary variance per
// unit innovation variance.
double impulse_energy(const ComponentDynamics& c, std::span<const double> alphas) {
  std::vector<double> hist(c.a.size(), 0.0);
  std::vector<double> filt(c.b.size(), 0.0);
  double energy = 0.0;
  double quiet = 0.0;
  for (std::size_t n = 0; n < 50'000'000; ++n) {
    double x = n == 0 ? 1.0 : 0.0;
    for (std::size_t l = 0; l < hist.size(); ++l) x += c.a[l] * hist[l];
    for (std::size_t i = 0; i < filt.size(); ++i) x += c.b[i] * filt[i];
    for (std::size_t i = 0; i < filt.size(); ++i) filt[i] += alphas[i] * (x - filt[i]);
    for (std::size_t l = hist.size(); l-- > 1;) hist[l] = hist[l - 1];
    hist[0] = x;
    energy += x * x;
    double size = 0.0;
    for (double h : hist) size = std::max(size, std::abs(h));
    for (double f : filt) size = std::max(size, std::abs(f));
    if (!std::isfinite(energy)) break;
    quiet = size < 1e-9 * std::sqrt(energy) ? quiet + 1 : 0;
    if (quiet > 1000) return energy;
  }
  throw StabilityError("oracle dynamics do not decay", 0);
}

// Frequency (cycles per step) of the maximum of the summed component spectra,
// each component weighted by its stationary variance target.
double process_peak(const std::vector<ComponentDynamics>& dyn, const std::vector<double>& target,
                    std::span<const double> alphas) {
  std::vector<double> q(dyn.size());
  for (std::size_t c = 0; c < dyn.size(); ++c) q[c] = target[c] / impulse_energy(dyn[c], alphas);
  auto power = [&](double f) {
    const std::complex<double> zinv = std::polar(1.0, -2.0 * std::numbers::pi * f);
    double total = 0.0;
    for (std::size_t c = 0; c < dyn.size(); ++c) {
      std::complex<double> d = 1.0;
      std::complex<double> zl = 1.0;
      for (double a : dyn[c].a) {
        zl *= zinv;
        d -= a * zl;
      }
      for (std::size_t i = 0; i < dyn[c].b.size(); ++i) {
        const std::complex<double> h = alphas[i] / (1.0 - (1.0 - alphas[i]) * zinv);
        d -= dyn[c].b[i] * h * zinv;
      }
      total += q[c] / std::norm(d);
    }
    return total;
  };
  const double step = 1e-4;
  double best = step;
  double best_power = power(step);
  for (double f = 2 * step; f <= 0.5; f += step) {
    const double p = power(f);
    if (p > best_power) {
      best_power = p;
      best = f;
    }
  }
  // Golden-section refinement inside the neighbouring grid cells.
  double lo = std::max(best - step, 1e-7), hi = std::min(best + step, 0.5);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  while (hi - lo > 1e-12) {
    const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    if (power(m1) < power(m2)) {
      lo = m1;
    } else {
      hi = m2;
    }
  }
  return 0.5 * (lo + hi);
}

void check_common(const OracleSpec& s) {
  if (s.rows == 0 || s.cols == 0) throw InputError("oracle grid must be non-empty");
  if (s.frames < 2) throw InputError("oracle needs at least two frames");
  if (!(s.sampling_frequency > 0.0)) throw InputError("sampling frequency must be positive");
  if (!(s.amplitude > 0.0)) throw InputError("amplitude must be positive");
}

PhaseScreenSeries empty_series(const OracleSpec& s) {
  PhaseScreenSeries out;
  out.geometry = ApertureGeometry::rectangle(s.rows, s.cols, s.pitch, s.pitch);
  out.sampling_frequency = s.sampling_frequency;
  out.label = "oracle-" + to_string(s.kind);
  json prov = {{"oracle", to_json(s)}, {"generator", std::string(NoiseSource::kGeneratorName)}};
  out.provenance_json = prov.dump();
  out.frames.resize(static_cast<Eigen::Index>(s.frames),
                    static_cast<Eigen::Index>(out.geometry.pixel_count()));
  return out;
}

Vector pixel_means(const OracleSpec& s, std::size_t np, NoiseSource& noise) {
  Vector mu(static_cast<Eigen::Index>(np));
  for (Eigen::Index p = 0; p < mu.size(); ++p) mu[p] = s.mean_offset * noise.next();
  return mu;
}

OracleDataset make_longrange(const OracleSpec& s) {
  const std::size_t np = s.rows * s.cols;
  const std::size_t k = s.components;
  if (k == 0 || k > np) throw InputError("oracle components must lie in [1, rows*cols]");
  if (s.lags == 0) throw InputError("oracle needs at least one lag");
  if (!(s.pole_radius > 0.0 && s.pole_radius < 1.0)) throw InputError("pole radius must lie in (0, 1)");
  if (!(s.variance_spread > 0.0 && s.variance_spread <= 1.0)) {
    throw InputError("variance spread must lie in (0, 1]");
  }
  if (!(s.tail_fraction >= 0.0 && s.tail_fraction < 1.0)) {
    throw InputError("tail fraction must lie in [0, 1)");
  }
  if (k == np && s.tail_fraction > 0.0) {
    throw InputError("a non-zero tail fraction needs components < rows*cols");
  }

  NoiseSource setup(s.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<ComponentDynamics> dyn(k);
  std::vector<double> target(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double jitter = 1.0 + s.frequency_jitter * std::clamp(0.5 * setup.next(), -1.0, 1.0);
    const double theta = 2.0 * std::numbers::pi * s.peak_frequency * jitter;
    auto& d = dyn[c];
    d.a.assign(s.lags, 0.0);
    if (s.lags == 1) {
      d.a[0] = s.pole_radius;
    } else {
      d.a[0] = 2.0 * s.pole_radius * std::cos(theta);
      d.a[1] = -s.pole_radius * s.pole_radius;
      for (std::size_t l = 2; l < s.lags; ++l) {
        d.a[l] = (l % 2 == 0 ? 1.0 : -1.0) * s.extra_lag_weight / static_cast<double>(l - 1);
      }
    }
    d.b.assign(s.filters, 0.0);
    for (std::size_t i = 0; i < s.filters; ++i) {
      d.b[i] = s.filter_weight / static_cast<double>(i + 1);
    }
    target[c] = k == 1 ? 1.0
                       : 1.0 - (1.0 - s.variance_spread) * static_cast<double>(c) /
                                   static_cast<double>(k - 1);
  }

  // The extra lags and the filter feedback pull the spectral peak away from
  // the resonance. Place the cut-offs relative to the peak the process really
  // has, since that is what the estimator will find in the data.
  double peak = s.peak_frequency;
  std::vector<double> alphas;
  for (int iter = 0; iter < 50; ++iter) {
    alphas = s.filters ? alphas_for_peak(peak, s.filters, s.alpha_rule) : std::vector<double>{};
    const double next = process_peak(dyn, target, alphas);
    const bool settled = std::abs(next - peak) < 1e-10;
    peak = next;
    if (settled || s.filters == 0) break;
  }
  if (s.filters) alphas = alphas_for_peak(peak, s.filters, s.alpha_rule);

  // Scale so every pixel has unit variance under a Hadamard basis.
  const double top_total = std::accumulate(target.begin(), target.end(), 0.0);
  const double tail_total = s.tail_fraction / (1.0 - s.tail_fraction) * top_total;
  const double norm = static_cast<double>(np) / (top_total + tail_total);
  Vector lambda(static_cast<Eigen::Index>(np));
  Vector innovation(static_cast<Eigen::Index>(np));
  for (std::size_t c = 0; c < k; ++c) {
    const double energy = impulse_energy(dyn[c], alphas);
    lambda[static_cast<Eigen::Index>(c)] = target[c] * norm;
    innovation[static_cast<Eigen::Index>(c)] = target[c] * norm / energy;
  }
  const double tail_each = np > k ? tail_total * norm / static_cast<double>(np - k) : 0.0;
  for (std::size_t c = k; c < np; ++c) {
    lambda[static_cast<Eigen::Index>(c)] = tail_each;
    innovation[static_cast<Eigen::Index>(c)] = tail_each;
  }

  const Matrix basis = oracle_basis(np, s.seed);
  const Vector mu = pixel_means(s, np, setup);
  const Vector sigma = Vector::Constant(static_cast<Eigen::Index>(np), s.amplitude);

  double slowest = 1.0;
  for (double a : alphas) slowest = std::max(slowest, 1.0 / a);
  const std::size_t burn_in = s.burn_in.value_or(static_cast<std::size_t>(10.0 * slowest) + 200);

  // Independent forward simulation of the coefficient process.
  NoiseSource noise(s.seed);
  const auto npi = static_cast<Eigen::Index>(np);
  RowMatrix coeffs(static_cast<Eigen::Index>(s.frames), npi);
  std::vector<std::vector<double>> hist(k, std::vector<double>(s.lags, 0.0));
  std::vector<std::vector<double>> filt(k, std::vector<double>(s.filters, 0.0));
  Vector innovation_std = innovation.cwiseSqrt();
  Vector draw(npi);
  const double limit = 1e6 * std::sqrt(lambda.sum());
  for (std::size_t n = 0; n < burn_in + s.frames; ++n) {
    noise.fill(std::span<double>(draw.data(), np));
    double energy = 0.0;
    Vector x(npi);
    for (std::size_t c = 0; c < k; ++c) {
      const auto& d = dyn[c];
      double v = innovation_std[static_cast<Eigen::Index>(c)] * draw[static_cast<Eigen::Index>(c)];
      for (std::size_t l = 0; l < s.lags; ++l) v += d.a[l] * hist[c][l];
      for (std::size_t i = 0; i < s.filters; ++i) v += d.b[i] * filt[c][i];
      for (std::size_t i = 0; i < s.filters; ++i) filt[c][i] += alphas[i] * (v - filt[c][i]);
      for (std::size_t l = s.lags; l-- > 1;) hist[c][l] = hist[c][l - 1];
      hist[c][0] = v;
      x[static_cast<Eigen::Index>(c)] = v;
      energy += v * v;
    }
    for (std::size_t c = k; c < np; ++c) {
      x[static_cast<Eigen::Index>(c)] =
          innovation_std[static_cast<Eigen::Index>(c)] * draw[static_cast<Eigen::Index>(c)];
    }
    if (!std::isfinite(energy) || std::sqrt(energy) > limit) {
      throw StabilityError("oracle dynamics diverged at step " + std::to_string(n), n);
    }
    if (n >= burn_in) coeffs.row(static_cast<Eigen::Index>(n - burn_in)) = x.transpose();
  }

  OracleDataset out;
  out.series = empty_series(s);
  out.series.frames.noalias() = coeffs * basis.transpose();
  out.series.frames = (out.series.frames.array().rowwise() * sigma.transpose().array())
                          .rowwise() + mu.transpose().array();
  out.coefficients = coeffs.leftCols(static_cast<Eigen::Index>(k));

  RevarModel truth;
  truth.geometry = out.series.geometry;
  truth.mean = mu;
  truth.scale = sigma;
  truth.basis = basis;
  truth.variances = lambda;
  truth.components = k;
  truth.lags = s.lags;
  truth.alphas = alphas;
  const auto ki = static_cast<Eigen::Index>(k);
  truth.lag_weights.assign(s.lags, Matrix::Zero(ki, ki));
  truth.filter_weights.assign(s.filters, Matrix::Zero(ki, ki));
  for (std::size_t c = 0; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    for (std::size_t l = 0; l < s.lags; ++l) truth.lag_weights[l](ci, ci) = dyn[c].a[l];
    for (std::size_t i = 0; i < s.filters; ++i) truth.filter_weights[i](ci, ci) = dyn[c].b[i];
  }
  std::vector<Eigen::Index> order(np);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto x, auto y) { return innovation[x] > innovation[y]; });
  truth.residual_mean = Vector::Zero(npi);
  truth.residual_basis = Matrix::Zero(npi, npi);
  truth.residual_variances.resize(npi);
  for (Eigen::Index j = 0; j < npi; ++j) {
    truth.residual_basis(order[static_cast<std::size_t>(j)], j) = 1.0;
    truth.residual_variances[j] = innovation[order[static_cast<std::size_t>(j)]];
  }
  truth.provenance.training_frames = s.frames;
  truth.provenance.variance_fraction = 0.99;
  truth.provenance.cutoff_frequency = peak;
  truth.provenance.alpha_rule = to_string(s.alpha_rule);
  truth.provenance.sampling_frequency = s.sampling_frequency;
  truth.provenance.label = "oracle-truth";
  out.truth = std::move(truth);
  return out;
}

OracleDataset make_simple(const OracleSpec& s) {
  OracleDataset out;
  out.series = empty_series(s);
  const auto& g = out.series.geometry;
  const std::size_t np = g.pixel_count();
  NoiseSource noise(s.seed);
  const Vector mu = pixel_means(s, np, noise);
  std::vector<double> phase(np);
  for (std::size_t p = 0; p < np; ++p) {
    phase[p] = 2.0 * std::numbers::pi * (0.5 + 0.5 * std::erf(noise.next() / std::numbers::sqrt2));
  }
  if (s.kind == OracleKind::translating && !(s.wavelength > 0.0)) {
    throw InputError("wavelength must be positive");
  }
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t n = 0; n < s.frames; ++n) {
    const auto row = static_cast<Eigen::Index>(n);
    const double t = static_cast<double>(n);
    for (std::size_t p = 0; p < np; ++p) {
      const auto pc = g.pixel_coord(p);
      double v = 0.0;
      switch (s.kind) {
        case OracleKind::white:
          v = noise.next();
          break;
        case OracleKind::translating: {
          const double x = static_cast<double>(pc.col) - s.velocity * t;
          const double y = static_cast<double>(pc.row);
          v = std::sin(two_pi * x / s.wavelength + 0.3 * y);
          break;
        }
        case OracleKind::sinusoid:
          v = std::sin(two_pi * s.frequency * t + phase[p]);
          break;
        case OracleKind::longrange_ar:
          break;
      }
      if (s.noise > 0.0 && s.kind != OracleKind::white) v += s.noise * noise.next();
      out.series.frames(row, static_cast<Eigen::Index>(p)) = s.amplitude * v + mu[static_cast<Eigen::Index>(p)];
    }
  }
  return out;
}

}  // namespace

OracleDataset make_oracle(const OracleSpec& spec) {
  check_common(spec);
  if (spec.kind == OracleKind::longrange_ar) return make_longrange(spec);
  return make_simple(spec);
}

}  // namespace revar
