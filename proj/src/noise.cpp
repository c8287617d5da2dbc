#include "revar/noise.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "revar/error.hpp"

namespace revar {

namespace {
constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;
}

NoiseSource::NoiseSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

NoiseSource NoiseSource::restore(const State& state) {
  NoiseSource out(state.seed);
  std::istringstream in(state.engine);
  in >> out.engine_;
  if (in.fail()) throw FormatError("noise checkpoint carries an unreadable engine state");
  out.draws_ = state.draws;
  out.has_spare_ = state.has_spare;
  out.spare_ = state.spare;
  return out;
}

NoiseSource::State NoiseSource::state() const {
  std::ostringstream out;
  out << engine_;
  return State{seed_, draws_, out.str(), has_spare_, spare_};
}

double NoiseSource::uniform_open_closed() {
  return static_cast<double>((engine_() >> 11) + 1) * kTwoPow53Inv;
}

double NoiseSource::uniform_closed_open() {
  return static_cast<double>(engine_() >> 11) * kTwoPow53Inv;
}

double NoiseSource::next() {
  ++draws_;
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open_closed();
  const double u2 = uniform_closed_open();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void NoiseSource::fill(std::span<double> out) {
  for (double& v : out) v = next();
}

}  // namespace revar
