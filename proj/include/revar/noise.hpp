#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace revar {

/// Deterministic stream of standard-normal draws.
///
/// Uniforms come from std::mt19937_64 (whose output sequence is fixed by the
/// C++ standard); Gaussians from the Box-Muller transform, consuming two
/// uniforms per pair of normals. The second value of each pair is held as a
/// spare, so the stream is a pure function of the seed and the number of
/// draws already taken. Changing any of this requires bumping kGeneratorName.
class NoiseSource {
 public:
  static constexpr std::string_view kGeneratorName = "mt19937_64+box-muller/v1";

  /// Everything needed to resume a stream exactly where it stopped.
  struct State {
    std::uint64_t seed = 0;
    std::uint64_t draws = 0;
    std::string engine;  // textual engine state (operator<< of the engine)
    bool has_spare = false;
    double spare = 0.0;
  };

  explicit NoiseSource(std::uint64_t seed);

  static NoiseSource restore(const State& state);

  double next();
  void fill(std::span<double> out);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return draws_; }
  State state() const;

 private:
  double uniform_open_closed();  // (0, 1]
  double uniform_closed_open();  // [0, 1)

  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace revar
