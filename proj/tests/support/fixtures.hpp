#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "revar/data_model.hpp"
#include "revar/noise.hpp"

namespace fixtures {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("revar-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline revar::RowMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  revar::NoiseSource noise(seed);
  revar::RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = noise.next();
  }
  return m;
}

inline revar::PhaseScreenSeries white_series(std::size_t rows, std::size_t cols, std::size_t frames,
                                             std::uint64_t seed) {
  revar::PhaseScreenSeries s;
  s.geometry = revar::ApertureGeometry::rectangle(rows, cols);
  s.frames = gaussian(frames, rows * cols, seed);
  return s;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace fixtures
