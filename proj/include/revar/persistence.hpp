#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revar/data_model.hpp"
#include "revar/synthesis.hpp"

namespace revar {

inline constexpr int kPssFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

/// Raw little-endian float64 sidecars.
void write_f64(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64(const std::filesystem::path& path, std::size_t expected_count);

nlohmann::json geometry_to_json(const ApertureGeometry& geometry);
ApertureGeometry geometry_from_json(const nlohmann::json& j);

/// Writes a PSS directory (meta.json + frames.f64, optional coeffs.f64).
/// The directory is assembled under a temporary name and renamed into place.
void write_pss(const PhaseScreenSeries& series, const std::filesystem::path& dir,
               const RowMatrix* coefficients = nullptr);
PhaseScreenSeries read_pss(const std::filesystem::path& dir);

/// Frame-at-a-time reader for series that do not fit in memory.
class PssReader {
 public:
  explicit PssReader(const std::filesystem::path& dir);

  const ApertureGeometry& geometry() const noexcept { return geometry_; }
  std::size_t frame_count() const noexcept { return frames_; }
  double sampling_frequency() const noexcept { return sampling_frequency_; }
  const nlohmann::json& meta() const noexcept { return meta_; }
  std::size_t position() const noexcept { return position_; }

  /// Reads the next frame into `out` (length N_p); false at end of series.
  bool next(std::span<double> out);

 private:
  nlohmann::json meta_;
  ApertureGeometry geometry_;
  std::size_t frames_ = 0;
  double sampling_frequency_ = 1.0;
  std::size_t position_ = 0;
  std::ifstream stream_;
  std::vector<unsigned char> buffer_;
};

/// SHA-256 (hex) over every parameter array in a fixed order.
std::string model_content_hash(const RevarModel& model);

void save_model(const RevarModel& model, const std::filesystem::path& dir,
                const nlohmann::json& report = nlohmann::json());
RevarModel load_model(const std::filesystem::path& dir);

enum class ContainerKind { pss, model, unknown };
ContainerKind detect_container(const std::filesystem::path& path);

nlohmann::json checkpoint_to_json(const SynthesisStream::Checkpoint& checkpoint);
SynthesisStream::Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Stages a directory at a temporary sibling path, then swaps it into place.
class AtomicDirectory {
 public:
  explicit AtomicDirectory(std::filesystem::path target);
  ~AtomicDirectory();
  AtomicDirectory(const AtomicDirectory&) = delete;
  AtomicDirectory& operator=(const AtomicDirectory&) = delete;

  const std::filesystem::path& staging() const noexcept { return staging_; }
  void commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
  bool committed_ = false;
};

void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace revar
