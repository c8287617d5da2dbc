#include "revar/persistence.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <memory>
#include <sstream>

#include <unistd.h>

#include <openssl/evp.h>

#include "revar/error.hpp"

namespace revar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kPssMeta = "meta.json";
constexpr const char* kPssFrames = "frames.f64";
constexpr const char* kPssCoefficients = "coeffs.f64";
constexpr const char* kModelJson = "model.json";

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0x00000000000000FFull) << 56) | ((v & 0x000000000000FF00ull) << 40) |
        ((v & 0x0000000000FF0000ull) << 24) | ((v & 0x00000000FF000000ull) << 8) |
        ((v & 0x000000FF00000000ull) >> 8) | ((v & 0x0000FF0000000000ull) >> 24) |
        ((v & 0x00FF000000000000ull) >> 40) | ((v & 0xFF00000000000000ull) >> 56);
  }
  return v;
}

void encode(std::span<const double> values, std::vector<unsigned char>& out) {
  out.resize(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(out.data() + 8 * i, &bits, 8);
  }
}

void decode(const unsigned char* bytes, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_little(bits));
  }
}

std::uintmax_t file_size_or_throw(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError(path.string() + ": file not found");
  const auto size = fs::file_size(path, ec);
  if (ec) throw IoError(path.string() + ": " + ec.message());
  return size;
}

void expect_size(const fs::path& path, std::uintmax_t expected) {
  const auto actual = file_size_or_throw(path);
  if (actual != expected) {
    throw FormatError(path.filename().string() + ": expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(actual));
  }
}

std::vector<double> matrix_row_major(const Matrix& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  Eigen::Map<RowMatrix>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

Matrix matrix_from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols,
                             std::size_t offset = 0) {
  return Eigen::Map<const RowMatrix>(v.data() + offset, rows, cols);
}

std::vector<double> stack_row_major(const std::vector<Matrix>& blocks) {
  std::vector<double> out;
  for (const auto& b : blocks) {
    const auto flat = matrix_row_major(b);
    out.insert(out.end(), flat.begin(), flat.end());
  }
  return out;
}

std::vector<double> as_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Arrays in container order, shared by save, load and the content hash.
struct NamedArray {
  const char* file;
  std::vector<double> values;
};

std::vector<NamedArray> model_arrays(const RevarModel& m) {
  return {
      {"mu_X.f64", as_vector(m.mean)},
      {"sigma_X.f64", as_vector(m.scale)},
      {"E.f64", matrix_row_major(m.basis)},
      {"lambda.f64", as_vector(m.variances)},
      {"A_X.f64", stack_row_major(m.lag_weights)},
      {"A_Y.f64", stack_row_major(m.filter_weights)},
      {"mu_xi.f64", as_vector(m.residual_mean)},
      {"U.f64", matrix_row_major(m.residual_basis)},
      {"sigma_xi.f64", as_vector(m.residual_variances)},
  };
}

std::string hex(const unsigned char* data, std::size_t n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    out[2 * i] = kDigits[data[i] >> 4];
    out[2 * i + 1] = kDigits[data[i] & 0xF];
  }
  return out;
}

std::string mask_bits(const ApertureGeometry& g) {
  std::string bits(g.mask().size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = g.mask()[i] ? '1' : '0';
  return bits;
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": field '" + std::string(key) + "' has the wrong type");
  }
}

std::uint64_t bits_of(double v) { return std::bit_cast<std::uint64_t>(v); }
double from_bits(std::uint64_t v) { return std::bit_cast<double>(v); }

json bits_array(std::span<const double> values) {
  json out = json::array();
  for (double v : values) out.push_back(bits_of(v));
  return out;
}

std::vector<double> from_bits_array(const json& j, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number_unsigned()) throw FormatError(where + " must hold unsigned bit patterns");
    out.push_back(from_bits(e.get<std::uint64_t>()));
  }
  return out;
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  out.close();
  if (!out) throw IoError(path.string() + ": write failed");
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_f64(const fs::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  constexpr std::size_t kChunk = 1 << 16;
  std::vector<unsigned char> buffer;
  for (std::size_t first = 0; first < values.size(); first += kChunk) {
    const auto part = values.subspan(first, std::min(kChunk, values.size() - first));
    encode(part, buffer);
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size()));
  }
  out.close();
  if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<double> read_f64(const fs::path& path, std::size_t expected_count) {
  expect_size(path, static_cast<std::uintmax_t>(expected_count) * 8);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::vector<unsigned char> bytes(expected_count * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError(path.string() + ": short read");
  std::vector<double> out(expected_count);
  decode(bytes.data(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Atomic directory staging

AtomicDirectory::AtomicDirectory(fs::path target) : target_(std::move(target)) {
  static std::atomic<unsigned> counter{0};
  if (target_.filename().empty()) target_ = target_.parent_path();
  const auto parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) {
    throw IoError(parent.string() + ": output directory does not exist");
  }
  staging_ = parent / ("." + target_.filename().string() + ".tmp-" +
                       std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(staging_, ec);
  if (!fs::create_directory(staging_, ec) || ec) {
    throw IoError(staging_.string() + ": cannot create staging directory");
  }
}

AtomicDirectory::~AtomicDirectory() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void AtomicDirectory::commit() {
  std::error_code ec;
  fs::path backup;
  if (fs::exists(target_, ec)) {
    if (!fs::is_directory(target_, ec)) {
      throw IoError(target_.string() + ": exists and is not a directory");
    }
    backup = staging_;
    backup += ".old";
    fs::rename(target_, backup, ec);
    if (ec) throw IoError(target_.string() + ": cannot replace (" + ec.message() + ")");
  }
  fs::rename(staging_, target_, ec);
  if (ec) {
    if (!backup.empty()) fs::rename(backup, target_);
    throw IoError(target_.string() + ": cannot rename into place (" + ec.message() + ")");
  }
  committed_ = true;
  if (!backup.empty()) fs::remove_all(backup, ec);
}

// ---------------------------------------------------------------------------
// Geometry and PSS

json geometry_to_json(const ApertureGeometry& g) {
  json j;
  j["rows"] = g.rows();
  j["cols"] = g.cols();
  j["mask"] = g.is_full_rectangle() ? std::string("rectangle") : mask_bits(g);
  j["pixel_pitch"] = {g.pitch_x(), g.pitch_y()};
  return j;
}

ApertureGeometry geometry_from_json(const json& j) {
  const std::string where = "geometry";
  const auto rows = required<std::size_t>(j, "rows", where);
  const auto cols = required<std::size_t>(j, "cols", where);
  const auto mask = required<std::string>(j, "mask", where);
  double px = 1.0, py = 1.0;
  if (j.contains("pixel_pitch")) {
    const auto& p = j.at("pixel_pitch");
    if (p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number()) {
      px = p[0].get<double>();
      py = p[1].get<double>();
    } else if (p.is_number()) {
      px = py = p.get<double>();
    } else {
      throw FormatError("geometry: pixel_pitch must be a number or [x, y]");
    }
  }
  try {
    if (mask == "rectangle") return ApertureGeometry::rectangle(rows, cols, px, py);
    if (mask.size() != rows * cols) {
      throw FormatError("geometry: mask bitstring has " + std::to_string(mask.size()) +
                        " characters, expected " + std::to_string(rows * cols));
    }
    std::vector<std::uint8_t> bits(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] != '0' && mask[i] != '1') {
        throw FormatError("geometry: mask must be 'rectangle' or a string of 0/1");
      }
      bits[i] = mask[i] == '1';
    }
    return ApertureGeometry(rows, cols, std::move(bits), px, py);
  } catch (const InputError& e) {
    throw FormatError(std::string("geometry: ") + e.what());
  }
}

void write_pss(const PhaseScreenSeries& series, const fs::path& dir,
               const RowMatrix* coefficients) {
  series.validate();
  AtomicDirectory staged(dir);
  json meta = geometry_to_json(series.geometry);
  meta["format"] = "PSS";
  meta["version"] = kPssFormatVersion;
  meta["n_pixels"] = series.pixel_count();
  meta["n_frames"] = series.frame_count();
  meta["sampling_frequency_hz"] = series.sampling_frequency;
  meta["units"] = series.units;
  meta["label"] = series.label;
  if (!series.provenance_json.empty()) {
    try {
      meta["provenance"] = json::parse(series.provenance_json);
    } catch (const json::parse_error&) {
      meta["provenance"] = series.provenance_json;
    }
  }
  if (coefficients) {
    if (static_cast<std::size_t>(coefficients->rows()) != series.frame_count()) {
      throw InputError("coefficient sidecar must have one row per frame");
    }
    meta["coefficients"] = {{"file", kPssCoefficients},
                            {"n_components", coefficients->cols()}};
    write_f64(staged.staging() / kPssCoefficients,
              std::span<const double>(coefficients->data(),
                                      static_cast<std::size_t>(coefficients->size())));
  }
  write_text(staged.staging() / kPssMeta, meta.dump(2) + "\n");
  write_f64(staged.staging() / kPssFrames,
            std::span<const double>(series.frames.data(),
                                    static_cast<std::size_t>(series.frames.size())));
  staged.commit();
}

namespace {

struct PssHeader {
  json meta;
  ApertureGeometry geometry;
  std::size_t frames = 0;
  double fs = 1.0;
};

PssHeader read_pss_header(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + ": not a directory");
  const auto meta_path = dir / kPssMeta;
  if (!fs::exists(meta_path, ec)) {
    throw FormatError(dir.string() + ": not a PSS container (no meta.json)");
  }
  PssHeader h;
  h.meta = read_json(meta_path);
  const std::string where = meta_path.string();
  if (h.meta.contains("format") && h.meta["format"] != "PSS") {
    throw FormatError(where + ": format is not PSS");
  }
  if (h.meta.contains("version")) {
    const auto version = required<int>(h.meta, "version", where);
    if (version != kPssFormatVersion) {
      throw FormatError(where + ": unsupported PSS version " + std::to_string(version));
    }
  }
  h.geometry = geometry_from_json(h.meta);
  const auto n_pixels = required<std::size_t>(h.meta, "n_pixels", where);
  if (n_pixels != h.geometry.pixel_count()) {
    throw FormatError(where + ": n_pixels " + std::to_string(n_pixels) + " disagrees with mask (" +
                      std::to_string(h.geometry.pixel_count()) + " pixels)");
  }
  h.frames = required<std::size_t>(h.meta, "n_frames", where);
  h.fs = required<double>(h.meta, "sampling_frequency_hz", where);
  if (!(h.fs > 0.0)) throw FormatError(where + ": sampling_frequency_hz must be positive");
  expect_size(dir / kPssFrames,
              static_cast<std::uintmax_t>(h.frames) * h.geometry.pixel_count() * 8);
  return h;
}

}  // namespace

PhaseScreenSeries read_pss(const fs::path& dir) {
  auto h = read_pss_header(dir);
  PhaseScreenSeries s;
  s.geometry = h.geometry;
  s.sampling_frequency = h.fs;
  s.label = h.meta.value("label", std::string());
  s.units = h.meta.value("units", std::string("microns"));
  if (h.meta.contains("provenance")) {
    const auto& p = h.meta["provenance"];
    s.provenance_json = p.is_string() ? p.get<std::string>() : p.dump();
  }
  const auto np = h.geometry.pixel_count();
  const auto values = read_f64(dir / kPssFrames, h.frames * np);
  s.frames = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(h.frames),
                                         static_cast<Eigen::Index>(np));
  if (!s.frames.allFinite()) throw FormatError(dir.string() + ": frames contain non-finite values");
  return s;
}

PssReader::PssReader(const fs::path& dir) {
  auto h = read_pss_header(dir);
  meta_ = std::move(h.meta);
  geometry_ = std::move(h.geometry);
  frames_ = h.frames;
  sampling_frequency_ = h.fs;
  stream_.open(dir / kPssFrames, std::ios::binary);
  if (!stream_) throw IoError((dir / kPssFrames).string() + ": cannot open for reading");
  buffer_.resize(geometry_.pixel_count() * 8);
}

bool PssReader::next(std::span<double> out) {
  if (out.size() != geometry_.pixel_count()) {
    throw InputError("frame buffer has " + std::to_string(out.size()) + " values, expected " +
                     std::to_string(geometry_.pixel_count()));
  }
  if (position_ >= frames_) return false;
  stream_.read(reinterpret_cast<char*>(buffer_.data()),
               static_cast<std::streamsize>(buffer_.size()));
  if (!stream_) throw IoError("short read at frame " + std::to_string(position_));
  decode(buffer_.data(), out);
  ++position_;
  return true;
}

// ---------------------------------------------------------------------------
// Model container

std::string model_content_hash(const RevarModel& model) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::internal, "SHA-256 initialisation failed");
  }
  std::vector<unsigned char> buffer;
  auto feed = [&](const std::string& name, std::span<const double> values) {
    const std::uint64_t count = to_little(values.size());
    EVP_DigestUpdate(ctx.get(), name.data(), name.size());
    EVP_DigestUpdate(ctx.get(), "\0", 1);
    EVP_DigestUpdate(ctx.get(), &count, sizeof count);
    encode(values, buffer);
    EVP_DigestUpdate(ctx.get(), buffer.data(), buffer.size());
  };
  for (const auto& a : model_arrays(model)) feed(a.file, a.values);
  feed("alphas", model.alphas);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
    throw Error(ErrorKind::internal, "SHA-256 finalisation failed");
  }
  return hex(digest, length);
}

void save_model(const RevarModel& model, const fs::path& dir, const json& report) {
  model.validate();
  AtomicDirectory staged(dir);
  json j;
  j["format"] = "revar-model";
  j["format_version"] = kModelFormatVersion;
  j["n_pixels"] = model.pixel_count();
  j["n_components"] = model.components;
  j["n_lags"] = model.lags;
  j["n_filters"] = model.filter_count();
  j["alphas"] = model.alphas;
  j["alphas_bits"] = bits_array(model.alphas);
  j["cutoff_frequency"] = model.provenance.cutoff_frequency;
  j["variance_fraction"] = model.provenance.variance_fraction;
  j["inverse_floor"] = model.inverse_floor;
  j["geometry"] = geometry_to_json(model.geometry);
  j["provenance"] = {{"training_frames", model.provenance.training_frames},
                     {"alpha_rule", model.provenance.alpha_rule},
                     {"sampling_frequency_hz", model.provenance.sampling_frequency},
                     {"label", model.provenance.label}};
  j["content_hash"] = model_content_hash(model);
  if (!report.is_null()) j["fit_report"] = report;
  for (const auto& a : model_arrays(model)) write_f64(staged.staging() / a.file, a.values);
  write_text(staged.staging() / kModelJson, j.dump(2) + "\n");
  staged.commit();
}

RevarModel load_model(const fs::path& dir) {
  std::error_code ec;
  if (!fs::exists(dir, ec)) throw IoError(dir.string() + ": no such file or directory");
  const auto path = dir / kModelJson;
  if (!fs::is_directory(dir, ec) || !fs::exists(path, ec)) {
    throw FormatError(dir.string() + ": not a model container (no model.json)");
  }
  const json j = read_json(path);
  const std::string where = path.string();
  const auto version = required<int>(j, "format_version", where);
  if (version != kModelFormatVersion) {
    throw FormatError(where + ": unsupported model format version " + std::to_string(version));
  }
  RevarModel m;
  m.geometry = geometry_from_json(required<json>(j, "geometry", where));
  const auto np = required<std::size_t>(j, "n_pixels", where);
  m.components = required<std::size_t>(j, "n_components", where);
  m.lags = required<std::size_t>(j, "n_lags", where);
  const auto nm = required<std::size_t>(j, "n_filters", where);
  if (np != m.geometry.pixel_count()) {
    throw FormatError(where + ": n_pixels disagrees with the geometry mask");
  }
  if (m.components == 0 || m.components > np) throw FormatError(where + ": bad n_components");
  m.alphas = j.contains("alphas_bits") ? from_bits_array(j["alphas_bits"], "alphas_bits")
                                       : required<std::vector<double>>(j, "alphas", where);
  if (m.alphas.size() != nm) throw FormatError(where + ": alphas length disagrees with n_filters");
  m.inverse_floor = j.value("inverse_floor", 1e-12);
  m.provenance.cutoff_frequency = j.value("cutoff_frequency", 0.0);
  m.provenance.variance_fraction = j.value("variance_fraction", 0.99);
  if (j.contains("provenance") && j["provenance"].is_object()) {
    const auto& p = j["provenance"];
    m.provenance.training_frames = p.value("training_frames", std::size_t{0});
    m.provenance.alpha_rule = p.value("alpha_rule", std::string("linear"));
    m.provenance.sampling_frequency = p.value("sampling_frequency_hz", 1.0);
    m.provenance.label = p.value("label", std::string());
  }

  const auto npi = static_cast<Eigen::Index>(np);
  const auto nci = static_cast<Eigen::Index>(m.components);
  auto vec = [&](const char* file) {
    const auto v = read_f64(dir / file, np);
    return Vector(Eigen::Map<const Vector>(v.data(), npi));
  };
  auto square = [&](const char* file) {
    return matrix_from_row_major(read_f64(dir / file, np * np), npi, npi);
  };
  auto stacked = [&](const char* file, std::size_t count) {
    const auto v = read_f64(dir / file, count * m.components * m.components);
    std::vector<Matrix> out;
    for (std::size_t k = 0; k < count; ++k) {
      out.push_back(matrix_from_row_major(v, nci, nci, k * m.components * m.components));
    }
    return out;
  };
  m.mean = vec("mu_X.f64");
  m.scale = vec("sigma_X.f64");
  m.basis = square("E.f64");
  m.variances = vec("lambda.f64");
  m.lag_weights = stacked("A_X.f64", m.lags);
  m.filter_weights = stacked("A_Y.f64", nm);
  m.residual_mean = vec("mu_xi.f64");
  m.residual_basis = square("U.f64");
  m.residual_variances = vec("sigma_xi.f64");

  const auto expected = required<std::string>(j, "content_hash", where);
  const auto actual = model_content_hash(m);
  if (expected != actual) {
    throw FormatError(where + ": content hash mismatch (stored " + expected + ", computed " +
                      actual + ")");
  }
  try {
    m.validate_sampled(16, 0x5eed);
  } catch (const InputError& e) {
    throw FormatError(dir.string() + ": model fails validation: " + e.what());
  }
  return m;
}

ContainerKind detect_container(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError(path.string() + ": no such file or directory");
  if (!fs::is_directory(path, ec)) return ContainerKind::unknown;
  if (fs::exists(path / kModelJson, ec)) return ContainerKind::model;
  if (fs::exists(path / kPssMeta, ec)) return ContainerKind::pss;
  return ContainerKind::unknown;
}

// ---------------------------------------------------------------------------
// Stream checkpoints. Doubles are stored as IEEE-754 bit patterns so that a
// resumed stream is bit-identical.

json checkpoint_to_json(const SynthesisStream::Checkpoint& c) {
  json j;
  j["format"] = "revar-checkpoint";
  j["version"] = 1;
  j["generator"] = std::string(NoiseSource::kGeneratorName);
  j["position"] = c.position;
  j["noise"] = {{"seed", c.noise.seed},
                {"draws", c.noise.draws},
                {"engine", c.noise.engine},
                {"has_spare", c.noise.has_spare},
                {"spare_bits", bits_of(c.noise.spare)}};
  j["options"] = {{"filter_init", to_string(c.options.filter_init)},
                  {"initial_vectors", to_string(c.options.initial)},
                  {"burn_in", c.options.burn_in}};
  j["history"] = json::array();
  for (const auto& h : c.history) j["history"].push_back(bits_array(h));
  j["filters"] = json::array();
  for (const auto& f : c.filters) j["filters"].push_back(bits_array(f));
  return j;
}

SynthesisStream::Checkpoint checkpoint_from_json(const json& j) {
  const std::string where = "checkpoint";
  if (required<std::string>(j, "format", where) != "revar-checkpoint") {
    throw FormatError("not a synthesis checkpoint");
  }
  if (required<int>(j, "version", where) != 1) throw FormatError("unsupported checkpoint version");
  if (required<std::string>(j, "generator", where) != NoiseSource::kGeneratorName) {
    throw FormatError("checkpoint was written by a different noise generator");
  }
  SynthesisStream::Checkpoint c;
  c.position = required<std::uint64_t>(j, "position", where);
  const auto noise = required<json>(j, "noise", where);
  c.noise.seed = required<std::uint64_t>(noise, "seed", where);
  c.noise.draws = required<std::uint64_t>(noise, "draws", where);
  c.noise.engine = required<std::string>(noise, "engine", where);
  c.noise.has_spare = required<bool>(noise, "has_spare", where);
  c.noise.spare = from_bits(required<std::uint64_t>(noise, "spare_bits", where));
  const auto options = required<json>(j, "options", where);
  try {
    c.options.filter_init =
        filter_init_from_string(required<std::string>(options, "filter_init", where));
    c.options.initial =
        initial_vectors_from_string(required<std::string>(options, "initial_vectors", where));
  } catch (const InputError& e) {
    throw FormatError(e.what());
  }
  c.options.burn_in = required<std::size_t>(options, "burn_in", where);
  for (const auto& h : required<json>(j, "history", where)) {
    c.history.push_back(from_bits_array(h, "checkpoint history"));
  }
  for (const auto& f : required<json>(j, "filters", where)) {
    c.filters.push_back(from_bits_array(f, "checkpoint filters"));
  }
  return c;
}

}  // namespace revar
