#pragma once

#include <stdexcept>
#include <string>

namespace revar {

/// Broad failure classes. The C API and the CLI map these onto error and
/// exit codes, so keep the list short.
enum class ErrorKind {
  input,       // malformed or inconsistent arguments / data
  format,      // on-disk container is not what it claims to be
  io,          // filesystem failure
  numerical,   // degenerate numerics (flat spectrum, non-finite values)
  stability,   // recursive synthesis diverged
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class StabilityError : public Error {
 public:
  StabilityError(const std::string& what, std::size_t step)
      : Error(ErrorKind::stability, what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Raised by normalize() when a pixel has (near) zero temporal variance.
class DegeneratePixelError : public InputError {
 public:
  DegeneratePixelError(std::size_t pixel, double stddev)
      : InputError("pixel " + std::to_string(pixel) +
                   " has degenerate standard deviation " + std::to_string(stddev)),
        pixel_(pixel) {}

  std::size_t pixel() const noexcept { return pixel_; }

 private:
  std::size_t pixel_;
};

}  // namespace revar
