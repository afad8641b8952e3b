#pragma once

#include <stdexcept>
#include <string>

namespace simrecon {

/// Error categories, mapped one-to-one onto CLI exit codes.
enum class ErrorKind {
  usage = 2,           // bad arguments or configuration
  data = 3,            // unreadable, inconsistent or degenerate input
  reconstruction = 4,  // the reconstruction pipeline could not proceed
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

/// Raised when two rasters disagree in size; names the offending axis.
class DimensionError : public Error {
 public:
  DimensionError(const std::string &axis, int expected, int actual)
      : Error(ErrorKind::data, "dimension mismatch on " + axis + " axis: expected " +
                                   std::to_string(expected) + ", got " + std::to_string(actual)),
        axis_(axis) {}

  const std::string &axis() const noexcept { return axis_; }

 private:
  std::string axis_;
};

/// The illumination pattern could not be located in the raw data.
class PatternNotFound : public Error {
 public:
  PatternNotFound(int angle, double peak_snr)
      : Error(ErrorKind::reconstruction,
              "pattern not found for angle " + std::to_string(angle) +
                  " (peak SNR " + std::to_string(peak_snr) + ")"),
        angle_(angle), peak_snr_(peak_snr) {}

  int angle() const noexcept { return angle_; }
  double peak_snr() const noexcept { return peak_snr_; }

 private:
  int angle_;
  double peak_snr_;
};

}  // namespace simrecon
