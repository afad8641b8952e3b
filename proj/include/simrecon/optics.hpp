#pragma once

#include "simrecon/fft.hpp"
#include "simrecon/image.hpp"

namespace simrecon {

/// Microscope parameters plus the simulation grid. Construction validates
/// that the incoherent cutoff 2 NA / lambda lies strictly below the grid
/// Nyquist frequency.
class OpticalConfig {
 public:
  /// na: numerical aperture; wavelength_em and pixel_size in micrometers;
  /// width and height in pixels (even, >= 16).
  OpticalConfig(double na, double wavelength_em, double pixel_size, int width, int height);

  /// NA 1.2, 510 nm emission, 50 nm pixels.
  static OpticalConfig defaults(int width = 512, int height = 512);

  /// Same optics on a different grid.
  OpticalConfig with_grid(int width, int height) const;

  double na() const noexcept { return na_; }
  double wavelength_em() const noexcept { return wavelength_em_; }
  double pixel_size() const noexcept { return pixel_size_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  FrequencyGrid frequency_grid() const noexcept { return {width_, height_, pixel_size_}; }

  friend bool operator==(const OpticalConfig &, const OpticalConfig &) = default;

 private:
  double na_;
  double wavelength_em_;
  double pixel_size_;
  int width_;
  int height_;
};

/// Incoherent diffraction cutoff k_d = 2 NA / lambda_em, cycles per micrometer.
double cutoff_frequency(const OpticalConfig &config) noexcept;

/// Diffraction-limited incoherent OTF profile as a function of rho = |k| / k_d.
double otf_profile(double rho) noexcept;

/// DC-centered transfer function on the config grid. Values are real and
/// stored in a complex raster.
class TransferFunction {
 public:
  TransferFunction(OpticalConfig config, ComplexGrid grid, bool analytic);

  const OpticalConfig &config() const noexcept { return config_; }
  const ComplexGrid &grid() const noexcept { return grid_; }

  /// Value at an arbitrary frequency (cycles/um). Exact for an ideal OTF,
  /// bilinear on the grid otherwise (zero outside).
  double at(double kx, double ky) const;

  /// Grid sampled at k + (shift_x, shift_y).
  ComplexGrid shifted(double shift_x, double shift_y) const;

 private:
  OpticalConfig config_;
  ComplexGrid grid_;
  bool analytic_;
};

TransferFunction ideal_otf(const OpticalConfig &config);

/// Centered PSF: real part of the inverse transform, normalized to unit sum.
Image2D psf_from_otf(const TransferFunction &otf);

}  // namespace simrecon
