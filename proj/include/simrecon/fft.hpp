#pragma once

#include "simrecon/image.hpp"

namespace simrecon {

/// Forward 2D DFT (unnormalized, e^{-2 pi i k.x}) of a spatial field; the
/// returned spectrum is DC-centered.
ComplexGrid fft2(const ComplexGrid &spatial);
ComplexGrid fft2(const Image2D &spatial);

/// Inverse of fft2: takes a DC-centered spectrum, returns the spatial field
/// (normalized by 1/N).
ComplexGrid ifft2(const ComplexGrid &spectrum);

/// Swap quadrants so that DC moves from index 0 to the center. For even
/// dimensions this is its own inverse.
ComplexGrid fftshift(const ComplexGrid &grid);
Image2D fftshift(const Image2D &img);

/// Spatial-frequency coordinates of a DC-centered grid, in cycles per
/// micrometer.
struct FrequencyGrid {
  int width;
  int height;
  double pixel_size;

  double dkx() const noexcept { return 1.0 / (width * pixel_size); }
  double dky() const noexcept { return 1.0 / (height * pixel_size); }
  double kx(int col) const noexcept { return (col - width / 2) * dkx(); }
  double ky(int row) const noexcept { return (row - height / 2) * dky(); }
  double nyquist() const noexcept { return 0.5 / pixel_size; }
};

}  // namespace simrecon
