#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace simrecon {

using Complex = std::complex<double>;

/// Single-channel floating-point raster, row-major, with the sample-plane
/// pixel pitch in micrometers. Physical coordinates are x = col * pixel_size,
/// y = row * pixel_size.
class Image2D {
 public:
  Image2D() = default;
  Image2D(int width, int height, double pixel_size, double fill = 0.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double pixel_size() const noexcept { return pixel_size_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double &operator()(int row, int col) { return data_[index(row, col)]; }
  double operator()(int row, int col) const { return data_[index(row, col)]; }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }

  void set_pixel_size(double pixel_size) noexcept { pixel_size_ = pixel_size; }

  friend bool operator==(const Image2D &, const Image2D &) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  double pixel_size_ = 1.0;
  std::vector<double> data_;
};

/// Complex raster. Used both for complex spatial fields and for spectra;
/// spectra are always stored DC-centered (DC at row height/2, col width/2).
class ComplexGrid {
 public:
  ComplexGrid() = default;
  ComplexGrid(int width, int height, Complex fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  Complex &operator()(int row, int col) { return data_[index(row, col)]; }
  const Complex &operator()(int row, int col) const { return data_[index(row, col)]; }

  std::span<Complex> values() noexcept { return data_; }
  std::span<const Complex> values() const noexcept { return data_; }

  ComplexGrid &operator+=(const ComplexGrid &other);
  ComplexGrid &operator-=(const ComplexGrid &other);
  ComplexGrid &operator*=(Complex s);

  friend bool operator==(const ComplexGrid &, const ComplexGrid &) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Complex> data_;
};

/// Throws DimensionError when the two rasters differ in width or height.
void require_same_shape(int w0, int h0, int w1, int h1);
void require_same_shape(const Image2D &a, const Image2D &b);

double mean(const Image2D &img);
double stddev(const Image2D &img);  // population standard deviation
double min_value(const Image2D &img);
double max_value(const Image2D &img);

/// Affine rescale to [0,1]. An image whose dynamic range is negligible
/// (below 1e-9 of its largest magnitude) is returned unchanged.
Image2D rescale_unit(const Image2D &img);

Image2D real_part(const ComplexGrid &grid, double pixel_size);
ComplexGrid to_complex(const Image2D &img);

/// Root-mean-square of the pixel-wise difference.
double rms_difference(const Image2D &a, const Image2D &b);
double rms_difference(const ComplexGrid &a, const ComplexGrid &b);
double rms(const ComplexGrid &a);

}  // namespace simrecon
