#include "simrecon/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simrecon/error.hpp"

namespace simrecon {

Image2D::Image2D(int width, int height, double pixel_size, double fill)
    : width_(width), height_(height), pixel_size_(pixel_size) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::data, "image dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

ComplexGrid::ComplexGrid(int width, int height, Complex fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::data, "grid dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

ComplexGrid &ComplexGrid::operator+=(const ComplexGrid &other) {
  require_same_shape(width_, height_, other.width_, other.height_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ComplexGrid &ComplexGrid::operator-=(const ComplexGrid &other) {
  require_same_shape(width_, height_, other.width_, other.height_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

ComplexGrid &ComplexGrid::operator*=(Complex s) {
  for (auto &v : data_) v *= s;
  return *this;
}

void require_same_shape(int w0, int h0, int w1, int h1) {
  if (w0 != w1) throw DimensionError("width", w0, w1);
  if (h0 != h1) throw DimensionError("height", h0, h1);
}

void require_same_shape(const Image2D &a, const Image2D &b) {
  require_same_shape(a.width(), a.height(), b.width(), b.height());
}

double mean(const Image2D &img) {
  const auto px = img.pixels();
  if (px.empty()) return 0.0;
  return std::accumulate(px.begin(), px.end(), 0.0) / static_cast<double>(px.size());
}

double stddev(const Image2D &img) {
  const auto px = img.pixels();
  if (px.empty()) return 0.0;
  const double mu = mean(img);
  double acc = 0.0;
  for (double v : px) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(px.size()));
}

double min_value(const Image2D &img) {
  const auto px = img.pixels();
  return *std::min_element(px.begin(), px.end());
}

double max_value(const Image2D &img) {
  const auto px = img.pixels();
  return *std::max_element(px.begin(), px.end());
}

Image2D rescale_unit(const Image2D &img) {
  const double lo = min_value(img);
  const double hi = max_value(img);
  const double scale = std::max(std::abs(lo), std::abs(hi));
  if (!(hi - lo > 1e-9 * scale)) return img;
  Image2D out = img;
  const double inv = 1.0 / (hi - lo);
  for (double &v : out.pixels()) v = (v - lo) * inv;
  return out;
}

Image2D real_part(const ComplexGrid &grid, double pixel_size) {
  Image2D out(grid.width(), grid.height(), pixel_size);
  auto dst = out.pixels();
  auto src = grid.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i].real();
  return out;
}

ComplexGrid to_complex(const Image2D &img) {
  ComplexGrid out(img.width(), img.height());
  auto dst = out.values();
  auto src = img.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  return out;
}

double rms_difference(const Image2D &a, const Image2D &b) {
  require_same_shape(a, b);
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return std::sqrt(acc / static_cast<double>(pa.size()));
}

double rms_difference(const ComplexGrid &a, const ComplexGrid &b) {
  require_same_shape(a.width(), a.height(), b.width(), b.height());
  const auto pa = a.values();
  const auto pb = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += std::norm(pa[i] - pb[i]);
  return std::sqrt(acc / static_cast<double>(pa.size()));
}

double rms(const ComplexGrid &a) {
  double acc = 0.0;
  for (const auto &v : a.values()) acc += std::norm(v);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace simrecon
