#include "scenes.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "simrecon/fft.hpp"

namespace testing_support {

using simrecon::Complex;
using simrecon::ComplexGrid;
using simrecon::Image2D;
using std::numbers::pi;

Image2D natural_scene(int size, double pixel_size, std::uint64_t seed, double slope) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;

  ComplexGrid spectrum(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double fr = r - size / 2;
      const double fc = c - size / 2;
      const double f = std::hypot(fr, fc);
      if (f == 0.0) continue;
      spectrum(r, c) = Complex(gauss(rng), gauss(rng)) / std::pow(f, slope);
    }
  }
  Image2D img = simrecon::real_part(simrecon::ifft2(spectrum), pixel_size);
  img = simrecon::rescale_unit(img);
  for (double &v : img.pixels()) v *= 0.6;

  const int shapes = 12 + static_cast<int>(unit(rng) * 8);
  for (int s = 0; s < shapes; ++s) {
    const double cx = unit(rng) * size;
    const double cy = unit(rng) * size;
    const double extent = (0.03 + 0.12 * unit(rng)) * size;
    const double value = 0.2 + 0.8 * unit(rng);
    const int kind = static_cast<int>(unit(rng) * 3);
    const double angle = unit(rng) * pi;
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const double dx = c - cx;
        const double dy = r - cy;
        bool inside = false;
        if (kind == 0) {
          inside = std::hypot(dx, dy) < extent;
        } else if (kind == 1) {
          inside = std::abs(dx) < extent && std::abs(dy) < 0.6 * extent;
        } else {
          const double along = dx * std::cos(angle) + dy * std::sin(angle);
          const double across = -dx * std::sin(angle) + dy * std::cos(angle);
          inside = std::abs(along) < 2 * extent && std::abs(across) < 1.0;
        }
        if (inside) img(r, c) = 0.5 * img(r, c) + 0.5 * value;
      }
    }
  }
  return simrecon::rescale_unit(img);
}

Image2D stripes(int size, double pixel_size, double frequency, double theta) {
  Image2D img(size, size, pixel_size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double u = (c * std::cos(theta) + r * std::sin(theta)) * pixel_size;
      img(r, c) = 0.5 + 0.5 * std::cos(2 * pi * frequency * u);
    }
  }
  return img;
}

}  // namespace testing_support

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "simrecon/io.hpp"

namespace testing_support {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string &tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("simrecon_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_source_images(const fs::path &dir, int count, int size, std::uint64_t seed) {
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%02d.png", i);
    simrecon::write_image(natural_scene(size, 0.05, seed + static_cast<std::uint64_t>(i)),
                          dir / name);
  }
}

std::string file_bytes(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace testing_support
