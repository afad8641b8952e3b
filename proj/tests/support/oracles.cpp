#include "oracles.hpp"

#include <cmath>

namespace testing_support {

using simrecon::Image2D;

Image2D circular_convolve(const Image2D &img, const Image2D &psf) {
  const int w = img.width();
  const int h = img.height();
  Image2D out(w, h, img.pixel_size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int pr = ((r - y + h / 2) % h + h) % h;
          const int pc = ((c - x + w / 2) % w + w) % w;
          acc += img(y, x) * psf(pr, pc);
        }
      }
      out(r, c) = acc;
    }
  }
  return out;
}

double ssim_oracle(const Image2D &a, const Image2D &b) {
  double weights[11][11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      weights[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      total += weights[i][j];
    }
  }
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  double sum = 0.0;
  int count = 0;
  for (int r = 0; r + 11 <= a.height(); ++r) {
    for (int c = 0; c + 11 <= a.width(); ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double wgt = weights[i][j] / total;
          mx += wgt * a(r + i, c + j);
          my += wgt * b(r + i, c + j);
        }
      }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double wgt = weights[i][j] / total;
          const double dx = a(r + i, c + j) - mx;
          const double dy = b(r + i, c + j) - my;
          vx += wgt * dx * dx;
          vy += wgt * dy * dy;
          cxy += wgt * dx * dy;
        }
      }
      sum += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return sum / count;
}

}  // namespace testing_support
