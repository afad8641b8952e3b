#include "simrecon/optics.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "simrecon/error.hpp"

namespace simrecon {

OpticalConfig::OpticalConfig(double na, double wavelength_em, double pixel_size, int width,
                             int height)
    : na_(na), wavelength_em_(wavelength_em), pixel_size_(pixel_size), width_(width),
      height_(height) {
  if (!(na > 0.0) || !(wavelength_em > 0.0) || !(pixel_size > 0.0)) {
    throw Error(ErrorKind::usage, "optical parameters must be positive");
  }
  if (width < 16 || height < 16 || width % 2 != 0 || height % 2 != 0) {
    std::ostringstream msg;
    msg << "grid must be even and at least 16x16, got " << width << "x" << height;
    throw Error(ErrorKind::usage, msg.str());
  }
  const double kd = 2.0 * na / wavelength_em;
  const double nyquist = 0.5 / pixel_size;
  if (!(kd < nyquist)) {
    std::ostringstream msg;
    msg << "cutoff frequency " << kd << " cycles/um is not below the grid Nyquist frequency "
        << nyquist << " cycles/um; reduce the pixel size";
    throw Error(ErrorKind::usage, msg.str());
  }
}

OpticalConfig OpticalConfig::defaults(int width, int height) {
  return {1.2, 0.510, 0.05, width, height};
}

OpticalConfig OpticalConfig::with_grid(int width, int height) const {
  return {na_, wavelength_em_, pixel_size_, width, height};
}

double cutoff_frequency(const OpticalConfig &config) noexcept {
  return 2.0 * config.na() / config.wavelength_em();
}

double otf_profile(double rho) noexcept {
  rho = std::abs(rho);
  if (rho >= 1.0) return 0.0;
  return (2.0 / std::numbers::pi) * (std::acos(rho) - rho * std::sqrt(1.0 - rho * rho));
}

TransferFunction::TransferFunction(OpticalConfig config, ComplexGrid grid, bool analytic)
    : config_(config), grid_(std::move(grid)), analytic_(analytic) {
  require_same_shape(config_.width(), config_.height(), grid_.width(), grid_.height());
}

double TransferFunction::at(double kx, double ky) const {
  if (analytic_) return otf_profile(std::hypot(kx, ky) / cutoff_frequency(config_));
  const FrequencyGrid fg = config_.frequency_grid();
  const double c = kx / fg.dkx() + fg.width / 2;
  const double r = ky / fg.dky() + fg.height / 2;
  const int c0 = static_cast<int>(std::floor(c));
  const int r0 = static_cast<int>(std::floor(r));
  const double fc = c - c0;
  const double fr = r - r0;
  auto sample = [&](int row, int col) {
    if (row < 0 || col < 0 || row >= fg.height || col >= fg.width) return 0.0;
    return grid_(row, col).real();
  };
  return (1 - fr) * ((1 - fc) * sample(r0, c0) + fc * sample(r0, c0 + 1)) +
         fr * ((1 - fc) * sample(r0 + 1, c0) + fc * sample(r0 + 1, c0 + 1));
}

ComplexGrid TransferFunction::shifted(double shift_x, double shift_y) const {
  const FrequencyGrid fg = config_.frequency_grid();
  ComplexGrid out(fg.width, fg.height);
  for (int r = 0; r < fg.height; ++r) {
    for (int c = 0; c < fg.width; ++c) out(r, c) = at(fg.kx(c) + shift_x, fg.ky(r) + shift_y);
  }
  return out;
}

TransferFunction ideal_otf(const OpticalConfig &config) {
  const FrequencyGrid fg = config.frequency_grid();
  const double kd = cutoff_frequency(config);
  ComplexGrid grid(fg.width, fg.height);
  for (int r = 0; r < fg.height; ++r) {
    for (int c = 0; c < fg.width; ++c) grid(r, c) = otf_profile(std::hypot(fg.kx(c), fg.ky(r)) / kd);
  }
  return {config, std::move(grid), true};
}

Image2D psf_from_otf(const TransferFunction &otf) {
  const auto &config = otf.config();
  Image2D psf = fftshift(real_part(ifft2(otf.grid()), config.pixel_size()));
  const auto px = psf.pixels();
  const double total = std::accumulate(px.begin(), px.end(), 0.0);
  if (total != 0.0) {
    for (double &v : psf.pixels()) v /= total;
  }
  return psf;
}

}  // namespace simrecon
