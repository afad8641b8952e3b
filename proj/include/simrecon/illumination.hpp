#pragma once

#include <vector>

#include "simrecon/image.hpp"
#include "simrecon/optics.hpp"
#include "simrecon/rng.hpp"

namespace simrecon {

/// Parameters of one sinusoidal excitation pattern
///   I(x, y) = i0 * [1 - (m/2) cos(2 pi (kx x + ky y) + phi)],
/// with (kx, ky) = k0 (cos theta, sin theta).
struct IlluminationParams {
  double i0 = 1.0;     // mean intensity
  double m = 0.8;      // modulation, [0, 1]
  double k0 = 0.0;     // cycles/um
  double theta = 0.0;  // radians, from the +x axis
  double phi = 0.0;    // radians

  double kx() const noexcept;
  double ky() const noexcept;

  friend bool operator==(const IlluminationParams &, const IlluminationParams &) = default;
};

/// i0 = 1, m = 0.8, k0 = 0.8 k_d.
IlluminationParams default_illumination(const OpticalConfig &config);

/// Throws if i0 <= 0, m outside [0, 1] or k0 < 0.
void validate(const IlluminationParams &p);

/// Same stripe pattern expressed with theta in [0, pi) and phi in [0, 2 pi).
/// Flipping k to -k negates the phase.
IlluminationParams canonical_orientation(const IlluminationParams &p);

/// Bounds for the random parameter errors; each draw is uniform on the
/// symmetric interval [-bound, bound].
struct JitterSpec {
  double dk_rel = 0.0;  // relative error on k0
  double dtheta = 0.0;  // radians
  double dphi = 0.0;    // radians

  /// dk_rel 0.03, dtheta 0.03 rad, dphi 0.25 rad.
  static JitterSpec defaults();

  friend bool operator==(const JitterSpec &, const JitterSpec &) = default;
};

void validate(const JitterSpec &spec);

Image2D pattern(const OpticalConfig &config, const IlluminationParams &p);

/// {j * 2 pi / n}.
std::vector<double> ideal_phase_set(int n_phases);

/// {offset + j * pi / n}; stripe orientations are pi-periodic.
std::vector<double> ideal_angle_set(int n_angles, double offset);

/// k0 <- k0 (1 + u1 dk_rel), theta <- theta + u2 dtheta, phi <- phi + u3 dphi.
/// Always consumes exactly three uniform draws from rng.
IlluminationParams jitter(const IlluminationParams &p, const JitterSpec &spec, Rng &rng);

struct PatternFrame {
  IlluminationParams params;
  Image2D image;
  int angle_index = 0;
  int phase_index = 0;
};

/// n_angles * n_phases patterns, angle-major. Orientations start at
/// base.theta, phases at base.phi. The k0 and theta errors are drawn once per
/// angle and shared by that angle's phase steps; the phase error is drawn
/// per frame.
std::vector<PatternFrame> pattern_set(const OpticalConfig &config, const IlluminationParams &base,
                                      int n_angles, int n_phases, const JitterSpec &spec,
                                      Rng &rng);

}  // namespace simrecon
