#include "simrecon/illumination.hpp"

#include <cmath>
#include <numbers>

#include "simrecon/error.hpp"

namespace simrecon {

using std::numbers::pi;

double IlluminationParams::kx() const noexcept { return k0 * std::cos(theta); }
double IlluminationParams::ky() const noexcept { return k0 * std::sin(theta); }

IlluminationParams default_illumination(const OpticalConfig &config) {
  IlluminationParams p;
  p.k0 = 0.8 * cutoff_frequency(config);
  return p;
}

void validate(const IlluminationParams &p) {
  if (!(p.i0 > 0.0)) throw Error(ErrorKind::usage, "illumination i0 must be positive");
  if (!(p.m >= 0.0 && p.m <= 1.0)) throw Error(ErrorKind::usage, "modulation m must lie in [0, 1]");
  if (!(p.k0 >= 0.0)) throw Error(ErrorKind::usage, "pattern frequency k0 must be non-negative");
}

IlluminationParams canonical_orientation(const IlluminationParams &p) {
  IlluminationParams out = p;
  const double turns = std::floor(p.theta / pi);
  out.theta = p.theta - turns * pi;
  if (out.theta >= pi) out.theta -= pi;
  const bool flipped = static_cast<long long>(turns) % 2 != 0;
  double phi = flipped ? -p.phi : p.phi;
  phi = std::fmod(phi, 2.0 * pi);
  if (phi < 0.0) phi += 2.0 * pi;
  out.phi = phi;
  return out;
}

JitterSpec JitterSpec::defaults() { return {0.03, 0.03, 0.25}; }

void validate(const JitterSpec &spec) {
  if (!(spec.dk_rel >= 0.0) || !(spec.dtheta >= 0.0) || !(spec.dphi >= 0.0)) {
    throw Error(ErrorKind::usage, "jitter bounds must be non-negative");
  }
}

Image2D pattern(const OpticalConfig &config, const IlluminationParams &p) {
  const double ps = config.pixel_size();
  const double kx = p.kx();
  const double ky = p.ky();
  Image2D out(config.width(), config.height(), ps);
  for (int r = 0; r < config.height(); ++r) {
    const double y = r * ps;
    for (int c = 0; c < config.width(); ++c) {
      const double x = c * ps;
      out(r, c) = p.i0 * (1.0 - 0.5 * p.m * std::cos(2.0 * pi * (kx * x + ky * y) + p.phi));
    }
  }
  return out;
}

std::vector<double> ideal_phase_set(int n_phases) {
  if (n_phases < 1) throw Error(ErrorKind::usage, "need at least one phase");
  std::vector<double> out(static_cast<std::size_t>(n_phases));
  for (int j = 0; j < n_phases; ++j) out[j] = j * 2.0 * pi / n_phases;
  return out;
}

std::vector<double> ideal_angle_set(int n_angles, double offset) {
  if (n_angles < 1) throw Error(ErrorKind::usage, "need at least one angle");
  std::vector<double> out(static_cast<std::size_t>(n_angles));
  for (int j = 0; j < n_angles; ++j) out[j] = offset + j * pi / n_angles;
  return out;
}

IlluminationParams jitter(const IlluminationParams &p, const JitterSpec &spec, Rng &rng) {
  validate(spec);
  const double u1 = uniform_symmetric(rng);
  const double u2 = uniform_symmetric(rng);
  const double u3 = uniform_symmetric(rng);
  IlluminationParams out = p;
  out.k0 = p.k0 * (1.0 + u1 * spec.dk_rel);
  out.theta = p.theta + u2 * spec.dtheta;
  out.phi = p.phi + u3 * spec.dphi;
  return out;
}

std::vector<PatternFrame> pattern_set(const OpticalConfig &config, const IlluminationParams &base,
                                      int n_angles, int n_phases, const JitterSpec &spec,
                                      Rng &rng) {
  validate(base);
  validate(spec);
  const auto angles = ideal_angle_set(n_angles, base.theta);
  const auto phases = ideal_phase_set(n_phases);
  const JitterSpec geometry{spec.dk_rel, spec.dtheta, 0.0};
  const JitterSpec phase_only{0.0, 0.0, spec.dphi};
  const double kd = cutoff_frequency(config);

  std::vector<PatternFrame> frames;
  frames.reserve(static_cast<std::size_t>(n_angles * n_phases));
  for (int a = 0; a < n_angles; ++a) {
    IlluminationParams angle_params = base;
    angle_params.theta = angles[a];
    angle_params = jitter(angle_params, geometry, rng);
    if (!(angle_params.k0 < kd)) {
      throw Error(ErrorKind::usage, "pattern frequency k0 must stay below the cutoff frequency");
    }
    for (int j = 0; j < n_phases; ++j) {
      IlluminationParams p = angle_params;
      p.phi = base.phi + phases[j];
      p = jitter(p, phase_only, rng);
      frames.push_back({p, pattern(config, p), a, j});
    }
  }
  return frames;
}

}  // namespace simrecon
