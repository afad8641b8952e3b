#pragma once

#include <cstdint>
#include <vector>

#include "simrecon/illumination.hpp"
#include "simrecon/image.hpp"
#include "simrecon/optics.hpp"
#include "simrecon/rng.hpp"

namespace simrecon {

/// Additive Gaussian noise with standard deviation eta * sigma, where sigma
/// is the standard deviation of the clean blurred frame.
struct NoiseSpec {
  double eta = 0.0;

  friend bool operator==(const NoiseSpec &, const NoiseSpec &) = default;
};

void validate(const NoiseSpec &noise);

/// Raw SIM acquisition: n_angles * n_phases frames in angle-major order,
/// frame f = angle (f / n_phases), phase step (f % n_phases).
struct RawSimStack {
  std::vector<Image2D> frames;
  std::vector<IlluminationParams> params;  // per frame; empty when unknown
  OpticalConfig config;
  NoiseSpec noise;
  std::uint64_t seed = 0;
  int n_angles = 3;
  int n_phases = 3;

  int frame_count() const noexcept { return static_cast<int>(frames.size()); }
  bool has_params() const noexcept { return params.size() == frames.size(); }
  int angle_of(int frame) const noexcept { return frame / n_phases; }
  int phase_of(int frame) const noexcept { return frame % n_phases; }

  /// Frame count, frame sizes and parameter count are mutually consistent.
  void check_consistency() const;
};

/// Noiseless image formation: circular convolution with the PSF, done as a
/// product with the OTF in the frequency domain.
Image2D blur(const Image2D &field, const TransferFunction &otf);

/// D = (S * I) convolved with the PSF, plus N(0, (eta sigma)^2) per pixel.
Image2D simulate_frame(const Image2D &sample, const Image2D &pattern, const TransferFunction &otf,
                       const NoiseSpec &noise, Rng &rng);

/// Full raw stack. Pattern jitter and noise use separate streams derived
/// from seed, so the same seed gives the same patterns at every eta.
RawSimStack simulate_stack(const Image2D &sample, const OpticalConfig &config,
                           const IlluminationParams &base, int n_angles, int n_phases,
                           const JitterSpec &jitter, const NoiseSpec &noise, std::uint64_t seed);

/// Pixel-wise mean of all frames.
Image2D widefield(const RawSimStack &stack);

}  // namespace simrecon
