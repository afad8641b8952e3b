#include "simrecon/forward_model.hpp"

#include <algorithm>
#include <cmath>

#include "simrecon/error.hpp"
#include "simrecon/fft.hpp"

namespace simrecon {

void validate(const NoiseSpec &noise) {
  if (!(noise.eta >= 0.0)) throw Error(ErrorKind::usage, "noise multiplier eta must be >= 0");
}

void RawSimStack::check_consistency() const {
  if (frames.empty()) throw Error(ErrorKind::data, "stack has no frames");
  if (n_angles < 1 || n_phases < 1 || n_angles * n_phases != frame_count()) {
    throw Error(ErrorKind::data, "stack frame count " + std::to_string(frame_count()) +
                                     " does not match " + std::to_string(n_angles) + " angles x " +
                                     std::to_string(n_phases) + " phases");
  }
  for (const auto &f : frames) {
    require_same_shape(config.width(), config.height(), f.width(), f.height());
  }
  if (!params.empty() && params.size() != frames.size()) {
    throw Error(ErrorKind::data, "stack carries parameters for " + std::to_string(params.size()) +
                                     " of " + std::to_string(frames.size()) + " frames");
  }
}

Image2D blur(const Image2D &field, const TransferFunction &otf) {
  const auto &grid = otf.grid();
  require_same_shape(grid.width(), grid.height(), field.width(), field.height());
  ComplexGrid spectrum = fft2(field);
  auto s = spectrum.values();
  auto h = grid.values();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= h[i];
  const ComplexGrid spatial = ifft2(spectrum);

  Image2D out = real_part(spatial, field.pixel_size());
  double imag_acc = 0.0;
  for (const auto &v : spatial.values()) imag_acc += v.imag() * v.imag();
  const double imag_rms = std::sqrt(imag_acc / static_cast<double>(spatial.size()));
  const double scale = std::max(1.0, std::abs(mean(out)) + stddev(out));
  if (imag_rms > 1e-9 * scale) {
    throw Error(ErrorKind::data, "blurred frame has a non-negligible imaginary part (RMS " +
                                     std::to_string(imag_rms) + "); the OTF is not Hermitian");
  }
  return out;
}

Image2D simulate_frame(const Image2D &sample, const Image2D &pattern, const TransferFunction &otf,
                       const NoiseSpec &noise, Rng &rng) {
  validate(noise);
  require_same_shape(sample, pattern);
  Image2D excited = sample;
  auto ex = excited.pixels();
  auto pat = pattern.pixels();
  for (std::size_t i = 0; i < ex.size(); ++i) ex[i] *= pat[i];

  Image2D frame = blur(excited, otf);
  if (noise.eta > 0.0) {
    const double sigma = noise.eta * stddev(frame);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double &v : frame.pixels()) v += sigma * gauss(rng);
  }
  return frame;
}

RawSimStack simulate_stack(const Image2D &sample, const OpticalConfig &config,
                           const IlluminationParams &base, int n_angles, int n_phases,
                           const JitterSpec &jitter, const NoiseSpec &noise, std::uint64_t seed) {
  validate(noise);
  require_same_shape(config.width(), config.height(), sample.width(), sample.height());
  const TransferFunction otf = ideal_otf(config);
  Rng pattern_rng(derive_seed(seed, 1));
  Rng noise_rng(derive_seed(seed, 2));
  const auto patterns = pattern_set(config, base, n_angles, n_phases, jitter, pattern_rng);

  RawSimStack stack{.frames = {}, .params = {}, .config = config, .noise = noise, .seed = seed, .n_angles = n_angles,
                    .n_phases = n_phases};
  stack.frames.reserve(patterns.size());
  stack.params.reserve(patterns.size());
  for (const auto &p : patterns) {
    stack.frames.push_back(simulate_frame(sample, p.image, otf, noise, noise_rng));
    stack.frames.back().set_pixel_size(config.pixel_size());
    stack.params.push_back(p.params);
  }
  return stack;
}

Image2D widefield(const RawSimStack &stack) {
  if (stack.frames.empty()) throw Error(ErrorKind::data, "cannot form wide-field of an empty stack");
  Image2D out = stack.frames.front();
  auto acc = out.pixels();
  for (std::size_t f = 1; f < stack.frames.size(); ++f) {
    require_same_shape(stack.frames[f], out);
    auto src = stack.frames[f].pixels();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
  }
  const double inv = 1.0 / static_cast<double>(stack.frames.size());
  for (double &v : acc) v *= inv;
  return out;
}

}  // namespace simrecon
