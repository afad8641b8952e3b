#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "scenes.hpp"
#include "simrecon/error.hpp"
#include "simrecon/fft.hpp"
#include "simrecon/forward_model.hpp"
#include "simrecon/metrics.hpp"
#include "simrecon/recon.hpp"

using namespace simrecon;
using std::numbers::pi;

namespace {

double relative_rms(const ComplexGrid &a, const ComplexGrid &b) { return rms_difference(a, b) / rms(b); }

double angle_distance(double a, double b) {
  return std::abs(std::remainder(a - b, 2 * pi));
}

// Spectrum of one angle's frames plus their true phases.
struct AngleData {
  std::vector<ComplexGrid> spectra;
  std::vector<double> phases;
};

AngleData angle_data(const RawSimStack &stack, int a) {
  AngleData d;
  for (int j = 0; j < stack.n_phases; ++j) {
    const int f = a * stack.n_phases + j;
    d.spectra.push_back(fft2(stack.frames[f]));
    d.phases.push_back(stack.params[f].phi);
  }
  return d;
}

ComplexGrid roll(const ComplexGrid &g, int dr, int dc) {
  ComplexGrid out(g.width(), g.height());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      out((r + dr + g.height()) % g.height(), (c + dc + g.width()) % g.width()) = g(r, c);
    }
  }
  return out;
}

RawSimStack default_stack(int size, std::uint64_t seed, const JitterSpec &jitter, double eta = 0.0) {
  const auto config = OpticalConfig::defaults(size, size);
  const Image2D sample = testing_support::natural_scene(size, config.pixel_size(), seed);
  IlluminationParams base = default_illumination(config);
  base.theta = 0.37 + 0.1 * static_cast<double>(seed % 7);
  return simulate_stack(sample, config, base, 3, 3, jitter, NoiseSpec{eta}, seed);
}

}  // namespace

TEST_CASE("mixing condition number") {
  CHECK(mixing_condition_number(ideal_phase_set(3)) == doctest::Approx(1.0));
  CHECK(mixing_condition_number(std::vector<double>{0.0, 0.0, 2 * pi / 3}) > 1e6);
  CHECK(std::isinf(mixing_condition_number(std::vector<double>{0.0, 1.0})));
}

TEST_CASE("separation round trip on simulated stacks") {
  const auto stack = default_stack(128, 3, JitterSpec::defaults());
  for (int a = 0; a < 3; ++a) {
    const auto d = angle_data(stack, a);
    const auto bands = separate_spectra(d.spectra, d.phases);
    const auto remixed = mix_bands(bands, d.phases);
    for (int j = 0; j < 3; ++j) CHECK(relative_rms(remixed[j], d.spectra[j]) < 1e-6);

    // Real frames: the side bands are conjugate mirror images.
    ComplexGrid mirrored(128, 128);
    for (int r = 1; r < 128; ++r) {
      for (int c = 1; c < 128; ++c) mirrored(r, c) = std::conj(bands.minus(128 - r, 128 - c));
    }
    ComplexGrid plus_inner(128, 128);
    for (int r = 1; r < 128; ++r) {
      for (int c = 1; c < 128; ++c) plus_inner(r, c) = bands.plus(r, c);
    }
    CHECK(relative_rms(mirrored, plus_inner) < 1e-6);
  }
}

TEST_CASE("separation recovers bands built by mixing") {
  SeparatedBands truth{ComplexGrid(16, 16), ComplexGrid(16, 16), ComplexGrid(16, 16)};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (auto *band : {&truth.center, &truth.plus, &truth.minus}) {
    for (auto &v : band->values()) v = Complex(g(rng), g(rng));
  }
  const std::vector<double> phases{0.1, 2.0, 4.5, 5.2};
  const auto mixed = mix_bands(truth, phases);
  const auto back = separate_spectra(mixed, phases);
  CHECK(relative_rms(back.center, truth.center) < 1e-12);
  CHECK(relative_rms(back.plus, truth.plus) < 1e-12);
  CHECK(relative_rms(back.minus, truth.minus) < 1e-12);
}

TEST_CASE("unmodulated frames give vanishing side bands") {
  const auto config = OpticalConfig::defaults(64, 64);
  const Image2D sample = testing_support::natural_scene(64, 0.05, 9);
  IlluminationParams base = default_illumination(config);
  base.m = 0.0;
  const auto stack = simulate_stack(sample, config, base, 3, 3, JitterSpec{}, NoiseSpec{}, 1);
  const auto d = angle_data(stack, 0);
  const auto bands = separate_spectra(d.spectra, d.phases);
  CHECK(rms(bands.plus) < 1e-9 * rms(bands.center));
  CHECK(rms(bands.minus) < 1e-9 * rms(bands.center));
}

TEST_CASE("duplicate phases are rejected") {
  const auto stack = default_stack(64, 1, JitterSpec{});
  const std::vector<Image2D> frames(stack.frames.begin(), stack.frames.begin() + 3);
  const std::vector<double> phases{0.0, 0.0, 2 * pi / 3};
  try {
    separate_bands(frames, phases);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("degenerate phase set") != std::string::npos);
    CHECK(e.kind() == ErrorKind::reconstruction);
  }
}

TEST_CASE("shift_band: identity, integer roll, inverse") {
  const Image2D img = testing_support::natural_scene(32, 0.05, 2);
  const ComplexGrid spec = fft2(img);
  const double dk = 1.0 / (32 * 0.05);
  CHECK(rms_difference(shift_band(spec, 0.0, 0.0, 0.05), spec) < 1e-12 * std::max(1.0, rms(spec)));

  // Moving by -k: content at +k lands on DC, i.e. a roll by -k bins.
  const ComplexGrid shifted = shift_band(spec, 3 * dk, -2 * dk, 0.05);
  CHECK(rms_difference(shifted, roll(spec, 2, -3)) < 1e-10 * rms(spec));

  const ComplexGrid there = shift_band(spec, 0.37 * dk, 1.61 * dk, 0.05);
  const ComplexGrid back = shift_band(there, -0.37 * dk, -1.61 * dk, 0.05);
  CHECK(rms_difference(back, spec) < 1e-9);
}

TEST_CASE("parameter estimation on noiseless stacks") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto stack = default_stack(256, seed, JitterSpec::defaults());
    const auto est = estimate_pattern_params(stack, ideal_otf(stack.config));
    REQUIRE(est.size() == 3);
    for (int a = 0; a < 3; ++a) {
      const auto &truth = stack.params[a * 3];
      IlluminationParams found = truth;
      found.k0 = std::hypot(est[a].kx, est[a].ky);
      found.theta = std::atan2(est[a].ky, est[a].kx);
      CHECK(std::abs(found.k0 / truth.k0 - 1) < 0.005);
      // Orientation is pi-periodic; a flipped k vector negates the phases.
      const double dtheta = std::remainder(found.theta - truth.theta, pi);
      CHECK(std::abs(dtheta) < 0.01);
      const bool flipped = std::abs(std::remainder(found.theta - truth.theta, 2 * pi)) > pi / 2;
      for (int j = 0; j < 3; ++j) {
        const double phi = flipped ? -est[a].phases[j] : est[a].phases[j];
        CHECK(angle_distance(phi, stack.params[a * 3 + j].phi) < 0.05);
      }
      CHECK(est[a].modulation == doctest::Approx(0.8).epsilon(0.1));
    }
  }
}

TEST_CASE("zero-jitter phases are recovered tightly") {
  const auto stack = default_stack(256, 11, JitterSpec{});
  const auto est = estimate_pattern_params(stack, ideal_otf(stack.config));
  for (int a = 0; a < 3; ++a) {
    const double theta = std::atan2(est[a].ky, est[a].kx);
    const bool flipped = std::abs(std::remainder(theta - stack.params[a * 3].theta, 2 * pi)) > pi / 2;
    for (int j = 0; j < 3; ++j) {
      const double phi = flipped ? -est[a].phases[j] : est[a].phases[j];
      CHECK(angle_distance(phi, stack.params[a * 3 + j].phi) < 0.02);
    }
  }
}

TEST_CASE("noisy stacks: estimates are either accurate or reported as not found") {
  int found = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    for (double eta : {0.5, 2.0}) {
      const auto stack = default_stack(256, 200 + seed, JitterSpec::defaults(), eta);
      std::vector<AngleEstimate> est;
      try {
        est = estimate_pattern_params(stack, ideal_otf(stack.config));
      } catch (const PatternNotFound &e) {
        CHECK(eta > 0.5);
        continue;
      }
      ++found;
      for (int a = 0; a < 3; ++a) {
        const auto &truth = stack.params[a * 3];
        const double theta = std::atan2(est[a].ky, est[a].kx);
        CHECK(std::abs(std::hypot(est[a].kx, est[a].ky) / truth.k0 - 1) < 0.01);
        CHECK(std::abs(std::remainder(theta - truth.theta, pi)) < 0.02);
      }
    }
  }
  CHECK(found >= 8);
}

TEST_CASE("unmodulated stack: pattern not found") {
  const auto config = OpticalConfig::defaults(128, 128);
  const Image2D sample = testing_support::natural_scene(128, 0.05, 5);
  IlluminationParams base = default_illumination(config);
  base.m = 0.0;
  const auto stack = simulate_stack(sample, config, base, 3, 3, JitterSpec::defaults(), NoiseSpec{0.5}, 1);
  CHECK_THROWS_AS(estimate_pattern_params(stack, ideal_otf(config)), PatternNotFound);
  try {
    reconstruct(stack, ReconParams{});
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("pattern not found") != std::string::npos);
    CHECK(e.exit_code() == 4);
  }
}

TEST_CASE("reconstruction beats widefield and matches known parameters") {
  const auto stack = default_stack(256, 2, JitterSpec::defaults());
  const Image2D truth = testing_support::natural_scene(256, 0.05, 2);
  const Image2D wf = rescale_unit(widefield(stack));
  const Image2D est = reconstruct(stack, ReconParams{});
  ReconParams known;
  known.use_known_params = true;
  const Image2D ref = reconstruct(stack, known);
  CHECK(psnr(truth, est) >= psnr(truth, wf) + 1.0);
  CHECK(std::abs(psnr(truth, est) - psnr(truth, ref)) < 0.2);
  CHECK(min_value(est) == doctest::Approx(0.0));
  CHECK(max_value(est) == doctest::Approx(1.0));
}

TEST_CASE("reconstruction is scale invariant and deterministic") {
  const auto stack = default_stack(128, 4, JitterSpec::defaults());
  RawSimStack doubled = stack;
  for (auto &f : doubled.frames) {
    for (double &v : f.pixels()) v *= 2.0;
  }
  const Image2D a = reconstruct(stack, ReconParams{});
  const Image2D b = reconstruct(doubled, ReconParams{});
  CHECK(rms_difference(a, b) < 1e-9);
  CHECK(reconstruct(stack, ReconParams{}) == a);
}

TEST_CASE("flat sample reconstructs to a constant") {
  const auto config = OpticalConfig::defaults(64, 64);
  const Image2D flat(64, 64, 0.05, 0.6);
  // Patterns periodic on the grid: k0 a whole number of bins along x and y.
  IlluminationParams base = default_illumination(config);
  base.k0 = 12.0 / (64 * 0.05);
  const auto stack = simulate_stack(flat, config, base, 2, 3, JitterSpec{}, NoiseSpec{}, 3);
  ReconParams params;
  params.use_known_params = true;
  const Image2D out = reconstruct(stack, params);
  CHECK((max_value(out) - min_value(out)) / std::abs(mean(out)) < 1e-6);
}

TEST_CASE("two phases per angle is a degenerate phase set") {
  const auto config = OpticalConfig::defaults(64, 64);
  const Image2D sample = testing_support::natural_scene(64, 0.05, 1);
  const auto stack = simulate_stack(sample, config, default_illumination(config), 3, 2,
                                    JitterSpec{}, NoiseSpec{}, 1);
  CHECK(stack.frame_count() == 6);
  try {
    reconstruct(stack, ReconParams{});
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("degenerate phase set") != std::string::npos);
  }
}

TEST_CASE("spectral support ends at the apodization cutoff") {
  const auto config = OpticalConfig::defaults(128, 128);
  const double kd = cutoff_frequency(config);
  const Image2D sample = testing_support::stripes(128, 0.05, 1.3 * kd, 0.0);
  const auto stack = simulate_stack(sample, config, default_illumination(config), 3, 3,
                                    JitterSpec::defaults(), NoiseSpec{}, 8);
  ReconParams params;
  params.use_known_params = true;
  const Image2D out = reconstruct(stack, params);
  double k0_max = 0.0;
  for (const auto &p : stack.params) k0_max = std::max(k0_max, p.k0);
  const ComplexGrid spec = fft2(out);
  const auto fg = config.frequency_grid();
  double total = 0.0, beyond = 0.0, annulus = 0.0;
  for (int r = 0; r < 128; ++r) {
    for (int c = 0; c < 128; ++c) {
      const double e = std::norm(spec(r, c));
      const double k = std::hypot(fg.kx(c), fg.ky(r));
      total += e;
      if (k > kd + k0_max) beyond += e;
      if (k >= kd && k <= kd + k0_max) annulus += e;
    }
  }
  CHECK(beyond < 1e-6 * total);
  CHECK(annulus > 0.01 * total);
}

TEST_CASE("invalid recon parameters") {
  ReconParams p;
  p.wiener_w = 0.0;
  CHECK_THROWS_AS(validate(p), Error);
}
