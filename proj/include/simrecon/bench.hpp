#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "simrecon/config.hpp"
#include "simrecon/datagen.hpp"
#include "simrecon/forward_model.hpp"
#include "simrecon/image.hpp"
#include "simrecon/metrics.hpp"
#include "simrecon/recon.hpp"

namespace simrecon {

/// A reconstruction method under test.
///   widefield      mean of the raw frames
///   classic        classical reconstruction, parameters estimated
///   classic-known  classical reconstruction, simulation parameters
///   external:<dir> precomputed images <dir>/<id>.tif
struct MethodSpec {
  enum class Kind { widefield, classic, classic_known, external };
  Kind kind = Kind::widefield;
  std::filesystem::path dir;  // external only
  std::string name;           // label used in reports

  static MethodSpec parse(const std::string &text);
};

/// Comma-separated list of MethodSpec::parse entries.
std::vector<MethodSpec> parse_methods(const std::string &list);

/// Output of one in-process method, min-max normalized to [0, 1].
Image2D run_method(const MethodSpec &method, const RawSimStack &stack, const ReconParams &params);

/// Scores every method on the selected manifest items against their ground
/// truths. Missing external outputs and failed reconstructions are skipped
/// and noted in the report.
QualityReport compare_methods(const Manifest &manifest, const std::vector<MethodSpec> &methods,
                              const ReconParams &params, const std::string &split = "val",
                              int threads = 0);

struct SweepSpec {
  std::vector<double> etas{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int seeds = 5;
  std::uint64_t seed = 0;
  std::vector<MethodSpec> methods;
  std::string split = "val";
  int threads = 0;
  /// When set, external methods read <dir>/eta<eta>_seed<s>/<id>.tif and the
  /// regenerated stacks are written under <export_dir>/eta<eta>_seed<s>/.
  std::filesystem::path export_dir;

  void validate() const;
};

/// "0:9:1" style range or a comma-separated list.
std::vector<double> parse_etas(const std::string &text);

/// One (eta, seed, method) cell: means over the selected items.
struct SweepCell {
  double eta = 0.0;
  int seed = 0;
  std::string method;
  double psnr = 0.0;
  double ssim = 0.0;
  int items = 0;
  bool failed = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // sorted by (eta, seed, method order)

  /// eta,seed,method,psnr,ssim for the cells that did not fail.
  std::string to_csv() const;
  std::string failures_csv() const;
};

/// Directory name of one sweep point, e.g. "eta3_seed1".
std::string sweep_point_name(double eta, int seed);

/// Seed of the stack regenerated for (item, sweep seed s); for s = 0 and the
/// dataset master seed it equals the dataset item seed.
std::uint64_t sweep_stack_seed(std::uint64_t sweep_seed, int s, const std::string &id);

/// Re-simulates each selected item at every eta and seed and scores all
/// methods. Pattern draws depend on the seed only, so one seed sees the
/// same patterns at every eta.
SweepResult noise_sweep(const Manifest &manifest, const SweepSpec &spec);

/// Parses a sweep CSV back into cells (failed cells are absent).
SweepResult read_sweep_csv(const std::filesystem::path &path);

/// SSIM against eta, one line per method (mean over seeds), as an RGB image.
void plot_sweep(const SweepResult &result, const std::filesystem::path &png_path);

/// Resolution target geometry for a square grid of edge 'size'.
struct TargetLayout {
  struct Block {
    double frequency;  // cycles/um
    double relative;   // frequency / k_d
    int x0, y0, width, height;  // pixels
  };
  std::vector<Block> blocks;
  int points_x0, points_y0, points_size, point_spacing;
  int ramp_x0, ramp_y0, ramp_size;
};

/// Blocks at {0.6, 0.9, 1.1, 1.3, 1.6} k_d of the default optics.
TargetLayout target_layout(int size, const OpticalConfig &optics);

/// Vertical line-pair blocks, a sparse grid of single-pixel points and a
/// smooth ramp on a 0.5 background; values in [0, 1]. size >= 256.
Image2D resolution_target(int size, const OpticalConfig &optics);

struct Region {
  int x0, y0, width, height;
};

/// Interior of a target block used for contrast measurements: the block
/// inset by 4 pixels horizontally and 8 vertically.
Region block_region(const TargetLayout::Block &block);

/// Modulation depth of the component at (freq, orientation) inside region:
/// least-squares fit of a + b cos(2 pi f u) + c sin(2 pi f u), with
/// u = x cos(theta) + y sin(theta), reported as hypot(b, c) / |a| clamped to
/// [0, 1]. The region must span at least 4 periods.
double stripe_contrast(const Image2D &img, double frequency, double orientation,
                       const Region &region);

}  // namespace simrecon
