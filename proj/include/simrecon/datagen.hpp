#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "simrecon/config.hpp"
#include "simrecon/illumination.hpp"
#include "simrecon/image.hpp"

namespace simrecon {

struct DatasetSpec {
  std::filesystem::path source_dir;
  std::filesystem::path out_dir;
  int count = 1;
  int target_size = 512;
  ToolConfig config;  // optics (grid edge = target_size), base pattern, jitter
  double eta_lo = 0.0;
  double eta_hi = 1.5;
  std::uint64_t master_seed = 0;
  double split = 0.1;  // fraction of items held out for validation
  int threads = 0;     // 0: hardware concurrency

  void validate() const;
};

struct ManifestEntry {
  std::string id;
  std::string source;        // file name inside the source directory
  std::string stack;         // relative to the manifest directory
  std::string ground_truth;  // relative to the manifest directory
  std::vector<IlluminationParams> params;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::string split;  // "train" or "val"
};

struct Manifest {
  std::filesystem::path root;  // directory holding manifest.json
  nlohmann::json spec;
  nlohmann::json config;
  std::vector<ManifestEntry> entries;

  std::filesystem::path stack_path(const ManifestEntry &e) const { return root / e.stack; }
  std::filesystem::path ground_truth_path(const ManifestEntry &e) const {
    return root / e.ground_truth;
  }
  /// Entries of one split; "all" selects every entry.
  std::vector<ManifestEntry> select(const std::string &split) const;
};

/// Center crop to a square, bicubic resize to target_size^2 and min-max
/// rescale to [0, 1]. The input is a grey image (see read_image). Throws a
/// data error for images smaller than 64 pixels or with no dynamic range.
Image2D prepare_sample(const Image2D &grey, int target_size, double pixel_size);

/// "item_0007"
std::string item_id(int index);
/// Simulation seed of one item; preparation does not depend on it.
std::uint64_t item_seed(std::uint64_t master_seed, const std::string &id);
/// Per-item random draws: noise level in [eta_lo, eta_hi), base pattern
/// angle in [0, pi) and phase in [0, 2 pi).
struct ItemDraw {
  double eta;
  double theta;
  double phi;
};
ItemDraw draw_item(std::uint64_t item_seed, double eta_lo, double eta_hi);
/// Number of held-out items for a dataset of 'count' items.
int held_out_count(int count, double split);

/// Builds the dataset under spec.out_dir and writes manifest.json. Items
/// whose files already exist and match are kept as they are.
Manifest generate_dataset(const DatasetSpec &spec);

nlohmann::json manifest_to_json(const Manifest &manifest);
Manifest read_manifest(const std::filesystem::path &path);

}  // namespace simrecon
