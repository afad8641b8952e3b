#include "simrecon/datagen.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <thread>

#include "simrecon/error.hpp"
#include "simrecon/forward_model.hpp"
#include "simrecon/io.hpp"
#include "simrecon/rng.hpp"

namespace simrecon {

namespace fs = std::filesystem;
using nlohmann::json;

void DatasetSpec::validate() const {
  if (count < 1) throw Error(ErrorKind::usage, "dataset count must be >= 1");
  if (!(split >= 0.0 && split < 1.0)) throw Error(ErrorKind::usage, "split must lie in [0, 1)");
  if (!(eta_lo >= 0.0 && eta_lo <= eta_hi)) {
    throw Error(ErrorKind::usage, "eta range must satisfy 0 <= lo <= hi");
  }
  if (target_size < 64) throw Error(ErrorKind::usage, "target size must be >= 64");
  if (config.optics.size != target_size) {
    throw Error(ErrorKind::usage, "optics grid size must equal the target size");
  }
  config.validate();
}

std::vector<ManifestEntry> Manifest::select(const std::string &split) const {
  if (split == "all") return entries;
  std::vector<ManifestEntry> out;
  for (const auto &e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

Image2D prepare_sample(const Image2D &grey, int target_size, double pixel_size) {
  const int w = grey.width();
  const int h = grey.height();
  if (std::min(w, h) < 64) {
    throw Error(ErrorKind::data, "image " + std::to_string(w) + "x" + std::to_string(h) +
                                     " is smaller than 64 pixels");
  }
  const int side = std::min(w, h);
  const int x0 = (w - side) / 2;
  const int y0 = (h - side) / 2;
  cv::Mat crop(side, side, CV_64F);
  for (int r = 0; r < side; ++r) {
    double *dst = crop.ptr<double>(r);
    for (int c = 0; c < side; ++c) dst[c] = grey(y0 + r, x0 + c);
  }
  cv::Mat resized;
  if (side == target_size) {
    resized = crop;
  } else {
    cv::resize(crop, resized, cv::Size(target_size, target_size), 0, 0, cv::INTER_CUBIC);
  }
  double lo = 0.0;
  double hi = 0.0;
  cv::minMaxLoc(resized, &lo, &hi);
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) {
    throw Error(ErrorKind::data, "image has zero dynamic range");
  }
  Image2D out(target_size, target_size, pixel_size);
  for (int r = 0; r < target_size; ++r) {
    const double *src = resized.ptr<double>(r);
    for (int c = 0; c < target_size; ++c) out(r, c) = (src[c] - lo) / (hi - lo);
  }
  return out;
}

std::string item_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "item_%04d", index);
  return buf;
}

std::uint64_t item_seed(std::uint64_t master_seed, const std::string &id) {
  return derive_seed(master_seed, hash_id(id));
}

ItemDraw draw_item(std::uint64_t item_seed, double eta_lo, double eta_hi) {
  Rng rng(derive_seed(item_seed, 3));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ItemDraw d{};
  d.eta = eta_lo + (eta_hi - eta_lo) * unit(rng);
  d.theta = std::numbers::pi * unit(rng);
  d.phi = 2.0 * std::numbers::pi * unit(rng);
  return d;
}

int held_out_count(int count, double split) {
  return static_cast<int>(std::lround(count * split));
}

namespace {

std::vector<fs::path> list_sources(const fs::path &dir) {
  static const std::set<std::string> extensions{".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"};
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::usage, "source directory does not exist: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (extensions.contains(ext)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::optional<Image2D> load_sample(const fs::path &path, int target_size, double pixel_size) {
  try {
    Image2D sample = prepare_sample(read_image(path), target_size, pixel_size);
    // Simulate from the values stored in the float32 ground truth.
    for (double &v : sample.pixels()) v = static_cast<float>(v);
    return sample;
  } catch (const Error &e) {
    spdlog::warn("skipping source {}: {}", path.filename().string(), e.what());
    return std::nullopt;
  }
}

json params_json(const IlluminationParams &p) {
  return json{{"i0", p.i0}, {"m", p.m}, {"k0", p.k0}, {"theta", p.theta}, {"phi", p.phi}};
}

IlluminationParams params_from(const json &j) {
  IlluminationParams p;
  p.i0 = j.at("i0").get<double>();
  p.m = j.at("m").get<double>();
  p.k0 = j.at("k0").get<double>();
  p.theta = j.at("theta").get<double>();
  p.phi = j.at("phi").get<double>();
  return p;
}

json spec_json(const DatasetSpec &spec) {
  return json{{"count", spec.count},
              {"target_size", spec.target_size},
              {"eta_range", {spec.eta_lo, spec.eta_hi}},
              {"master_seed", spec.master_seed},
              {"split", spec.split},
              {"n_angles", spec.config.illumination.n_angles},
              {"n_phases", spec.config.illumination.n_phases}};
}

// Reuses an item already on disk when its stack, sidecar and ground truth
// are readable and were produced with the same seed and noise level.
std::optional<ManifestEntry> existing_item(const Manifest &m, const ManifestEntry &expected,
                                           const OpticalConfig &optics) {
  const fs::path stack_file = m.stack_path(expected);
  const fs::path gt_file = m.ground_truth_path(expected);
  if (!fs::exists(stack_file) || !fs::exists(sidecar_path(stack_file)) || !fs::exists(gt_file)) {
    return std::nullopt;
  }
  try {
    const RawSimStack stack = read_stack(stack_file, optics);
    const Image2D gt = read_image(gt_file);
    if (stack.seed != expected.seed || stack.noise.eta != expected.eta || !stack.has_params() ||
        !(stack.config == optics) || gt.width() != optics.width() ||
        gt.height() != optics.height()) {
      return std::nullopt;
    }
    ManifestEntry entry = expected;
    entry.params = stack.params;
    return entry;
  } catch (const Error &e) {
    spdlog::info("regenerating {}: {}", expected.id, e.what());
    return std::nullopt;
  }
}

}  // namespace

Manifest generate_dataset(const DatasetSpec &spec) {
  spec.validate();
  const OpticalConfig optics = spec.config.optical_config();
  const auto sources = list_sources(spec.source_dir);

  // Source assignment: the first 'count' usable files in sorted order.
  std::vector<fs::path> chosen;
  for (const auto &path : sources) {
    if (static_cast<int>(chosen.size()) == spec.count) break;
    if (load_sample(path, spec.target_size, optics.pixel_size())) chosen.push_back(path);
  }
  if (static_cast<int>(chosen.size()) < spec.count) {
    throw Error(ErrorKind::data, "source directory has " + std::to_string(chosen.size()) +
                                     " usable image(s), " + std::to_string(spec.count) +
                                     " requested (short by " +
                                     std::to_string(spec.count - chosen.size()) + ")");
  }

  Manifest manifest;
  manifest.root = spec.out_dir;
  manifest.spec = spec_json(spec);
  manifest.config = to_json(spec.config);
  const json sidecar_config = json{{"dataset", manifest.spec}, {"tool_config", manifest.config}};
  const int held_out = held_out_count(spec.count, spec.split);

  std::vector<std::optional<ManifestEntry>> results(static_cast<std::size_t>(spec.count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.count; i = next++) {
      ManifestEntry entry;
      entry.id = item_id(i);
      entry.source = chosen[i].filename().string();
      entry.stack = "stacks/" + entry.id + ".tif";
      entry.ground_truth = "gt/" + entry.id + ".tif";
      entry.seed = item_seed(spec.master_seed, entry.id);
      entry.split = i >= spec.count - held_out ? "val" : "train";
      const ItemDraw draw = draw_item(entry.seed, spec.eta_lo, spec.eta_hi);
      entry.eta = draw.eta;
      IlluminationParams base = spec.config.base_illumination(optics);
      base.theta = draw.theta;
      base.phi = draw.phi;

      if (auto kept = existing_item(manifest, entry, optics)) {
        spdlog::debug("{}: up to date", entry.id);
        results[i] = std::move(kept);
        continue;
      }
      try {
        const auto sample = load_sample(chosen[i], spec.target_size, optics.pixel_size());
        if (!sample) continue;
        const RawSimStack stack =
            simulate_stack(*sample, optics, base, spec.config.illumination.n_angles,
                           spec.config.illumination.n_phases, spec.config.jitter,
                           NoiseSpec{entry.eta}, entry.seed);
        write_image(*sample, manifest.ground_truth_path(entry));
        write_stack(stack, manifest.stack_path(entry), sidecar_config);
        entry.params = stack.params;
        spdlog::info("{}: {} (eta {:.3f})", entry.id, entry.source, entry.eta);
        results[i] = std::move(entry);
      } catch (const Error &e) {
        spdlog::error("{}: {}", entry.id, e.what());
      }
    }
  };
  const int threads = std::max(
      1, std::min(spec.count, spec.threads > 0 ? spec.threads
                                               : static_cast<int>(std::thread::hardware_concurrency())));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto &t : pool) t.join();

  for (auto &r : results) {
    if (r) manifest.entries.push_back(std::move(*r));
  }
  if (static_cast<int>(manifest.entries.size()) < spec.count) {
    spdlog::warn("{} of {} item(s) failed", spec.count - manifest.entries.size(), spec.count);
  }
  write_text(spec.out_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
  return manifest;
}

json manifest_to_json(const Manifest &m) {
  json items = json::array();
  for (const auto &e : m.entries) {
    json frames = json::array();
    for (const auto &p : e.params) frames.push_back(params_json(p));
    items.push_back(json{{"id", e.id},
                         {"source", e.source},
                         {"stack", e.stack},
                         {"stack_sidecar", e.stack + ".json"},
                         {"ground_truth", e.ground_truth},
                         {"eta", e.eta},
                         {"seed", e.seed},
                         {"split", e.split},
                         {"frames", std::move(frames)}});
  }
  return json{{"schema_version", kSchemaVersion},
              {"tool", kToolName},
              {"version", kToolVersion},
              {"kind", "sim_dataset"},
              {"spec", m.spec},
              {"config", m.config},
              {"items", std::move(items)}};
}

Manifest read_manifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, "cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  try {
    const json j = json::parse(in);
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorKind::data, path.string() + ": unsupported manifest schema version");
    }
    m.spec = j.at("spec");
    m.config = j.at("config");
    for (const auto &item : j.at("items")) {
      ManifestEntry e;
      e.id = item.at("id").get<std::string>();
      e.source = item.at("source").get<std::string>();
      e.stack = item.at("stack").get<std::string>();
      e.ground_truth = item.at("ground_truth").get<std::string>();
      e.eta = item.at("eta").get<double>();
      e.seed = item.at("seed").get<std::uint64_t>();
      e.split = item.at("split").get<std::string>();
      for (const auto &f : item.at("frames")) e.params.push_back(params_from(f));
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception &e) {
    throw Error(ErrorKind::data, "malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace simrecon
