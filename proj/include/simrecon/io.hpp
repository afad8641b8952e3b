#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "simrecon/forward_model.hpp"
#include "simrecon/image.hpp"
#include "simrecon/optics.hpp"

namespace simrecon {

inline constexpr const char *kToolName = "simrecon";
inline constexpr const char *kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// Single-channel image from TIFF, PNG or JPEG. Unsigned 8/16-bit data is
/// scaled by 1/255 or 1/65535, float data is kept; colour is reduced to
/// Rec. 709 luma. Multi-page files yield their first page.
Image2D read_image(const std::filesystem::path &path, double pixel_size = 1.0);

/// .tif/.tiff: float32, lossless for float inputs. .png: 8-bit, values
/// clipped to [0, 1] (with a warning) and mapped to round(255 p).
void write_image(const Image2D &img, const std::filesystem::path &path);

/// <stack path>.json
std::filesystem::path sidecar_path(const std::filesystem::path &stack_path);

/// Pattern parameters and provenance of a stack, as stored in its sidecar.
nlohmann::json stack_metadata(const RawSimStack &stack, const nlohmann::json &resolved_config);

/// Float32 multi-page TIFF plus JSON sidecar.
void write_stack(const RawSimStack &stack, const std::filesystem::path &path,
                 const nlohmann::json &resolved_config);

/// Per-frame pattern parameters listed under "frames" in a sidecar.
std::vector<IlluminationParams> read_sidecar_params(const std::filesystem::path &path);

/// How pages are grouped when a stack has no sidecar.
struct StackLayout {
  int frames = 9;    // pages per stack
  int n_phases = 3;  // phase steps per angle; frames / n_phases angles
};

/// One stack from a 16-bit unsigned or 32-bit float multi-page TIFF. With a
/// sidecar, optics, grouping and pattern parameters come from it; without
/// one, 'optics' is used (resized to the page dimensions) and pages are
/// taken as angle-major groups of layout.n_phases.
RawSimStack read_stack(const std::filesystem::path &path, const OpticalConfig &optics,
                       const StackLayout &layout = {});

/// Like read_stack, but accepts any whole number of consecutive stacks.
std::vector<RawSimStack> read_stack_series(const std::filesystem::path &path,
                                           const OpticalConfig &optics,
                                           const StackLayout &layout = {});

/// Writes text atomically enough for resumable runs: temp file + rename.
void write_text(const std::filesystem::path &path, const std::string &text);

}  // namespace simrecon
