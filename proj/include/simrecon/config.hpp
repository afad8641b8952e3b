#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "simrecon/illumination.hpp"
#include "simrecon/optics.hpp"
#include "simrecon/recon.hpp"

namespace simrecon {

/// Settings shared by every subcommand. Layering: built-in defaults, then a
/// JSON config file, then command-line flags.
struct ToolConfig {
  struct Optics {
    double na = 1.2;
    double wavelength_em = 0.510;  // um
    double pixel_size = 0.05;      // um
    int size = 512;                // simulation grid edge, pixels
  } optics;
  struct Illumination {
    double i0 = 1.0;
    double m = 0.8;
    double k0_rel = 0.8;  // k0 as a fraction of the cutoff frequency
    int n_angles = 3;
    int n_phases = 3;
  } illumination;
  JitterSpec jitter = JitterSpec::defaults();
  ReconParams recon;
  std::string log_level = "info";

  OpticalConfig optical_config() const;
  OpticalConfig optical_config(int width, int height) const;
  /// Base pattern (theta = phi = 0) for the given optics.
  IlluminationParams base_illumination(const OpticalConfig &optics) const;
  void validate() const;
};

nlohmann::json to_json(const ToolConfig &config);
/// Overlays the keys present in j; unknown keys are usage errors.
void merge_json(ToolConfig &config, const nlohmann::json &j);

/// Environment variable naming a config file, used when no --config flag is
/// given.
inline constexpr const char *kConfigEnv = "SIMRECON_CONFIG";

/// Defaults overlaid with the file at 'path', or at $SIMRECON_CONFIG when
/// path is empty and the variable is set.
ToolConfig load_config(const std::optional<std::filesystem::path> &path);

}  // namespace simrecon
