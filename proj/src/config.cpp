#include "simrecon/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "simrecon/error.hpp"

namespace simrecon {

using nlohmann::json;

OpticalConfig ToolConfig::optical_config() const {
  return optical_config(optics.size, optics.size);
}

OpticalConfig ToolConfig::optical_config(int width, int height) const {
  return OpticalConfig(optics.na, optics.wavelength_em, optics.pixel_size, width, height);
}

IlluminationParams ToolConfig::base_illumination(const OpticalConfig &config) const {
  IlluminationParams p;
  p.i0 = illumination.i0;
  p.m = illumination.m;
  p.k0 = illumination.k0_rel * cutoff_frequency(config);
  return p;
}

void ToolConfig::validate() const {
  const OpticalConfig config = optical_config();
  simrecon::validate(base_illumination(config));
  simrecon::validate(jitter);
  simrecon::validate(recon);
  if (illumination.n_angles < 1 || illumination.n_phases < 1) {
    throw Error(ErrorKind::usage, "n_angles and n_phases must be >= 1");
  }
  if (illumination.k0_rel * (1.0 + jitter.dk_rel) >= 1.0) {
    throw Error(ErrorKind::usage, "k0_rel (including jitter) must stay below 1");
  }
  static const std::set<std::string> levels{"trace", "debug", "info", "warn", "error", "off"};
  if (!levels.contains(log_level)) {
    throw Error(ErrorKind::usage, "unknown log level '" + log_level + "'");
  }
}

json to_json(const ToolConfig &c) {
  return json{
      {"optics",
       {{"na", c.optics.na},
        {"wavelength_em", c.optics.wavelength_em},
        {"pixel_size", c.optics.pixel_size},
        {"size", c.optics.size}}},
      {"illumination",
       {{"i0", c.illumination.i0},
        {"m", c.illumination.m},
        {"k0_rel", c.illumination.k0_rel},
        {"n_angles", c.illumination.n_angles},
        {"n_phases", c.illumination.n_phases}}},
      {"jitter", {{"dk_rel", c.jitter.dk_rel}, {"dtheta", c.jitter.dtheta}, {"dphi", c.jitter.dphi}}},
      {"recon",
       {{"wiener", c.recon.wiener_w},
        {"apodization_cutoff", c.recon.apodization_cutoff},
        {"modulation_floor", c.recon.modulation_floor}}},
      {"log_level", c.log_level},
  };
}

namespace {

template <typename T>
void take(const json &section, const char *key, T &field, const std::string &where) {
  if (!section.contains(key)) return;
  try {
    field = section.at(key).get<T>();
  } catch (const json::exception &) {
    throw Error(ErrorKind::usage, "config key '" + where + "." + key + "' has the wrong type");
  }
}

void reject_unknown(const json &section, const std::set<std::string> &known,
                    const std::string &where) {
  if (!section.is_object()) throw Error(ErrorKind::usage, "config '" + where + "' must be an object");
  for (const auto &item : section.items()) {
    if (!known.contains(item.key())) {
      throw Error(ErrorKind::usage, "unknown config key '" + where + "." + item.key() + "'");
    }
  }
}

}  // namespace

void merge_json(ToolConfig &c, const json &j) {
  reject_unknown(j, {"optics", "illumination", "jitter", "recon", "log_level"}, "<root>");
  if (j.contains("optics")) {
    const auto &s = j["optics"];
    reject_unknown(s, {"na", "wavelength_em", "pixel_size", "size"}, "optics");
    take(s, "na", c.optics.na, "optics");
    take(s, "wavelength_em", c.optics.wavelength_em, "optics");
    take(s, "pixel_size", c.optics.pixel_size, "optics");
    take(s, "size", c.optics.size, "optics");
  }
  if (j.contains("illumination")) {
    const auto &s = j["illumination"];
    reject_unknown(s, {"i0", "m", "k0_rel", "n_angles", "n_phases"}, "illumination");
    take(s, "i0", c.illumination.i0, "illumination");
    take(s, "m", c.illumination.m, "illumination");
    take(s, "k0_rel", c.illumination.k0_rel, "illumination");
    take(s, "n_angles", c.illumination.n_angles, "illumination");
    take(s, "n_phases", c.illumination.n_phases, "illumination");
  }
  if (j.contains("jitter")) {
    const auto &s = j["jitter"];
    reject_unknown(s, {"dk_rel", "dtheta", "dphi"}, "jitter");
    take(s, "dk_rel", c.jitter.dk_rel, "jitter");
    take(s, "dtheta", c.jitter.dtheta, "jitter");
    take(s, "dphi", c.jitter.dphi, "jitter");
  }
  if (j.contains("recon")) {
    const auto &s = j["recon"];
    reject_unknown(s, {"wiener", "apodization_cutoff", "modulation_floor"}, "recon");
    take(s, "wiener", c.recon.wiener_w, "recon");
    take(s, "apodization_cutoff", c.recon.apodization_cutoff, "recon");
    take(s, "modulation_floor", c.recon.modulation_floor, "recon");
  }
  take(j, "log_level", c.log_level, "<root>");
}

ToolConfig load_config(const std::optional<std::filesystem::path> &path) {
  ToolConfig config;
  std::optional<std::filesystem::path> source = path;
  if (!source) {
    if (const char *env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') source = env;
  }
  if (source) {
    std::ifstream in(*source);
    if (!in) throw Error(ErrorKind::usage, "cannot open config file " + source->string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error &e) {
      throw Error(ErrorKind::usage, "config file " + source->string() + ": " + e.what());
    }
    merge_json(config, j);
  }
  return config;
}

}  // namespace simrecon
