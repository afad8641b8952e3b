#include "simrecon/io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "simrecon/error.hpp"

namespace simrecon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower_extension(const fs::path &path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

bool is_tiff(const fs::path &path) {
  const auto ext = lower_extension(path);
  return ext == ".tif" || ext == ".tiff";
}

void ensure_parent(const fs::path &path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error(ErrorKind::data, "cannot create directory " + parent.string() + ": " + ec.message());
}

// Converts one decoded page to a grey double image.
Image2D page_to_image(const cv::Mat &page, double pixel_size, const fs::path &path) {
  cv::Mat grey;
  if (page.channels() == 1) {
    grey = page;
  } else if (page.channels() == 3 || page.channels() == 4) {
    cv::Mat f;
    page.convertTo(f, CV_64F);
    std::vector<cv::Mat> ch;
    cv::split(f, ch);
    // OpenCV decodes to BGR(A).
    grey = 0.0722 * ch[0] + 0.7152 * ch[1] + 0.2126 * ch[2];
  } else {
    throw Error(ErrorKind::data, path.string() + ": unsupported channel count " +
                                     std::to_string(page.channels()));
  }
  double scale = 1.0;
  switch (page.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F:
    case CV_64F: break;
    default:
      throw Error(ErrorKind::data, path.string() + ": unsupported sample type");
  }
  cv::Mat d;
  grey.convertTo(d, CV_64F, scale);
  Image2D img(d.cols, d.rows, pixel_size);
  for (int r = 0; r < d.rows; ++r) {
    const double *src = d.ptr<double>(r);
    std::copy(src, src + d.cols, &img(r, 0));
  }
  return img;
}

cv::Mat to_float_mat(const Image2D &img) {
  cv::Mat m(img.height(), img.width(), CV_32F);
  for (int r = 0; r < img.height(); ++r) {
    float *dst = m.ptr<float>(r);
    for (int c = 0; c < img.width(); ++c) dst[c] = static_cast<float>(img(r, c));
  }
  return m;
}

const std::vector<int> &tiff_params() {
  static const std::vector<int> params{cv::IMWRITE_TIFF_COMPRESSION, 1};
  return params;
}

std::vector<cv::Mat> read_pages(const fs::path &path) {
  if (!fs::exists(path)) throw Error(ErrorKind::data, "no such file: " + path.string());
  std::vector<cv::Mat> pages;
  bool ok = false;
  try {
    ok = cv::imreadmulti(path.string(), pages, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception &e) {
    throw Error(ErrorKind::data, "cannot decode " + path.string() + ": " + e.what());
  }
  if (!ok || pages.empty()) throw Error(ErrorKind::data, "cannot decode " + path.string());
  return pages;
}

json params_to_json(const IlluminationParams &p) {
  return json{{"i0", p.i0}, {"m", p.m}, {"k0", p.k0}, {"theta", p.theta}, {"phi", p.phi},
              {"kx", p.kx()}, {"ky", p.ky()}};
}

IlluminationParams params_from_json(const json &j) {
  IlluminationParams p;
  p.i0 = j.at("i0").get<double>();
  p.m = j.at("m").get<double>();
  p.k0 = j.at("k0").get<double>();
  p.theta = j.at("theta").get<double>();
  p.phi = j.at("phi").get<double>();
  return p;
}

struct Sidecar {
  OpticalConfig optics;
  int n_angles;
  int n_phases;
  NoiseSpec noise;
  std::uint64_t seed;
  std::vector<IlluminationParams> params;
};

Sidecar read_sidecar(const fs::path &path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, "cannot open sidecar " + path.string());
  try {
    const json j = json::parse(in);
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorKind::data, path.string() + ": unsupported schema version");
    }
    const auto &o = j.at("optics");
    Sidecar s{OpticalConfig(o.at("na").get<double>(), o.at("wavelength_em").get<double>(),
                            o.at("pixel_size").get<double>(), width, height),
              j.at("n_angles").get<int>(),
              j.at("n_phases").get<int>(),
              NoiseSpec{j.at("noise").at("eta").get<double>()},
              j.at("seed").get<std::uint64_t>(),
              {}};
    for (const auto &f : j.at("frames")) s.params.push_back(params_from_json(f));
    return s;
  } catch (const json::exception &e) {
    throw Error(ErrorKind::data, "malformed sidecar " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<IlluminationParams> read_sidecar_params(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, "cannot open sidecar " + path.string());
  try {
    const json j = json::parse(in);
    std::vector<IlluminationParams> out;
    for (const auto &f : j.at("frames")) out.push_back(params_from_json(f));
    return out;
  } catch (const json::exception &e) {
    throw Error(ErrorKind::data, "malformed sidecar " + path.string() + ": " + e.what());
  }
}

Image2D read_image(const fs::path &path, double pixel_size) {
  if (!fs::exists(path)) throw Error(ErrorKind::data, "no such file: " + path.string());
  cv::Mat page;
  try {
    page = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception &e) {
    throw Error(ErrorKind::data, "cannot decode " + path.string() + ": " + e.what());
  }
  if (page.empty()) throw Error(ErrorKind::data, "cannot decode " + path.string());
  return page_to_image(page, pixel_size, path);
}

void write_image(const Image2D &img, const fs::path &path) {
  ensure_parent(path);
  bool ok = false;
  try {
    if (is_tiff(path)) {
      ok = cv::imwrite(path.string(), to_float_mat(img), tiff_params());
    } else if (lower_extension(path) == ".png") {
      cv::Mat m(img.height(), img.width(), CV_8U);
      std::size_t clipped = 0;
      for (int r = 0; r < img.height(); ++r) {
        auto *dst = m.ptr<unsigned char>(r);
        for (int c = 0; c < img.width(); ++c) {
          const double v = img(r, c);
          if (v < 0.0 || v > 1.0) ++clipped;
          dst[c] = static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
        }
      }
      if (clipped > 0) {
        spdlog::warn("{}: {} pixel(s) outside [0, 1] clipped for 8-bit export", path.string(),
                     clipped);
      }
      ok = cv::imwrite(path.string(), m);
    } else {
      throw Error(ErrorKind::usage, "unsupported output format: " + path.string());
    }
  } catch (const cv::Exception &e) {
    throw Error(ErrorKind::data, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorKind::data, "cannot write " + path.string());
}

fs::path sidecar_path(const fs::path &stack_path) {
  return fs::path(stack_path.string() + ".json");
}

json stack_metadata(const RawSimStack &stack, const json &resolved_config) {
  json frames = json::array();
  for (int f = 0; f < stack.frame_count(); ++f) {
    json entry = stack.has_params() ? params_to_json(stack.params[f]) : json::object();
    entry["index"] = f;
    entry["angle_index"] = stack.angle_of(f);
    entry["phase_index"] = stack.phase_of(f);
    frames.push_back(std::move(entry));
  }
  return json{
      {"schema_version", kSchemaVersion},
      {"tool", kToolName},
      {"version", kToolVersion},
      {"width", stack.config.width()},
      {"height", stack.config.height()},
      {"n_angles", stack.n_angles},
      {"n_phases", stack.n_phases},
      {"optics",
       {{"na", stack.config.na()},
        {"wavelength_em", stack.config.wavelength_em()},
        {"pixel_size", stack.config.pixel_size()},
        {"cutoff_frequency", cutoff_frequency(stack.config)}}},
      {"noise", {{"eta", stack.noise.eta}}},
      {"seed", stack.seed},
      {"frames", std::move(frames)},
      {"config", resolved_config},
  };
}

void write_text(const fs::path &path, const std::string &text) {
  ensure_parent(path);
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::data, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::data, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::data, "cannot write " + path.string() + ": " + ec.message());
}

void write_stack(const RawSimStack &stack, const fs::path &path, const json &resolved_config) {
  stack.check_consistency();
  if (!is_tiff(path)) throw Error(ErrorKind::usage, "stacks are written as TIFF: " + path.string());
  ensure_parent(path);
  std::vector<cv::Mat> pages;
  pages.reserve(stack.frames.size());
  for (const auto &f : stack.frames) pages.push_back(to_float_mat(f));
  bool ok = false;
  try {
    ok = cv::imwritemulti(path.string(), pages, tiff_params());
  } catch (const cv::Exception &e) {
    throw Error(ErrorKind::data, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorKind::data, "cannot write " + path.string());
  write_text(sidecar_path(path), stack_metadata(stack, resolved_config).dump(2) + "\n");
}

std::vector<RawSimStack> read_stack_series(const fs::path &path, const OpticalConfig &optics,
                                           const StackLayout &layout) {
  const auto pages = read_pages(path);
  const int width = pages.front().cols;
  const int height = pages.front().rows;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    const auto &p = pages[i];
    if (p.depth() != CV_16U && p.depth() != CV_32F) {
      throw Error(ErrorKind::data, path.string() + ": stacks must be 16-bit unsigned or 32-bit float");
    }
    if (p.channels() != 1) throw Error(ErrorKind::data, path.string() + ": stacks must be single channel");
    if (p.cols != width) throw DimensionError("x (page " + std::to_string(i) + ")", width, p.cols);
    if (p.rows != height) throw DimensionError("y (page " + std::to_string(i) + ")", height, p.rows);
  }
  const int count = static_cast<int>(pages.size());
  if (count < 3) throw Error(ErrorKind::data, path.string() + ": a stack needs at least 3 pages");

  RawSimStack proto{.frames = {}, .params = {}, .config = optics.with_grid(width, height), .noise = {}};
  int frames_per_stack = layout.frames;
  std::vector<IlluminationParams> all_params;
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    Sidecar s = read_sidecar(side, width, height);
    if (static_cast<int>(s.params.size()) != count) {
      throw Error(ErrorKind::data, side.string() + " describes " + std::to_string(s.params.size()) +
                                       " frames, file has " + std::to_string(count));
    }
    proto.config = s.optics;
    proto.n_angles = s.n_angles;
    proto.n_phases = s.n_phases;
    proto.noise = s.noise;
    proto.seed = s.seed;
    frames_per_stack = count;
    all_params = std::move(s.params);
  } else {
    if (layout.frames < 3 || layout.n_phases < 1 || layout.frames % layout.n_phases != 0) {
      throw Error(ErrorKind::usage, "frames per stack must be >= 3 and a multiple of the phase count");
    }
    if (count % layout.frames != 0) {
      throw Error(ErrorKind::data, path.string() + ": " + std::to_string(count) +
                                       " pages is not a multiple of " +
                                       std::to_string(layout.frames) + " frames per stack");
    }
    proto.n_phases = layout.n_phases;
    proto.n_angles = layout.frames / layout.n_phases;
  }

  std::vector<RawSimStack> out;
  for (int first = 0; first < count; first += frames_per_stack) {
    RawSimStack stack = proto;
    for (int f = first; f < first + frames_per_stack; ++f) {
      stack.frames.push_back(page_to_image(pages[f], stack.config.pixel_size(), path));
      if (!all_params.empty()) stack.params.push_back(all_params[f]);
    }
    stack.check_consistency();
    out.push_back(std::move(stack));
  }
  return out;
}

RawSimStack read_stack(const fs::path &path, const OpticalConfig &optics, const StackLayout &layout) {
  auto series = read_stack_series(path, optics, layout);
  if (series.size() != 1) {
    throw Error(ErrorKind::data, path.string() + " holds " + std::to_string(series.size()) +
                                     " stacks; expected one");
  }
  return std::move(series.front());
}

}  // namespace simrecon
