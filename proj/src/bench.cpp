#include "simrecon/bench.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "simrecon/error.hpp"
#include "simrecon/io.hpp"
#include "simrecon/rng.hpp"

namespace simrecon {

namespace fs = std::filesystem;
using std::numbers::pi;

MethodSpec MethodSpec::parse(const std::string &text) {
  MethodSpec m;
  m.name = text;
  if (text == "widefield") {
    m.kind = Kind::widefield;
  } else if (text == "classic") {
    m.kind = Kind::classic;
  } else if (text == "classic-known") {
    m.kind = Kind::classic_known;
  } else if (text.rfind("external:", 0) == 0 && text.size() > 9) {
    m.kind = Kind::external;
    m.dir = text.substr(9);
    m.name = "external";
  } else {
    throw Error(ErrorKind::usage, "unknown method '" + text +
                                      "' (widefield, classic, classic-known, external:<dir>)");
  }
  return m;
}

std::vector<MethodSpec> parse_methods(const std::string &list) {
  std::vector<MethodSpec> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(MethodSpec::parse(item));
  }
  if (out.empty()) throw Error(ErrorKind::usage, "no methods given");
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (out[i].name == out[j].name) {
        throw Error(ErrorKind::usage, "method '" + out[i].name + "' listed twice");
      }
    }
  }
  return out;
}

Image2D run_method(const MethodSpec &method, const RawSimStack &stack, const ReconParams &params) {
  switch (method.kind) {
    case MethodSpec::Kind::widefield:
      return rescale_unit(widefield(stack));
    case MethodSpec::Kind::classic: {
      ReconParams p = params;
      p.use_known_params = false;
      return reconstruct(stack, p);
    }
    case MethodSpec::Kind::classic_known: {
      ReconParams p = params;
      p.use_known_params = true;
      return reconstruct(stack, p);
    }
    case MethodSpec::Kind::external:
      break;
  }
  throw Error(ErrorKind::usage, "external methods are read from disk, not run");
}

namespace {

ToolConfig manifest_config(const Manifest &manifest) {
  ToolConfig config;
  merge_json(config, manifest.config);
  return config;
}

int thread_count(int requested, std::size_t tasks) {
  const int hw = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  const int n = requested > 0 ? requested : hw;
  return std::max(1, std::min(n, static_cast<int>(tasks)));
}

// Runs task(i) for i in [0, count) on a small pool.
template <typename Task>
void parallel_for(std::size_t count, int threads, Task task) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) task(i);
  };
  std::vector<std::thread> pool;
  const int n = thread_count(threads, count);
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto &t : pool) t.join();
}

struct Score {
  std::optional<QualityRecord> record;
  std::string problem;
};

Score score_method(const MethodSpec &method, const std::string &id, const RawSimStack &stack,
                   const Image2D &truth, const ReconParams &params, const fs::path &external_dir) {
  Score s;
  try {
    Image2D out;
    if (method.kind == MethodSpec::Kind::external) {
      const fs::path file = external_dir / (id + ".tif");
      if (!fs::exists(file)) {
        s.problem = "missing external output " + file.string();
        return s;
      }
      out = rescale_unit(read_image(file, truth.pixel_size()));
    } else {
      out = run_method(method, stack, params);
    }
    out.set_pixel_size(truth.pixel_size());
    s.record = QualityRecord{id, method.name, psnr(truth, out), ssim(truth, out)};
  } catch (const Error &e) {
    s.problem = e.what();
  }
  return s;
}

}  // namespace

QualityReport compare_methods(const Manifest &manifest, const std::vector<MethodSpec> &methods,
                              const ReconParams &params, const std::string &split, int threads) {
  const ToolConfig config = manifest_config(manifest);
  const auto items = manifest.select(split);
  if (items.empty()) throw Error(ErrorKind::data, "manifest has no items in split '" + split + "'");
  const OpticalConfig optics = config.optical_config();

  std::vector<std::vector<Score>> scores(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    const auto &item = items[i];
    try {
      const RawSimStack stack = read_stack(manifest.stack_path(item), optics);
      const Image2D truth = read_image(manifest.ground_truth_path(item), stack.config.pixel_size());
      for (const auto &m : methods) {
        scores[i].push_back(score_method(m, item.id, stack, truth, params, m.dir));
      }
    } catch (const Error &e) {
      for (std::size_t k = 0; k < methods.size(); ++k) scores[i].push_back({std::nullopt, e.what()});
    }
  });

  QualityReport report;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const auto &s = scores[i][k];
      if (s.record) {
        report.add(*s.record);
      } else {
        const std::string note = methods[k].name + " skipped " + items[i].id + ": " + s.problem;
        spdlog::warn("{}", note);
        report.notes.push_back(note);
      }
    }
  }
  return report;
}

void SweepSpec::validate() const {
  if (etas.empty()) throw Error(ErrorKind::usage, "sweep needs at least one eta");
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] >= 0.0)) throw Error(ErrorKind::usage, "eta values must be non-negative");
    if (i > 0 && !(etas[i] > etas[i - 1])) {
      throw Error(ErrorKind::usage, "eta values must be strictly increasing");
    }
  }
  if (seeds < 1) throw Error(ErrorKind::usage, "sweep needs at least one seed");
  if (methods.empty()) throw Error(ErrorKind::usage, "sweep needs at least one method");
}

std::vector<double> parse_etas(const std::string &text) {
  std::vector<double> out;
  auto number = [&](const std::string &s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception &) {
      throw Error(ErrorKind::usage, "bad eta specification '" + text + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw Error(ErrorKind::usage, "eta range must be lo:hi:step");
    const double lo = number(parts[0]);
    const double hi = number(parts[1]);
    const double step = number(parts[2]);
    if (!(step > 0.0) || hi < lo) throw Error(ErrorKind::usage, "bad eta range '" + text + "'");
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(lo + i * step);
  } else {
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(number(part));
  }
  if (out.empty()) throw Error(ErrorKind::usage, "empty eta specification");
  return out;
}

std::string sweep_point_name(double eta, int seed) {
  std::ostringstream os;
  os << "eta" << eta << "_seed" << seed;
  return os.str();
}

std::uint64_t sweep_stack_seed(std::uint64_t sweep_seed, int s, const std::string &id) {
  const std::uint64_t base = s == 0 ? sweep_seed : derive_seed(sweep_seed, static_cast<std::uint64_t>(s));
  return item_seed(base, id);
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string SweepResult::to_csv() const {
  std::ostringstream os;
  os << "eta,seed,method,psnr,ssim\n";
  for (const auto &c : cells) {
    if (c.failed) continue;
    os << format_number(c.eta) << ',' << c.seed << ',' << c.method << ','
       << (std::isfinite(c.psnr) ? format_number(c.psnr) : "inf") << ',' << format_number(c.ssim)
       << '\n';
  }
  return os.str();
}

std::string SweepResult::failures_csv() const {
  std::ostringstream os;
  os << "eta,seed,method,error\n";
  for (const auto &c : cells) {
    if (!c.failed) continue;
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << format_number(c.eta) << ',' << c.seed << ',' << c.method << ',' << err << '\n';
  }
  return os.str();
}

SweepResult noise_sweep(const Manifest &manifest, const SweepSpec &spec) {
  spec.validate();
  const ToolConfig config = manifest_config(manifest);
  const OpticalConfig optics = config.optical_config();
  const auto items = manifest.select(spec.split);
  if (items.empty()) {
    throw Error(ErrorKind::data, "manifest has no items in split '" + spec.split + "'");
  }
  std::vector<Image2D> truths;
  for (const auto &item : items) {
    truths.push_back(read_image(manifest.ground_truth_path(item), optics.pixel_size()));
    require_same_shape(optics.width(), optics.height(), truths.back().width(),
                       truths.back().height());
  }

  const std::size_t n_items = items.size();
  const std::size_t n_points = spec.etas.size() * static_cast<std::size_t>(spec.seeds);
  const std::size_t n_methods = spec.methods.size();
  // scores[(point * n_items + item) * n_methods + method]
  std::vector<Score> scores(n_points * n_items * n_methods);
  parallel_for(n_points * n_items, spec.threads, [&](std::size_t task) {
    const std::size_t point = task / n_items;
    const std::size_t i = task % n_items;
    const double eta = spec.etas[point / spec.seeds];
    const int s = static_cast<int>(point % spec.seeds);
    const auto &item = items[i];
    const std::uint64_t stack_seed = sweep_stack_seed(spec.seed, s, item.id);
    const ItemDraw draw = draw_item(stack_seed, 0.0, 0.0);
    IlluminationParams base = config.base_illumination(optics);
    base.theta = draw.theta;
    base.phi = draw.phi;
    Score *out = &scores[task * n_methods];
    try {
      const RawSimStack stack = simulate_stack(truths[i], optics, base, config.illumination.n_angles,
                                               config.illumination.n_phases, config.jitter,
                                               NoiseSpec{eta}, stack_seed);
      const std::string point_name = sweep_point_name(eta, s);
      if (!spec.export_dir.empty()) {
        write_stack(stack, spec.export_dir / point_name / (item.id + ".tif"),
                    nlohmann::json{{"sweep_seed", spec.seed}, {"tool_config", to_json(config)}});
      }
      for (std::size_t k = 0; k < n_methods; ++k) {
        const auto &m = spec.methods[k];
        out[k] = score_method(m, item.id, stack, truths[i], config.recon, m.dir / point_name);
      }
    } catch (const Error &e) {
      for (std::size_t k = 0; k < n_methods; ++k) out[k] = {std::nullopt, e.what()};
    }
  });

  SweepResult result;
  for (std::size_t point = 0; point < n_points; ++point) {
    for (std::size_t k = 0; k < n_methods; ++k) {
      SweepCell cell;
      cell.eta = spec.etas[point / spec.seeds];
      cell.seed = static_cast<int>(point % spec.seeds);
      cell.method = spec.methods[k].name;
      for (std::size_t i = 0; i < n_items; ++i) {
        const auto &s = scores[(point * n_items + i) * n_methods + k];
        if (!s.record) {
          if (!cell.failed) cell.error = items[i].id + ": " + s.problem;
          cell.failed = true;
          continue;
        }
        cell.psnr += s.record->psnr_db;
        cell.ssim += s.record->ssim;
        ++cell.items;
      }
      if (cell.failed) {
        spdlog::warn("eta {} seed {} {}: failed ({})", cell.eta, cell.seed, cell.method, cell.error);
        cell.psnr = cell.ssim = 0.0;
        cell.items = 0;
      } else {
        cell.psnr /= cell.items;
        cell.ssim /= cell.items;
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

SweepResult read_sweep_csv(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::data, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "eta,seed,method,psnr,ssim") {
    throw Error(ErrorKind::data, path.string() + ": not a sweep CSV");
  }
  SweepResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string eta, seed, method, p, s;
    if (!std::getline(ss, eta, ',') || !std::getline(ss, seed, ',') ||
        !std::getline(ss, method, ',') || !std::getline(ss, p, ',') || !std::getline(ss, s)) {
      throw Error(ErrorKind::data, path.string() + ": malformed row '" + line + "'");
    }
    try {
      SweepCell cell;
      cell.eta = std::stod(eta);
      cell.seed = std::stoi(seed);
      cell.method = method;
      cell.psnr = p == "inf" ? std::numeric_limits<double>::infinity() : std::stod(p);
      cell.ssim = std::stod(s);
      result.cells.push_back(std::move(cell));
    } catch (const std::exception &) {
      throw Error(ErrorKind::data, path.string() + ": malformed row '" + line + "'");
    }
  }
  return result;
}

void plot_sweep(const SweepResult &result, const fs::path &png_path) {
  // Mean SSIM over seeds per (method, eta).
  std::vector<std::string> methods;
  std::map<std::string, std::map<double, std::pair<double, int>>> series;
  for (const auto &c : result.cells) {
    if (c.failed) continue;
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
      methods.push_back(c.method);
    }
    auto &slot = series[c.method][c.eta];
    slot.first += c.ssim;
    ++slot.second;
  }
  if (methods.empty()) throw Error(ErrorKind::data, "nothing to plot");
  double eta_min = std::numeric_limits<double>::infinity();
  double eta_max = -eta_min;
  double y_min = 0.0;
  for (const auto &[m, points] : series) {
    for (const auto &[eta, acc] : points) {
      eta_min = std::min(eta_min, eta);
      eta_max = std::max(eta_max, eta);
      y_min = std::min(y_min, acc.first / acc.second);
    }
  }
  if (eta_max <= eta_min) eta_max = eta_min + 1.0;
  y_min = std::floor(y_min * 10.0) / 10.0;
  const double y_max = 1.0;

  const int width = 800;
  const int height = 520;
  const int left = 70, right = 170, top = 30, bottom = 60;
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  auto to_px = [&](double eta, double y) {
    const double fx = (eta - eta_min) / (eta_max - eta_min);
    const double fy = (y - y_min) / (y_max - y_min);
    return cv::Point(static_cast<int>(left + fx * (width - left - right)),
                     static_cast<int>(height - bottom - fy * (height - top - bottom)));
  };
  const cv::Scalar black(0, 0, 0);
  const cv::Scalar grid(225, 225, 225);
  for (int t = 0; t <= 10; ++t) {
    const double y = y_min + (y_max - y_min) * t / 10.0;
    cv::line(canvas, to_px(eta_min, y), to_px(eta_max, y), grid, 1);
    char label[16];
    std::snprintf(label, sizeof label, "%.2f", y);
    cv::putText(canvas, label, to_px(eta_min, y) + cv::Point(-55, 5), cv::FONT_HERSHEY_SIMPLEX,
                0.4, black, 1, cv::LINE_AA);
  }
  std::vector<double> etas;
  for (const auto &[eta, acc] : series[methods.front()]) etas.push_back(eta);
  for (double eta : etas) {
    char label[16];
    std::snprintf(label, sizeof label, "%g", eta);
    cv::putText(canvas, label, to_px(eta, y_min) + cv::Point(-5, 20), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                black, 1, cv::LINE_AA);
  }
  cv::rectangle(canvas, to_px(eta_min, y_max), to_px(eta_max, y_min), black, 1);
  cv::putText(canvas, "eta (noise std / signal std)", cv::Point(left + 170, height - 15),
              cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1, cv::LINE_AA);
  cv::putText(canvas, "SSIM", cv::Point(10, top + 10), cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1,
              cv::LINE_AA);

  const std::vector<cv::Scalar> palette{{180, 119, 31}, {14, 127, 255}, {44, 160, 44},
                                        {40, 39, 214},  {189, 103, 148}, {75, 86, 140}};
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const cv::Scalar colour = palette[k % palette.size()];
    std::vector<cv::Point> pts;
    for (const auto &[eta, acc] : series[methods[k]]) pts.push_back(to_px(eta, acc.first / acc.second));
    for (std::size_t i = 1; i < pts.size(); ++i) cv::line(canvas, pts[i - 1], pts[i], colour, 2, cv::LINE_AA);
    for (const auto &p : pts) cv::circle(canvas, p, 3, colour, cv::FILLED, cv::LINE_AA);
    const cv::Point legend(width - right + 15, top + 20 + static_cast<int>(k) * 22);
    cv::line(canvas, legend, legend + cv::Point(25, 0), colour, 2, cv::LINE_AA);
    cv::putText(canvas, methods[k], legend + cv::Point(32, 5), cv::FONT_HERSHEY_SIMPLEX, 0.45,
                black, 1, cv::LINE_AA);
  }
  if (!png_path.parent_path().empty()) fs::create_directories(png_path.parent_path());
  if (!cv::imwrite(png_path.string(), canvas)) {
    throw Error(ErrorKind::data, "cannot write " + png_path.string());
  }
}

TargetLayout target_layout(int size, const OpticalConfig &optics) {
  if (size < 256) throw Error(ErrorKind::usage, "resolution target size must be >= 256");
  const double kd = cutoff_frequency(OpticalConfig::defaults(64, 64));
  TargetLayout t;
  const int gap = size / 32;
  const int bw = (size - 6 * gap) / 5;
  for (int i = 0; i < 5; ++i) {
    const double rel = std::array{0.6, 0.9, 1.1, 1.3, 1.6}[i];
    t.blocks.push_back({rel * kd, rel, gap + i * (bw + gap), size / 8, bw, size / 4});
  }
  (void)optics;
  t.points_x0 = size / 16;
  t.points_y0 = 9 * size / 16;
  t.points_size = 3 * size / 8;
  t.point_spacing = 16;
  t.ramp_x0 = 9 * size / 16;
  t.ramp_y0 = 9 * size / 16;
  t.ramp_size = 3 * size / 8;
  return t;
}

Image2D resolution_target(int size, const OpticalConfig &optics) {
  const TargetLayout t = target_layout(size, optics);
  const double ps = optics.pixel_size();
  Image2D img(size, size, ps, 0.5);
  for (const auto &b : t.blocks) {
    for (int r = b.y0; r < b.y0 + b.height; ++r) {
      for (int c = b.x0; c < b.x0 + b.width; ++c) {
        img(r, c) = 0.5 + 0.5 * std::cos(2 * pi * b.frequency * (c - b.x0) * ps);
      }
    }
  }
  for (int r = t.points_y0 + t.point_spacing / 2; r < t.points_y0 + t.points_size;
       r += t.point_spacing) {
    for (int c = t.points_x0 + t.point_spacing / 2; c < t.points_x0 + t.points_size;
         c += t.point_spacing) {
      img(r, c) = 1.0;
    }
  }
  for (int r = t.ramp_y0; r < t.ramp_y0 + t.ramp_size; ++r) {
    for (int c = t.ramp_x0; c < t.ramp_x0 + t.ramp_size; ++c) {
      img(r, c) = 0.25 + 0.5 * (c - t.ramp_x0) / (t.ramp_size - 1.0);
    }
  }
  return img;
}

Region block_region(const TargetLayout::Block &block) {
  return {block.x0 + 4, block.y0 + 8, block.width - 8, block.height - 16};
}

double stripe_contrast(const Image2D &img, double frequency, double orientation,
                       const Region &region) {
  if (region.width < 1 || region.height < 1 || region.x0 < 0 || region.y0 < 0 ||
      region.x0 + region.width > img.width() || region.y0 + region.height > img.height()) {
    throw Error(ErrorKind::usage, "contrast region lies outside the image");
  }
  const double ps = img.pixel_size();
  const double cs = std::cos(orientation);
  const double sn = std::sin(orientation);
  const double span = (std::abs(cs) * (region.width - 1) + std::abs(sn) * (region.height - 1)) * ps;
  if (span * frequency < 4.0) {
    throw Error(ErrorKind::usage, "contrast region spans fewer than 4 stripe periods");
  }
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (int r = region.y0; r < region.y0 + region.height; ++r) {
    for (int c = region.x0; c < region.x0 + region.width; ++c) {
      const double u = (c * cs + r * sn) * ps;
      const Eigen::Vector3d basis(1.0, std::cos(2 * pi * frequency * u),
                                  std::sin(2 * pi * frequency * u));
      normal += basis * basis.transpose();
      rhs += basis * img(r, c);
    }
  }
  const Eigen::Vector3d coef = normal.ldlt().solve(rhs);
  if (std::abs(coef(0)) == 0.0) return 0.0;
  return std::clamp(std::hypot(coef(1), coef(2)) / std::abs(coef(0)), 0.0, 1.0);
}

}  // namespace simrecon
