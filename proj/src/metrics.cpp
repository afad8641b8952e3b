#include "simrecon/metrics.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "simrecon/error.hpp"

namespace simrecon {

double psnr(const Image2D &a, const Image2D &b, double peak) {
  require_same_shape(a, b);
  if (!(peak > 0.0)) throw Error(ErrorKind::usage, "PSNR peak must be positive");
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  const double mse = acc / static_cast<double>(pa.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += k[i];
  }
  for (double &v : k) v /= total;
  return k;
}

// Separable 'valid' filtering: output is (h - 10) x (w - 10).
std::vector<double> filter_valid(const std::vector<double> &src, int w, int h,
                                 const std::vector<double> &k) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * src[r * w + c + i];
      tmp[r * ow + c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += k[i] * tmp[(r + i) * ow + c];
      out[r * ow + c] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image2D &a, const Image2D &b) {
  require_same_shape(a, b);
  const int w = a.width();
  const int h = a.height();
  if (w < kWindow || h < kWindow) {
    throw Error(ErrorKind::data, "SSIM needs images of at least 11x11 pixels");
  }
  const auto k = gaussian_kernel();
  std::vector<double> x(a.pixels().begin(), a.pixels().end());
  std::vector<double> y(b.pixels().begin(), b.pixels().end());
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = filter_valid(x, w, h, k);
  const auto mu_y = filter_valid(y, w, h, k);
  const auto e_xx = filter_valid(xx, w, h, k);
  const auto e_yy = filter_valid(yy, w, h, k);
  const auto e_xy = filter_valid(xy, w, h, k);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double vx = e_xx[i] - mx * mx;
    const double vy = e_yy[i] - my * my;
    const double cxy = e_xy[i] - mx * my;
    total += ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
             ((mx * mx + my * my + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mu_x.size());
}

std::vector<MethodSummary> QualityReport::summarize() const {
  std::vector<MethodSummary> out;
  std::map<std::string, std::size_t> slot;
  std::vector<int> finite;
  for (const auto &rec : records) {
    auto [it, inserted] = slot.try_emplace(rec.method, out.size());
    if (inserted) {
      out.push_back({rec.method});
      finite.push_back(0);
    }
    auto &s = out[it->second];
    ++s.items;
    s.mean_ssim += rec.ssim;
    if (std::isfinite(rec.psnr_db)) {
      s.mean_psnr += rec.psnr_db;
      ++finite[it->second];
    } else {
      ++s.infinite_psnr;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto &s = out[i];
    if (s.infinite_psnr > 0) {
      spdlog::warn("method '{}': {} item(s) identical to ground truth, excluded from mean PSNR",
                   s.method, s.infinite_psnr);
    }
    s.mean_ssim /= s.items;
    s.mean_psnr = finite[i] > 0 ? s.mean_psnr / finite[i]
                                : std::numeric_limits<double>::infinity();
  }
  return out;
}

std::string QualityReport::to_csv() const {
  std::ostringstream os;
  os << "id,method,psnr_db,ssim\n";
  os << std::setprecision(10);
  for (const auto &rec : records) {
    os << rec.id << ',' << rec.method << ',';
    if (std::isfinite(rec.psnr_db)) {
      os << rec.psnr_db;
    } else {
      os << "inf";
    }
    os << ',' << rec.ssim << '\n';
  }
  return os.str();
}

std::string QualityReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(16) << "method" << std::right << std::setw(12) << "PSNR [dB]"
     << std::setw(10) << "SSIM" << std::setw(8) << "items" << '\n';
  os << std::string(46, '-') << '\n';
  for (const auto &s : summarize()) {
    os << std::left << std::setw(16) << s.method << std::right << std::fixed
       << std::setprecision(2) << std::setw(12) << s.mean_psnr << std::setw(10)
       << std::setprecision(3) << s.mean_ssim << std::setw(8) << s.items;
    if (s.infinite_psnr > 0) os << "  (" << s.infinite_psnr << " identical to ground truth)";
    os << '\n';
  }
  for (const auto &note : notes) os << "note: " << note << '\n';
  return os.str();
}

}  // namespace simrecon
