#include "simrecon/recon.hpp"

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <tuple>
#include <sstream>

#include "simrecon/error.hpp"
#include "simrecon/fft.hpp"

namespace simrecon {

using std::numbers::pi;

namespace {

constexpr double kMaxCondition = 1e6;
// Correlation peak over the median of the search annulus below which no
// pattern is reported. Pure noise peaks around 6 to 9 on 256^2 to 512^2
// grids.
constexpr double kMinPeakSnr = 14.0;

Eigen::MatrixXcd mixing_matrix(std::span<const double> phases) {
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(phases.size()), 3);
  for (std::size_t j = 0; j < phases.size(); ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    m(row, 0) = 1.0;
    m(row, 1) = std::polar(1.0, phases[j]);
    m(row, 2) = std::polar(1.0, -phases[j]);
  }
  return m;
}

double wrap_phase(double phi) {
  phi = std::fmod(phi, 2.0 * pi);
  return phi < 0.0 ? phi + 2.0 * pi : phi;
}

std::vector<double> hann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * pi * i / n));
  return w;
}

// Windowed discrete-time Fourier transform of a set of complex fields at an
// arbitrary frequency; origin at pixel (0, 0).
class DtftProbe {
 public:
  DtftProbe(std::vector<ComplexGrid> fields, double pixel_size)
      : fields_(std::move(fields)), pixel_size_(pixel_size) {
    const int w = fields_.front().width();
    const int h = fields_.front().height();
    const auto wx = hann(w);
    const auto wy = hann(h);
    for (auto &f : fields_) {
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f(r, c) *= wy[r] * wx[c];
      }
    }
  }

  std::vector<Complex> evaluate(double kx, double ky) const {
    const int w = fields_.front().width();
    const int h = fields_.front().height();
    std::vector<Complex> ex(static_cast<std::size_t>(w)), ey(static_cast<std::size_t>(h));
    for (int c = 0; c < w; ++c) ex[c] = std::polar(1.0, -2.0 * pi * kx * c * pixel_size_);
    for (int r = 0; r < h; ++r) ey[r] = std::polar(1.0, -2.0 * pi * ky * r * pixel_size_);
    std::vector<Complex> out;
    out.reserve(fields_.size());
    for (const auto &f : fields_) {
      Complex total{};
      for (int r = 0; r < h; ++r) {
        Complex row{};
        const Complex *px = &f(r, 0);
        for (int c = 0; c < w; ++c) row += px[c] * ex[c];
        total += row * ey[r];
      }
      out.push_back(total);
    }
    return out;
  }

  double power(double kx, double ky) const {
    double p = 0.0;
    for (const auto &v : evaluate(kx, ky)) p += std::norm(v);
    return p;
  }

 private:
  std::vector<ComplexGrid> fields_;
  double pixel_size_;
};

// Newton refinement of the peak of log power on shrinking finite-difference
// stencils. Works in bin units around the start point.
std::pair<double, double> refine_peak(const DtftProbe &probe, const FrequencyGrid &fg, double kx,
                                      double ky) {
  const double dkx = fg.dkx();
  const double dky = fg.dky();
  auto f = [&](double u, double v) {
    return std::log(std::max(probe.power(kx + u * dkx, ky + v * dky), 1e-300));
  };
  const std::array<double, 9> steps{0.5, 0.25, 0.1, 0.03, 0.01, 0.003, 0.001, 0.001, 0.001};
  double u0 = 0.0;
  double v0 = 0.0;
  for (double h : steps) {
    std::array<std::array<double, 3>, 3> s{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) s[i][j] = f(u0 + (j - 1) * h, v0 + (i - 1) * h);
    }
    const double gx = (s[1][2] - s[1][0]) / (2 * h);
    const double gy = (s[2][1] - s[0][1]) / (2 * h);
    const double hxx = (s[1][2] - 2 * s[1][1] + s[1][0]) / (h * h);
    const double hyy = (s[2][1] - 2 * s[1][1] + s[0][1]) / (h * h);
    const double hxy = (s[2][2] - s[2][0] - s[0][2] + s[0][0]) / (4 * h * h);
    const double det = hxx * hyy - hxy * hxy;
    double du = 0.0;
    double dv = 0.0;
    bool newton = false;
    if (hxx < 0.0 && det > 0.0) {
      du = -(hyy * gx - hxy * gy) / det;
      dv = -(hxx * gy - hxy * gx) / det;
      newton = std::abs(du) <= 2 * h && std::abs(dv) <= 2 * h;
    }
    if (!newton) {
      int bi = 1;
      int bj = 1;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (s[i][j] > s[bi][bj]) {
            bi = i;
            bj = j;
          }
        }
      }
      du = (bj - 1) * h;
      dv = (bi - 1) * h;
    }
    u0 += du;
    v0 += dv;
  }
  return {kx + u0 * dkx, ky + v0 * dky};
}

// Algebraic (Kasa) circle fit; returns the center. Falls back to the origin
// for degenerate point sets.
Complex fit_circle_center(const std::vector<Complex> &points) {
  double scale = 0.0;
  for (const auto &p : points) scale = std::max(scale, std::abs(p));
  if (scale == 0.0 || points.size() < 3) return {};
  Eigen::MatrixXd a(static_cast<Eigen::Index>(points.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Complex p = points[i] / scale;
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = p.real();
    a(row, 1) = p.imag();
    a(row, 2) = 1.0;
    b(row) = -std::norm(p);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto sv = svd.singularValues();
  if (sv(2) < 1e-9 * sv(0)) return {};
  const Eigen::Vector3d x = svd.solve(b);
  return Complex(-0.5 * x(0), -0.5 * x(1)) * scale;
}

ComplexGrid product(const ComplexGrid &a, const ComplexGrid &b) {
  ComplexGrid out = a;
  auto dst = out.values();
  const auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  return out;
}

// Side-band search data for one orientation.
struct AngleScan {
  ComplexGrid center;
  std::vector<ComplexGrid> residual;
  std::vector<double> score;  // normalized correlation power, every bin
  std::vector<char> region;   // search annulus, half plane
  double floor = 0.0;         // median score over the region
  int best_row = 0;
  int best_col = 0;
  double best = 0.0;

  double snr() const { return best / floor; }
};

double median_over(const std::vector<double> &values, const std::vector<char> &mask) {
  std::vector<double> picked;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) picked.push_back(values[i]);
  }
  if (picked.empty()) return std::numeric_limits<double>::min();
  auto mid = picked.begin() + static_cast<std::ptrdiff_t>(picked.size() / 2);
  std::nth_element(picked.begin(), mid, picked.end());
  return std::max(*mid, std::numeric_limits<double>::min());
}

AngleScan scan_angle(std::span<const ComplexGrid> spectra, const TransferFunction &otf) {
  const FrequencyGrid fg = otf.config().frequency_grid();
  const double kd = cutoff_frequency(otf.config());
  const int w = fg.width;
  const int h = fg.height;
  const auto &H = otf.grid();
  AngleScan scan;

  // The mean over phase steps holds the center band; the residuals hold only
  // side-band content.
  scan.center = ComplexGrid(w, h);
  for (const auto &s : spectra) scan.center += s;
  scan.center *= 1.0 / static_cast<double>(spectra.size());
  for (const auto &s : spectra) {
    scan.residual.push_back(s);
    scan.residual.back() -= scan.center;
  }

  // Cross-correlation of the OTF-weighted center band with each residual,
  // evaluated for all displacements at once in real space.
  const ComplexGrid a_spec = product(scan.center, H);
  const ComplexGrid a = ifft2(a_spec);
  const auto wx = hann(w);
  const auto wy = hann(h);
  scan.score.assign(static_cast<std::size_t>(w) * h, 0.0);
  for (const auto &res : scan.residual) {
    ComplexGrid field = ifft2(product(res, H));
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) field(r, c) *= std::conj(a(r, c)) * (wy[r] * wx[c]);
    }
    const ComplexGrid cc = fft2(field);
    for (std::size_t i = 0; i < scan.score.size(); ++i) scan.score[i] += std::norm(cc.values()[i]);
  }

  // Noise in the residuals reaches the correlation through |A(k)|^2 H(k+p)^2,
  // which falls off with |p|; dividing it out flattens the background.
  ComplexGrid a_power(w, h);
  ComplexGrid h_power(w, h);
  for (std::size_t i = 0; i < a_power.size(); ++i) {
    a_power.values()[i] = std::norm(a_spec.values()[i]);
    h_power.values()[i] = std::norm(H.values()[i]);
  }
  const ComplexGrid x = ifft2(a_power);
  ComplexGrid y = ifft2(h_power);
  for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] *= std::conj(x.values()[i]);
  const ComplexGrid spread = fft2(y);
  for (std::size_t i = 0; i < scan.score.size(); ++i) {
    const double e = std::abs(spread.values()[i]);
    scan.score[i] = e > 0.0 ? scan.score[i] / e : 0.0;
  }

  // Search the half plane ky > 0 (or ky == 0, kx > 0) inside the annulus
  // where a pattern peak can live.
  scan.region.assign(scan.score.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double k = std::hypot(fg.kx(c), fg.ky(r));
      const bool upper = r > h / 2 || (r == h / 2 && c > w / 2);
      if (upper && k >= 0.1 * kd && k <= 0.98 * kd) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        scan.region[i] = 1;
        if (scan.score[i] > scan.best) {
          scan.best = scan.score[i];
          scan.best_row = r;
          scan.best_col = c;
        }
      }
    }
  }
  scan.floor = median_over(scan.score, scan.region);
  return scan;
}

AngleEstimate refine_angle(const AngleScan &scan, const TransferFunction &otf, int row, int col,
                           double snr) {
  const OpticalConfig &config = otf.config();
  const FrequencyGrid fg = config.frequency_grid();
  const int w = fg.width;
  const int h = fg.height;
  const auto &H = otf.grid();

  // Subpixel refinement. Weighting each residual by H(2 k0 - k) makes the
  // side band S(k - k0) H(k0 + q) H(k0 - q) even about k0, so its real-space
  // field is a real image times e^{2 pi i k0.x} and the windowed transform
  // magnitude peaks exactly at k0. The weight is rebuilt once around the
  // refined peak.
  double kx = fg.kx(col);
  double ky = fg.ky(row);
  std::optional<DtftProbe> probe;
  for (int pass = 0; pass < 2; ++pass) {
    const ComplexGrid weight = otf.shifted(-2.0 * kx, -2.0 * ky);
    std::vector<ComplexGrid> fields;
    fields.reserve(scan.residual.size());
    for (const auto &res : scan.residual) fields.push_back(ifft2(product(res, weight)));
    probe.emplace(std::move(fields), config.pixel_size());
    std::tie(kx, ky) = refine_peak(*probe, fg, kx, ky);
  }

  // p_j = (e^{i phi_j} - mean_l e^{i phi_l}) * beta with beta real negative:
  // the points lie on a circle of radius |beta| whose center absorbs the
  // mean phasor, so non-equidistant steps are handled exactly.
  const auto points = probe->evaluate(kx, ky);
  const Complex circle_center = fit_circle_center(points);
  AngleEstimate est;
  est.kx = kx;
  est.ky = ky;
  est.peak_snr = snr;
  double radius_sum = 0.0;
  for (const auto &p : points) {
    est.phases.push_back(wrap_phase(std::arg(p - circle_center) - pi));
    radius_sum += std::abs(p - circle_center);
  }
  const double beta = radius_sum / static_cast<double>(points.size());

  // The same even weight applied to the center band gives the reference for
  // the modulation depth.
  const ComplexGrid even = product(otf.shifted(kx, ky), otf.shifted(-kx, -ky));
  ComplexGrid filtered(w, h);
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    const double hv = H.values()[i].real();
    if (hv > 1e-3) filtered.values()[i] = scan.center.values()[i] * even.values()[i].real() / hv;
  }
  const ComplexGrid reference = ifft2(filtered);
  const auto wx = hann(w);
  const auto wy = hann(h);
  Complex windowed_dc{};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) windowed_dc += wy[r] * wx[c] * reference(r, c);
  }
  est.modulation = std::abs(windowed_dc) > 0.0 ? 4.0 * beta / std::abs(windowed_dc) : 0.0;
  spdlog::debug("k0 = ({:.5f}, {:.5f}) /um, m = {:.3f}, peak SNR {:.1f}", kx, ky, est.modulation,
                snr);
  return est;
}

std::vector<ComplexGrid> frame_spectra(const RawSimStack &stack) {
  std::vector<ComplexGrid> out;
  out.reserve(stack.frames.size());
  for (const auto &f : stack.frames) out.push_back(fft2(f));
  return out;
}

std::vector<AngleEstimate> estimate_from_spectra(const RawSimStack &stack,
                                                 const std::vector<ComplexGrid> &spectra,
                                                 const TransferFunction &otf) {
  std::vector<AngleScan> scans;
  for (int a = 0; a < stack.n_angles; ++a) {
    std::span<const ComplexGrid> group(spectra.data() + a * stack.n_phases,
                                       static_cast<std::size_t>(stack.n_phases));
    scans.push_back(scan_angle(group, otf));
    spdlog::debug("angle {}: correlation peak SNR {:.1f}", a, scans.back().snr());
    if (scans.back().snr() < kMinPeakSnr) throw PatternNotFound(a, scans.back().snr());
  }
  std::vector<AngleEstimate> out;
  for (const auto &s : scans) out.push_back(refine_angle(s, otf, s.best_row, s.best_col, s.snr()));
  return out;
}

}  // namespace

void validate(const ReconParams &params) {
  if (!(params.wiener_w > 0.0)) throw Error(ErrorKind::usage, "Wiener parameter must be > 0");
  if (!(params.apodization_cutoff >= 0.0)) {
    throw Error(ErrorKind::usage, "apodization cutoff must be >= 0");
  }
  if (!(params.modulation_floor > 0.0)) {
    throw Error(ErrorKind::usage, "modulation floor must be > 0");
  }
}

double mixing_condition_number(std::span<const double> phases) {
  if (phases.size() < 3) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(mixing_matrix(phases));
  const auto sv = svd.singularValues();
  if (sv(2) <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / sv(2);
}

SeparatedBands separate_spectra(std::span<const ComplexGrid> spectra,
                                std::span<const double> phases) {
  if (spectra.size() != phases.size()) {
    throw Error(ErrorKind::usage, "band separation needs one phase per frame");
  }
  const double cond = mixing_condition_number(phases);
  if (!(cond < kMaxCondition)) {
    std::ostringstream msg;
    msg << "degenerate phase set: " << phases.size()
        << " phase step(s), mixing condition number " << cond;
    throw Error(ErrorKind::reconstruction, msg.str());
  }
  const int w = spectra.front().width();
  const int h = spectra.front().height();
  for (const auto &s : spectra) require_same_shape(w, h, s.width(), s.height());

  const Eigen::MatrixXcd unmix = mixing_matrix(phases).completeOrthogonalDecomposition().pseudoInverse();
  SeparatedBands out{ComplexGrid(w, h), ComplexGrid(w, h), ComplexGrid(w, h)};
  std::array<std::span<Complex>, 3> dst{out.center.values(), out.plus.values(),
                                        out.minus.values()};
  for (std::size_t j = 0; j < spectra.size(); ++j) {
    const auto src = spectra[j].values();
    for (int b = 0; b < 3; ++b) {
      const Complex coeff = unmix(b, static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < src.size(); ++i) dst[b][i] += coeff * src[i];
    }
  }
  return out;
}

SeparatedBands separate_bands(std::span<const Image2D> frames, std::span<const double> phases) {
  std::vector<ComplexGrid> spectra;
  spectra.reserve(frames.size());
  for (const auto &f : frames) spectra.push_back(fft2(f));
  return separate_spectra(spectra, phases);
}

std::vector<ComplexGrid> mix_bands(const SeparatedBands &bands, std::span<const double> phases) {
  std::vector<ComplexGrid> out;
  for (double phi : phases) {
    ComplexGrid f = bands.center;
    const Complex ep = std::polar(1.0, phi);
    const Complex em = std::polar(1.0, -phi);
    auto dst = f.values();
    auto p = bands.plus.values();
    auto m = bands.minus.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += ep * p[i] + em * m[i];
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<AngleEstimate> estimate_pattern_params(const RawSimStack &stack,
                                                   const TransferFunction &otf) {
  stack.check_consistency();
  if (stack.n_phases < 3) {
    throw Error(ErrorKind::reconstruction, "degenerate phase set: parameter estimation needs at "
                                           "least 3 phase steps per angle");
  }
  return estimate_from_spectra(stack, frame_spectra(stack), otf);
}

std::vector<AngleEstimate> known_pattern_params(const RawSimStack &stack) {
  stack.check_consistency();
  if (!stack.has_params()) {
    throw Error(ErrorKind::usage, "stack carries no pattern parameters");
  }
  std::vector<AngleEstimate> out;
  for (int a = 0; a < stack.n_angles; ++a) {
    AngleEstimate est;
    est.peak_snr = std::numeric_limits<double>::infinity();
    for (int j = 0; j < stack.n_phases; ++j) {
      const auto &p = stack.params[static_cast<std::size_t>(a * stack.n_phases + j)];
      est.kx += p.kx() / stack.n_phases;
      est.ky += p.ky() / stack.n_phases;
      est.modulation += p.m / stack.n_phases;
      est.phases.push_back(p.phi);
    }
    out.push_back(std::move(est));
  }
  return out;
}

ComplexGrid shift_band(const ComplexGrid &band, double kx, double ky, double pixel_size) {
  ComplexGrid field = ifft2(band);
  const int w = field.width();
  const int h = field.height();
  std::vector<Complex> ex(static_cast<std::size_t>(w)), ey(static_cast<std::size_t>(h));
  for (int c = 0; c < w; ++c) ex[c] = std::polar(1.0, -2.0 * pi * kx * c * pixel_size);
  for (int r = 0; r < h; ++r) ey[r] = std::polar(1.0, -2.0 * pi * ky * r * pixel_size);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) field(r, c) *= ey[r] * ex[c];
  }
  return fft2(field);
}

Image2D wiener_recombine(std::span<const BandSet> bands, const TransferFunction &otf,
                         const ReconParams &params) {
  validate(params);
  if (bands.empty()) throw Error(ErrorKind::reconstruction, "no bands to recombine");
  const OpticalConfig &config = otf.config();
  const FrequencyGrid fg = config.frequency_grid();
  const int w = fg.width;
  const int h = fg.height;
  const double kd = cutoff_frequency(config);

  double k0_max = 0.0;
  for (const auto &b : bands) k0_max = std::max(k0_max, std::hypot(b.params.kx, b.params.ky));
  const double cutoff = params.apodization_cutoff > 0.0 ? params.apodization_cutoff : kd + k0_max;

  ComplexGrid numerator(w, h);
  std::vector<double> denominator(static_cast<std::size_t>(w) * h, 0.0);
  const auto hc = otf.grid().values();
  for (const auto &b : bands) {
    require_same_shape(w, h, b.center.width(), b.center.height());
    if (b.params.modulation < params.modulation_floor) {
      spdlog::info("modulation estimate {:.3f} below floor, using {:.3f}", b.params.modulation,
                   params.modulation_floor);
    }
    const double m = std::max(b.params.modulation, params.modulation_floor);
    const double side_scale = -4.0 / m;
    const ComplexGrid hp = otf.shifted(b.params.kx, b.params.ky);
    const ComplexGrid hm = otf.shifted(-b.params.kx, -b.params.ky);
    auto num = numerator.values();
    const auto c0 = b.center.values();
    const auto cp = b.plus.values();
    const auto cm = b.minus.values();
    const auto vp = hp.values();
    const auto vm = hm.values();
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double h0 = hc[i].real();
      const double h1 = vp[i].real();
      const double h2 = vm[i].real();
      num[i] += h0 * c0[i] + side_scale * (h1 * cp[i] + h2 * cm[i]);
      denominator[i] += h0 * h0 + h1 * h1 + h2 * h2;
    }
  }

  const double w2 = params.wiener_w * params.wiener_w;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double k = std::hypot(fg.kx(c), fg.ky(r));
      const double apod = std::max(0.0, 1.0 - k / cutoff);
      numerator(r, c) *= apod / (denominator[i] + w2);
    }
  }
  return rescale_unit(real_part(ifft2(numerator), config.pixel_size()));
}

Image2D reconstruct(const RawSimStack &stack, const ReconParams &params) {
  validate(params);
  stack.check_consistency();
  if (stack.n_phases < 3) {
    throw Error(ErrorKind::reconstruction,
                "degenerate phase set: " + std::to_string(stack.n_phases) +
                    " phase step(s) per angle cannot separate three bands");
  }
  const TransferFunction otf = ideal_otf(stack.config);
  const auto spectra = frame_spectra(stack);
  const auto estimates = params.use_known_params ? known_pattern_params(stack)
                                                 : estimate_from_spectra(stack, spectra, otf);
  std::vector<BandSet> bands;
  bands.reserve(estimates.size());
  const double ps = stack.config.pixel_size();
  for (int a = 0; a < stack.n_angles; ++a) {
    const auto &est = estimates[static_cast<std::size_t>(a)];
    std::span<const ComplexGrid> group(spectra.data() + a * stack.n_phases,
                                       static_cast<std::size_t>(stack.n_phases));
    SeparatedBands sep = separate_spectra(group, est.phases);
    bands.push_back({std::move(sep.center), shift_band(sep.plus, est.kx, est.ky, ps),
                     shift_band(sep.minus, -est.kx, -est.ky, ps), est});
  }
  return wiener_recombine(bands, otf, params);
}

}  // namespace simrecon
