#pragma once

#include <string>
#include <vector>

#include "simrecon/image.hpp"

namespace simrecon {

/// 10 log10(peak^2 / MSE). Identical images give +infinity.
double psnr(const Image2D &a, const Image2D &b, double peak = 1.0);

/// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Image2D &a, const Image2D &b);

struct QualityRecord {
  std::string id;
  std::string method;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MethodSummary {
  std::string method;
  double mean_psnr = 0.0;  // over finite PSNR values only
  double mean_ssim = 0.0;
  int items = 0;
  int infinite_psnr = 0;   // excluded from mean_psnr
};

struct QualityReport {
  std::vector<QualityRecord> records;
  std::vector<std::string> notes;

  void add(QualityRecord record) { records.push_back(std::move(record)); }

  /// Aggregates per method in first-seen order.
  std::vector<MethodSummary> summarize() const;

  std::string to_csv() const;
  /// Fixed-width table: one row per method, mean PSNR [dB] and SSIM.
  std::string to_table() const;
};

}  // namespace simrecon
