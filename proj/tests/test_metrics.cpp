#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "simrecon/error.hpp"
#include "simrecon/metrics.hpp"

using namespace simrecon;
using testing_support::ssim_oracle;

namespace {

Image2D random_image(int w, int h, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u;
  Image2D img(w, h, 1.0);
  for (double &v : img.pixels()) v = u(rng);
  return img;
}

}  // namespace

TEST_CASE("PSNR closed forms") {
  const Image2D zero(8, 8, 1.0, 0.0);
  const Image2D half(8, 8, 1.0, 0.5);
  CHECK(std::abs(psnr(zero, half) - 10 * std::log10(4.0)) < 1e-9);
  CHECK(std::abs(psnr(zero, half) - 6.0206) < 1e-4);
  const Image2D tenth(8, 8, 1.0, 0.1);
  CHECK(std::abs(psnr(zero, tenth) - 20.0) < 1e-6);
  CHECK(std::isinf(psnr(half, half)));
  CHECK(psnr(half, half) > 0);
  CHECK_THROWS_AS(psnr(zero, Image2D(8, 9, 1.0)), DimensionError);
  CHECK_THROWS_AS(psnr(zero, half, 0.0), Error);
}

TEST_CASE("PSNR decreases as noise grows") {
  std::mt19937_64 rng(5);
  const Image2D a = random_image(32, 32, rng);
  double previous = std::numeric_limits<double>::infinity();
  for (double sd : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    std::mt19937_64 noise_rng(9);
    std::normal_distribution<double> g(0.0, sd);
    Image2D b = a;
    for (double &v : b.pixels()) v += g(noise_rng);
    const double value = psnr(a, b);
    CHECK(value < previous);
    previous = value;
  }
}

TEST_CASE("SSIM matches the per-window oracle") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 20; ++i) {
    const Image2D a = random_image(16, 16, rng);
    const Image2D b = random_image(16, 16, rng);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-9);
  }
  const Image2D a = random_image(23, 17, rng);
  Image2D b = a;
  for (double &v : b.pixels()) v = 0.7 * v + 0.1;
  CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-9);
}

TEST_CASE("SSIM identities") {
  std::mt19937_64 rng(2);
  const Image2D a = random_image(20, 20, rng);
  const Image2D b = random_image(20, 20, rng);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  CHECK(ssim(a, b) < 1.0);
  const Image2D c(16, 16, 1.0, 0.3);
  CHECK(ssim(c, c) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(a, Image2D(20, 21, 1.0)), DimensionError);
  CHECK_THROWS_AS(ssim(Image2D(8, 8, 1.0), Image2D(8, 8, 1.0)), Error);
}

TEST_CASE("quality report aggregates and flags infinite PSNR") {
  QualityReport report;
  report.add({"a", "widefield", 20.0, 0.5});
  report.add({"b", "widefield", 22.0, 0.7});
  report.add({"a", "external", std::numeric_limits<double>::infinity(), 1.0});
  report.add({"b", "external", 30.0, 0.9});
  const auto summary = report.summarize();
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].method == "widefield");
  CHECK(summary[0].mean_psnr == doctest::Approx(21.0));
  CHECK(summary[0].mean_ssim == doctest::Approx(0.6));
  CHECK(summary[1].mean_psnr == doctest::Approx(30.0));
  CHECK(summary[1].infinite_psnr == 1);
  CHECK(summary[1].items == 2);
  const std::string csv = report.to_csv();
  CHECK(csv.rfind("id,method,psnr_db,ssim\n", 0) == 0);
  CHECK(csv.find("a,external,inf,1") != std::string::npos);
  const std::string table = report.to_table();
  CHECK(table.find("identical to ground truth") != std::string::npos);

  QualityReport single;
  single.add({"x", "widefield", 25.0, 0.8});
  CHECK(single.summarize().size() == 1);
}
