#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>

#include "scenes.hpp"
#include "simrecon/config.hpp"
#include "simrecon/error.hpp"
#include "simrecon/forward_model.hpp"
#include "simrecon/io.hpp"

using namespace simrecon;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

RawSimStack small_stack(std::uint64_t seed, double eta = 0.3) {
  const auto optics = OpticalConfig::defaults(64, 48);
  const auto sample = testing_support::natural_scene(64, 0.05, seed);
  Image2D crop(64, 48, 0.05);
  for (int r = 0; r < 48; ++r) {
    for (int c = 0; c < 64; ++c) crop(r, c) = sample(r, c);
  }
  auto base = default_illumination(optics);
  base.theta = 0.4;
  return simulate_stack(crop, optics, base, 3, 3, JitterSpec::defaults(), NoiseSpec{eta}, seed);
}

void write_pages_u16(const fs::path &path, int pages, int w, int h, std::vector<cv::Mat> *out = nullptr) {
  std::vector<cv::Mat> mats;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 65535);
  for (int p = 0; p < pages; ++p) {
    cv::Mat m(h, w, CV_16U);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) m.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(u(rng));
    }
    mats.push_back(m);
  }
  REQUIRE(cv::imwritemulti(path.string(), mats));
  if (out) *out = mats;
}

int error_code_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.exit_code();
  }
  return 0;
}

}  // namespace

TEST_CASE("write_stack then read_stack is bit-identical in frames and params") {
  TempDir dir("io_roundtrip");
  const RawSimStack stack = small_stack(11);
  const fs::path path = dir / "stack.tif";
  write_stack(stack, path, to_json(ToolConfig{}));
  CHECK(fs::exists(sidecar_path(path)));
  CHECK(sidecar_path(path).filename() == "stack.tif.json");

  const RawSimStack back = read_stack(path, OpticalConfig::defaults(16, 16));
  REQUIRE(back.frame_count() == 9);
  CHECK(back.n_angles == 3);
  CHECK(back.n_phases == 3);
  CHECK(back.config == stack.config);
  CHECK(back.seed == stack.seed);
  CHECK(back.noise == stack.noise);
  for (int f = 0; f < 9; ++f) {
    const auto a = stack.frames[f].pixels();
    const auto b = back.frames[f].pixels();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(b[i] == static_cast<double>(static_cast<float>(a[i])));
    }
  }
  REQUIRE(back.params.size() == stack.params.size());
  for (std::size_t f = 0; f < stack.params.size(); ++f) {
    CHECK(back.params[f] == stack.params[f]);
  }

  // Writing the read stack again reproduces the same bytes.
  write_stack(back, dir / "again.tif", to_json(ToolConfig{}));
  CHECK(testing_support::file_bytes(path) == testing_support::file_bytes(dir / "again.tif"));
}

TEST_CASE("sidecar carries provenance and the resolved config") {
  TempDir dir("io_sidecar");
  ToolConfig config;
  config.recon.wiener_w = 0.25;
  const RawSimStack stack = small_stack(3);
  write_stack(stack, dir / "s.tif", to_json(config));
  std::ifstream in(sidecar_path(dir / "s.tif"));
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("schema_version") == kSchemaVersion);
  CHECK(j.at("tool") == kToolName);
  CHECK(j.at("version") == kToolVersion);
  CHECK(j.at("width") == 64);
  CHECK(j.at("height") == 48);
  CHECK(j.at("frames").size() == 9);
  CHECK(j.at("noise").at("eta") == doctest::Approx(0.3));
  CHECK(j.at("config").at("recon").at("wiener") == doctest::Approx(0.25));
  CHECK(j.at("optics").at("cutoff_frequency") == doctest::Approx(2 * 1.2 / 0.510));
}

TEST_CASE("9-page 16-bit TIFF without sidecar is 3 angles x 3 phases in page order") {
  TempDir dir("io_u16");
  std::vector<cv::Mat> mats;
  write_pages_u16(dir / "raw.tif", 9, 40, 32, &mats);
  const RawSimStack stack = read_stack(dir / "raw.tif", OpticalConfig::defaults());
  REQUIRE(stack.frame_count() == 9);
  CHECK(stack.n_angles == 3);
  CHECK(stack.n_phases == 3);
  CHECK_FALSE(stack.has_params());
  CHECK(stack.config.width() == 40);
  CHECK(stack.config.height() == 32);
  CHECK(stack.angle_of(5) == 1);
  CHECK(stack.phase_of(5) == 2);
  for (int f : {0, 4, 8}) {
    for (int r : {0, 17, 31}) {
      for (int c : {0, 9, 39}) {
        CHECK(stack.frames[f](r, c) == mats[f].at<std::uint16_t>(r, c) / 65535.0);
      }
    }
  }
}

TEST_CASE("page counts that do not match the grouping are data errors") {
  TempDir dir("io_pages");
  write_pages_u16(dir / "seven.tif", 7, 32, 32);
  CHECK(error_code_of([&] { read_stack(dir / "seven.tif", OpticalConfig::defaults()); }) == 3);
  write_pages_u16(dir / "two.tif", 2, 32, 32);
  CHECK(error_code_of([&] { read_stack(dir / "two.tif", OpticalConfig::defaults()); }) == 3);

  write_pages_u16(dir / "eighteen.tif", 18, 32, 32);
  CHECK(error_code_of([&] { read_stack(dir / "eighteen.tif", OpticalConfig::defaults()); }) == 3);
  CHECK(read_stack_series(dir / "eighteen.tif", OpticalConfig::defaults()).size() == 2);

  // Six pages group as 2 angles of 3 phases.
  write_pages_u16(dir / "six.tif", 6, 32, 32);
  const auto six = read_stack(dir / "six.tif", OpticalConfig::defaults(), StackLayout{6, 3});
  CHECK(six.n_angles == 2);
  CHECK(error_code_of([&] {
          read_stack(dir / "six.tif", OpticalConfig::defaults(), StackLayout{6, 4});
        }) == 2);
}

TEST_CASE("mixed page sizes raise a dimension error naming the axis") {
  TempDir dir("io_mixed");
  std::vector<cv::Mat> mats;
  for (int p = 0; p < 9; ++p) mats.emplace_back(32, p == 4 ? 30 : 32, CV_16U, cv::Scalar(100));
  REQUIRE(cv::imwritemulti((dir / "mixed.tif").string(), mats));
  try {
    read_stack(dir / "mixed.tif", OpticalConfig::defaults());
    FAIL("expected a dimension error");
  } catch (const DimensionError &e) {
    CHECK(e.axis().find('x') == 0);
    CHECK(e.exit_code() == 3);
  }
}

TEST_CASE("unreadable and 8-bit stacks are data errors") {
  TempDir dir("io_bad");
  CHECK(error_code_of([&] { read_stack(dir / "missing.tif", OpticalConfig::defaults()); }) == 3);
  {
    std::ofstream junk(dir / "junk.tif");
    junk << "not a tiff";
  }
  CHECK(error_code_of([&] { read_stack(dir / "junk.tif", OpticalConfig::defaults()); }) == 3);
  std::vector<cv::Mat> mats(9, cv::Mat(16, 16, CV_8U, cv::Scalar(3)));
  REQUIRE(cv::imwritemulti((dir / "u8.tif").string(), mats));
  CHECK(error_code_of([&] { read_stack(dir / "u8.tif", OpticalConfig::defaults()); }) == 3);
}

TEST_CASE("PNG export maps p to round(255 p) and clips out-of-range values") {
  TempDir dir("io_png");
  Image2D img(6, 1, 1.0);
  const double values[6] = {0.0, 0.5, 1.0, 0.2, -0.2, 1.3};
  for (int c = 0; c < 6; ++c) img(0, c) = values[c];
  write_image(img, dir / "q.png");
  const cv::Mat raw = cv::imread((dir / "q.png").string(), cv::IMREAD_UNCHANGED);
  REQUIRE(raw.type() == CV_8UC1);
  const int expected[6] = {0, 128, 255, 51, 0, 255};
  for (int c = 0; c < 6; ++c) CHECK(raw.at<std::uint8_t>(0, c) == expected[c]);

  // 8-bit round trip is lossy but within half a quantization step.
  const Image2D back = read_image(dir / "q.png");
  for (int c = 0; c < 4; ++c) CHECK(std::abs(back(0, c) - values[c]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("float TIFF image round trip is lossless for float32 values") {
  TempDir dir("io_tif");
  Image2D img(33, 17, 0.05);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  for (double &v : img.pixels()) v = static_cast<float>(g(rng));
  write_image(img, dir / "f.tif");
  const Image2D back = read_image(dir / "f.tif", 0.05);
  CHECK(back == img);
  write_image(back, dir / "g.tif");
  CHECK(testing_support::file_bytes(dir / "f.tif") == testing_support::file_bytes(dir / "g.tif"));
}

TEST_CASE("colour images reduce to Rec. 709 luma") {
  TempDir dir("io_rgb");
  cv::Mat bgr(2, 2, CV_8UC3, cv::Scalar(255, 0, 0));  // pure blue
  REQUIRE(cv::imwrite((dir / "b.png").string(), bgr));
  const Image2D grey = read_image(dir / "b.png");
  CHECK(grey(1, 1) == doctest::Approx(0.0722).epsilon(1e-9));
}

TEST_CASE("config layering: defaults < file < explicit overrides") {
  TempDir dir("io_config");
  const ToolConfig defaults;
  CHECK(defaults.optics.na == 1.2);
  CHECK(defaults.illumination.k0_rel == 0.8);
  CHECK(defaults.recon.wiener_w == 0.1);

  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"optics": {"na": 1.1}, "recon": {"wiener": 0.05}, "log_level": "debug"})";
  }
  ::unsetenv(kConfigEnv);
  ToolConfig c = load_config(dir / "cfg.json");
  CHECK(c.optics.na == 1.1);
  CHECK(c.optics.wavelength_em == 0.510);
  CHECK(c.recon.wiener_w == 0.05);
  CHECK(c.log_level == "debug");
  merge_json(c, nlohmann::json{{"recon", {{"wiener", 0.2}}}});
  CHECK(c.recon.wiener_w == 0.2);
  CHECK(c.optics.na == 1.1);

  // The environment variable names the file when no path is given.
  ::setenv(kConfigEnv, (dir / "cfg.json").c_str(), 1);
  CHECK(load_config(std::nullopt).optics.na == 1.1);
  ::unsetenv(kConfigEnv);
  CHECK(load_config(std::nullopt).optics.na == 1.2);

  // Serialization round trip.
  ToolConfig r;
  merge_json(r, to_json(c));
  CHECK(to_json(r) == to_json(c));

  {
    std::ofstream f(dir / "bad.json");
    f << R"({"optics": {"numerical_aperture": 1.1}})";
  }
  CHECK(error_code_of([&] { load_config(dir / "bad.json"); }) == 2);
  {
    std::ofstream f(dir / "broken.json");
    f << "{ not json";
  }
  CHECK(error_code_of([&] { load_config(dir / "broken.json"); }) == 2);
  CHECK(error_code_of([&] { load_config(dir / "absent.json"); }) != 0);
}

TEST_CASE("float32 stacks are readable by a foreign TIFF reader") {
  if (std::system("python3 -c 'import PIL, numpy' > /dev/null 2>&1") != 0) {
    MESSAGE("python3 with Pillow and numpy not available; skipped");
    return;
  }
  TempDir dir("io_interop");
  const RawSimStack stack = small_stack(21);
  write_stack(stack, dir / "s.tif", to_json(ToolConfig{}));
  const fs::path script = dir / "check.py";
  {
    std::ofstream py(script);
    py << "import sys, json, numpy as np\n"
          "from PIL import Image\n"
          "im = Image.open(sys.argv[1])\n"
          "out = []\n"
          "for i in range(im.n_frames):\n"
          "    im.seek(i)\n"
          "    assert im.mode == 'F', im.mode\n"
          "    a = np.array(im, dtype=np.float32)\n"
          "    out.append([a.shape[0], a.shape[1], float(a[5, 7]), float(a.sum(dtype=np.float64))])\n"
          "json.dump(out, open(sys.argv[2], 'w'))\n";
  }
  const std::string cmd = "python3 " + script.string() + " " + (dir / "s.tif").string() + " " +
                          (dir / "out.json").string();
  REQUIRE(std::system(cmd.c_str()) == 0);
  std::ifstream in(dir / "out.json");
  const auto j = nlohmann::json::parse(in);
  REQUIRE(j.size() == 9);
  for (int f = 0; f < 9; ++f) {
    CHECK(j[f][0] == 48);
    CHECK(j[f][1] == 64);
    CHECK(j[f][2].get<double>() == static_cast<double>(static_cast<float>(stack.frames[f](5, 7))));
    double sum = 0.0;
    for (double v : stack.frames[f].pixels()) sum += static_cast<float>(v);
    CHECK(j[f][3].get<double>() == doctest::Approx(sum).epsilon(1e-12));
  }
}
