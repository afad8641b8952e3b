#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "simrecon/bench.hpp"
#include "simrecon/config.hpp"
#include "simrecon/datagen.hpp"
#include "simrecon/error.hpp"
#include "simrecon/forward_model.hpp"
#include "simrecon/io.hpp"
#include "simrecon/metrics.hpp"
#include "simrecon/optics.hpp"
#include "simrecon/recon.hpp"

using namespace simrecon;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<fs::path> config_path;
  std::optional<std::string> log_level;
  std::optional<std::uint64_t> seed;
  std::optional<double> na;
  std::optional<double> wavelength;
  std::optional<double> pixel_size;
};

// Defaults < config file < flags.
ToolConfig resolve(const Globals &g) {
  ToolConfig config = load_config(g.config_path);
  if (g.log_level) config.log_level = *g.log_level;
  if (g.na) config.optics.na = *g.na;
  if (g.wavelength) config.optics.wavelength_em = *g.wavelength;
  if (g.pixel_size) config.optics.pixel_size = *g.pixel_size;
  return config;
}

void set_log_level(const std::string &level) {
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") {
    throw Error(ErrorKind::usage, "unknown log level '" + level + "'");
  }
  spdlog::set_level(parsed);
}

StackLayout layout_for(int frames, const ToolConfig &config) {
  return StackLayout{frames, config.illumination.n_phases};
}

void set_frames(ToolConfig &config, int frames) {
  const int n_phases = config.illumination.n_phases;
  if (frames < n_phases || frames % n_phases != 0) {
    throw Error(ErrorKind::usage, "--frames must be a multiple of the phase count (" +
                                      std::to_string(n_phases) + ")");
  }
  config.illumination.n_angles = frames / n_phases;
}

void write_json(const fs::path &path, const nlohmann::json &j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json provenance(const ToolConfig &config) {
  return nlohmann::json{{"schema_version", kSchemaVersion},
                        {"tool", kToolName},
                        {"version", kToolVersion},
                        {"config", to_json(config)}};
}

void print_report(const QualityReport &report, const std::optional<fs::path> &csv) {
  std::cout << report.to_table();
  for (const auto &note : report.notes) std::cout << "note: " << note << '\n';
  if (csv) write_text(*csv, report.to_csv());
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Structured illumination microscopy simulation, reconstruction and benchmarking",
               kToolName};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path,
                 std::string("JSON config file (default: $") + kConfigEnv + ")");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");
  app.add_option("--seed", g.seed, "Seed for all randomness");
  app.add_option("--na", g.na, "Numerical aperture");
  app.add_option("--wavelength", g.wavelength, "Emission wavelength [um]");
  app.add_option("--pixel-size", g.pixel_size, "Pixel size [um]");

  // dataset
  auto *dataset = app.add_subcommand("dataset", "Generate a simulated training/benchmark dataset");
  fs::path ds_source, ds_out;
  int ds_count = 1, ds_size = 512, ds_frames = 9, ds_threads = 0;
  double ds_eta_min = 0.0, ds_eta_max = 1.5, ds_split = 0.1;
  dataset->add_option("--source", ds_source, "Directory of source images")->required();
  dataset->add_option("--out", ds_out, "Output directory")->required();
  dataset->add_option("--count", ds_count, "Number of items")->capture_default_str();
  dataset->add_option("--size", ds_size, "Edge of the square items [px]")->capture_default_str();
  dataset->add_option("--eta-min", ds_eta_min, "Lower noise level")->capture_default_str();
  dataset->add_option("--eta-max", ds_eta_max, "Upper noise level")->capture_default_str();
  dataset->add_option("--frames", ds_frames, "Frames per stack")->capture_default_str();
  dataset->add_option("--split", ds_split, "Held-out fraction")->capture_default_str();
  dataset->add_option("--threads", ds_threads, "Worker threads (0: all cores)");

  // simulate
  auto *simulate = app.add_subcommand("simulate", "Simulate a raw SIM stack from one image");
  fs::path sim_in, sim_out;
  double sim_eta = 0.0, sim_theta = 0.0, sim_phi = 0.0;
  int sim_frames = 9;
  bool sim_no_jitter = false;
  simulate->add_option("--in", sim_in, "Sample image (grey, [0, 1])")->required();
  simulate->add_option("--out", sim_out, "Stack TIFF")->required();
  simulate->add_option("--eta", sim_eta, "Noise level")->capture_default_str();
  simulate->add_option("--theta", sim_theta, "First pattern orientation [rad]")->capture_default_str();
  simulate->add_option("--phi", sim_phi, "First pattern phase [rad]")->capture_default_str();
  simulate->add_option("--frames", sim_frames, "Frames per stack")->capture_default_str();
  simulate->add_flag("--no-jitter", sim_no_jitter, "Ideal patterns");

  // widefield
  auto *wide = app.add_subcommand("widefield", "Mean of the raw frames");
  fs::path wf_in, wf_out;
  int wf_frames = 9;
  wide->add_option("--in", wf_in, "Stack TIFF")->required();
  wide->add_option("--out", wf_out, "Output image")->required();
  wide->add_option("--frames", wf_frames, "Frames per stack without sidecar")->capture_default_str();

  // reconstruct
  auto *recon = app.add_subcommand("reconstruct", "Classical Wiener reconstruction");
  fs::path rc_in, rc_out;
  std::optional<fs::path> rc_known;
  std::optional<double> rc_wiener, rc_apod;
  int rc_frames = 9;
  recon->add_option("--in", rc_in, "Stack TIFF")->required();
  recon->add_option("--out", rc_out, "Output image")->required();
  recon->add_option("--wiener", rc_wiener, "Wiener parameter w (default 0.1)");
  recon->add_option("--apodization", rc_apod, "Apodization cutoff [cycles/um] (default k_d + k0)");
  recon->add_option("--known-params", rc_known, "Sidecar whose frame parameters are used as is");
  recon->add_option("--frames", rc_frames, "Frames per stack without sidecar")->capture_default_str();

  // metrics
  auto *metrics = app.add_subcommand("metrics", "PSNR and SSIM against a reference");
  std::optional<fs::path> mt_ref, mt_test, mt_manifest, mt_dir, mt_csv;
  std::string mt_split = "val";
  bool mt_raw = false;
  metrics->add_option("--ref", mt_ref, "Reference image");
  metrics->add_option("--test", mt_test, "Test image");
  metrics->add_option("--manifest", mt_manifest, "Batch mode: dataset manifest");
  metrics->add_option("--dir", mt_dir, "Batch mode: directory of <id>.tif outputs");
  metrics->add_option("--split", mt_split, "Batch mode: train, val or all")->capture_default_str();
  metrics->add_option("--csv", mt_csv, "Write per-item rows to CSV");
  metrics->add_flag("--no-normalize", mt_raw, "Score the test image without min-max rescaling");

  // bench
  auto *bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  auto *table = bench->add_subcommand("table", "Method comparison over a manifest");
  fs::path bt_manifest;
  std::string bt_methods = "widefield,classic", bt_split = "val";
  std::optional<fs::path> bt_csv;
  std::optional<double> bt_wiener;
  int bt_threads = 0;
  table->add_option("--manifest", bt_manifest, "Dataset manifest")->required();
  table->add_option("--methods", bt_methods, "widefield,classic,classic-known,external:<dir>")
      ->capture_default_str();
  table->add_option("--split", bt_split, "train, val or all")->capture_default_str();
  table->add_option("--csv", bt_csv, "Write per-item rows to CSV");
  table->add_option("--wiener", bt_wiener, "Wiener parameter w");
  table->add_option("--threads", bt_threads, "Worker threads (0: all cores)");

  auto *sweep = bench->add_subcommand("sweep", "SSIM/PSNR as a function of noise");
  fs::path bs_manifest, bs_out;
  std::string bs_etas = "0:9:1", bs_methods = "widefield,classic,classic-known", bs_split = "val";
  int bs_seeds = 5, bs_threads = 0;
  std::optional<fs::path> bs_plot, bs_export;
  sweep->add_option("--manifest", bs_manifest, "Dataset manifest")->required();
  sweep->add_option("--out", bs_out, "Sweep CSV")->required();
  sweep->add_option("--etas", bs_etas, "lo:hi:step or a comma-separated list")->capture_default_str();
  sweep->add_option("--seeds", bs_seeds, "Seeds per noise level")->capture_default_str();
  sweep->add_option("--methods", bs_methods, "Methods to run")->capture_default_str();
  sweep->add_option("--split", bs_split, "train, val or all")->capture_default_str();
  sweep->add_option("--plot", bs_plot, "SSIM plot PNG (default: <out> with .png)");
  sweep->add_option("--export", bs_export, "Write regenerated stacks for external methods");
  sweep->add_option("--threads", bs_threads, "Worker threads (0: all cores)");

  auto *target = bench->add_subcommand("target", "Synthetic resolution target");
  int tg_size = 512;
  fs::path tg_out;
  std::optional<fs::path> tg_stack;
  bool tg_contrast = false;
  target->add_option("--size", tg_size, "Edge [px], >= 256")->capture_default_str();
  target->add_option("--out", tg_out, "Target image")->required();
  target->add_option("--stack", tg_stack, "Also write a noiseless raw stack of the target");
  target->add_flag("--contrast", tg_contrast, "Report stripe contrasts of widefield and reconstruction");

  auto *plot = bench->add_subcommand("plot", "Plot a sweep CSV");
  fs::path pl_csv, pl_out;
  plot->add_option("--csv", pl_csv, "Sweep CSV")->required();
  plot->add_option("--out", pl_out, "PNG")->required();

  // otf
  auto *otf_cmd = app.add_subcommand("otf", "Export the ideal OTF and PSF");
  fs::path otf_out;
  std::optional<fs::path> psf_out;
  int otf_size = 512;
  otf_cmd->add_option("--out", otf_out, "OTF image, DC-centered")->required();
  otf_cmd->add_option("--psf", psf_out, "PSF image, centered, unit sum");
  otf_cmd->add_option("--size", otf_size, "Grid edge [px]")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt(kToolName));
  try {
    ToolConfig config = resolve(g);
    set_log_level(config.log_level);
    const std::uint64_t seed = g.seed.value_or(0);

    if (*dataset) {
      DatasetSpec spec;
      spec.source_dir = ds_source;
      spec.out_dir = ds_out;
      spec.count = ds_count;
      spec.target_size = ds_size;
      config.optics.size = ds_size;
      set_frames(config, ds_frames);
      spec.config = config;
      spec.eta_lo = ds_eta_min;
      spec.eta_hi = ds_eta_max;
      spec.master_seed = seed;
      spec.split = ds_split;
      spec.threads = ds_threads;
      const Manifest m = generate_dataset(spec);
      std::cout << m.entries.size() << " item(s), " << m.select("val").size() << " held out, in "
                << ds_out.string() << '\n';
    } else if (*simulate) {
      set_frames(config, sim_frames);
      config.validate();
      Image2D sample = read_image(sim_in, config.optics.pixel_size);
      const OpticalConfig optics = config.optical_config(sample.width(), sample.height());
      IlluminationParams base = config.base_illumination(optics);
      base.theta = sim_theta;
      base.phi = sim_phi;
      const JitterSpec jitter = sim_no_jitter ? JitterSpec{0.0, 0.0, 0.0} : config.jitter;
      const RawSimStack stack = simulate_stack(sample, optics, base, config.illumination.n_angles,
                                               config.illumination.n_phases, jitter,
                                               NoiseSpec{sim_eta}, seed);
      write_stack(stack, sim_out, to_json(config));
    } else if (*wide) {
      const RawSimStack stack = read_stack(wf_in, config.optical_config(), layout_for(wf_frames, config));
      write_image(rescale_unit(widefield(stack)), wf_out);
    } else if (*recon) {
      if (rc_wiener) config.recon.wiener_w = *rc_wiener;
      if (rc_apod) config.recon.apodization_cutoff = *rc_apod;
      RawSimStack stack = read_stack(rc_in, config.optical_config(), layout_for(rc_frames, config));
      ReconParams params = config.recon;
      params.use_known_params = false;
      if (rc_known) {
        stack.params = read_sidecar_params(*rc_known);
        if (!stack.has_params()) {
          throw Error(ErrorKind::data, rc_known->string() + " lists " +
                                           std::to_string(stack.params.size()) + " frames, stack has " +
                                           std::to_string(stack.frame_count()));
        }
        params.use_known_params = true;
      }
      const Image2D out = reconstruct(stack, params);
      write_image(out, rc_out);
      auto meta = provenance(config);
      meta["input"] = rc_in.string();
      meta["known_params"] = rc_known ? rc_known->string() : "";
      write_json(sidecar_path(rc_out), meta);
    } else if (*metrics) {
      if (mt_manifest) {
        if (!mt_dir) throw Error(ErrorKind::usage, "batch metrics need --manifest and --dir");
        const Manifest m = read_manifest(*mt_manifest);
        const auto report = compare_methods(
            m, {MethodSpec::parse("external:" + mt_dir->string())}, config.recon, mt_split);
        print_report(report, mt_csv);
      } else {
        if (!mt_ref || !mt_test) throw Error(ErrorKind::usage, "metrics need --ref and --test");
        const Image2D ref = read_image(*mt_ref);
        const Image2D raw = read_image(*mt_test);
        const Image2D test = mt_raw ? raw : rescale_unit(raw);
        QualityReport report;
        report.add({mt_test->stem().string(), "test", psnr(ref, test), ssim(ref, test)});
        std::printf("PSNR %.4f dB\nSSIM %.6f\n", report.records[0].psnr_db, report.records[0].ssim);
        if (mt_csv) write_text(*mt_csv, report.to_csv());
      }
    } else if (*bench) {
      if (*table) {
        if (bt_wiener) config.recon.wiener_w = *bt_wiener;
        const Manifest m = read_manifest(bt_manifest);
        print_report(compare_methods(m, parse_methods(bt_methods), config.recon, bt_split, bt_threads),
                     bt_csv);
      } else if (*sweep) {
        SweepSpec spec;
        spec.etas = parse_etas(bs_etas);
        spec.seeds = bs_seeds;
        spec.seed = seed;
        spec.methods = parse_methods(bs_methods);
        spec.split = bs_split;
        spec.threads = bs_threads;
        if (bs_export) spec.export_dir = *bs_export;
        const Manifest m = read_manifest(bs_manifest);
        const SweepResult result = noise_sweep(m, spec);
        write_text(bs_out, result.to_csv());
        const std::string failures = result.failures_csv();
        fs::path failures_path = bs_out;
        failures_path.replace_extension(".failures.csv");
        write_text(failures_path, failures);
        fs::path png = bs_plot.value_or(fs::path(bs_out).replace_extension(".png"));
        plot_sweep(result, png);
        int failed = 0;
        for (const auto &c : result.cells) failed += c.failed ? 1 : 0;
        std::cout << result.cells.size() - failed << " cell(s) written to " << bs_out.string() << ", "
                  << failed << " failed (" << failures_path.string() << "), plot " << png.string()
                  << '\n';
      } else if (*target) {
        const OpticalConfig optics = config.optical_config(tg_size, tg_size);
        const Image2D img = resolution_target(tg_size, optics);
        write_image(img, tg_out);
        if (tg_stack || tg_contrast) {
          const IlluminationParams base = config.base_illumination(optics);
          const RawSimStack stack = simulate_stack(img, optics, base, config.illumination.n_angles,
                                                   config.illumination.n_phases, config.jitter,
                                                   NoiseSpec{0.0}, seed);
          if (tg_stack) write_stack(stack, *tg_stack, to_json(config));
          if (tg_contrast) {
            const Image2D wf = rescale_unit(widefield(stack));
            const Image2D rc = reconstruct(stack, config.recon);
            std::printf("%8s %10s %10s %10s\n", "k/k_d", "truth", "widefield", "classic");
            for (const auto &b : target_layout(tg_size, optics).blocks) {
              const Region r = block_region(b);
              std::printf("%8.2f %10.4f %10.4f %10.4f\n", b.relative,
                          stripe_contrast(img, b.frequency, 0.0, r),
                          stripe_contrast(wf, b.frequency, 0.0, r),
                          stripe_contrast(rc, b.frequency, 0.0, r));
            }
          }
        }
      } else if (*plot) {
        plot_sweep(read_sweep_csv(pl_csv), pl_out);
      }
    } else if (*otf_cmd) {
      const TransferFunction otf = ideal_otf(config.optical_config(otf_size, otf_size));
      write_image(real_part(otf.grid(), otf.config().pixel_size()), otf_out);
      if (psf_out) write_image(psf_from_otf(otf), *psf_out);
    }
    return 0;
  } catch (const Error &e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception &e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ErrorKind::data);
  }
}
