#pragma once

// The render and bench commands behind the `apc` executable.

#include <apc/compositor.hpp>
#include <apc/config.hpp>
#include <apc/io.hpp>
#include <apc/metrics.hpp>
#include <apc/report.hpp>

#include <bit>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace apc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

// Thresholds applied by --check.
inline constexpr float kCheckMaxDiffVsSingleNode = 1e-4f;
inline constexpr double kCheckMinSsimVsSortLast = 0.95;

inline RenderSettings settings_for(const RunConfig& config, const Scene& scene) {
  RenderSettings s;
  s.step = config.step > 0.0 ? config.step : 0.5 * scene.partition.min_spacing();
  s.reference_step = config.reference_step > 0.0 ? config.reference_step : scene.nominal_spacing;
  s.threads = config.threads;
  return s;
}

inline std::vector<Camera> cameras_for(const RunConfig& config, const Scene& scene) {
  const Box b = scene.partition.bounds();
  const Vec3 center = (b.lo + b.hi) * 0.5;
  return orbit_cameras(center, config.orbit_radius, config.orbit_elevation, config.orbit, config.fov,
                       static_cast<double>(config.width) / config.height);
}

namespace detail {

inline std::string image_name(const std::string& scene, const std::string& what, int camera) {
  return scene + "_" + what + "_cam" + std::to_string(camera) + ".ppm";
}

inline std::vector<CostReport> cost_reports(const SegmentCensus& census, const RunConfig& config) {
  const CostModelOptions opts{config.moment_scalars, config.skip_empty_tiles, 64};
  std::vector<CostReport> out{cost_model(census, CostAlgorithm::apc, opts),
                              cost_model(census, CostAlgorithm::direct_send, opts)};
  if (std::has_single_bit(static_cast<unsigned>(census.ranks()))) {
    out.push_back(cost_model(census, CostAlgorithm::binary_swap, opts));
  }
  return out;
}

}  // namespace detail

// Renders every requested algorithm for every orbit camera and writes images,
// report.csv, and summary.txt under config.out.
inline int cmd_render(const RunConfig& config, std::ostream& log) {
  try {
    config.validate();
    const Scene scene = build_scene(config.scene);
    const RenderSettings settings = settings_for(config, scene);
    const std::vector<Camera> cameras = cameras_for(config, scene);
    const std::filesystem::path out_dir(config.out);
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "config.txt", run_config_to_text(config));

    const Background bg = config.background_color();
    PipelineOptions options;
    options.background = bg;
    options.moment_scalars = config.moment_scalars;
    const std::string& name = config.scene.name;
    const int n = config.scene.ranks;

    std::vector<ReportRow> rows;
    std::ostringstream summary;
    bool check_failed = false;
    summary << "scene " << name << ", ranks " << n << ", " << config.width << "x" << config.height << ", step "
            << settings.step << "\n";

    for (std::size_t ci = 0; ci < cameras.size(); ++ci) {
      const int cam = static_cast<int>(ci);
      std::optional<ApcResult> apc;
      std::optional<SortLastResult> sort_last;
      std::optional<ColorImage> single;

      if (config.wants("apc")) {
        apc = run_apc(scene.partition, cameras[ci], config.width, config.height, scene.transfer, settings,
                      config.params, options);
        write_ppm(out_dir / detail::image_name(name, "apc", cam), to_rgb8(apc->premultiplied, bg));
        for (auto& r : apc_rows(name, n, cam, apc->stats)) rows.push_back(std::move(r));
      }
      if (config.wants("sort_last")) {
        sort_last = run_sort_last(scene.partition, cameras[ci], config.width, config.height, scene.transfer, settings,
                                  options);
        write_ppm(out_dir / detail::image_name(name, "sort_last", cam), to_rgb8(sort_last->premultiplied, bg));
        for (auto& r : sort_last_rows(name, n, cam, sort_last->stats, sort_last->census)) rows.push_back(std::move(r));
        for (const auto& c : detail::cost_reports(sort_last->census, config)) rows.push_back(cost_row(name, cam, c));
        const Heatmap heat = segment_heatmap(sort_last->census.totals());
        write_ppm(out_dir / detail::image_name(name, "segment_heatmap", cam), to_rgb8(heat.image, Background::black()));
        summary << "camera " << cam << ": max segments per pixel " << heat.max_count << "\n";
      }
      if (config.wants("single_node_mboit")) {
        const Frame frame = make_frame(cameras[ci], config.width, config.height, scene.partition.bounds());
        single = render_single_node_mboit(scene.partition.all_bricks(), frame, scene.transfer, settings, config.params);
        write_ppm(out_dir / detail::image_name(name, "single_node_mboit", cam), to_rgb8(*single, bg));
      }

      if (config.compare && apc && sort_last) {
        const QualityReport q = compare_images(apc->premultiplied, sort_last->premultiplied, bg);
        rows.push_back(quality_row(name, n, cam, "apc_vs_sort_last", q));
        write_ppm(out_dir / detail::image_name(name, "diff_apc_sort_last", cam),
                  to_rgb8(diff_image(apc->image, sort_last->image, 3.0f), Background::black()));
        summary << "camera " << cam << ": apc vs sort_last ssim " << q.ssim << " mse " << q.mse << " psnr " << q.psnr
                << "\n";
        if (q.ssim < kCheckMinSsimVsSortLast) check_failed = true;
      }
      if (config.compare && apc && single) {
        const QualityReport q = compare_images(apc->premultiplied, *single, bg);
        rows.push_back(quality_row(name, n, cam, "apc_vs_single_node_mboit", q));
        write_ppm(out_dir / detail::image_name(name, "diff_apc_single_node_mboit", cam),
                  to_rgb8(diff_image(apc->image, composite_background(*single, bg), 3.0f), Background::black()));
        summary << "camera " << cam << ": apc vs single_node_mboit max channel diff " << q.max_channel_diff() << "\n";
        if (q.max_channel_diff() > kCheckMaxDiffVsSingleNode) check_failed = true;
      }
    }

    write_file(out_dir / "report.csv", format_report(rows));
    write_file(out_dir / "summary.txt", summary.str());
    log << summary.str();
    if (config.check && check_failed) {
      log << "check failed: a comparison missed its threshold\n";
      return kExitCheckFailed;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
}

// Weak-scaling style sweep over rank counts: APC and sort-last per orbit
// camera, with communication rows in bench.csv, wall-clock stage timings in
// bench_timings.csv, and one segment heatmap per (n, camera).
inline int cmd_bench(const RunConfig& config, std::ostream& log) {
  try {
    if (config.sweep.empty()) throw ConfigError("bench needs a non-empty sweep of rank counts");
    config.validate();
    const std::filesystem::path out_dir(config.out);
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "config.txt", run_config_to_text(config));

    PipelineOptions options;
    options.background = config.background_color();
    options.moment_scalars = config.moment_scalars;
    std::vector<ReportRow> rows;
    std::ostringstream timings;
    timings << "n,camera,algorithm,stage,kind,seconds,scale\n";

    for (int n : config.sweep) {
      RunConfig cfg = config;
      cfg.scene.ranks = n;
      cfg.validate();
      const Scene scene = build_scene(cfg.scene);
      const RenderSettings settings = settings_for(cfg, scene);
      const std::vector<Camera> cameras = cameras_for(cfg, scene);
      const std::string& name = cfg.scene.name;
      for (std::size_t ci = 0; ci < cameras.size(); ++ci) {
        const int cam = static_cast<int>(ci);
        const ApcResult apc = run_apc(scene.partition, cameras[ci], cfg.width, cfg.height, scene.transfer, settings,
                                      cfg.params, options);
        const SortLastResult sl = run_sort_last(scene.partition, cameras[ci], cfg.width, cfg.height, scene.transfer,
                                                settings, options);
        for (auto& r : apc_rows(name, n, cam, apc.stats)) rows.push_back(std::move(r));
        for (auto& r : sort_last_rows(name, n, cam, sl.stats, sl.census)) rows.push_back(std::move(r));
        for (const auto& c : detail::cost_reports(sl.census, cfg)) rows.push_back(cost_row(name, cam, c));
        const auto emit = [&](const char* algorithm, const std::vector<StageTiming>& ts) {
          for (const auto& t : ts) {
            timings << n << ',' << cam << ',' << algorithm << ',' << t.stage << ','
                    << (t.compositing ? "compositing" : "rendering") << ',' << std::setprecision(6) << t.seconds
                    << ",desk\n";
          }
        };
        emit("apc", apc.timings);
        emit("sort_last", sl.timings);
        const Heatmap heat = segment_heatmap(sl.census.totals());
        write_ppm(out_dir / ("segment_heatmap_n" + std::to_string(n) + "_cam" + std::to_string(cam) + ".ppm"),
                  to_rgb8(heat.image, Background::black()));
        log << "n=" << n << " camera " << cam << ": apc bytes " << apc.stats.total_bytes() << ", sort-last segments "
            << sl.stats.segments_exchanged << ", max segments per pixel " << heat.max_count << "\n";
      }
    }
    write_file(out_dir / "bench.csv", format_report(rows));
    write_file(out_dir / "bench_timings.csv", timings.str());
    log << "timings are single-machine wall clock (desk scale)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace apc
