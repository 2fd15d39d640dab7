#pragma once

// CSV run reports. Communication rows and image-quality rows share one file:
//
//   scene,n,camera,stage,algorithm,bytes,messages,avg_segments_per_nonempty_pixel,ssim,mse,psnr,max_abs_diff
//
// Columns that do not apply to a row are left empty.

#include <apc/comm.hpp>
#include <apc/compositor.hpp>
#include <apc/config.hpp>
#include <apc/metrics.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace apc {

inline constexpr std::string_view kReportHeader =
    "scene,n,camera,stage,algorithm,bytes,messages,avg_segments_per_nonempty_pixel,ssim,mse,psnr,max_abs_diff";

struct ReportRow {
  std::string scene;
  int n{1};
  int camera{0};
  std::string stage;
  std::string algorithm;
  std::optional<std::uint64_t> bytes;
  std::optional<std::uint64_t> messages;
  std::optional<double> avg_segments;
  std::optional<QualityReport> quality;
};

namespace detail {

inline std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << v;
  return s.str();
}

}  // namespace detail

inline std::string format_row(const ReportRow& r) {
  std::ostringstream s;
  s << r.scene << ',' << r.n << ',' << r.camera << ',' << r.stage << ',' << r.algorithm << ',';
  if (r.bytes) s << *r.bytes;
  s << ',';
  if (r.messages) s << *r.messages;
  s << ',';
  if (r.avg_segments) s << detail::format_metric(*r.avg_segments);
  s << ',';
  if (r.quality) {
    s << detail::format_metric(r.quality->ssim) << ',' << detail::format_metric(r.quality->mse) << ','
      << detail::format_metric(r.quality->psnr) << ',' << detail::format_metric(r.quality->max_channel_diff());
  } else {
    s << ",,,";
  }
  return s.str();
}

inline std::string format_report(const std::vector<ReportRow>& rows) {
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& r : rows) out += format_row(r) + '\n';
  return out;
}

// Rows for the two APC reductions, as counted by the rank group, plus the
// moment traffic under the other scalar count (4 without b0, or 5 with it).
inline std::vector<ReportRow> apc_rows(const std::string& scene, int n, int camera, const CommStats& s) {
  CommStats other = s;
  other.moment_scalars = s.moment_scalars == 5 ? 4 : 5;
  const std::string alt = "moments_allreduce_" + std::to_string(other.moment_scalars) + "_scalars";
  return {{scene, n, camera, "moments_allreduce", "apc", s.bytes_moments_allreduce(), 1, std::nullopt, std::nullopt},
          {scene, n, camera, "color_reduce", "apc", s.bytes_color_reduce(), 1, std::nullopt, std::nullopt},
          {scene, n, camera, alt, "apc", other.bytes_moments_allreduce(), 1, std::nullopt, std::nullopt}};
}

inline std::vector<ReportRow> sort_last_rows(const std::string& scene, int n, int camera, const CommStats& s,
                                             const SegmentCensus& census) {
  std::uint64_t nonempty = 0;
  for (std::size_t p = 0; p < census.pixels(); ++p) nonempty += census.nonempty(p) ? 1 : 0;
  const double avg = nonempty ? static_cast<double>(s.segments_exchanged) / static_cast<double>(nonempty) : 0.0;
  return {{scene, n, camera, "segment_exchange", "sort_last", s.bytes_segments(), s.messages, avg, std::nullopt},
          {scene, n, camera, "segment_exchange_color_only", "sort_last", s.bytes_segments_color_only(), s.messages, avg,
           std::nullopt}};
}

inline ReportRow cost_row(const std::string& scene, int camera, const CostReport& c) {
  return {scene, c.ranks, camera, "cost_model", std::string(to_string(c.algorithm)), c.payload_bytes, c.messages,
          c.avg_per_nonempty_pixel, std::nullopt};
}

inline ReportRow quality_row(const std::string& scene, int n, int camera, const std::string& pair,
                             const QualityReport& q) {
  return {scene, n, camera, "quality", pair, std::nullopt, std::nullopt, std::nullopt, q};
}

}  // namespace apc
