#pragma once

// End-to-end pipelines over a simulated rank group: the two-reduction moment
// pipeline, the segment-based sort-last baseline, and the communication cost
// models used to compare them.

#include <apc/comm.hpp>
#include <apc/error.hpp>
#include <apc/image.hpp>
#include <apc/moments.hpp>
#include <apc/renderer.hpp>
#include <apc/scene.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apc {

struct PipelineOptions {
  Background background{Background::white()};
  int moment_scalars{5};
  bool keep_partials{false};
  // Sort-last only: stop blending a pixel once alpha reaches the threshold.
  bool early_termination{false};
  double termination_alpha{0.999};
};

struct StageTiming {
  std::string stage;
  bool compositing;  // false for local rendering stages
  double seconds;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Threads per rank worker so the whole group roughly fills the machine.
inline RenderSettings per_rank_settings(RenderSettings settings, int ranks) {
  const int total = resolve_thread_count(settings.threads);
  settings.threads = std::max(1, total / std::max(ranks, 1));
  return settings;
}

}  // namespace detail

struct ApcResult {
  ColorImage premultiplied;  // reduced image before the background
  ColorImage image;          // composited over the background
  MomentImage global_moments;
  CommStats stats;
  std::vector<StageTiming> timings;
  std::vector<ColorImage> partials;  // per rank, when requested
};

// Moment pass per rank, all-reduce of the moments, resolve pass per rank,
// reduce of the color partials onto rank 0, background composite.
inline ApcResult run_apc(const ScenePartition& scene, const Camera& camera, int width, int height,
                         const TransferFunction& tf, const RenderSettings& settings,
                         const ReconstructionParams& params, const PipelineOptions& options = {}) {
  scene.validate();
  settings.validate();
  params.validate();
  const Frame frame = make_frame(camera, width, height, scene.bounds());
  const RenderSettings rank_settings = detail::per_rank_settings(settings, scene.ranks);

  RankGroup group(scene.ranks, options.moment_scalars);
  std::vector<double> moment_seconds(static_cast<std::size_t>(scene.ranks));
  std::vector<double> allreduce_seconds(moment_seconds.size());
  std::vector<double> resolve_seconds(moment_seconds.size());
  std::vector<double> reduce_seconds(moment_seconds.size());
  std::vector<ColorImage> partials(options.keep_partials ? moment_seconds.size() : 0);
  ApcResult result;

  group.run([&](int rank) {
    const auto r = static_cast<std::size_t>(rank);
    const BrickSet bricks = scene.bricks_for_rank(rank);
    try {
      detail::Stopwatch sw;
      MomentImage local = render_moment_pass(bricks, frame, tf, rank_settings, params.absorbance_max);
      moment_seconds[r] = sw.seconds();

      detail::Stopwatch sw_all;
      const MomentImage global = group.allreduce_add_moments(rank, std::move(local));
      allreduce_seconds[r] = sw_all.seconds();

      detail::Stopwatch sw_res;
      ColorImage partial = render_resolve_pass(bricks, frame, tf, rank_settings, global, params);
      resolve_seconds[r] = sw_res.seconds();
      if (options.keep_partials) partials[r] = partial;

      detail::Stopwatch sw_red;
      std::optional<ColorImage> reduced = group.reduce_add_color(rank, std::move(partial), 0);
      reduce_seconds[r] = sw_red.seconds();
      if (reduced) {
        result.premultiplied = std::move(*reduced);
        result.global_moments = global;
      }
    } catch (NumericDegeneracyError& e) {
      throw NumericDegeneracyError(e.what(), e.pixel_x, e.pixel_y, rank);
    }
  });

  auto slowest = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  result.timings = {{"moment_pass", false, slowest(moment_seconds)},
                    {"moments_allreduce", true, slowest(allreduce_seconds)},
                    {"resolve_pass", false, slowest(resolve_seconds)},
                    {"color_reduce", true, slowest(reduce_seconds)}};
  result.stats = group.stats();
  if (params.renormalize) renormalize_total_alpha(result.premultiplied, result.global_moments);
  result.image = composite_background(result.premultiplied, options.background);
  result.partials = std::move(partials);
  return result;
}

// Porter-Duff over on premultiplied colors.
struct PremultipliedColor {
  double r{0.0}, g{0.0}, b{0.0}, a{0.0};
  friend bool operator==(const PremultipliedColor&, const PremultipliedColor&) = default;
};

inline PremultipliedColor over(const PremultipliedColor& front, const PremultipliedColor& back) {
  const double keep = 1.0 - front.a;
  return {front.r + keep * back.r, front.g + keep * back.g, front.b + keep * back.b, front.a + keep * back.a};
}

struct TaggedSegment {
  Segment segment;
  int rank;
};

// All ranks' segments for one pixel, sorted by (z_start, rank).
using PixelFragmentSet = std::vector<TaggedSegment>;

inline void sort_fragments(PixelFragmentSet& fragments) {
  std::stable_sort(fragments.begin(), fragments.end(), [](const TaggedSegment& a, const TaggedSegment& b) {
    if (a.segment.z_start != b.segment.z_start) return a.segment.z_start < b.segment.z_start;
    return a.rank < b.rank;
  });
}

// Rejects overlapping segments within one rank, and depth intervals from
// different ranks that interleave so that no front-to-back order exists.
inline void check_fragment_order(const PixelFragmentSet& sorted, double tolerance) {
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto& prev = sorted[i - 1];
    const auto& cur = sorted[i];
    if (cur.segment.z_start < prev.segment.z_end - tolerance) {
      if (cur.rank == prev.rank) throw OrderingError("segments of one rank overlap in depth");
      throw OrderingError("segments of different ranks interleave in depth; order is undefined");
    }
  }
}

inline PremultipliedColor composite_fragments(const PixelFragmentSet& sorted, const PipelineOptions& options) {
  PremultipliedColor acc;
  for (const auto& f : sorted) {
    acc = over(acc, {f.segment.r, f.segment.g, f.segment.b, f.segment.a});
    if (options.early_termination && acc.a >= options.termination_alpha) break;
  }
  return acc;
}

// Per-pixel, per-rank segment counts: the input to the cost models.
class SegmentCensus {
 public:
  SegmentCensus() = default;
  SegmentCensus(int width, int height, int ranks)
      : width_(width), height_(height), ranks_(ranks),
        counts_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(ranks)) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int ranks() const { return ranks_; }
  std::size_t pixels() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }

  std::uint32_t& at(std::size_t pixel, int rank) { return counts_[pixel * static_cast<std::size_t>(ranks_) + static_cast<std::size_t>(rank)]; }
  std::uint32_t at(std::size_t pixel, int rank) const { return counts_[pixel * static_cast<std::size_t>(ranks_) + static_cast<std::size_t>(rank)]; }

  std::uint64_t total(std::size_t pixel) const {
    std::uint64_t t = 0;
    for (int r = 0; r < ranks_; ++r) t += at(pixel, r);
    return t;
  }
  bool nonempty(std::size_t pixel) const { return total(pixel) > 0; }

  CountImage totals() const {
    CountImage img(width_, height_);
    for (std::size_t p = 0; p < pixels(); ++p) img[p] = static_cast<std::uint32_t>(total(p));
    return img;
  }

 private:
  int width_{0};
  int height_{0};
  int ranks_{0};
  std::vector<std::uint32_t> counts_;
};

inline SegmentCensus census_of(const std::vector<SegmentImage>& per_rank) {
  if (per_rank.empty()) throw ContractViolation("census needs at least one rank");
  SegmentCensus census(per_rank.front().width(), per_rank.front().height(), static_cast<int>(per_rank.size()));
  for (std::size_t r = 0; r < per_rank.size(); ++r) {
    require_same_shape(per_rank[r], per_rank.front(), "segment images differ in size");
    for (std::size_t p = 0; p < census.pixels(); ++p) {
      census.at(p, static_cast<int>(r)) = static_cast<std::uint32_t>(per_rank[r][p].size());
    }
  }
  return census;
}

struct SortLastResult {
  ColorImage premultiplied;
  ColorImage image;
  CommStats stats;
  SegmentCensus census;
  std::vector<StageTiming> timings;
};

// Segment pass per rank, gather of every pixel's segments, stable depth sort,
// front-to-back over compositing, background composite.
inline SortLastResult run_sort_last(const ScenePartition& scene, const Camera& camera, int width, int height,
                                    const TransferFunction& tf, const RenderSettings& settings,
                                    const PipelineOptions& options = {}) {
  scene.validate();
  settings.validate();
  const Frame frame = make_frame(camera, width, height, scene.bounds());
  const RenderSettings rank_settings = detail::per_rank_settings(settings, scene.ranks);

  std::vector<SegmentImage> per_rank(static_cast<std::size_t>(scene.ranks));
  std::vector<double> seconds(per_rank.size());
  RankGroup group(scene.ranks);
  group.run([&](int rank) {
    detail::Stopwatch sw;
    per_rank[static_cast<std::size_t>(rank)] =
        render_segment_pass(scene.bricks_for_rank(rank), frame, tf, rank_settings);
    seconds[static_cast<std::size_t>(rank)] = sw.seconds();
  });

  detail::Stopwatch sw_comp;
  SortLastResult result;
  result.census = census_of(per_rank);
  result.premultiplied = ColorImage(width, height);
  const double tolerance = 1e-9 * frame.bounds.far();
  std::uint64_t segments = 0;
  PixelFragmentSet fragments;
  for (std::size_t p = 0; p < result.premultiplied.size(); ++p) {
    fragments.clear();
    for (int r = 0; r < scene.ranks; ++r) {
      for (const Segment& s : per_rank[static_cast<std::size_t>(r)][p]) fragments.push_back({s, r});
    }
    segments += fragments.size();
    sort_fragments(fragments);
    check_fragment_order(fragments, tolerance);
    const PremultipliedColor c = composite_fragments(fragments, options);
    result.premultiplied[p] = {static_cast<float>(c.r), static_cast<float>(c.g), static_cast<float>(c.b),
                               static_cast<float>(c.a)};
  }
  result.stats.segments_exchanged = segments;
  result.stats.messages = scene.ranks > 1 ? static_cast<std::uint64_t>(scene.ranks) * (scene.ranks - 1) : 0;
  result.image = composite_background(result.premultiplied, options.background);
  result.timings = {{"segment_pass", false, *std::max_element(seconds.begin(), seconds.end())},
                    {"segment_exchange_sort_blend", true, sw_comp.seconds()}};
  return result;
}

enum class CostAlgorithm { apc, direct_send, binary_swap };

inline std::string_view to_string(CostAlgorithm a) {
  switch (a) {
    case CostAlgorithm::apc: return "apc";
    case CostAlgorithm::direct_send: return "direct_send";
    case CostAlgorithm::binary_swap: return "binary_swap";
  }
  return "unknown";
}

struct CostModelOptions {
  int moment_scalars{5};
  // Leave 64x64 tiles a rank has no data in out of the APC traffic.
  bool skip_empty_tiles{false};
  int tile_size{64};
};

struct CostReport {
  CostAlgorithm algorithm{CostAlgorithm::apc};
  int ranks{1};
  // Bytes handed to the collective or exchange, including a rank's own share.
  std::uint64_t payload_bytes{0};
  // Bytes that cross rank boundaries; zero for a single rank.
  std::uint64_t inter_rank_bytes{0};
  std::uint64_t messages{0};
  // Segments (or, for APC, per-rank pixel records) transferred.
  std::uint64_t transferred_units{0};
  std::uint64_t nonempty_pixels{0};
  double avg_per_nonempty_pixel{0.0};
  // Per-pixel upper bound on transferred units; infinite for segment methods.
  double upper_bound{std::numeric_limits<double>::infinity()};
};

namespace detail {

// Binary-swap region bits of a pixel: level l halves the current region along
// x (even l) or y (odd l); bit l is set when the pixel lies in the upper half.
inline std::uint32_t swap_region_code(int x, int y, int width, int height, int levels) {
  int x0 = 0, x1 = width, y0 = 0, y1 = height;
  std::uint32_t code = 0;
  for (int l = 0; l < levels; ++l) {
    if (l % 2 == 0) {
      const int mid = (x0 + x1) / 2;
      if (x >= mid) {
        code |= 1u << l;
        x0 = mid;
      } else {
        x1 = mid;
      }
    } else {
      const int mid = (y0 + y1) / 2;
      if (y >= mid) {
        code |= 1u << l;
        y0 = mid;
      } else {
        y1 = mid;
      }
    }
  }
  return code;
}

}  // namespace detail

// Communication cost of compositing one frame with the given algorithm.
//  apc         two reductions of n * P records (moments, then color)
//  direct_send every segment travels once to the pixel's owner
//  binary_swap log2(n) rounds; a segment moves in round l whenever bit l of
//              its current holder disagrees with the pixel's region bit
inline CostReport cost_model(const SegmentCensus& census, CostAlgorithm algorithm, const CostModelOptions& options = {}) {
  const int n = census.ranks();
  if (n < 1) throw ContractViolation("cost model needs at least one rank");
  CostReport rep;
  rep.algorithm = algorithm;
  rep.ranks = n;
  const std::size_t pixels = census.pixels();
  for (std::size_t p = 0; p < pixels; ++p) rep.nonempty_pixels += census.nonempty(p) ? 1 : 0;

  switch (algorithm) {
    case CostAlgorithm::apc: {
      const std::uint64_t per_record_bytes =
          (static_cast<std::uint64_t>(options.moment_scalars) + kColorScalars) * kWireScalarBytes;
      rep.messages = 2;
      rep.upper_bound = 2.0 * n;
      if (!options.skip_empty_tiles) {
        rep.payload_bytes = static_cast<std::uint64_t>(n) * pixels * per_record_bytes;
        rep.transferred_units = 2 * static_cast<std::uint64_t>(n) * rep.nonempty_pixels;
      } else {
        if (options.tile_size < 1) throw ContractViolation("tile size must be positive");
        const int ts = options.tile_size;
        const int tiles_x = (census.width() + ts - 1) / ts;
        const int tiles_y = (census.height() + ts - 1) / ts;
        std::vector<std::uint8_t> tile_live(static_cast<std::size_t>(tiles_x * tiles_y * n), 0);
        for (int y = 0; y < census.height(); ++y) {
          for (int x = 0; x < census.width(); ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * census.width() + x;
            const int t = (y / ts) * tiles_x + x / ts;
            for (int r = 0; r < n; ++r) {
              if (census.at(p, r) > 0) tile_live[static_cast<std::size_t>(t * n + r)] = 1;
            }
          }
        }
        for (int y = 0; y < census.height(); ++y) {
          for (int x = 0; x < census.width(); ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * census.width() + x;
            const int t = (y / ts) * tiles_x + x / ts;
            for (int r = 0; r < n; ++r) {
              if (!tile_live[static_cast<std::size_t>(t * n + r)]) continue;
              rep.payload_bytes += per_record_bytes;
              if (census.nonempty(p)) rep.transferred_units += 2;
            }
          }
        }
      }
      break;
    }
    case CostAlgorithm::direct_send: {
      std::uint64_t m = 0;
      for (std::size_t p = 0; p < pixels; ++p) m += census.total(p);
      rep.transferred_units = m;
      rep.payload_bytes = m * kSegmentBytes;
      rep.messages = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1);
      break;
    }
    case CostAlgorithm::binary_swap: {
      if (!std::has_single_bit(static_cast<unsigned>(n))) {
        throw ContractViolation("binary swap requires a power-of-two rank count");
      }
      const int levels = std::countr_zero(static_cast<unsigned>(n));
      std::uint64_t moved = 0;
      for (int y = 0; y < census.height(); ++y) {
        for (int x = 0; x < census.width(); ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * census.width() + x;
          const std::uint32_t code = detail::swap_region_code(x, y, census.width(), census.height(), levels);
          for (int r = 0; r < n; ++r) {
            moved += static_cast<std::uint64_t>(census.at(p, r)) *
                     static_cast<std::uint64_t>(std::popcount(static_cast<std::uint32_t>(r) ^ code));
          }
        }
      }
      rep.transferred_units = moved;
      rep.payload_bytes = moved * kSegmentBytes;
      rep.messages = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(levels);
      break;
    }
  }

  if (n == 1) {
    rep.inter_rank_bytes = 0;
    rep.transferred_units = 0;
    rep.messages = 0;
  } else {
    rep.inter_rank_bytes = rep.payload_bytes;
  }
  rep.avg_per_nonempty_pixel =
      rep.nonempty_pixels ? static_cast<double>(rep.transferred_units) / static_cast<double>(rep.nonempty_pixels) : 0.0;
  return rep;
}

}  // namespace apc
