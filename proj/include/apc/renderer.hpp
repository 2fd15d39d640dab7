#pragma once

// Per-rank raymarching passes.
//
// Every pass samples the ray on one global grid, t_k = near + k * step, so
// that any partition of the bricks visits exactly the samples a single-node
// render would. A sample belongs to the one brick whose half-open box holds it.

#include <apc/error.hpp>
#include <apc/image.hpp>
#include <apc/moments.hpp>
#include <apc/parallel.hpp>
#include <apc/scene.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace apc {

struct RenderSettings {
  double step{0.0};
  // Length at which transfer-function opacities are specified.
  double reference_step{0.0};
  // 0 selects the hardware concurrency.
  int threads{1};

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw ContractViolation("step size must be positive");
    if (!(reference_step > 0.0) || !std::isfinite(reference_step)) {
      throw ContractViolation("reference step must be positive");
    }
  }
};

// Camera, resolution, and the global depth range shared by all ranks.
struct Frame {
  Camera camera;
  int width;
  int height;
  DepthBounds bounds;
};

// Near/far from the camera to the scene's bounding box; every rank derives the
// same values from the global bounds.
inline DepthBounds depth_bounds_for(const Camera& camera, const Box& scene_bounds) {
  double far = 0.0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 corner{(c & 1) ? scene_bounds.hi.x : scene_bounds.lo.x, (c & 2) ? scene_bounds.hi.y : scene_bounds.lo.y,
                      (c & 4) ? scene_bounds.hi.z : scene_bounds.lo.z};
    far = std::max(far, length(corner - camera.position()));
  }
  far = std::max(far, 1e-6) * (1.0 + 1e-9);
  const double near = std::max(distance_to_box(camera.position(), scene_bounds) * (1.0 - 1e-9), 1e-4 * far);
  return DepthBounds(near, far);
}

inline Frame make_frame(const Camera& camera, int width, int height, const Box& scene_bounds) {
  if (width < 1 || height < 1) throw ContractViolation("image dimensions must be positive");
  return Frame{camera, width, height, depth_bounds_for(camera, scene_bounds)};
}

struct RaySample {
  std::int64_t index;  // position on the global sample grid
  double depth;
  double scalar;
  std::array<float, 4> color;  // straight RGB, alpha corrected for the step
  double transmittance;
};

// Converts a transfer-function opacity at the reference step to the actual step.
inline double step_transmittance(float reference_opacity, double step, double reference_step) {
  const double keep = 1.0 - static_cast<double>(reference_opacity);
  if (keep <= 0.0) return 0.0;
  return std::pow(keep, step / reference_step);
}

namespace detail {

struct BrickSpan {
  const VolumeBrick* brick;
  std::int64_t first;
  std::int64_t last;
};

// Trilinear sample for a point already known to lie in the brick.
inline double interpolate_inside(const VolumeBrick& brick, Vec3 p) { return *sample_scalar(brick, p); }

}  // namespace detail

// Calls visit(RaySample) for every grid sample inside the brick set, front to back.
template <typename Visitor>
void march_ray(const Ray& ray, const BrickSet& bricks, const DepthBounds& bounds, const TransferFunction& tf,
               const RenderSettings& settings, Visitor&& visit) {
  std::vector<detail::BrickSpan> spans;
  spans.reserve(bricks.size());
  const double origin = bounds.near();
  const double step = settings.step;
  for (const VolumeBrick* brick : bricks) {
    const Interval hit = intersect(ray, brick->bounds);
    if (hit.empty() || hit.t1 < origin) continue;
    // One grid point of slack on both ends; the containment test settles boundaries.
    const auto first = static_cast<std::int64_t>(std::ceil((std::max(hit.t0, origin) - origin) / step)) - 1;
    const auto last = static_cast<std::int64_t>(std::floor((hit.t1 - origin) / step)) + 1;
    spans.push_back({brick, std::max<std::int64_t>(first, 0), last});
  }
  std::sort(spans.begin(), spans.end(), [](const detail::BrickSpan& a, const detail::BrickSpan& b) {
    return a.first < b.first;
  });
  for (const auto& span : spans) {
    for (std::int64_t k = span.first; k <= span.last; ++k) {
      const double t = origin + static_cast<double>(k) * step;
      const Vec3 p = ray.at(t);
      if (!span.brick->bounds.contains(p)) continue;
      const double s = detail::interpolate_inside(*span.brick, p);
      std::array<float, 4> rgba = tf.evaluate(s);
      const double trans = step_transmittance(rgba[3], step, settings.reference_step);
      rgba[3] = static_cast<float>(1.0 - trans);
      visit(RaySample{k, t, s, rgba, trans});
    }
  }
}

// Stage one: per-pixel power moments of the rank's own samples.
inline MomentImage render_moment_pass(const BrickSet& bricks, const Frame& frame, const TransferFunction& tf,
                                      const RenderSettings& settings, double absorbance_max = kDefaultAbsorbanceMax,
                                      CountImage* sample_counts = nullptr) {
  settings.validate();
  MomentImage out(frame.width, frame.height);
  if (sample_counts) *sample_counts = CountImage(frame.width, frame.height);
  parallel_for_rows(frame.height, settings.threads, [&](int y) {
    for (int x = 0; x < frame.width; ++x) {
      const Ray ray = frame.camera.primary_ray(x, y, frame.width, frame.height);
      MomentVector b;
      std::uint32_t count = 0;
      march_ray(ray, bricks, frame.bounds, tf, settings, [&](const RaySample& s) {
        ++count;
        if (s.transmittance < 1.0) b = generate_moments(b, warp_depth(s.depth, frame.bounds), s.transmittance, absorbance_max);
      });
      out.at(x, y) = b;
      if (sample_counts) sample_counts->at(x, y) = count;
    }
  });
  return out;
}

// Stage two: each sample is weighted by the transmittance reconstructed from
// the global moments. No over operator, so partial images add.
inline ColorImage render_resolve_pass(const BrickSet& bricks, const Frame& frame, const TransferFunction& tf,
                                      const RenderSettings& settings, const MomentImage& global_moments,
                                      const ReconstructionParams& params, CountImage* sample_counts = nullptr) {
  settings.validate();
  params.validate();
  if (global_moments.width() != frame.width || global_moments.height() != frame.height) {
    throw DimensionMismatch("global moments image does not match the frame");
  }
  ColorImage out(frame.width, frame.height);
  if (sample_counts) *sample_counts = CountImage(frame.width, frame.height);
  parallel_for_rows(frame.height, settings.threads, [&](int y) {
    for (int x = 0; x < frame.width; ++x) {
      const Ray ray = frame.camera.primary_ray(x, y, frame.width, frame.height);
      const MomentVector& b = global_moments.at(x, y);
      double r = 0.0, g = 0.0, bl = 0.0, a = 0.0;
      std::uint32_t count = 0;
      march_ray(ray, bricks, frame.bounds, tf, settings, [&](const RaySample& s) {
        ++count;
        const double alpha = s.color[3];
        if (alpha <= 0.0) return;
        double t = 1.0;
        try {
          t = reconstruct_transmittance(b, warp_depth(s.depth, frame.bounds), params);
        } catch (const NumericDegeneracyError& e) {
          throw NumericDegeneracyError(e.what(), x, y);
        }
        const double w = t * alpha;
        r += w * s.color[0];
        g += w * s.color[1];
        bl += w * s.color[2];
        a += w;
      });
      out.at(x, y) = {static_cast<float>(r), static_cast<float>(g), static_cast<float>(bl), static_cast<float>(a)};
      if (sample_counts) sample_counts->at(x, y) = count;
    }
  });
  return out;
}

// Display-side fix for the energy the reconstruction gains: scales each
// accumulated pixel so its alpha is the exact total opacity 1 - exp(-b0).
// Applied once, after every partial has been summed.
inline void renormalize_total_alpha(ColorImage& image, const MomentImage& global_moments) {
  require_same_shape(image, global_moments, "renormalize: moments do not match the image");
  for (std::size_t i = 0; i < image.size(); ++i) {
    Rgba& p = image[i];
    if (!(p.a > 0.0f)) continue;
    const double target = -std::expm1(-global_moments[i][0]);
    const double scale = target / static_cast<double>(p.a);
    p = {static_cast<float>(p.r * scale), static_cast<float>(p.g * scale), static_cast<float>(p.b * scale),
         static_cast<float>(target)};
  }
}

// Both passes over every brick in one address space.
inline ColorImage render_single_node_mboit(const BrickSet& bricks, const Frame& frame, const TransferFunction& tf,
                                           const RenderSettings& settings, const ReconstructionParams& params) {
  const MomentImage moments = render_moment_pass(bricks, frame, tf, settings, params.absorbance_max);
  ColorImage out = render_resolve_pass(bricks, frame, tf, settings, moments, params);
  if (params.renormalize) renormalize_total_alpha(out, moments);
  return out;
}

// One contiguous run of a rank's samples along a ray, composited front to back.
struct Segment {
  double z_start;
  double z_end;
  double r, g, b, a;  // premultiplied
  double transmittance;

  friend bool operator==(const Segment&, const Segment&) = default;
};

using SegmentList = std::vector<Segment>;
using SegmentImage = Image<SegmentList>;

// Front-to-back accumulation of one sample into a premultiplied accumulator.
struct FrontToBack {
  double r{0.0}, g{0.0}, b{0.0};
  double transmittance{1.0};

  void add(const RaySample& s) {
    const double w = transmittance * s.color[3];
    r += w * s.color[0];
    g += w * s.color[1];
    b += w * s.color[2];
    transmittance *= s.transmittance;
  }
  double alpha() const { return 1.0 - transmittance; }
};

inline SegmentImage render_segment_pass(const BrickSet& bricks, const Frame& frame, const TransferFunction& tf,
                                        const RenderSettings& settings) {
  settings.validate();
  SegmentImage out(frame.width, frame.height);
  const double half = 0.5 * settings.step;
  parallel_for_rows(frame.height, settings.threads, [&](int y) {
    for (int x = 0; x < frame.width; ++x) {
      const Ray ray = frame.camera.primary_ray(x, y, frame.width, frame.height);
      SegmentList list;
      FrontToBack acc;
      bool open = false;
      std::int64_t previous = 0;
      double first_depth = 0.0;
      double last_depth = 0.0;
      auto flush = [&] {
        list.push_back({first_depth - half, last_depth + half, acc.r, acc.g, acc.b, acc.alpha(), acc.transmittance});
        acc = FrontToBack{};
      };
      march_ray(ray, bricks, frame.bounds, tf, settings, [&](const RaySample& s) {
        if (open && s.index != previous + 1) {
          flush();
          open = false;
        }
        if (!open) {
          first_depth = s.depth;
          open = true;
        }
        acc.add(s);
        last_depth = s.depth;
        previous = s.index;
      });
      if (open) flush();
      out.at(x, y) = std::move(list);
    }
  });
  return out;
}

// Plain front-to-back raymarch of every brick: the reference for sort-last.
inline ColorImage render_front_to_back(const BrickSet& bricks, const Frame& frame, const TransferFunction& tf,
                                       const RenderSettings& settings) {
  settings.validate();
  ColorImage out(frame.width, frame.height);
  parallel_for_rows(frame.height, settings.threads, [&](int y) {
    for (int x = 0; x < frame.width; ++x) {
      const Ray ray = frame.camera.primary_ray(x, y, frame.width, frame.height);
      FrontToBack acc;
      march_ray(ray, bricks, frame.bounds, tf, settings, [&](const RaySample& s) { acc.add(s); });
      out.at(x, y) = {static_cast<float>(acc.r), static_cast<float>(acc.g), static_cast<float>(acc.b),
                      static_cast<float>(acc.alpha())};
    }
  });
  return out;
}

}  // namespace apc
