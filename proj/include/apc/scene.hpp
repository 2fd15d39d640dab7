#pragma once

// Synthetic volumes, transfer functions, cameras, and rank partitions.

#include <apc/error.hpp>
#include <apc/vec3.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace apc {

// Cell-centered scalar grid covering the half-open box `bounds`.
struct VolumeBrick {
  Box bounds;
  std::array<int, 3> dims{1, 1, 1};
  std::vector<float> scalars;

  Vec3 origin() const { return bounds.lo; }
  Vec3 spacing() const {
    const Vec3 ext = bounds.hi - bounds.lo;
    return {ext.x / dims[0], ext.y / dims[1], ext.z / dims[2]};
  }
  double min_spacing() const {
    const Vec3 s = spacing();
    return std::min({s.x, s.y, s.z});
  }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  float voxel(int i, int j, int k) const {
    return scalars[(static_cast<std::size_t>(k) * static_cast<std::size_t>(dims[1]) +
                    static_cast<std::size_t>(j)) *
                       static_cast<std::size_t>(dims[0]) +
                   static_cast<std::size_t>(i)];
  }
  Vec3 voxel_center(int i, int j, int k) const {
    const Vec3 s = spacing();
    return {bounds.lo.x + (i + 0.5) * s.x, bounds.lo.y + (j + 0.5) * s.y, bounds.lo.z + (k + 0.5) * s.z};
  }

  void validate() const {
    for (int d : dims) {
      if (d < 1) throw ContractViolation("brick dims must be >= 1");
    }
    if (!(bounds.hi.x > bounds.lo.x && bounds.hi.y > bounds.lo.y && bounds.hi.z > bounds.lo.z)) {
      throw ContractViolation("brick spacing must be positive");
    }
    if (!is_finite(bounds.lo) || !is_finite(bounds.hi)) throw ContractViolation("brick bounds must be finite");
    if (scalars.size() != voxel_count()) throw ContractViolation("brick scalar count does not match dims");
    for (float v : scalars) {
      if (!std::isfinite(v)) throw ContractViolation("brick scalars must be finite");
    }
  }

  // Fills each voxel with field(voxel center).
  static VolumeBrick from_field(const Box& bounds, std::array<int, 3> dims,
                                const std::function<float(Vec3)>& field) {
    VolumeBrick brick{bounds, dims, {}};
    brick.scalars.reserve(brick.voxel_count());
    for (int k = 0; k < dims[2]; ++k) {
      for (int j = 0; j < dims[1]; ++j) {
        for (int i = 0; i < dims[0]; ++i) brick.scalars.push_back(field(brick.voxel_center(i, j, k)));
      }
    }
    brick.validate();
    return brick;
  }
};

// Trilinear interpolation between voxel centers, clamped to the outermost
// centers near the faces. Empty outside the brick.
inline std::optional<double> sample_scalar(const VolumeBrick& brick, Vec3 p) {
  if (!brick.bounds.contains(p)) return std::nullopt;
  const Vec3 s = brick.spacing();
  std::array<int, 3> i0{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double u = std::clamp((p[a] - brick.bounds.lo[a]) / s[a] - 0.5, 0.0, double(brick.dims[a] - 1));
    const double fl = std::floor(u);
    i0[a] = std::min(static_cast<int>(fl), brick.dims[a] - 1);
    frac[a] = u - fl;
  }
  const int i1x = std::min(i0[0] + 1, brick.dims[0] - 1);
  const int i1y = std::min(i0[1] + 1, brick.dims[1] - 1);
  const int i1z = std::min(i0[2] + 1, brick.dims[2] - 1);
  const auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double c00 = lerp(brick.voxel(i0[0], i0[1], i0[2]), brick.voxel(i1x, i0[1], i0[2]), frac[0]);
  const double c10 = lerp(brick.voxel(i0[0], i1y, i0[2]), brick.voxel(i1x, i1y, i0[2]), frac[0]);
  const double c01 = lerp(brick.voxel(i0[0], i0[1], i1z), brick.voxel(i1x, i0[1], i1z), frac[0]);
  const double c11 = lerp(brick.voxel(i0[0], i1y, i1z), brick.voxel(i1x, i1y, i1z), frac[0]);
  return lerp(lerp(c00, c10, frac[1]), lerp(c01, c11, frac[1]), frac[2]);
}

struct BrickAssignment {
  VolumeBrick brick;
  int rank{0};
};

using BrickSet = std::vector<const VolumeBrick*>;

struct ScenePartition {
  int ranks{1};
  std::vector<BrickAssignment> assignment;

  BrickSet bricks_for_rank(int rank) const {
    BrickSet out;
    for (const auto& a : assignment) {
      if (a.rank == rank) out.push_back(&a.brick);
    }
    return out;
  }

  BrickSet all_bricks() const {
    BrickSet out;
    out.reserve(assignment.size());
    for (const auto& a : assignment) out.push_back(&a.brick);
    return out;
  }

  Box bounds() const {
    if (assignment.empty()) return {{0, 0, 0}, {0, 0, 0}};
    Box b = assignment.front().brick.bounds;
    for (const auto& a : assignment) b = b.united(a.brick.bounds);
    return b;
  }

  double min_spacing() const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& a : assignment) s = std::min(s, a.brick.min_spacing());
    return s;
  }

  // Relabels ranks: brick owned by r moves to permutation[r].
  ScenePartition relabeled(const std::vector<int>& permutation) const {
    if (permutation.size() != static_cast<std::size_t>(ranks)) {
      throw ContractViolation("rank permutation size must equal rank count");
    }
    ScenePartition out = *this;
    for (auto& a : out.assignment) a.rank = permutation[static_cast<std::size_t>(a.rank)];
    out.validate();
    return out;
  }

  void validate() const {
    if (ranks < 1) throw ContractViolation("partition needs at least one rank");
    for (const auto& a : assignment) {
      if (a.rank < 0 || a.rank >= ranks) throw ContractViolation("brick assigned to nonexistent rank");
      a.brick.validate();
    }
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      for (std::size_t j = i + 1; j < assignment.size(); ++j) {
        if (assignment[i].brick.bounds.intersected(assignment[j].brick.bounds).volume() > 0.0) {
          throw ContractViolation("bricks overlap in world space");
        }
      }
    }
  }
};

// Piecewise-linear map from scalar to straight RGBA. Opacity is per reference
// step length; the renderer corrects it for the actual step.
class TransferFunction {
 public:
  struct ControlPoint {
    double value;
    std::array<float, 4> rgba;
  };

  TransferFunction() = default;
  explicit TransferFunction(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw ContractViolation("transfer function needs control points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      for (float c : points_[i].rgba) {
        if (!(c >= 0.0f && c <= 1.0f)) throw ContractViolation("transfer function channels must lie in [0, 1]");
      }
      if (i > 0 && !(points_[i].value >= points_[i - 1].value)) {
        throw ContractViolation("transfer function control points must be sorted");
      }
    }
  }

  double domain_min() const { return points_.front().value; }
  double domain_max() const { return points_.back().value; }
  const std::vector<ControlPoint>& points() const { return points_; }

  std::array<float, 4> evaluate(double s) const {
    if (s <= points_.front().value) return points_.front().rgba;
    if (s >= points_.back().value) return points_.back().rgba;
    const auto hi = std::upper_bound(points_.begin(), points_.end(), s,
                                     [](double v, const ControlPoint& p) { return v < p.value; });
    const auto lo = hi - 1;
    const double span = hi->value - lo->value;
    const float t = span > 0.0 ? static_cast<float>((s - lo->value) / span) : 1.0f;
    std::array<float, 4> out{};
    for (std::size_t c = 0; c < 4; ++c) out[c] = lo->rgba[c] + (hi->rgba[c] - lo->rgba[c]) * t;
    return out;
  }

  // Blue through white to red, opacity rising with the scalar.
  static TransferFunction cold_warm(float opacity_lo = 0.02f, float opacity_hi = 0.05f) {
    const float mid = 0.5f * (opacity_lo + opacity_hi);
    return TransferFunction({{0.0, {0.23f, 0.30f, 0.75f, opacity_lo}},
                             {0.5, {0.86f, 0.86f, 0.86f, mid}},
                             {1.0, {0.71f, 0.02f, 0.15f, opacity_hi}}});
  }

  static TransferFunction opaque_rainbow(float opacity = 0.25f) {
    return TransferFunction({{0.0, {0.0f, 0.0f, 1.0f, opacity}},
                             {0.25, {0.0f, 1.0f, 1.0f, opacity}},
                             {0.5, {0.0f, 1.0f, 0.0f, opacity}},
                             {0.75, {1.0f, 1.0f, 0.0f, opacity}},
                             {1.0, {1.0f, 0.0f, 0.0f, opacity}}});
  }

 private:
  std::vector<ControlPoint> points_;
};

class Camera {
 public:
  Camera(Vec3 position, Vec3 look_at, Vec3 up, double fovy_degrees, double aspect)
      : position_(position), look_at_(look_at), up_(up), fovy_(fovy_degrees), aspect_(aspect) {
    if (!(fovy_degrees > 0.0 && fovy_degrees < 180.0)) throw ContractViolation("fovy must lie in (0, 180)");
    if (!(aspect > 0.0)) throw ContractViolation("aspect must be positive");
    const Vec3 view = look_at - position;
    if (length(view) == 0.0) throw ContractViolation("camera look-at equals position");
    forward_ = normalize(view);
    const Vec3 side = cross(forward_, up);
    if (length(side) < 1e-12 * length(up)) throw ContractViolation("camera up is parallel to the view direction");
    right_ = normalize(side);
    true_up_ = cross(right_, forward_);
    half_height_ = std::tan(0.5 * fovy_degrees * std::numbers::pi / 180.0);
  }

  Vec3 position() const { return position_; }
  Vec3 look_at() const { return look_at_; }
  Vec3 up() const { return up_; }
  double fovy() const { return fovy_; }
  double aspect() const { return aspect_; }
  Vec3 forward() const { return forward_; }

  // Ray through the center of pixel (x, y); row 0 is the top of the image.
  Ray primary_ray(int x, int y, int width, int height) const {
    const double u = (2.0 * (x + 0.5) / width - 1.0) * half_height_ * aspect_;
    const double v = (1.0 - 2.0 * (y + 0.5) / height) * half_height_;
    return {position_, normalize(forward_ + right_ * u + true_up_ * v)};
  }

 private:
  Vec3 position_;
  Vec3 look_at_;
  Vec3 up_;
  double fovy_;
  double aspect_;
  Vec3 forward_;
  Vec3 right_;
  Vec3 true_up_;
  double half_height_;
};

// `count` cameras evenly spaced in azimuth about the y axis through `center`,
// at a fixed elevation. Camera 0 sits on the +z side.
inline std::vector<Camera> orbit_cameras(Vec3 center, double radius, double elevation_degrees, int count,
                                         double fovy_degrees, double aspect) {
  if (count < 1) throw ContractViolation("orbit needs at least one camera");
  if (!(radius > 0.0)) throw ContractViolation("orbit radius must be positive");
  std::vector<Camera> cams;
  const double e = elevation_degrees * std::numbers::pi / 180.0;
  for (int i = 0; i < count; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / count;
    const Vec3 offset{radius * std::cos(e) * std::sin(phi), radius * std::sin(e), radius * std::cos(e) * std::cos(phi)};
    cams.emplace_back(center + offset, center, Vec3{0.0, 1.0, 0.0}, fovy_degrees, aspect);
  }
  return cams;
}

// Splits [lo, hi] into `parts` pieces; shared boundaries are bit-identical.
inline std::vector<double> split_planes(double lo, double hi, int parts) {
  std::vector<double> planes(static_cast<std::size_t>(parts) + 1);
  for (int i = 0; i <= parts; ++i) planes[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / parts;
  planes.front() = lo;
  planes.back() = hi;
  return planes;
}

inline constexpr Box kUnitCube{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};

// 4n slabs stacked along z inside the unit cube; slab k belongs to rank k mod n.
inline ScenePartition make_sandwich_scene(int n, int slab_resolution, int slab_thickness_voxels = 2) {
  if (n < 1) throw ContractViolation("sandwich scene needs n >= 1");
  if (slab_resolution < 1 || slab_thickness_voxels < 1) throw ContractViolation("slab resolution must be positive");
  const int slabs = 4 * n;
  const std::vector<double> z = split_planes(kUnitCube.lo.z, kUnitCube.hi.z, slabs);
  ScenePartition part{n, {}};
  for (int k = 0; k < slabs; ++k) {
    const int rank = k % n;
    const Box box{{kUnitCube.lo.x, kUnitCube.lo.y, z[static_cast<std::size_t>(k)]},
                  {kUnitCube.hi.x, kUnitCube.hi.y, z[static_cast<std::size_t>(k) + 1]}};
    const float base = static_cast<float>((rank + 0.5) / n);
    auto field = [base](Vec3 p) {
      // Mild radial ripple so slabs are not flat color.
      const double r = std::sqrt(p.x * p.x + p.y * p.y);
      return std::clamp(base + 0.08f * static_cast<float>(std::cos(12.0 * r)), 0.0f, 1.0f);
    };
    part.assignment.push_back(
        {VolumeBrick::from_field(box, {slab_resolution, slab_resolution, slab_thickness_voxels}, field), rank});
  }
  return part;
}

inline TransferFunction sandwich_transfer_function() { return TransferFunction::cold_warm(0.025f, 0.04f); }

// Splits the unit cube into `parts` bricks (1, 2, 4, or 8) by halving x, then y, then z.
inline std::vector<Box> split_cube(int parts) {
  if (parts != 1 && parts != 2 && parts != 4 && parts != 8) {
    throw ContractViolation("cube split must be 1, 2, 4, or 8 bricks");
  }
  std::vector<Box> boxes{kUnitCube};
  for (int axis = 0; static_cast<int>(boxes.size()) < parts; ++axis) {
    std::vector<Box> next;
    for (const Box& b : boxes) {
      Box lo = b;
      Box hi = b;
      const double mid = 0.5 * (b.lo[axis] + b.hi[axis]);
      lo.hi[axis] = mid;
      hi.lo[axis] = mid;
      next.push_back(lo);
      next.push_back(hi);
    }
    boxes = std::move(next);
  }
  return boxes;
}

// Builds one brick per rank over the unit cube from a field sampled at voxel
// centers of a global resolution^3 grid.
inline ScenePartition make_split_cube_scene(int resolution, int rank_split, const std::function<float(Vec3)>& field) {
  if (resolution < 2 || resolution % 2 != 0) throw ContractViolation("cube resolution must be even and >= 2");
  const std::vector<Box> boxes = split_cube(rank_split);
  ScenePartition part{rank_split, {}};
  for (int r = 0; r < rank_split; ++r) {
    const Box& b = boxes[static_cast<std::size_t>(r)];
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) {
      dims[static_cast<std::size_t>(a)] =
          static_cast<int>(std::lround(resolution * (b.hi[a] - b.lo[a]) / (kUnitCube.hi[a] - kUnitCube.lo[a])));
    }
    part.assignment.push_back({VolumeBrick::from_field(b, dims, field), r});
  }
  return part;
}

// Scalar for concentric shells: shell index / shells inside the ball, 1 outside.
inline float concentric_shell_value(Vec3 p, int shells) {
  const double r = length(p);
  const double width = 0.5 / shells;
  const int idx = static_cast<int>(std::floor(r / width));
  if (idx >= shells) return 1.0f;
  return static_cast<float>(idx) / static_cast<float>(shells);
}

inline ScenePartition make_concentric_scene(int shells, int rank_split, int resolution = 64) {
  if (shells < 2) throw ContractViolation("concentric scene needs at least two shells");
  return make_split_cube_scene(resolution, rank_split,
                               [shells](Vec3 p) { return concentric_shell_value(p, shells); });
}

// Shells alternate red (even index) and blue (odd index); outside is transparent.
inline TransferFunction concentric_transfer_function(int shells, float opacity = 0.05f) {
  std::vector<TransferFunction::ControlPoint> pts;
  for (int k = 0; k < shells; ++k) {
    const bool red = k % 2 == 0;
    pts.push_back({static_cast<double>(k) / shells,
                   red ? std::array<float, 4>{0.9f, 0.1f, 0.1f, opacity} : std::array<float, 4>{0.1f, 0.2f, 0.9f, opacity}});
  }
  pts.push_back({1.0, {0.0f, 0.0f, 0.0f, 0.0f}});
  return TransferFunction(std::move(pts));
}

// Near-opaque red sheets embedded in a faint blue volume, split over two ranks
// by default.
inline constexpr float kSpikeValue = 1.0f;
inline constexpr float kSpikeBackgroundValue = 0.0f;

inline ScenePartition make_spikes_scene(int resolution = 64, int rank_split = 2) {
  const double voxel = 1.0 / resolution;
  auto field = [voxel](Vec3 p) {
    // Two thin sheets normal to z and a thin sheet normal to x, limited in extent.
    const bool sheet_a = std::abs(p.z - 0.1) < voxel && std::abs(p.x) < 0.3 && std::abs(p.y) < 0.3;
    const bool sheet_b = std::abs(p.z + 0.15) < voxel && std::abs(p.x - 0.1) < 0.25 && std::abs(p.y + 0.05) < 0.3;
    const bool sheet_c = std::abs(p.x + 0.2) < voxel && std::abs(p.y) < 0.35 && std::abs(p.z) < 0.3;
    return (sheet_a || sheet_b || sheet_c) ? kSpikeValue : kSpikeBackgroundValue;
  };
  return make_split_cube_scene(resolution, rank_split, field);
}

inline TransferFunction spikes_transfer_function() {
  return TransferFunction({{0.0, {0.1f, 0.2f, 0.9f, 0.03f}}, {1.0, {0.95f, 0.05f, 0.05f, 0.98f}}});
}

}  // namespace apc
