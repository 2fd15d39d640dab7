#include <apc/comm.hpp>
#include <apc/renderer.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using apc::Vec3;

// Odd-sized image so the center pixel's ray runs exactly along -z.
constexpr int kSize = 21;
constexpr int kCenter = kSize / 2;

apc::Camera front_camera() { return apc::Camera({0, 0, 3}, {0, 0, 0}, {0, 1, 0}, 40, 1.0); }

apc::VolumeBrick constant_brick(const apc::Box& box, float value, std::array<int, 3> dims = {4, 4, 4}) {
  return apc::VolumeBrick::from_field(box, dims, [value](Vec3) { return value; });
}

apc::TransferFunction flat_tf(float opacity) {
  return apc::TransferFunction({{0.0, {0.2f, 0.6f, 0.9f, opacity}}, {1.0, {0.2f, 0.6f, 0.9f, opacity}}});
}

apc::RenderSettings settings(double step = 0.0137, double reference = 0.02) {
  apc::RenderSettings s;
  s.step = step;
  s.reference_step = reference;
  return s;
}

// Slab z in [-0.2, 0.23), full x/y extent of the unit cube.
const apc::Box kSlab{{-0.5, -0.5, -0.2}, {0.5, 0.5, 0.23}};

TEST(RenderSettings, RejectsNonPositiveStep) {
  EXPECT_THROW(settings(0.0).validate(), apc::ContractViolation);
  EXPECT_THROW(settings(0.01, -1).validate(), apc::ContractViolation);
}

TEST(StepTransmittance, OpacityCorrection) {
  EXPECT_NEAR(apc::step_transmittance(0.5f, 0.02, 0.02), 0.5, 1e-7);
  EXPECT_NEAR(apc::step_transmittance(0.5f, 0.04, 0.02), 0.25, 1e-7);
  EXPECT_EQ(apc::step_transmittance(1.0f, 0.01, 0.02), 0.0);
  EXPECT_EQ(apc::step_transmittance(0.0f, 0.01, 0.02), 1.0);
}

TEST(MomentPass, EmptyRankGivesZeroImage) {
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, apc::kUnitCube);
  const auto img = apc::render_moment_pass({}, frame, flat_tf(0.1f), settings());
  for (const auto& b : img.pixels()) EXPECT_TRUE(b.empty());
}

TEST(MomentPass, HomogeneousSlabClosedForm) {
  const auto brick = constant_brick(kSlab, 0.5f);
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, kSlab);
  const auto s = settings();
  apc::CountImage counts(1, 1);
  const auto img = apc::render_moment_pass({&brick}, frame, flat_tf(0.1f), s, apc::kDefaultAbsorbanceMax, &counts);
  // Along -z from z=3 the slab occupies t in (3 - 0.23, 3 + 0.2].
  const double near = frame.bounds.near();
  const long n = apc::testing::count_grid_points(near, s.step, 3.0 - 0.23, 3.0 + 0.2);
  ASSERT_GT(n, 10);
  EXPECT_EQ(static_cast<long>(counts.at(kCenter, kCenter)), n);
  const double a_step = -std::log(std::pow(1.0 - 0.1f, s.step / s.reference_step));
  EXPECT_NEAR(img.at(kCenter, kCenter)[0], n * a_step, 1e-6 * n * a_step);
}

TEST(MomentPass, ComplementaryHalvesAdd) {
  const apc::Box left{{-0.5, -0.5, -0.2}, {0.0, 0.5, 0.23}};
  const apc::Box right{{0.0, -0.5, -0.2}, {0.5, 0.5, 0.23}};
  const auto field = [](Vec3 p) { return static_cast<float>(0.5 + 0.4 * std::sin(5 * p.x) * std::cos(3 * p.y)); };
  const auto a = apc::VolumeBrick::from_field(left, {8, 16, 4}, field);
  const auto b = apc::VolumeBrick::from_field(right, {8, 16, 4}, field);
  const auto camera = apc::Camera({0.7, 0.4, 2.5}, {0, 0, 0}, {0, 1, 0}, 40, 1.0);
  const auto frame = apc::make_frame(camera, kSize, kSize, kSlab);
  const auto tf = apc::TransferFunction::cold_warm(0.05f, 0.2f);
  const auto s = settings();
  const auto ma = apc::render_moment_pass({&a}, frame, tf, s);
  const auto mb = apc::render_moment_pass({&b}, frame, tf, s);
  const auto mw = apc::render_moment_pass({&a, &b}, frame, tf, s);
  for (std::size_t p = 0; p < mw.size(); ++p) {
    const apc::MomentVector sum = ma[p] + mb[p];
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(sum[i], mw[p][i], 1e-10 * std::max(1.0, mw[p][0]));
  }
}

TEST(ResolvePass, ZeroMomentsAndEmptyRankGiveBlack) {
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, apc::kUnitCube);
  const apc::MomentImage zero(kSize, kSize);
  const auto img = apc::render_resolve_pass({}, frame, flat_tf(0.1f), settings(), zero, {});
  for (const auto& p : img.pixels()) EXPECT_EQ(p, apc::Rgba{});
}

TEST(ResolvePass, RejectsMismatchedMoments) {
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, apc::kUnitCube);
  EXPECT_THROW(apc::render_resolve_pass({}, frame, flat_tf(0.1f), settings(), apc::MomentImage(3, 3), {}),
               apc::DimensionMismatch);
}

TEST(ResolvePass, SingleRankEqualsSingleNode) {
  const auto brick = constant_brick(kSlab, 0.5f);
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, kSlab);
  const auto s = settings();
  const auto tf = flat_tf(0.1f);
  const auto m = apc::render_moment_pass({&brick}, frame, tf, s);
  auto resolved = apc::render_resolve_pass({&brick}, frame, tf, s, m, {});
  apc::renormalize_total_alpha(resolved, m);
  EXPECT_EQ(resolved, apc::render_single_node_mboit({&brick}, frame, tf, s, {}));
}

TEST(ResolvePass, PassesVisitIdenticalSamples) {
  const auto scene = apc::make_sandwich_scene(3, 8);
  const auto camera = apc::Camera({0.8, 0.6, 2.2}, {0, 0, 0}, {0, 1, 0}, 40, 1.0);
  const auto frame = apc::make_frame(camera, kSize, kSize, scene.bounds());
  const auto s = settings(0.006, 0.01);
  for (int r = 0; r < 3; ++r) {
    const auto bricks = scene.bricks_for_rank(r);
    apc::CountImage c_moment(1, 1), c_resolve(1, 1);
    const auto tf = apc::sandwich_transfer_function();
    const auto m = apc::render_moment_pass(bricks, frame, tf, s, apc::kDefaultAbsorbanceMax, &c_moment);
    apc::render_resolve_pass(bricks, frame, tf, s, m, {}, &c_resolve);
    EXPECT_EQ(c_moment, c_resolve);
  }
}

TEST(ResolvePass, SandwichPartialsSumToSingleNode) {
  const auto scene = apc::make_sandwich_scene(3, 8);
  const auto camera = apc::Camera({0.5, 0.9, 2.3}, {0, 0, 0}, {0, 1, 0}, 40, 1.0);
  const auto frame = apc::make_frame(camera, 32, 32, scene.bounds());
  const auto s = settings(0.006, 0.01);
  const auto tf = apc::sandwich_transfer_function();
  const apc::ReconstructionParams params;
  std::vector<apc::MomentImage> local;
  for (int r = 0; r < 3; ++r) local.push_back(apc::render_moment_pass(scene.bricks_for_rank(r), frame, tf, s));
  const auto global = apc::sum_moment_images(local);
  std::vector<apc::ColorImage> partial;
  for (int r = 0; r < 3; ++r) {
    partial.push_back(apc::render_resolve_pass(scene.bricks_for_rank(r), frame, tf, s, global, params));
  }
  auto summed = apc::sum_color_images(partial);
  // Summation order across ranks only reassociates.
  std::vector<apc::ColorImage> reversed(partial.rbegin(), partial.rend());
  apc::ColorImage manual(32, 32);
  for (const auto& p : reversed) {
    for (std::size_t i = 0; i < manual.size(); ++i) manual[i] += p[i];
  }
  EXPECT_LE(apc::max_abs_diff(summed, manual), 1e-6f);
  apc::renormalize_total_alpha(summed, global);
  const auto single = apc::render_single_node_mboit(scene.all_bricks(), frame, tf, s, params);
  EXPECT_LE(apc::max_abs_diff(summed, single), 1e-4f);
  for (const auto& p : summed.pixels()) {
    EXPECT_TRUE(std::isfinite(p.r) && p.r >= 0 && p.g >= 0 && p.b >= 0 && p.a >= 0);
    EXPECT_LE(p.a, 1.0f + 1e-3f);
  }
}

TEST(Renormalize, AlphaBecomesTotalOpacity) {
  apc::ColorImage img(2, 1);
  img[0] = {0.3f, 0.6f, 0.9f, 1.2f};
  img[1] = {};
  apc::MomentImage m(2, 1);
  m[0][0] = 2.0;
  apc::renormalize_total_alpha(img, m);
  const double target = 1.0 - std::exp(-2.0);
  EXPECT_NEAR(img[0].a, target, 1e-6);
  EXPECT_NEAR(img[0].r, 0.3 * target / 1.2, 1e-6);
  EXPECT_NEAR(img[0].b, 0.9 * target / 1.2, 1e-6);
  EXPECT_EQ(img[1], apc::Rgba{});
  EXPECT_THROW(apc::renormalize_total_alpha(img, apc::MomentImage(1, 1)), apc::DimensionMismatch);
}

TEST(SingleNodeMboit, EmptySceneIsBlack) {
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, apc::kUnitCube);
  const auto img = apc::render_single_node_mboit({}, frame, flat_tf(0.1f), settings(), {});
  for (const auto& p : img.pixels()) EXPECT_EQ(p, apc::Rgba{});
}

TEST(SegmentPass, OneBrickOneSegment) {
  const auto brick = constant_brick(kSlab, 0.5f);
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, kSlab);
  const auto img = apc::render_segment_pass({&brick}, frame, flat_tf(0.1f), settings());
  EXPECT_EQ(img.at(kCenter, kCenter).size(), 1u);
  for (const auto& list : img.pixels()) EXPECT_LE(list.size(), 1u);
}

TEST(SegmentPass, SandwichRankGetsFourSegments) {
  const auto scene = apc::make_sandwich_scene(3, 8);
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, scene.bounds());
  const auto s = settings(0.004, 0.01);
  for (int r = 0; r < 3; ++r) {
    const auto img = apc::render_segment_pass(scene.bricks_for_rank(r), frame, apc::sandwich_transfer_function(), s);
    const auto& list = img.at(kCenter, kCenter);
    ASSERT_EQ(list.size(), 4u) << "rank " << r;
    for (std::size_t i = 0; i < list.size(); ++i) {
      EXPECT_LT(list[i].z_start, list[i].z_end);
      if (i > 0) {
        EXPECT_LE(list[i - 1].z_end, list[i].z_start);
      }
    }
  }
}

TEST(SegmentPass, HomogeneousSegmentMatchesGeometricSeries) {
  const auto brick = constant_brick(kSlab, 0.5f);
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, kSlab);
  const auto s = settings();
  const float opacity = 0.1f;
  const auto img = apc::render_segment_pass({&brick}, frame, flat_tf(opacity), s);
  const auto& seg = img.at(kCenter, kCenter).at(0);
  const long n = apc::testing::count_grid_points(frame.bounds.near(), s.step, 3.0 - 0.23, 3.0 + 0.2);
  const double t = std::pow(1.0 - static_cast<double>(opacity), s.step / s.reference_step);
  const double alpha = apc::testing::geometric_alpha(t, static_cast<int>(n));
  EXPECT_NEAR(seg.a, alpha, 1e-6 * alpha);
  EXPECT_NEAR(seg.r, 0.2f * alpha, 1e-6 * alpha);
  EXPECT_NEAR(seg.g, 0.6f * alpha, 1e-6 * alpha);
  EXPECT_NEAR(seg.b, 0.9f * alpha, 1e-6 * alpha);
}

TEST(SegmentPass, ExtinctionMatchesMomentPass) {
  const auto scene = apc::make_sandwich_scene(2, 8);
  const auto camera = apc::Camera({0.6, 0.5, 2.4}, {0, 0, 0}, {0, 1, 0}, 40, 1.0);
  const auto frame = apc::make_frame(camera, kSize, kSize, scene.bounds());
  const auto s = settings(0.006, 0.01);
  const auto tf = apc::sandwich_transfer_function();
  for (int r = 0; r < 2; ++r) {
    const auto bricks = scene.bricks_for_rank(r);
    const auto m = apc::render_moment_pass(bricks, frame, tf, s);
    const auto seg = apc::render_segment_pass(bricks, frame, tf, s);
    for (std::size_t p = 0; p < m.size(); ++p) {
      double log_t = 0.0;
      for (const auto& sg : seg[p]) log_t += std::log(sg.transmittance);
      EXPECT_NEAR(-log_t, m[p][0], 1e-6 * std::max(1e-12, m[p][0]));
    }
  }
}

TEST(FrontToBack, MatchesSegmentOfWholeScene) {
  const auto brick = constant_brick(kSlab, 0.5f);
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, kSlab);
  const auto s = settings();
  const auto tf = flat_tf(0.1f);
  const auto ftb = apc::render_front_to_back({&brick}, frame, tf, s);
  const auto seg = apc::render_segment_pass({&brick}, frame, tf, s);
  const auto& sg = seg.at(kCenter, kCenter).at(0);
  EXPECT_NEAR(ftb.at(kCenter, kCenter).a, sg.a, 1e-6);
  EXPECT_NEAR(ftb.at(kCenter, kCenter).r, sg.r, 1e-6);
}

TEST(Frame, DepthBoundsEncloseScene) {
  const auto frame = apc::make_frame(front_camera(), kSize, kSize, apc::kUnitCube);
  EXPECT_LE(frame.bounds.near(), 2.5);
  EXPECT_GE(frame.bounds.far(), std::sqrt(0.25 + 0.25 + 3.5 * 3.5));
  EXPECT_THROW(apc::make_frame(front_camera(), 0, 4, apc::kUnitCube), apc::ContractViolation);
}

}  // namespace
