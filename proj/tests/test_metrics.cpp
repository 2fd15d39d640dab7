#include <apc/io.hpp>
#include <apc/metrics.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

apc::ColorImage gradient(int w, int h) {
  apc::ColorImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float a = 0.3f + 0.6f * static_cast<float>(x) / static_cast<float>(w);
      const float v = static_cast<float>(y) / static_cast<float>(h);
      img.at(x, y) = {v * a, (1.0f - v) * a, 0.5f * a, a};
    }
  }
  return img;
}

// Independent SSIM reference: direct (non-separable) 11x11 Gaussian window.
double reference_ssim(const apc::Rgb8Image& a, const apc::Rgb8Image& b) {
  double g[11][11];
  double norm = 0.0;
  for (int j = 0; j < 11; ++j) {
    for (int i = 0; i < 11; ++i) {
      g[j][i] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      norm += g[j][i];
    }
  }
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    int count = 0;
    for (int y = 0; y + 11 <= a.height; ++y) {
      for (int x = 0; x + 11 <= a.width; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < 11; ++j) {
          for (int i = 0; i < 11; ++i) {
            const std::size_t idx = (static_cast<std::size_t>(y + j) * a.width + (x + i)) * 3 + c;
            const double w = g[j][i] / norm;
            const double va = a.data[idx], vb = b.data[idx];
            mx += w * va;
            my += w * vb;
            sxx += w * va * va;
            syy += w * vb * vb;
            sxy += w * va * vb;
          }
        }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
    total += sum / count;
  }
  return total / 3.0;
}

TEST(CompareImages, IdenticalImages) {
  const auto img = gradient(32, 24);
  const auto q = apc::compare_images(img, img, apc::Background::white());
  EXPECT_EQ(q.ssim, 1.0);
  EXPECT_EQ(q.mse, 0.0);
  EXPECT_TRUE(std::isinf(q.psnr) && q.psnr > 0);
  EXPECT_EQ(q.max_channel_diff(), 0.0f);
}

TEST(CompareImages, OffsetOfTenLevels) {
  apc::Rgb8Image a{16, 16, std::vector<std::uint8_t>(16 * 16 * 3)};
  auto b = a;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] = static_cast<std::uint8_t>(50 + i % 100);
    b.data[i] = static_cast<std::uint8_t>(a.data[i] + 10);
  }
  const double mse = apc::mse_rgb8(a, b);
  EXPECT_DOUBLE_EQ(mse, 100.0);
  EXPECT_NEAR(apc::psnr_from_mse(mse), 10.0 * std::log10(65025.0 / 100.0), 1e-12);
  EXPECT_NEAR(apc::psnr_from_mse(mse), 28.13, 5e-3);
}

TEST(CompareImages, SymmetricAndMatchesReferenceSsim) {
  const auto a = gradient(40, 30);
  auto b = a;
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> noise(-0.05f, 0.05f);
  for (auto& p : b.pixels()) p.r = std::clamp(p.r + noise(rng), 0.0f, p.a);
  const auto ab = apc::compare_images(a, b, apc::Background::black());
  const auto ba = apc::compare_images(b, a, apc::Background::black());
  EXPECT_EQ(ab.mse, ba.mse);
  EXPECT_EQ(ab.psnr, ba.psnr);
  EXPECT_NEAR(ab.ssim, ba.ssim, 1e-12);
  const auto qa = apc::to_rgb8(a, apc::Background::black());
  const auto qb = apc::to_rgb8(b, apc::Background::black());
  EXPECT_NEAR(ab.ssim, reference_ssim(qa, qb), 1e-9);
  EXPECT_LT(ab.ssim, 1.0);
}

TEST(CompareImages, SsimFallsWithNoise) {
  const auto a = gradient(48, 48);
  double previous = 1.0;
  for (int level = 1; level <= 10; ++level) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<float> noise(-1.0f, 1.0f);
    auto b = a;
    for (auto& p : b.pixels()) {
      const float amp = 0.02f * level;
      p.r = std::clamp(p.r + amp * noise(rng), 0.0f, 1.0f);
      p.g = std::clamp(p.g + amp * noise(rng), 0.0f, 1.0f);
      p.b = std::clamp(p.b + amp * noise(rng), 0.0f, 1.0f);
    }
    const double s = apc::compare_images(a, b, apc::Background::black()).ssim;
    EXPECT_LT(s, previous) << "level " << level;
    previous = s;
  }
}

TEST(CompareImages, RejectsMismatch) {
  EXPECT_THROW(apc::compare_images(gradient(4, 4), gradient(4, 5), apc::Background::white()), apc::DimensionMismatch);
}

TEST(DiffImage, ScaledAndClamped) {
  apc::ColorImage a(3, 1), b(3, 1);
  a[1].r = 0.1f;
  a[2].g = 0.5f;
  const auto d = apc::diff_image(a, b, 3.0f);
  EXPECT_EQ(d[0].r, 0.0f);
  EXPECT_NEAR(d[1].r, 0.3f, 1e-6f);
  EXPECT_EQ(d[2].g, 1.0f);
  EXPECT_THROW(apc::diff_image(a, apc::ColorImage(2, 1)), apc::DimensionMismatch);
}

TEST(SegmentHeatmap, NormalizesToMax) {
  apc::CountImage zero(3, 3);
  const auto z = apc::segment_heatmap(zero);
  EXPECT_EQ(z.max_count, 0u);
  for (const auto& p : z.image.pixels()) EXPECT_EQ(p.r, 0.0f);
  apc::CountImage c(2, 1);
  c[0] = 32;
  c[1] = 8;
  const auto h = apc::segment_heatmap(c);
  EXPECT_EQ(h.max_count, 32u);
  EXPECT_EQ(h.image[0].r, 1.0f);
  EXPECT_EQ(h.image[1].g, 0.25f);
}

TEST(Background, CompositeAndQuantize) {
  apc::ColorImage img(1, 1);
  img[0] = {0.25f, 0.0f, 0.0f, 0.5f};
  const auto white = apc::to_rgb8(img, apc::Background::white());
  EXPECT_EQ(white.data[0], apc::quantize_channel(0.75f));
  EXPECT_EQ(white.data[1], apc::quantize_channel(0.5f));
  const auto black = apc::to_rgb8(img, apc::Background::black());
  EXPECT_EQ(black.data[0], 64);
  EXPECT_EQ(black.data[1], 0);
}

TEST(Ppm, RoundTrip) {
  apc::Rgb8Image img{3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 255}};
  const std::string bytes = apc::encode_ppm(img);
  EXPECT_EQ(bytes.rfind("P6\n3 2\n255\n", 0), 0u);
  const auto back = apc::decode_ppm(bytes);
  EXPECT_EQ(back.data, img.data);
  EXPECT_THROW(apc::decode_ppm("P3\n1 1\n255\n"), apc::IoError);
  EXPECT_THROW(apc::decode_ppm(bytes.substr(0, bytes.size() - 1)), apc::IoError);
}

}  // namespace
