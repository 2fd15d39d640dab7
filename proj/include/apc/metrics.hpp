#pragma once

// Image quality on background-composited 8-bit RGB.

#include <apc/error.hpp>
#include <apc/image.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace apc {

struct QualityReport {
  double ssim{1.0};
  double mse{0.0};
  double psnr{std::numeric_limits<double>::infinity()};  // +inf for identical images
  std::array<float, 4> max_abs_diff{};                  // premultiplied float channels

  float max_channel_diff() const { return *std::max_element(max_abs_diff.begin(), max_abs_diff.end()); }
};

inline double mse_rgb8(const Rgb8Image& a, const Rgb8Image& b) {
  if (a.width != b.width || a.height != b.height) throw DimensionMismatch("mse: image dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  return a.data.empty() ? 0.0 : sum / static_cast<double>(a.data.size());
}

inline double psnr_from_mse(double mse) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace detail {

// Normalized 1-D Gaussian taps; the window shrinks for images smaller than it.
inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(size));
  const double c = 0.5 * (size - 1);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - c;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable "valid" filtering of a single-channel plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& tx,
                                        const std::vector<double>& ty) {
  const int kx = static_cast<int>(tx.size());
  const int ky = static_cast<int>(ty.size());
  const int ow = w - kx + 1;
  const int oh = h - ky + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kx; ++i) s += tx[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int j = 0; j < ky; ++j) s += ty[static_cast<std::size_t>(j)] * rows[static_cast<std::size_t>(y + j) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace detail

// Mean SSIM over the RGB channels: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 255.
inline double ssim_rgb8(const Rgb8Image& a, const Rgb8Image& b) {
  if (a.width != b.width || a.height != b.height) throw DimensionMismatch("ssim: image dimensions differ");
  const int w = a.width;
  const int h = a.height;
  const auto tx = detail::gaussian_taps(std::min(11, w), 1.5);
  const auto ty = detail::gaussian_taps(std::min(11, h), 1.5);
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data[i * 3 + static_cast<std::size_t>(c)];
      y[i] = b.data[i * 3 + static_cast<std::size_t>(c)];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, w, h, tx, ty);
    const auto my = detail::filter_valid(y, w, h, tx, ty);
    const auto sxx = detail::filter_valid(xx, w, h, tx, ty);
    const auto syy = detail::filter_valid(yy, w, h, tx, ty);
    const auto sxy = detail::filter_valid(xy, w, h, tx, ty);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

inline QualityReport compare_images(const ColorImage& a, const ColorImage& b, Background background) {
  require_same_shape(a, b, "compare_images: image dimensions differ");
  const Rgb8Image qa = to_rgb8(a, background);
  const Rgb8Image qb = to_rgb8(b, background);
  QualityReport rep;
  rep.mse = mse_rgb8(qa, qb);
  rep.psnr = psnr_from_mse(rep.mse);
  rep.ssim = qa == qb ? 1.0 : ssim_rgb8(qa, qb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int c = 0; c < 4; ++c) {
      rep.max_abs_diff[static_cast<std::size_t>(c)] =
          std::max(rep.max_abs_diff[static_cast<std::size_t>(c)], std::abs(a[i][c] - b[i][c]));
    }
  }
  return rep;
}

// |a - b| * scale per channel, clamped to [0, 1]; alpha is set opaque.
inline ColorImage diff_image(const ColorImage& a, const ColorImage& b, float scale = 3.0f) {
  require_same_shape(a, b, "diff_image: image dimensions differ");
  ColorImage out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int c = 0; c < 3; ++c) out[i][c] = std::clamp(std::abs(a[i][c] - b[i][c]) * scale, 0.0f, 1.0f);
    out[i].a = 1.0f;
  }
  return out;
}

struct Heatmap {
  ColorImage image;
  std::uint32_t max_count{0};
};

// Gray level count / max_count; all-zero counts give a black image.
inline Heatmap segment_heatmap(const CountImage& counts) {
  Heatmap out{ColorImage(counts.width(), counts.height()), 0};
  for (std::uint32_t c : counts.pixels()) out.max_count = std::max(out.max_count, c);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const float g = out.max_count ? static_cast<float>(counts[i]) / static_cast<float>(out.max_count) : 0.0f;
    out.image[i] = {g, g, g, 1.0f};
  }
  return out;
}

}  // namespace apc
