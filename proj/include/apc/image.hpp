#pragma once

#include <apc/error.hpp>
#include <apc/moments.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace apc {

// Premultiplied RGBA.
struct Rgba {
  float r{0.0f};
  float g{0.0f};
  float b{0.0f};
  float a{0.0f};

  float operator[](int c) const { return c == 0 ? r : (c == 1 ? g : (c == 2 ? b : a)); }
  float& operator[](int c) { return c == 0 ? r : (c == 1 ? g : (c == 2 ? b : a)); }

  Rgba& operator+=(const Rgba& o) {
    r += o.r;
    g += o.g;
    b += o.b;
    a += o.a;
    return *this;
  }
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

template <typename Pixel>
class Image {
 public:
  Image() = default;
  Image(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ContractViolation("image dimensions must be positive");
    pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }

  Pixel& at(int x, int y) { return pixels_[index(x, y)]; }
  const Pixel& at(int x, int y) const { return pixels_[index(x, y)]; }
  Pixel& operator[](std::size_t i) { return pixels_[i]; }
  const Pixel& operator[](std::size_t i) const { return pixels_[i]; }

  std::span<Pixel> pixels() { return pixels_; }
  std::span<const Pixel> pixels() const { return pixels_; }

  bool same_shape(const Image& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_{0};
  int height_{0};
  std::vector<Pixel> pixels_;
};

using MomentImage = Image<MomentVector>;
using ColorImage = Image<Rgba>;
using CountImage = Image<std::uint32_t>;

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) throw DimensionMismatch(what);
}

// Opaque background the display side composites under the final image.
struct Background {
  float r{1.0f};
  float g{1.0f};
  float b{1.0f};

  static Background white() { return {1.0f, 1.0f, 1.0f}; }
  static Background black() { return {0.0f, 0.0f, 0.0f}; }
};

inline ColorImage composite_background(const ColorImage& image, Background bg) {
  ColorImage out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Rgba& p = image[i];
    const float keep = 1.0f - std::min(1.0f, std::max(0.0f, p.a));
    out[i] = {p.r + keep * bg.r, p.g + keep * bg.g, p.b + keep * bg.b, 1.0f};
  }
  return out;
}

// 8-bit RGB after compositing over the background; alpha is discarded.
struct Rgb8Image {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> data;  // row-major RGB triples

  friend bool operator==(const Rgb8Image&, const Rgb8Image&) = default;
};

inline std::uint8_t quantize_channel(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline Rgb8Image to_rgb8(const ColorImage& image, Background bg) {
  const ColorImage flat = composite_background(image, bg);
  Rgb8Image out{flat.width(), flat.height(), {}};
  out.data.reserve(flat.size() * 3);
  for (const Rgba& p : flat.pixels()) {
    out.data.push_back(quantize_channel(p.r));
    out.data.push_back(quantize_channel(p.g));
    out.data.push_back(quantize_channel(p.b));
  }
  return out;
}

inline float max_abs_diff(const ColorImage& a, const ColorImage& b) {
  require_same_shape(a, b, "max_abs_diff: image dimensions differ");
  float worst = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(a[i][c] - b[i][c]));
  }
  return worst;
}

}  // namespace apc
