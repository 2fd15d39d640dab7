#pragma once

// Power-moment order-independent transparency core.
//
// Each pixel keeps five sums over its samples: the total absorbance b0 and the
// absorbance weighted by the first four powers of the warped sample depth.
// Transmittance at any depth is recovered from the canonical three-point
// representation of those moments (a biased 3x3 Hankel solve).

#include <apc/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

namespace apc {

inline constexpr int kMomentCount = 5;
inline constexpr double kDefaultAbsorbanceMax = 10.0;

struct MomentVector {
  std::array<double, kMomentCount> b{};

  double operator[](int i) const { return b[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return b[static_cast<std::size_t>(i)]; }

  double total() const { return b[0]; }
  bool empty() const { return b[0] == 0.0; }

  MomentVector& operator+=(const MomentVector& o) {
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
    return *this;
  }
  friend MomentVector operator+(MomentVector a, const MomentVector& o) { return a += o; }
  friend bool operator==(const MomentVector&, const MomentVector&) = default;

  bool finite() const {
    return std::all_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); });
  }

  // Power bounds that hold for any sample set with warped depths in [-1, 1].
  bool within_power_bounds(double tol = 1e-12) const {
    const double s = tol * std::max(1.0, b[0]);
    return finite() && b[0] >= -s && std::abs(b[1]) <= b[0] + s && b[2] >= -s &&
           b[2] <= b[0] + s && std::abs(b[3]) <= b[0] + s && b[4] >= -s && b[4] <= b[2] + s;
  }
};

// World-space depth range used for the logarithmic warp.
class DepthBounds {
 public:
  DepthBounds(double near, double far) : near_(near), far_(far) {
    if (!(std::isfinite(near) && std::isfinite(far)) || !(near > 0.0) || !(far > near)) {
      throw ContractViolation("DepthBounds requires 0 < near < far");
    }
    log_near_ = std::log(near_);
    log_range_ = std::log(far_) - log_near_;
  }

  double near() const { return near_; }
  double far() const { return far_; }
  double log_near() const { return log_near_; }
  double log_range() const { return log_range_; }

 private:
  double near_;
  double far_;
  double log_near_;
  double log_range_;
};

struct ReconstructionParams {
  double moment_bias = 6e-4;
  // Mixing target for the normalized moments (b1..b4).
  std::array<double, 4> bias_vector{0.0, 0.375, 0.0, 0.375};
  double overestimation = 0.3;
  double absorbance_max = kDefaultAbsorbanceMax;
  // Rescale the reduced color so its alpha equals 1 - exp(-b0).
  bool renormalize = true;

  void validate() const {
    if (!(moment_bias >= 0.0 && moment_bias < 1.0)) {
      throw ContractViolation("moment_bias must lie in [0, 1)");
    }
    if (!(overestimation >= 0.0 && overestimation <= 1.0)) {
      throw ContractViolation("overestimation must lie in [0, 1]");
    }
    if (!(absorbance_max > 0.0) || !std::isfinite(absorbance_max)) {
      throw ContractViolation("absorbance_max must be positive and finite");
    }
    for (double v : bias_vector) {
      if (!std::isfinite(v)) throw ContractViolation("bias_vector must be finite");
    }
  }
};

// Maps a world-space distance logarithmically onto [-1, 1].
inline double warp_depth(double d, const DepthBounds& bounds) {
  const double clamped = std::clamp(d, bounds.near(), bounds.far());
  if (clamped == bounds.near()) return -1.0;
  if (clamped == bounds.far()) return 1.0;
  const double w = 2.0 * (std::log(clamped) - bounds.log_near()) / bounds.log_range() - 1.0;
  return std::clamp(w, -1.0, 1.0);
}

// Adds one sample's absorbance, weighted by powers of its warped depth.
inline MomentVector generate_moments(MomentVector b, double z, double transmittance,
                                     double absorbance_max = kDefaultAbsorbanceMax) {
  if (!(z >= -1.0 && z <= 1.0)) throw ContractViolation("warped depth outside [-1, 1]");
  if (!(transmittance >= 0.0 && transmittance <= 1.0)) {
    throw ContractViolation("transmittance outside [0, 1]");
  }
  const double absorbance = std::min(-std::log(transmittance), absorbance_max);
  double zi = 1.0;
  for (std::size_t i = 0; i < b.b.size(); ++i) {
    b.b[i] += zi * absorbance;
    zi *= z;
  }
  return b;
}

// Normalized moments (b1..b4)/b0 mixed toward the bias vector.
inline std::array<double, 4> bias_moments(const MomentVector& b, const ReconstructionParams& params) {
  if (!(b[0] > 0.0)) throw ContractViolation("bias_moments requires b0 > 0");
  const double keep = 1.0 - params.moment_bias;
  std::array<double, 4> m{};
  for (int i = 0; i < 4; ++i) {
    m[static_cast<std::size_t>(i)] =
        keep * (b[i + 1] / b[0]) + params.moment_bias * params.bias_vector[static_cast<std::size_t>(i)];
  }
  return m;
}

namespace detail {

// Entries of the 3x3 Hankel matrix below this magnitude of pivot are treated
// as rank deficient (normalized moments are bounded by 1).
inline constexpr double kPivotTolerance = 1e-12;

inline double support_weight(double x, double z, double overestimation) {
  if (x < z) return 1.0;
  if (x == z) return overestimation;
  return 0.0;
}

// Fraction of the normalized absorbance located in front of depth z.
// Empty optional when the Hankel matrix is not positive semidefinite.
inline std::optional<double> absorbance_fraction(const std::array<double, 4>& m, double z,
                                                 double overestimation) {
  const double m1 = m[0];
  const double m2 = m[1];
  const double m3 = m[2];
  const double m4 = m[3];

  // LDL^T factorization of [[1, m1, m2], [m1, m2, m3], [m2, m3, m4]].
  const double d11 = m2 - m1 * m1;
  if (d11 < -kPivotTolerance) return std::nullopt;
  if (d11 <= kPivotTolerance) {
    // All mass at a single depth.
    return support_weight(m1, z, overestimation);
  }
  const double l21_d11 = m3 - m1 * m2;
  const double l21 = l21_d11 / d11;
  const double d22 = (m4 - m2 * m2) - l21 * l21_d11;
  if (d22 < -kPivotTolerance) return std::nullopt;

  if (d22 <= kPivotTolerance) {
    // Two support points: the roots of x^2 + a1 x + a0, where (a0, a1) solves
    // the leading 2x2 Hankel system against -(m2, m3).
    const double a1 = -l21;
    const double a0 = -m2 - a1 * m1;
    const double disc = std::max(0.0, 0.25 * a1 * a1 - a0);
    const double r = std::sqrt(disc);
    const double x0 = -0.5 * a1 - r;
    const double x1 = -0.5 * a1 + r;
    if (x1 - x0 <= 0.0) return support_weight(m1, z, overestimation);
    const double w0 = (x1 - m1) / (x1 - x0);
    const double w1 = 1.0 - w0;
    return w0 * support_weight(x0, z, overestimation) + w1 * support_weight(x1, z, overestimation);
  }

  // Solve B c = (1, z, z^2): forward substitution, diagonal scaling, back substitution.
  double c0 = 1.0;
  double c1 = z - m1;
  double c2 = z * z - m2 - l21 * c1;
  c1 /= d11;
  c2 /= d22;
  c1 -= l21 * c2;
  c0 -= m1 * c1 + m2 * c2;

  // The other two support points are the roots of c0 + c1 x + c2 x^2.
  const double p = c1 / c2;
  const double q = c0 / c2;
  const double disc = std::max(0.0, 0.25 * p * p - q);
  const double r = std::sqrt(disc);
  const std::array<double, 3> x{z, -0.5 * p - r, -0.5 * p + r};
  const std::array<double, 3> f{overestimation, support_weight(x[1], z, overestimation),
                                support_weight(x[2], z, overestimation)};

  // Quadratic through (x_i, f_i) in Newton form, then expanded to monomials.
  const double f01 = (f[1] - f[0]) / (x[1] - x[0]);
  const double f12 = (f[2] - f[1]) / (x[2] - x[1]);
  const double f012 = (f12 - f01) / (x[2] - x[0]);
  const double p2 = f012;
  const double p1 = f01 - f012 * (x[0] + x[1]);
  const double p0 = f[0] - f01 * x[0] + f012 * x[0] * x[1];
  const double fraction = p0 + p1 * m1 + p2 * m2;
  if (!std::isfinite(fraction)) return std::nullopt;
  return std::clamp(fraction, 0.0, 1.0);
}

}  // namespace detail

// Transmittance in front of warped depth z implied by the accumulated moments.
// Throws NumericDegeneracyError if the biased Hankel matrix stays indefinite
// after one retry with four times the moment bias.
inline double reconstruct_transmittance(const MomentVector& b, double z,
                                        const ReconstructionParams& params) {
  if (!b.finite()) throw ContractViolation("moments must be finite");
  if (!(z >= -1.0 && z <= 1.0)) throw ContractViolation("warped depth outside [-1, 1]");
  if (b[0] < 0.0) throw ContractViolation("total absorbance must be non-negative");
  if (b[0] == 0.0) return 1.0;
  // Far plane: every sample lies at or before it, so all absorbance counts.
  if (z == 1.0) return std::clamp(std::exp(-b[0]), 0.0, 1.0);

  std::optional<double> fraction =
      detail::absorbance_fraction(bias_moments(b, params), z, params.overestimation);
  if (!fraction) {
    ReconstructionParams stronger = params;
    stronger.moment_bias = std::min(params.moment_bias * 4.0, 0.999);
    fraction = detail::absorbance_fraction(bias_moments(b, stronger), z, params.overestimation);
  }
  if (!fraction) {
    throw NumericDegeneracyError("biased Hankel matrix is not positive semidefinite; increase moment_bias");
  }
  return std::clamp(std::exp(-b[0] * *fraction), 0.0, 1.0);
}

}  // namespace apc
