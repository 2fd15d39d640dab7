#include <apc/moments.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace {

using apc::MomentVector;
using apc::ReconstructionParams;
using apc::testing::brute_force_transmittance;
using apc::testing::DiracSample;

MomentVector accumulate(const std::vector<DiracSample>& samples, double absorbance_max = apc::kDefaultAbsorbanceMax) {
  MomentVector b;
  for (const auto& s : samples) b = apc::generate_moments(b, s.z, std::exp(-s.absorbance), absorbance_max);
  return b;
}

ReconstructionParams unbiased() {
  ReconstructionParams p;
  p.moment_bias = 0.0;
  return p;
}

std::vector<DiracSample> random_samples(std::mt19937_64& rng, int max_count, double z_hi = 1.0) {
  std::uniform_int_distribution<int> count(1, max_count);
  std::uniform_real_distribution<double> z(-1.0, z_hi);
  std::uniform_real_distribution<double> a(0.0, 2.0);
  std::vector<DiracSample> out(static_cast<std::size_t>(count(rng)));
  for (auto& s : out) s = {z(rng), a(rng)};
  return out;
}

TEST(WarpDepth, EndpointsMapToUnitInterval) {
  const apc::DepthBounds bounds(0.5, 7.0);
  EXPECT_EQ(apc::warp_depth(0.5, bounds), -1.0);
  EXPECT_EQ(apc::warp_depth(7.0, bounds), 1.0);
}

TEST(WarpDepth, LogarithmicMidpoint) {
  const apc::DepthBounds bounds(1.0, 100.0);
  EXPECT_NEAR(apc::warp_depth(10.0, bounds), 0.0, 1e-15);
}

TEST(WarpDepth, ClampsAndIsIncreasing) {
  const apc::DepthBounds bounds(2.0, 3.0);
  EXPECT_EQ(apc::warp_depth(1.0, bounds), -1.0);
  EXPECT_EQ(apc::warp_depth(9.0, bounds), 1.0);
  double prev = -1.0;
  for (int i = 1; i <= 100; ++i) {
    const double w = apc::warp_depth(2.0 + i / 100.0, bounds);
    EXPECT_GT(w, prev);
    prev = w;
  }
}

TEST(DepthBounds, RejectsInvalidRanges) {
  EXPECT_THROW(apc::DepthBounds(0.0, 1.0), apc::ContractViolation);
  EXPECT_THROW(apc::DepthBounds(2.0, 2.0), apc::ContractViolation);
  EXPECT_THROW(apc::DepthBounds(-1.0, 2.0), apc::ContractViolation);
}

TEST(GenerateMoments, SampleAtZeroDepth) {
  const MomentVector b = apc::generate_moments({}, 0.0, std::exp(-1.0));
  EXPECT_NEAR(b[0], 1.0, 1e-15);
  for (int i = 1; i < 5; ++i) EXPECT_EQ(b[i], 0.0);
}

TEST(GenerateMoments, DirectFormula) {
  const MomentVector b = apc::generate_moments({}, 0.5, std::exp(-2.0));
  const double expected[] = {2.0, 1.0, 0.5, 0.25, 0.125};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(b[i], expected[i], 1e-14);
}

TEST(GenerateMoments, AccumulatesSecondSample) {
  MomentVector b;
  b[0] = 1.0;
  b = apc::generate_moments(b, -0.5, std::exp(-1.0));
  const double expected[] = {2.0, -0.5, 0.25, -0.125, 0.0625};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(b[i], expected[i], 1e-14);
}

TEST(GenerateMoments, OpaqueSampleIsClamped) {
  const MomentVector b = apc::generate_moments({}, 0.0, 0.0, 10.0);
  EXPECT_EQ(b[0], 10.0);
  EXPECT_TRUE(b.finite());
}

TEST(GenerateMoments, RejectsContractViolations) {
  EXPECT_THROW(apc::generate_moments({}, 0.0, 1.5), apc::ContractViolation);
  EXPECT_THROW(apc::generate_moments({}, 1.01, 0.5), apc::ContractViolation);
  EXPECT_THROW(apc::generate_moments({}, -1.01, 0.5), apc::ContractViolation);
}

TEST(BiasMoments, ZeroBiasIsIdentity) {
  const MomentVector b = apc::generate_moments({}, 0.5, std::exp(-2.0));
  const auto m = apc::bias_moments(b, unbiased());
  EXPECT_NEAR(m[0], 0.5, 1e-15);
  EXPECT_NEAR(m[1], 0.25, 1e-15);
  EXPECT_NEAR(m[2], 0.125, 1e-15);
  EXPECT_NEAR(m[3], 0.0625, 1e-15);
}

TEST(BiasMoments, BiasVectorIsFixedPoint) {
  ReconstructionParams p;
  MomentVector b;
  b[0] = 3.0;
  for (int i = 0; i < 4; ++i) b[i + 1] = 3.0 * p.bias_vector[static_cast<std::size_t>(i)];
  for (double beta : {0.0, 0.1, 0.5, 0.9}) {
    p.moment_bias = beta;
    const auto m = apc::bias_moments(b, p);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(m[i], p.bias_vector[i], 1e-15);
  }
}

TEST(BiasMoments, RequiresPositiveTotal) {
  EXPECT_THROW(apc::bias_moments(MomentVector{}, ReconstructionParams{}), apc::ContractViolation);
}

TEST(ReconstructionParams, RejectsOutOfRangeValues) {
  ReconstructionParams p;
  p.moment_bias = 1.0;
  EXPECT_THROW(p.validate(), apc::ContractViolation);
  p = {};
  p.overestimation = 1.5;
  EXPECT_THROW(p.validate(), apc::ContractViolation);
  p = {};
  p.absorbance_max = 0.0;
  EXPECT_THROW(p.validate(), apc::ContractViolation);
  EXPECT_NO_THROW(ReconstructionParams{}.validate());
}

TEST(ReconstructTransmittance, EmptyVolumeIsTransparent) {
  for (double z : {-1.0, 0.0, 0.7, 1.0}) EXPECT_EQ(apc::reconstruct_transmittance({}, z, {}), 1.0);
}

TEST(ReconstructTransmittance, SingleDiracBehindQuery) {
  const std::vector<DiracSample> samples{{0.0, 1.0}};
  const MomentVector b = accumulate(samples);
  const double z = 1.0 - 1e-9;
  const double oracle = brute_force_transmittance(samples, z);
  EXPECT_NEAR(oracle, std::exp(-1.0), 1e-12);
  EXPECT_NEAR(apc::reconstruct_transmittance(b, z, {}), oracle, 1e-3);
  EXPECT_NEAR(apc::reconstruct_transmittance(b, z, unbiased()), oracle, 1e-3);
}

TEST(ReconstructTransmittance, TwoDiracsAreExact) {
  const std::vector<DiracSample> samples{{-0.4, 0.7}, {0.6, 1.1}};
  const MomentVector b = accumulate(samples);
  const double oracle = brute_force_transmittance(samples, 0.1);
  EXPECT_NEAR(oracle, std::exp(-0.7), 1e-12);
  for (double over : {0.0, 0.3, 1.0}) {
    ReconstructionParams p = unbiased();
    p.overestimation = over;
    EXPECT_NEAR(apc::reconstruct_transmittance(b, 0.1, p), oracle, 1e-3);
  }
}

TEST(ReconstructTransmittance, DiracAtQueryGetsOverestimationWeight) {
  const std::vector<DiracSample> samples{{0.25, 2.0}};
  const MomentVector b = accumulate(samples);
  ReconstructionParams p = unbiased();
  p.overestimation = 0.3;
  EXPECT_NEAR(apc::reconstruct_transmittance(b, 0.25, p), std::exp(-2.0 * 0.3), 1e-12);
}

TEST(ReconstructTransmittance, RejectsNaNAndBadDepth) {
  MomentVector b;
  b[0] = 1.0;
  b[2] = std::nan("");
  EXPECT_THROW(apc::reconstruct_transmittance(b, 0.0, {}), apc::ContractViolation);
  EXPECT_THROW(apc::reconstruct_transmittance(MomentVector{}, 1.5, {}), apc::ContractViolation);
}

TEST(ReconstructTransmittance, IndefiniteHankelIsReported) {
  MomentVector b;
  b.b = {1.0, 0.0, -0.5, 0.0, 0.1};
  EXPECT_THROW(apc::reconstruct_transmittance(b, 0.0, {}), apc::NumericDegeneracyError);
}

TEST(ReconstructTransmittance, RetriesWithStrongerBias) {
  // Indefinite at moment_bias = 6e-4, definite at four times that.
  MomentVector b;
  b.b = {1.0, 0.0, -5e-4, 0.0, 0.3};
  const double t = apc::reconstruct_transmittance(b, 0.0, {});
  EXPECT_GE(t, 0.0);
  EXPECT_LE(t, 1.0);
}

TEST(MomentProperties, AdditivityOverRandomPartitions) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto samples = random_samples(rng, 40);
    const MomentVector whole = accumulate(samples);
    std::uniform_int_distribution<int> groups_dist(1, 6);
    const int groups = groups_dist(rng);
    std::vector<MomentVector> parts(static_cast<std::size_t>(groups));
    std::uniform_int_distribution<int> pick(0, groups - 1);
    for (const auto& s : samples) {
      auto& g = parts[static_cast<std::size_t>(pick(rng))];
      g = apc::generate_moments(g, s.z, std::exp(-s.absorbance));
    }
    MomentVector sum;
    for (const auto& g : parts) sum += g;
    for (int i = 0; i < 5; ++i) {
      EXPECT_NEAR(sum[i], whole[i], 1e-10 * std::max(1.0, std::abs(whole[0])));
    }
  }
}

TEST(MomentProperties, OrderIndependence) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto samples = random_samples(rng, 40);
    const MomentVector a = accumulate(samples);
    std::shuffle(samples.begin(), samples.end(), rng);
    const MomentVector b = accumulate(samples);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(a[i], b[i], 1e-10 * std::max(1.0, a[0]));
  }
}

TEST(MomentProperties, PowerBoundsHold) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    EXPECT_TRUE(accumulate(random_samples(rng, 30)).within_power_bounds());
  }
}

TEST(MomentProperties, RangeAndMonotonicity) {
  std::mt19937_64 rng(5);
  const ReconstructionParams params;
  for (int trial = 0; trial < 50; ++trial) {
    const MomentVector b = accumulate(random_samples(rng, 25));
    double prev = 1.0;
    for (int i = 0; i < 1000; ++i) {
      const double z = -1.0 + 2.0 * i / 999.0;
      const double t = apc::reconstruct_transmittance(b, z, params);
      ASSERT_GE(t, 0.0);
      ASSERT_LE(t, 1.0);
      EXPECT_LE(t, prev + 1e-3) << "trial " << trial << " z " << z;
      prev = t;
    }
  }
}

TEST(MomentProperties, FarFieldMatchesTotalAbsorbance) {
  std::mt19937_64 rng(9);
  const ReconstructionParams params;
  for (int trial = 0; trial < 200; ++trial) {
    const auto samples = random_samples(rng, 25, 0.99);
    const MomentVector b = accumulate(samples);
    const double t = apc::reconstruct_transmittance(b, 1.0, params);
    EXPECT_NEAR(t, brute_force_transmittance(samples, 1.0), 1e-3);
    const double fraction = -std::log(t) / b[0];
    EXPECT_NEAR(fraction, 1.0, 1e-3);
  }
}

}  // namespace
