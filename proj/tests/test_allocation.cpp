#include "ripl_lab/allocation.hpp"
#include "ripl_lab/operators.hpp"

#include <gtest/gtest.h>

using namespace ripl_lab;

namespace {

CoherenceProfile fh_profile(Index n) {
  const auto fh = fourier_haar_matrix(n);
  return coherence_profile(fh.u, fh.layout.levels(), fh.layout.levels());
}

// Closed formula for the general uniform allocation, written out directly.
double uniform_raw(const CoherenceProfile& p, const SparsityPattern& s, const AllocationParams& a, Index k, double mt) {
  double inter = 0.0;
  for (Index l = 0; l < s.r(); ++l) inter += p.mu_local(k, l) * double(s[l]);
  const double ls = std::log(2.0 * double(std::max<Index>(s.total(), 1)));
  const double n = double(s.n());
  return a.c / (a.delta * a.delta) * double(p.sampling.width(k)) * inter *
         (double(s.r()) * std::log(2.0 * mt) * std::log(2.0 * n) * ls * ls + std::log(1.0 / a.eps));
}

Index clamp_ceil(double raw, Index width) {
  const double c = std::ceil(raw * (1.0 - 1e-12));
  if (c >= double(width)) return width;
  return std::max<Index>(1, Index(c));
}

bool leq(const std::vector<Index>& a, const std::vector<Index>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

}  // namespace

TEST(AllocateUniform, ZeroCoherenceGivesFloor) {
  CoherenceProfile p = fh_profile(16);
  p.mu_local.setZero();
  const SparsityPattern s(p.sparsity, {1, 1, 1, 1});
  AllocationParams a;
  a.r0 = 1;
  const auto out = allocate_uniform(p, s, a);
  EXPECT_EQ(out.m, (std::vector<Index>{2, 1, 1, 1}));
}

TEST(AllocateUniform, FixedPointIsLeastAndConsistent) {
  const auto p = fh_profile(256);
  const SparsityPattern s(p.sparsity, {2, 2, 2, 2, 2, 2, 2, 2});
  for (double c : {1e-5, 3e-5, 1e-4, 1e-3}) {
    for (Index r0 : {0, 2}) {
      AllocationParams a;
      a.c = c;
      a.r0 = r0;
      const auto out = allocate_uniform(p, s, a);
      const auto& lv = p.sampling;
      auto g = [&](Index tail) {
        std::vector<Index> m(std::size_t(lv.levels()));
        for (Index k = 0; k < lv.levels(); ++k)
          m[std::size_t(k)] = k < r0 ? lv.width(k) : clamp_ceil(uniform_raw(p, s, a, k, double(tail)), lv.width(k));
        return m;
      };
      Index tail = 0;
      for (Index k = r0; k < lv.levels(); ++k) tail += out.m[std::size_t(k)];
      EXPECT_EQ(g(tail), out.m) << "not a fixed point at C=" << c;
      for (Index t = lv.levels() - r0; t < tail; ++t) {
        const auto m = g(t);
        Index tt = 0;
        for (Index k = r0; k < lv.levels(); ++k) tt += m[std::size_t(k)];
        EXPECT_NE(tt, t) << "smaller fixed point at " << t;
      }
    }
  }
}

TEST(AllocateUniform, GoldenFourierHaar256) {
  // N = 256, s_k = min(4, width), delta = eps = 0.5, C = 1, r0 = 0: every level saturates
  const auto p = fh_profile(256);
  const SparsityPattern s(p.sparsity, {2, 2, 4, 4, 4, 4, 4, 4});
  const auto out = allocate_uniform(p, s, {});
  EXPECT_EQ(out.m, (std::vector<Index>{2, 2, 4, 8, 16, 32, 64, 128}));
  EXPECT_TRUE(out.any_clamped);
  EXPECT_EQ(out.iterations, 2);
  EXPECT_NEAR(out.raw[0], 103567.73375819456, 1e-6);
  EXPECT_NEAR(out.raw[7], 214679.23042052594, 1e-6);
  EXPECT_NEAR(out.raw[0], uniform_raw(p, s, {}, 0, 256.0), 1e-9);
  EXPECT_EQ(out.k_factor, 1.0);
}

TEST(AllocateUniform, DoublingCDoublesRaw) {
  const auto p = fh_profile(64);
  const SparsityPattern s(p.sparsity, {1, 1, 1, 1, 1, 1});
  AllocationParams a;
  a.c = 1e-5;
  const auto lo = allocate_uniform(p, s, a);
  a.c = 2e-5;
  const auto hi = allocate_uniform(p, s, a);
  for (std::size_t k = 0; k < lo.raw.size(); ++k) EXPECT_GE(hi.raw[k], 2.0 * lo.raw[k] * (1.0 - 1e-12));
}

TEST(AllocateUniform, Monotone) {
  const auto p = fh_profile(64);
  AllocationParams a;
  a.c = 2e-5;
  const SparsityPattern base(p.sparsity, {1, 1, 1, 2, 2, 2});
  const auto m0 = allocate_uniform(p, base, a).m;
  for (Index l = 0; l < 6; ++l) {
    std::vector<Index> v = base.s();
    ++v[std::size_t(l)];
    EXPECT_TRUE(leq(m0, allocate_uniform(p, SparsityPattern(p.sparsity, v), a).m)) << l;
  }
  AllocationParams b = a;
  b.delta = 0.25;
  EXPECT_TRUE(leq(m0, allocate_uniform(p, base, b).m));
  b = a;
  b.eps = 0.01;
  EXPECT_TRUE(leq(m0, allocate_uniform(p, base, b).m));
}

TEST(AllocateUniform, RejectsBadParameters) {
  const auto p = fh_profile(16);
  const SparsityPattern s(p.sparsity, {1, 1, 1, 1});
  AllocationParams a;
  a.delta = 1.0;
  EXPECT_THROW(allocate_uniform(p, s, a), Error);
  a = {};
  a.eps = 0.0;
  EXPECT_THROW(allocate_uniform(p, s, a), Error);
  a = {};
  a.c = -1.0;
  EXPECT_THROW(allocate_uniform(p, s, a), Error);
  a = {};
  a.r0 = 5;
  EXPECT_THROW(allocate_uniform(p, s, a), Error);
}

TEST(AllocateHaar, KernelWeights) {
  const auto lv = LevelStructure::dyadic(256);
  const SparsityPattern s(lv, {0, 0, 0, 4, 0, 0, 0, 0});
  for (Index k = 0; k < 8; ++k) {
    const double d = std::abs(double(k - 3));
    EXPECT_DOUBLE_EQ(haar_interference(s, k, HaarMode::Uniform), std::exp2(-d) * 4.0);
    EXPECT_DOUBLE_EQ(haar_interference(s, k, HaarMode::Nonuniform), std::exp2(-d / 2.0) * 4.0);
    if (k != 3) {
      EXPECT_LT(haar_interference(s, k, HaarMode::Uniform), haar_interference(s, k, HaarMode::Nonuniform));
    }
  }
}

TEST(AllocateHaar, SaturatedEverywhere) {
  const auto lv = LevelStructure::dyadic(64);
  const SparsityPattern s(lv, {1, 1, 1, 1, 1, 1});
  for (auto mode : {HaarMode::Uniform, HaarMode::Nonuniform}) {
    HaarAllocationParams p;
    p.mode = mode;
    p.r0 = 6;
    EXPECT_EQ(allocate_haar(s, p).m, (std::vector<Index>{2, 2, 4, 8, 16, 32}));
  }
}

TEST(AllocateHaar, NeedsDyadicLevels) {
  const SparsityPattern s(LevelStructure({0, 4, 8}, 8), {1, 1});
  EXPECT_THROW(allocate_haar(s, {}), Error);
}

TEST(AllocateHaar, Warnings) {
  const auto lv = LevelStructure::dyadic(64);
  HaarAllocationParams p;
  p.r0 = 3;
  p.c = 1e-4;
  EXPECT_EQ(allocate_haar(SparsityPattern(lv, {2, 2, 2, 2, 2, 2}), p).warnings.size(), 1U);  // 8 > 2
  EXPECT_TRUE(allocate_haar(SparsityPattern(lv, {2, 2, 2, 8, 8, 8}), p).warnings.empty());
  HaarAllocationParams q;
  q.mode = HaarMode::Nonuniform;
  q.c = 1e-2;
  EXPECT_EQ(allocate_haar(SparsityPattern(lv, {2, 2, 2, 2, 2, 2}), q).warnings.size(), 1U);
  q.eps = 0.1;
  EXPECT_TRUE(allocate_haar(SparsityPattern(lv, {2, 2, 2, 2, 2, 2}), q).warnings.empty());
}

TEST(AllocateHaar, UniformAtMostNonuniformMatched) {
  const auto lv = LevelStructure::dyadic(1024);
  const SparsityPattern s(lv, {2, 2, 2, 3, 4, 4, 5, 6, 6, 7});
  for (double c : {1e-5, 1e-4, 1e-3}) {
    HaarAllocationParams u;
    u.c = c;
    u.matched_scaling = true;
    HaarAllocationParams n = u;
    n.mode = HaarMode::Nonuniform;
    const auto mu = allocate_haar(s, u), mn = allocate_haar(s, n);
    EXPECT_TRUE(leq(mu.m, mn.m)) << c;
    for (std::size_t k = 0; k < mu.raw.size(); ++k) EXPECT_LE(mu.raw[k], mn.raw[k]);
  }
}

TEST(AllocateHaar, DeltaScalingAndMonotone) {
  const auto lv = LevelStructure::dyadic(1024);
  const SparsityPattern s(lv, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  HaarAllocationParams p;
  p.c = 1e-6;
  const auto a = allocate_haar(s, p);
  p.delta = 0.25;
  const auto b = allocate_haar(s, p);
  for (std::size_t k = 0; k < a.raw.size(); ++k)
    if (!b.clamped[k]) {
      EXPECT_GE(b.raw[k], 4.0 * a.raw[k] * (1.0 - 1e-12));
    }
  for (auto mode : {HaarMode::Uniform, HaarMode::Nonuniform}) {
    HaarAllocationParams q;
    q.mode = mode;
    q.c = 1e-5;
    q.eps = 0.2;
    const auto m0 = allocate_haar(s, q).m;
    for (Index l = 0; l < 10; ++l) {
      std::vector<Index> v = s.s();
      v[std::size_t(l)] += 1;
      EXPECT_TRUE(leq(m0, allocate_haar(SparsityPattern(lv, v), q).m));
    }
    q.eps = 0.05;
    EXPECT_TRUE(leq(m0, allocate_haar(s, q).m));
  }
}

TEST(Calibrate, LargestConstantUnderTarget) {
  const auto lv = LevelStructure::dyadic(64);
  const SparsityPattern s(lv, {2, 2, 2, 2, 2, 2});
  HaarAllocationParams p;
  p.r0 = 4;
  auto with = [&](double c) {
    HaarAllocationParams q = p;
    q.c = c;
    return allocate_haar(s, q);
  };
  const auto cal = calibrate_constant(with, 32);
  EXPECT_LE(cal.allocation.total(), 32);
  EXPECT_GT(with(cal.c * 1.001).total(), cal.allocation.total() - 1);
  EXPECT_THROW(calibrate_constant(with, 10), Error);  // 16 rows are saturated already
}

TEST(NonuniformCheck, Examples) {
  const auto p = fh_profile(16);
  const std::vector<double> S{1.0, 1.0, 1.0, 1.0};
  std::vector<double> full;
  for (Index k = 0; k < 4; ++k) full.push_back(double(p.sampling.width(k)));
  const auto a = check_nonuniform_condition(p, S, full, 5.0);
  EXPECT_TRUE(a.all_pass);
  for (double v : a.lhs) EXPECT_EQ(v, 0.0);

  CoherenceProfile z = p;
  z.mu_tilde.setZero();
  EXPECT_TRUE(check_nonuniform_condition(z, S, {1, 1, 1, 1}, 100.0).all_pass);

  // r = 2 block-diagonal system, n = 4: hand expansion
  CoherenceProfile b;
  b.sampling = b.sparsity = LevelStructure({0, 2, 4}, 4);
  b.mu_local = RealMatrix::Zero(2, 2);
  b.mu_local(0, 0) = 0.5;
  b.mu_local(1, 1) = 0.5;
  b.mu_tilde = nonuniform_local_coherence(b.mu_local);
  const auto h = check_nonuniform_condition(b, {1.0, 2.0}, {1.0, 1.0}, 1.0);
  // l = 1: (2/1 - 1) * 0.5 * 1 = 0.5; l = 2: (2/1 - 1) * 0.5 * 2 = 1
  EXPECT_DOUBLE_EQ(h.lhs[0], 0.5);
  EXPECT_DOUBLE_EQ(h.lhs[1], 1.0);
  EXPECT_TRUE(h.all_pass);
  EXPECT_FALSE(check_nonuniform_condition(b, {1.0, 2.0}, {1.0, 1.0}, 1.5).pass[1]);
  EXPECT_THROW(check_nonuniform_condition(b, {1.0}, {1.0, 1.0}, 1.0), Error);
}
