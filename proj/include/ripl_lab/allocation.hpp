#pragma once

// Measurement-allocation calculators. The recovery theorems are stated with
// unspecified absolute constants, so every calculator takes an explicit
// constant C; guarantees only hold for C large enough.

#include "ripl_lab/coherence.hpp"
#include "ripl_lab/common.hpp"
#include "ripl_lab/levels.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace ripl_lab {

struct AllocationParams {
  double delta = 0.5;
  double eps = 0.5;
  double c = 1.0;
  Index r0 = 0;
  int max_iterations = 20;
};

struct Allocation {
  std::vector<Index> m;
  std::vector<double> raw;      // C * (formula) before ceiling and clamping
  std::vector<bool> clamped;    // raw value fell outside [1, width]
  bool any_clamped = false;
  int iterations = 0;
  double k_factor = 0.0;        // max width_k / m_k
  Warnings warnings;

  Index total() const { return std::accumulate(m.begin(), m.end(), Index{0}); }
};

namespace detail {

inline void check_allocation_params(const AllocationParams& p, Index r) {
  require(p.delta > 0.0 && p.delta < 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
  require(p.eps > 0.0 && p.eps < 1.0, ErrorCode::InvalidArgument, "eps must lie in (0, 1)");
  require(p.c > 0.0, ErrorCode::InvalidArgument, "C must be positive");
  require(p.r0 >= 0 && p.r0 <= r, ErrorCode::InvalidArgument, "r0 must lie in [0, r]");
}

// log(2 s) with s = 0 read as s = 1 (the formula is vacuous there anyway).
inline double log2s(Index s) { return std::log(2.0 * static_cast<double>(std::max<Index>(s, 1))); }

// Least fixed point of m_k = clamp(ceil(raw_k(m~)), 1, width_k) for k > r0,
// m_k = width_k for k <= r0, where m~ = sum_{k > r0} m_k (all of m when
// r0 = 0). raw_k is non-decreasing in m~, so iterating upward from the floor
// is monotone and stops at the smallest consistent allocation.
inline Allocation solve_implicit(const LevelStructure& levels, Index r0, int max_iterations,
                                 const std::function<double(Index, double)>& raw_for) {
  const Index r = levels.levels();
  Allocation out;
  out.m.assign(static_cast<std::size_t>(r), 1);
  out.raw.assign(static_cast<std::size_t>(r), 0.0);
  out.clamped.assign(static_cast<std::size_t>(r), false);
  for (Index k = 0; k < r0; ++k) out.m[static_cast<std::size_t>(k)] = levels.width(k);

  auto tail_total = [&] {
    Index t = 0;
    for (Index k = r0; k < r; ++k) t += out.m[static_cast<std::size_t>(k)];
    return t;
  };

  bool stable = r0 == r;
  while (!stable) {
    require(out.iterations < max_iterations, ErrorCode::NonConvergence,
            "allocation fixed point did not settle in " + std::to_string(max_iterations) + " iterations");
    ++out.iterations;
    const double mt = static_cast<double>(tail_total());
    stable = true;
    for (Index k = r0; k < r; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const double raw = raw_for(k, mt);
      out.raw[ks] = raw;
      // relative slack so that e.g. 3 * (1 + 1e-16) does not ceil to 4
      const double c = std::ceil(raw * (1.0 - 1e-12));
      Index v = c >= static_cast<double>(levels.width(k)) ? levels.width(k) : static_cast<Index>(std::max(c, 1.0));
      out.clamped[ks] = raw > static_cast<double>(levels.width(k)) || raw < 1.0;
      if (v != out.m[ks]) stable = false;
      out.m[ks] = v;
    }
  }
  for (Index k = 0; k < r0; ++k) out.raw[static_cast<std::size_t>(k)] = static_cast<double>(levels.width(k));
  for (Index k = 0; k < r; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    out.any_clamped = out.any_clamped || out.clamped[ks];
    out.k_factor = std::max(out.k_factor, static_cast<double>(levels.width(k)) / static_cast<double>(out.m[ks]));
  }
  return out;
}

}  // namespace detail

// Uniform (RIPL) allocation for a general isometry:
//   m_k = C delta^-2 (N_k - N_{k-1}) (sum_l mu_{k,l} s_l)
//         (r log(2 m~) log(2N) log^2(2s) + log(1/eps)),   k > r0,
// with the first r0 levels fully sampled.
inline Allocation allocate_uniform(const CoherenceProfile& coh, const SparsityPattern& s,
                                   const AllocationParams& p) {
  const Index r = coh.r();
  require(s.r() == r && s.levels() == coh.sparsity, ErrorCode::DimensionMismatch,
          "pattern must be bound to the profile's sparsity levels");
  detail::check_allocation_params(p, r);
  const auto& lv = coh.sampling;
  const double n = static_cast<double>(lv.size());
  const double lsq = detail::log2s(s.total());
  auto raw_for = [&](Index k, double mt) {
    double interference = 0.0;
    for (Index l = 0; l < r; ++l) interference += coh.mu_local(k, l) * static_cast<double>(s[l]);
    const double logs = static_cast<double>(r) * std::log(2.0 * mt) * std::log(2.0 * n) * lsq * lsq +
                        std::log(1.0 / p.eps);
    return p.c / (p.delta * p.delta) * static_cast<double>(lv.width(k)) * interference * logs;
  };
  return detail::solve_implicit(lv, p.r0, p.max_iterations, raw_for);
}

enum class HaarMode { Uniform, Nonuniform };

// Interference-weighted sparsity seen by band k (0-based):
//   uniform:    s_k + sum_{l != k} 2^{-|k-l|} s_l     (l restricted to > r0 when r0 > 0)
//   nonuniform: s_k + sum_{l != k} 2^{-|k-l|/2} s_l
inline double haar_interference(const SparsityPattern& s, Index k, HaarMode mode, Index r0 = 0) {
  double sum = static_cast<double>(s[k]);
  const Index first = (mode == HaarMode::Uniform) ? r0 : 0;
  for (Index l = first; l < s.r(); ++l) {
    if (l == k) continue;
    const double d = static_cast<double>(std::abs(k - l));
    const double w = mode == HaarMode::Uniform ? std::exp2(-d) : std::exp2(-d / 2.0);
    sum += w * static_cast<double>(s[l]);
  }
  return sum;
}

struct HaarAllocationParams : AllocationParams {
  HaarMode mode = HaarMode::Uniform;
  // nonuniform kernel inside the uniform formula (same delta, log factors and
  // fixed point), so the two modes differ only in their interference kernel
  bool matched_scaling = false;
};

// Fourier-Haar allocation on the dyadic bands.
//   uniform:    m_k = C delta^-2 I_k (log(2 m~) log^2(2N) log^2(2s) + log(1/eps))
//   nonuniform: m_k = C I_k log(s / eps) log(N)
inline Allocation allocate_haar(const SparsityPattern& s, const HaarAllocationParams& p) {
  require(s.levels().is_dyadic(), ErrorCode::InvalidPattern, "Fourier-Haar allocation needs dyadic levels");
  const Index r = s.r();
  detail::check_allocation_params(p, r);
  const auto& lv = s.levels();
  const double n = static_cast<double>(lv.size());
  const double lsq = detail::log2s(s.total());
  Warnings warnings;

  if (p.mode == HaarMode::Uniform && p.r0 > 0 && p.r0 < r && lv.end(p.r0 - 1) > s[p.r0])
    warnings.push_back("hypothesis N_{r0} <= s_{r0+1} fails: " + std::to_string(lv.end(p.r0 - 1)) + " > " +
                       std::to_string(s[p.r0]));

  Allocation out;
  if (p.mode == HaarMode::Uniform || p.matched_scaling) {
    auto raw_for = [&](Index k, double mt) {
      const double interference = haar_interference(s, k, p.mode, p.r0);
      const double logs = std::log(2.0 * mt) * std::pow(std::log(2.0 * n), 2) * lsq * lsq + std::log(1.0 / p.eps);
      return p.c / (p.delta * p.delta) * interference * logs;
    };
    out = detail::solve_implicit(lv, p.r0, p.max_iterations, raw_for);
  } else {
    if (p.eps >= std::exp(-1.0)) warnings.push_back("nonuniform guarantee assumes eps < exp(-1)");
    const double st = static_cast<double>(std::max<Index>(s.total(), 1));
    auto raw_for = [&](Index k, double) {
      return p.c * haar_interference(s, k, HaarMode::Nonuniform) * std::log(st / p.eps) * std::log(n);
    };
    out = detail::solve_implicit(lv, p.r0, p.max_iterations, raw_for);
  }
  out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
  return out;
}

struct Calibration {
  double c = 0.0;
  Allocation allocation;
};

// Largest C (bisection in log C) whose allocation total stays <= target.
// Totals are non-decreasing in C for every calculator above.
inline Calibration calibrate_constant(const std::function<Allocation(double)>& allocate_with, Index target,
                                      double lo = 1e-9, double hi = 1e3, int steps = 80) {
  require(lo > 0.0 && hi > lo, ErrorCode::InvalidArgument, "calibration bracket must satisfy 0 < lo < hi");
  Calibration best{lo, allocate_with(lo)};
  require(best.allocation.total() <= target, ErrorCode::InvalidArgument,
          "target total " + std::to_string(target) + " is below the smallest reachable allocation");
  Allocation top = allocate_with(hi);
  if (top.total() <= target) return {hi, top};
  for (int i = 0; i < steps; ++i) {
    const double mid = std::sqrt(lo * hi);
    Allocation a = allocate_with(mid);
    if (a.total() <= target) {
      lo = mid;
      best = {mid, std::move(a)};
    } else {
      hi = mid;
    }
  }
  return best;
}

struct NonuniformCheck {
  std::vector<double> lhs;  // C * sum_k (width_k / m^_k - 1) mu~_{k,l} S_k, per sparsity level l
  std::vector<bool> pass;   // lhs <= 1
  bool all_pass = true;
};

// Feasibility check of the implicit condition on m^; not a solver.
inline NonuniformCheck check_nonuniform_condition(const CoherenceProfile& coh, const std::vector<double>& rel_sparsity,
                                                  const std::vector<double>& m_hat, double c) {
  const Index r = coh.r();
  require(static_cast<Index>(rel_sparsity.size()) == r && static_cast<Index>(m_hat.size()) == r,
          ErrorCode::DimensionMismatch, "need one S_k and one m^_k per level");
  NonuniformCheck out;
  out.lhs.assign(static_cast<std::size_t>(r), 0.0);
  out.pass.assign(static_cast<std::size_t>(r), true);
  for (Index l = 0; l < r; ++l) {
    double sum = 0.0;
    for (Index k = 0; k < r; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      require(m_hat[ks] >= 1.0 && rel_sparsity[ks] >= 0.0, ErrorCode::InvalidArgument, "m^_k >= 1 and S_k >= 0");
      sum += (static_cast<double>(coh.sampling.width(k)) / m_hat[ks] - 1.0) * coh.mu_tilde(k, l) * rel_sparsity[ks];
    }
    out.lhs[static_cast<std::size_t>(l)] = c * sum;
    out.pass[static_cast<std::size_t>(l)] = c * sum <= 1.0;
    out.all_pass = out.all_pass && c * sum <= 1.0;
  }
  return out;
}

}  // namespace ripl_lab
