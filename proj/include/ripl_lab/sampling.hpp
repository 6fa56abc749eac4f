#pragma once

// Multilevel random subsampling and the scaled measurement matrix
//
//   A = [ p_1^{-1/2} P_{Omega_1} U ; ... ; p_r^{-1/2} P_{Omega_r} U ],
//   p_k = m_k / (N_k - N_{k-1}).

#include "ripl_lab/common.hpp"
#include "ripl_lab/levels.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace ripl_lab {

struct SamplingScheme {
  LevelStructure levels;               // sampling levels N
  std::vector<Index> m;                // draws per level
  std::vector<std::vector<Index>> draws;  // 0-based row indices, repetitions allowed
  std::vector<bool> saturated;
  Index r0 = 0;
  std::uint64_t seed = 0;
  bool without_replacement = false;

  Index total() const { return std::accumulate(m.begin(), m.end(), Index{0}); }
};

struct DrawOptions {
  // permits m_k = 0 on unsaturated levels (the level contributes no rows)
  bool allow_empty_levels = false;
  // experimental variant: distinct rows per level, m_k <= width required
  bool without_replacement = false;
};

// Checks the structural invariants of a scheme; throws InvalidScheme.
inline void validate_scheme(const SamplingScheme& sc) {
  const Index r = sc.levels.levels();
  require(static_cast<Index>(sc.m.size()) == r && static_cast<Index>(sc.draws.size()) == r &&
              static_cast<Index>(sc.saturated.size()) == r,
          ErrorCode::InvalidScheme, "scheme vectors must have one entry per level");
  for (Index k = 0; k < r; ++k) {
    const auto& d = sc.draws[static_cast<std::size_t>(k)];
    require(static_cast<Index>(d.size()) == sc.m[static_cast<std::size_t>(k)], ErrorCode::InvalidScheme,
            "draw count differs from m_k");
    for (Index t : d)
      require(t >= sc.levels.begin(k) && t < sc.levels.end(k), ErrorCode::InvalidScheme,
              "draw outside its level");
    if (sc.saturated[static_cast<std::size_t>(k)]) {
      require(sc.m[static_cast<std::size_t>(k)] == sc.levels.width(k), ErrorCode::InvalidScheme,
              "saturated level must take every row");
      for (Index i = 0; i < sc.levels.width(k); ++i)
        require(d[static_cast<std::size_t>(i)] == sc.levels.begin(k) + i, ErrorCode::InvalidScheme,
                "saturated level must list its rows in order");
    }
  }
}

// Levels 1..r0 are taken in full; the rest draw m_k rows i.i.d. uniformly from
// their level. Level k uses the stream derive_seed(seed, k).
inline SamplingScheme draw_scheme(const LevelStructure& levels, const std::vector<Index>& m, Index r0,
                                  std::uint64_t seed, const DrawOptions& opts = {}) {
  const Index r = levels.levels();
  require(static_cast<Index>(m.size()) == r, ErrorCode::InvalidScheme, "m must have one entry per level");
  require(r0 >= 0 && r0 <= r, ErrorCode::InvalidScheme, "r0 must lie in [0, r]");
  SamplingScheme sc;
  sc.levels = levels;
  sc.m = m;
  sc.r0 = r0;
  sc.seed = seed;
  sc.without_replacement = opts.without_replacement;
  sc.draws.resize(static_cast<std::size_t>(r));
  sc.saturated.assign(static_cast<std::size_t>(r), false);
  for (Index k = 0; k < r; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const Index w = levels.width(k);
    auto& d = sc.draws[ks];
    if (k < r0) {
      require(m[ks] == w, ErrorCode::InvalidScheme,
              "level " + std::to_string(k + 1) + " is fully sampled and needs m_k = width");
      d.resize(static_cast<std::size_t>(w));
      std::iota(d.begin(), d.end(), levels.begin(k));
      sc.saturated[ks] = true;
      continue;
    }
    require(m[ks] >= 1 || (m[ks] == 0 && opts.allow_empty_levels), ErrorCode::InvalidScheme,
            "level " + std::to_string(k + 1) + " needs m_k >= 1");
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(k));
    if (opts.without_replacement) {
      require(m[ks] <= w, ErrorCode::InvalidScheme, "without replacement needs m_k <= width");
      std::vector<Index> pool(static_cast<std::size_t>(w));
      std::iota(pool.begin(), pool.end(), levels.begin(k));
      for (Index j = 0; j < m[ks]; ++j) {
        const auto pick = j + static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(w - j)));
        std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick)]);
      }
      d.assign(pool.begin(), pool.begin() + m[ks]);
    } else {
      d.resize(static_cast<std::size_t>(m[ks]));
      for (auto& t : d) t = levels.begin(k) + static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(w)));
    }
  }
  return sc;
}

// Every level taken in full; A becomes a row permutation of U.
inline SamplingScheme saturated_scheme(const LevelStructure& levels) {
  std::vector<Index> m(static_cast<std::size_t>(levels.levels()));
  for (Index k = 0; k < levels.levels(); ++k) m[static_cast<std::size_t>(k)] = levels.width(k);
  return draw_scheme(levels, m, levels.levels(), 0);
}

struct MeasurementOperator {
  ComplexMatrix a;        // m x N
  SamplingScheme scheme;
  std::vector<double> p;  // m_k / width_k
  double k_factor = 0.0;  // max width_k / m_k over nonempty levels
  std::string source_id;  // content hash of U, see serialize.hpp

  Index rows() const { return a.rows(); }
  Index cols() const { return a.cols(); }
};

inline MeasurementOperator build_measurement(const ComplexMatrix& u, const SamplingScheme& scheme,
                                             std::string source_id = {}) {
  require(u.rows() == u.cols(), ErrorCode::NonSquare, "source isometry must be square");
  require(scheme.levels.size() == u.rows(), ErrorCode::DimensionMismatch,
          "scheme levels must end at N = " + std::to_string(u.rows()));
  validate_scheme(scheme);
  const Index r = scheme.levels.levels();
  MeasurementOperator op;
  op.scheme = scheme;
  op.source_id = std::move(source_id);
  op.p.resize(static_cast<std::size_t>(r));
  op.a.resize(scheme.total(), u.cols());
  Index row = 0;
  for (Index k = 0; k < r; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double pk = static_cast<double>(scheme.m[ks]) / static_cast<double>(scheme.levels.width(k));
    op.p[ks] = pk;
    if (scheme.m[ks] > 0) {
      op.k_factor = std::max(op.k_factor, 1.0 / pk);
      const double scale = 1.0 / std::sqrt(pk);
      for (Index t : scheme.draws[ks]) op.a.row(row++) = scale * u.row(t);
    }
  }
  return op;
}

}  // namespace ripl_lab
