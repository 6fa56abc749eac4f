#pragma once

// Global and local coherence, the nonuniform local coherence and the
// relative sparsities of an isometry with respect to sampling and sparsity
// levels.

#include "ripl_lab/common.hpp"
#include "ripl_lab/levels.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ripl_lab {

inline double global_coherence(const ComplexMatrix& u) {
  require(u.rows() == u.cols(), ErrorCode::NonSquare, "coherence needs a square matrix");
  return u.cwiseAbs2().maxCoeff();
}

// Entry (k, l) is the max |U_ij|^2 over rows in sampling level k and columns
// in sparsity level l.
inline RealMatrix local_coherence(const ComplexMatrix& u, const LevelStructure& sampling,
                                  const LevelStructure& sparsity) {
  require(sampling.size() == u.rows() && sparsity.size() == u.cols(), ErrorCode::DimensionMismatch,
          "level structures must partition the matrix dimensions");
  require(sampling.levels() == sparsity.levels(), ErrorCode::DimensionMismatch,
          "sampling and sparsity level counts differ");
  const Index r = sampling.levels();
  RealMatrix mu(r, r);
  for (Index k = 0; k < r; ++k)
    for (Index l = 0; l < r; ++l)
      mu(k, l) = u.block(sampling.begin(k), sparsity.begin(l), sampling.width(k), sparsity.width(l))
                     .cwiseAbs2()
                     .maxCoeff();
  return mu;
}

// mu~_{k,l} = max_t sqrt(mu_{k,l} mu_{k,t}); never below mu_{k,l}.
inline RealMatrix nonuniform_local_coherence(const RealMatrix& mu) {
  require((mu.array() >= 0.0).all(), ErrorCode::InvalidArgument, "local coherences must be non-negative");
  RealMatrix out(mu.rows(), mu.cols());
  for (Index k = 0; k < mu.rows(); ++k) {
    const double row_max = mu.row(k).maxCoeff();
    for (Index l = 0; l < mu.cols(); ++l) out(k, l) = std::sqrt(mu(k, l) * row_max);
  }
  return out;
}

struct CoherenceProfile {
  double mu_global = 0.0;
  RealMatrix mu_local;
  RealMatrix mu_tilde;
  LevelStructure sampling;
  LevelStructure sparsity;

  Index r() const { return mu_local.rows(); }
};

inline CoherenceProfile coherence_profile(const ComplexMatrix& u, const LevelStructure& sampling,
                                          const LevelStructure& sparsity) {
  CoherenceProfile p;
  p.mu_global = global_coherence(u);
  p.mu_local = local_coherence(u, sampling, sparsity);
  p.mu_tilde = nonuniform_local_coherence(p.mu_local);
  p.sampling = sampling;
  p.sparsity = sparsity;
  return p;
}

// mu_{k,l} / (2^{-k} 2^{-|k-l|}) with 1-based k, l; the Fourier-Haar decay
// table. Its maximum is the empirical constant of the decay estimate.
inline RealMatrix haar_decay_ratios(const RealMatrix& mu) {
  RealMatrix out(mu.rows(), mu.cols());
  for (Index k = 0; k < mu.rows(); ++k)
    for (Index l = 0; l < mu.cols(); ++l) {
      const double model = std::ldexp(1.0, -static_cast<int>(k + 1) - static_cast<int>(std::abs(k - l)));
      out(k, l) = mu(k, l) / model;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Relative sparsity
//
// S_k = max ||P_k U z||^2 over ||z||_inf <= 1 with at most s_l nonzeros in
// sparsity level l. The objective is a convex function of (Re z, Im z), so
// over each support its maximum sits on the torus |z_j| = 1; we search a
// uniform phase grid exp(2 pi i q / phases).
//
// Only full-count supports are visited. For a fixed support T and index j not
// in T, write P_k U z = a + z_j b. Then ||a + w b||^2 + ||a - w b||^2 =
// 2||a||^2 + 2||b||^2 >= 2||a||^2, so one of w, -w does at least as well as
// z_j = 0. With an even number of phases both are on the grid, so adding an
// index never lowers the grid maximum.

struct RelativeSparsityOptions {
  int phases = 4;
  // cap on (#supports) * phases^(total(s) - 1) objective evaluations
  std::uint64_t budget = 50'000'000;
  // maximize over real z in [-1, 1]^N instead of complex z
  bool real_domain = false;
};

struct RelativeSparsityResult {
  std::vector<double> s_rel;                        // S_k per sampling level
  bool exact = false;                               // true only for the real +-1 search on real U
  std::vector<std::vector<Index>> support;          // certifying support per k
  std::vector<std::vector<int>> phase_index;        // certifying phase indices per k
  std::uint64_t evaluations = 0;
};

inline RelativeSparsityResult relative_sparsity(const ComplexMatrix& u, const LevelStructure& sampling,
                                                const SparsityPattern& s,
                                                const RelativeSparsityOptions& opts = {}) {
  require(u.rows() == u.cols() && sampling.size() == u.rows() && s.n() == u.cols(),
          ErrorCode::DimensionMismatch, "relative sparsity dimensions");
  require(opts.phases >= 1, ErrorCode::InvalidArgument, "phases must be >= 1");
  const bool real_u = u.imag().cwiseAbs().maxCoeff() == 0.0;
  require(!opts.real_domain || opts.phases <= 2, ErrorCode::InvalidArgument,
          "the real domain only admits phases in {1, 2}");

  const Index r = sampling.levels();
  const Index t = s.total();
  RelativeSparsityResult out;
  out.s_rel.assign(static_cast<std::size_t>(r), 0.0);
  out.support.assign(static_cast<std::size_t>(r), {});
  out.phase_index.assign(static_cast<std::size_t>(r), {});
  out.exact = real_u && opts.real_domain && opts.phases == 2;
  if (t == 0) return out;

  SupportEnumerator en(s, true);
  // global phase is irrelevant, so the first coordinate is pinned to phase 0
  std::uint64_t per_support = 1;
  for (Index i = 1; i < t; ++i) per_support = detail::saturating_mul(per_support, static_cast<std::uint64_t>(opts.phases));
  const std::uint64_t cost = detail::saturating_mul(en.count(), per_support);
  require(cost <= opts.budget, ErrorCode::BudgetExceeded,
          "relative sparsity search needs " + std::to_string(cost) + " evaluations");

  std::vector<Complex> roots(static_cast<std::size_t>(opts.phases));
  for (int q = 0; q < opts.phases; ++q) roots[static_cast<std::size_t>(q)] = std::polar(1.0, 2.0 * kPi * q / opts.phases);

  SupportSet sup;
  std::vector<int> q(static_cast<std::size_t>(t));
  ComplexMatrix cols(u.rows(), t);
  ComplexVector v(u.rows());
  while (en.next(sup)) {
    for (Index j = 0; j < t; ++j) cols.col(j) = u.col(sup.indices[static_cast<std::size_t>(j)]);
    std::fill(q.begin(), q.end(), 0);
    for (std::uint64_t it = 0; it < per_support; ++it) {
      v.setZero();
      for (Index j = 0; j < t; ++j) v += roots[static_cast<std::size_t>(q[static_cast<std::size_t>(j)])] * cols.col(j);
      ++out.evaluations;
      for (Index k = 0; k < r; ++k) {
        const double e = v.segment(sampling.begin(k), sampling.width(k)).squaredNorm();
        auto& best = out.s_rel[static_cast<std::size_t>(k)];
        // strict improvement keeps the first (lexicographic) certificate
        if (e > best * (1.0 + 1e-13) || out.support[static_cast<std::size_t>(k)].empty()) {
          best = std::max(best, e);
          out.support[static_cast<std::size_t>(k)] = sup.indices;
          out.phase_index[static_cast<std::size_t>(k)] = q;
        }
      }
      for (Index j = t - 1; j >= 1; --j) {
        auto& qj = q[static_cast<std::size_t>(j)];
        if (++qj < opts.phases) break;
        qj = 0;
      }
    }
  }
  return out;
}

}  // namespace ripl_lab
