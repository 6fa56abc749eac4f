#pragma once

// Restricted isometry constant in levels (RICL), exact and sampled, plus the
// RIPL recovery threshold and the certification verdict built on both.
//
// delta_{s,M}(A) = max over (s,M)-sparse supports D of
//                  max(lambda_max(G_D) - 1, 1 - lambda_min(G_D)),
// G_D = A_D^* A_D. Only supports with exactly s_k indices per level are
// visited: every smaller admissible support is contained in one of them, and
// by Cauchy interlacing the spectrum of a principal submatrix lies inside the
// spectrum range of the larger matrix.

#include "ripl_lab/common.hpp"
#include "ripl_lab/hermitian_eigen.hpp"
#include "ripl_lab/levels.hpp"
#include "ripl_lab/sampling.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ripl_lab {

enum class RiclMethod { ExactEnumeration, MonteCarlo };

inline const char* to_string(RiclMethod m) {
  return m == RiclMethod::ExactEnumeration ? "exact-enumeration" : "monte-carlo";
}

struct SupportExtremes {
  std::vector<Index> support;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

struct RiclReport {
  double delta = 0.0;
  RiclMethod method = RiclMethod::ExactEnumeration;
  std::vector<Index> support;  // certifying (exact) or best witnessed (MC) support
  ComplexVector witness;       // unit vector attaining delta (exact) or the best seen (MC)
  double lambda_min = 1.0;     // extremes on the certifying support
  double lambda_max = 1.0;
  std::uint64_t supports_examined = 0;
  std::uint64_t trials = 0;
  SparsityPattern pattern;
  std::vector<SupportExtremes> per_support;  // filled only on request
};

struct RiclExactOptions {
  std::uint64_t budget = 1'000'000;
  bool record_supports = false;
};

namespace detail {

inline double deviation(double lmin, double lmax) { return std::max(lmax - 1.0, 1.0 - lmin); }

// Gram of the chosen columns, taken from a precomputed full Gram when given.
inline ComplexMatrix support_gram(const ComplexMatrix& a, const ComplexMatrix* full_gram,
                                  const std::vector<Index>& sup) {
  const Index t = static_cast<Index>(sup.size());
  ComplexMatrix g(t, t);
  if (full_gram) {
    for (Index j = 0; j < t; ++j)
      for (Index i = 0; i < t; ++i) g(i, j) = (*full_gram)(sup[static_cast<std::size_t>(i)], sup[static_cast<std::size_t>(j)]);
    return g;
  }
  ComplexMatrix cols(a.rows(), t);
  for (Index j = 0; j < t; ++j) cols.col(j) = a.col(sup[static_cast<std::size_t>(j)]);
  return cols.adjoint() * cols;
}

inline ComplexVector embed(const ComplexVector& local, const std::vector<Index>& sup, Index n) {
  ComplexVector x = ComplexVector::Zero(n);
  for (std::size_t j = 0; j < sup.size(); ++j) x[sup[j]] = local[static_cast<Index>(j)];
  return x;
}

constexpr Index kFullGramLimit = 4096;

}  // namespace detail

inline RiclReport ricl_exact(const ComplexMatrix& a, const SparsityPattern& s, const RiclExactOptions& opts = {}) {
  require(a.cols() == s.n(), ErrorCode::DimensionMismatch, "matrix columns != N");
  SupportEnumerator en(s, true);
  const std::uint64_t total = en.count();
  require(total <= opts.budget, ErrorCode::BudgetExceeded,
          std::to_string(total) + " supports exceed the enumeration budget " + std::to_string(opts.budget));

  std::optional<ComplexMatrix> full;
  if (a.cols() <= detail::kFullGramLimit && total * static_cast<std::uint64_t>(std::max<Index>(s.total(), 1)) >
                                                 static_cast<std::uint64_t>(a.cols()))
    full = a.adjoint() * a;
  const ComplexMatrix* gram = full ? &*full : nullptr;

  // chunked enumeration; each chunk keeps its first maximizer, chunks are
  // reduced in order, so the certificate is the lexicographically first one
  constexpr std::uint64_t kChunk = 2048;
  const std::size_t chunks = static_cast<std::size_t>((total + kChunk - 1) / kChunk);
  struct Best {
    double delta = -1.0;
    double lmin = 1.0, lmax = 1.0;
    std::vector<Index> support;
  };
  std::vector<Best> best(chunks);
  std::vector<std::vector<SupportExtremes>> records(opts.record_supports ? chunks : 0);
  parallel_for(chunks, [&](std::size_t c) {
    SupportEnumerator local(s, true);
    local.seek(static_cast<std::uint64_t>(c) * kChunk);
    SupportSet sup;
    for (std::uint64_t i = 0; i < kChunk && local.next(sup); ++i) {
      const auto ext = extreme_eigenvalues(detail::support_gram(a, gram, sup.indices));
      const double d = sup.indices.empty() ? 0.0 : detail::deviation(ext.min, ext.max);
      if (d > best[c].delta) best[c] = {d, ext.min, ext.max, sup.indices};
      if (opts.record_supports) records[c].push_back({sup.indices, ext.min, ext.max});
    }
  });

  RiclReport rep;
  rep.method = RiclMethod::ExactEnumeration;
  rep.pattern = s;
  rep.supports_examined = total;
  Best top;
  for (auto& b : best)
    if (b.delta > top.delta) top = std::move(b);
  rep.delta = std::max(top.delta, 0.0);
  rep.support = top.support;
  rep.lambda_min = top.lmin;
  rep.lambda_max = top.lmax;
  if (!top.support.empty()) {
    const auto e = hermitian_eigen(detail::support_gram(a, gram, top.support), true);
    const Index col = (top.lmax - 1.0 >= 1.0 - top.lmin) ? e.values.size() - 1 : 0;
    rep.witness = detail::embed(e.vectors.col(col), top.support, a.cols());
  } else {
    rep.witness = ComplexVector::Zero(a.cols());
  }
  for (auto& rc : records)
    for (auto& x : rc) rep.per_support.push_back(std::move(x));
  return rep;
}

inline RiclReport ricl_exact(const MeasurementOperator& op, const SparsityPattern& s, const RiclExactOptions& opts = {}) {
  return ricl_exact(op.a, s, opts);
}

struct RiclMonteCarloOptions {
  int power_iterations = 300;
};

// Sampled lower bound on delta_{s,M}. Trial t draws a Gaussian-magnitude
// (s,M)-sparse vector from stream derive_seed(seed, t). Every support that
// was ever the running best is refined by power iteration (and shifted power
// iteration for lambda_min); Rayleigh quotients never leave [lambda_min,
// lambda_max], so the result stays a lower bound, and the refined set for T
// trials is a prefix of the one for T + 1, so the estimate never decreases
// in T.
inline RiclReport ricl_monte_carlo(const ComplexMatrix& a, const SparsityPattern& s, std::uint64_t trials,
                                   std::uint64_t seed, const RiclMonteCarloOptions& opts = {}) {
  require(a.cols() == s.n(), ErrorCode::DimensionMismatch, "matrix columns != N");
  require(trials >= 1, ErrorCode::InvalidArgument, "need at least one trial");
  RiclReport rep;
  rep.method = RiclMethod::MonteCarlo;
  rep.pattern = s;
  rep.trials = trials;
  rep.witness = ComplexVector::Zero(a.cols());
  if (s.total() == 0) return rep;

  // trials are independent; evaluate in parallel, scan in order
  std::vector<double> dev(static_cast<std::size_t>(trials));
  std::vector<std::vector<Index>> sup(static_cast<std::size_t>(trials));
  std::vector<ComplexVector> xs(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    Rng rng = make_rng(seed, t);
    ComplexVector x = random_sparse_vector(s, rng, MagnitudeModel::Gaussian);
    x /= x.norm();
    dev[t] = std::abs((a * x).squaredNorm() - 1.0);
    for (Index i = 0; i < x.size(); ++i)
      if (x[i] != Complex(0.0, 0.0)) sup[t].push_back(i);
    xs[t] = std::move(x);
  });

  double best = -1.0;
  std::vector<std::size_t> history;
  for (std::size_t t = 0; t < dev.size(); ++t) {
    if (dev[t] > best) {
      best = dev[t];
      history.push_back(t);
    }
  }
  rep.delta = best;
  rep.support = sup[history.back()];
  rep.witness = xs[history.back()];
  const double q0 = (a * rep.witness).squaredNorm();
  rep.lambda_min = rep.lambda_max = q0;

  std::map<std::vector<Index>, bool> refined;
  for (std::size_t t : history) {
    const auto& d = sup[t];
    if (refined.count(d)) continue;
    refined[d] = true;
    ++rep.supports_examined;
    const ComplexMatrix g = detail::support_gram(a, nullptr, d);
    const Index k = g.rows();
    ComplexVector start(k);
    for (Index j = 0; j < k; ++j) start[j] = xs[t][d[static_cast<std::size_t>(j)]];
    // lambda_max by power iteration on G
    ComplexVector v = start.normalized();
    double lmax = v.dot(g * v).real();
    for (int it = 0; it < opts.power_iterations; ++it) {
      ComplexVector w = g * v;
      if (w.norm() == 0.0) break;
      v = w.normalized();
      lmax = std::max(lmax, v.dot(g * v).real());
    }
    const ComplexVector vmax = v;
    // lambda_min by power iteration on (shift I - G)
    const double shift = std::max(lmax, 0.0) + 1e-12;
    const ComplexMatrix h = shift * ComplexMatrix::Identity(k, k) - g;
    v = start.normalized();
    double lmin = v.dot(g * v).real();
    for (int it = 0; it < opts.power_iterations; ++it) {
      ComplexVector w = h * v;
      if (w.norm() == 0.0) break;
      v = w.normalized();
      lmin = std::min(lmin, v.dot(g * v).real());
    }
    const double dv = detail::deviation(lmin, lmax);
    if (dv > rep.delta) {
      rep.delta = dv;
      rep.support = d;
      rep.lambda_min = lmin;
      rep.lambda_max = lmax;
      rep.witness = detail::embed(lmax - 1.0 >= 1.0 - lmin ? vmax : v, d, a.cols());
    }
  }
  return rep;
}

inline RiclReport ricl_monte_carlo(const MeasurementOperator& op, const SparsityPattern& s, std::uint64_t trials,
                                   std::uint64_t seed, const RiclMonteCarloOptions& opts = {}) {
  return ricl_monte_carlo(op.a, s, trials, seed, opts);
}

// Right-hand side of the RIPL sufficient condition
//   delta_{2s,M} < 1 / sqrt(r (sqrt(rho) + 1/4)^2 + 1).
// Returns 0 (with a warning) for infinite rho.
inline double ripl_threshold(Index r, double rho, Warnings* warnings = nullptr) {
  require(r >= 1, ErrorCode::InvalidArgument, "r must be >= 1");
  if (std::isinf(rho)) {
    if (warnings) warnings->push_back("sparsity ratio is infinite; RIPL threshold is 0");
    return 0.0;
  }
  require(rho >= 1.0, ErrorCode::InvalidArgument, "rho must be >= 1");
  const double a = std::sqrt(rho) + 0.25;
  return 1.0 / std::sqrt(static_cast<double>(r) * a * a + 1.0);
}

enum class Verdict { Sufficient, Insufficient, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Sufficient: return "sufficient";
    case Verdict::Insufficient: return "insufficient";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct CertifyOptions {
  std::uint64_t exact_budget = 1'000'000;
  bool allow_monte_carlo = true;
  std::uint64_t mc_trials = 10'000;
  std::uint64_t seed = 0;
  bool record_supports = false;  // exact path only
};

struct Certification {
  Verdict verdict = Verdict::Inconclusive;
  double delta = 0.0;      // delta_{2s,M}: exact, or a Monte-Carlo lower bound
  double threshold = 0.0;
  double rho = 1.0;
  bool clamped = false;    // some 2 s_k exceeded its level width
  SparsityPattern doubled;
  RiclReport report;
  Warnings warnings;
};

// Compares delta_{2s,M} with the RIPL threshold for (r, rho_{s,M}).
inline Certification certify_recovery(const ComplexMatrix& a, const SparsityPattern& s, const CertifyOptions& opts = {}) {
  Certification c;
  c.doubled = s.scaled(2, &c.clamped);
  if (c.clamped) c.warnings.push_back("2s clamped to the level widths");
  c.rho = s.ratio(&c.warnings);
  c.threshold = ripl_threshold(s.r(), c.rho, &c.warnings);
  if (SupportEnumerator::count_exact(c.doubled) <= opts.exact_budget) {
    c.report = ricl_exact(a, c.doubled, {opts.exact_budget, opts.record_supports});
    c.delta = c.report.delta;
    c.verdict = c.delta < c.threshold ? Verdict::Sufficient : Verdict::Insufficient;
    return c;
  }
  require(opts.allow_monte_carlo, ErrorCode::BudgetExceeded,
          "exact certification exceeds the budget and Monte-Carlo fallback is disabled");
  c.report = ricl_monte_carlo(a, c.doubled, opts.mc_trials, opts.seed);
  c.delta = c.report.delta;
  c.verdict = c.delta >= c.threshold ? Verdict::Insufficient : Verdict::Inconclusive;
  return c;
}

inline Certification certify_recovery(const MeasurementOperator& op, const SparsityPattern& s,
                                      const CertifyOptions& opts = {}) {
  return certify_recovery(op.a, s, opts);
}

}  // namespace ripl_lab
