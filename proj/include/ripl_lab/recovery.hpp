#pragma once

// Quadratically-constrained basis pursuit with level weights
//
//   min_z  sum_k w_k || P_k z ||_1   subject to   || A z - y || <= eta
//
// solved by primal-dual hybrid gradient with adaptive step balancing, plus
// recovery diagnostics and a seeded recovery experiment harness.

#include "ripl_lab/common.hpp"
#include "ripl_lab/levels.hpp"
#include "ripl_lab/operators.hpp"
#include "ripl_lab/sampling.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ripl_lab {

struct QcbpProblem {
  ComplexMatrix a;
  ComplexVector y;
  double eta = 0.0;
  RealVector weights;  // per coordinate; empty means all ones

  void validate() const {
    require(y.size() == a.rows(), ErrorCode::DimensionMismatch, "length(y) != rows(A)");
    require(eta >= 0.0, ErrorCode::InvalidArgument, "eta must be non-negative");
    require(weights.size() == 0 || weights.size() == a.cols(), ErrorCode::DimensionMismatch,
            "one weight per coordinate");
    require(weights.size() == 0 || (weights.array() > 0.0).all(), ErrorCode::InvalidArgument,
            "weights must be positive");
  }
};

// Per-coordinate weights from per-level weights.
inline RealVector expand_level_weights(const LevelStructure& levels, const std::vector<double>& w) {
  require(static_cast<Index>(w.size()) == levels.levels(), ErrorCode::DimensionMismatch, "one weight per level");
  RealVector out(levels.size());
  for (Index k = 0; k < levels.levels(); ++k)
    out.segment(levels.begin(k), levels.width(k)).setConstant(w[static_cast<std::size_t>(k)]);
  return out;
}

// w_k = 1 / sqrt(s_k); levels with s_k = 0 get weight 1.
inline RealVector sparsity_weights(const SparsityPattern& s) {
  std::vector<double> w(static_cast<std::size_t>(s.r()));
  for (Index k = 0; k < s.r(); ++k)
    w[static_cast<std::size_t>(k)] = s[k] > 0 ? 1.0 / std::sqrt(static_cast<double>(s[k])) : 1.0;
  return expand_level_weights(s.levels(), w);
}

struct SolveOptions {
  int max_iters = 50'000;
  double primal_tol = 1e-7;
  double feasibility_tol = 1e-9;
  int check_every = 10;
  int stability_window = 100;
};

struct SolveResult {
  ComplexVector xhat;
  double objective = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  double gap = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double weighted_l1(const ComplexVector& z, const RealVector& w) {
  return w.size() == 0 ? z.cwiseAbs().sum() : z.cwiseAbs().cwiseProduct(w).sum();
}

// Largest singular value by power iteration on A^* A.
inline double operator_norm(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  ComplexVector v = ComplexVector::Ones(a.cols()).normalized();
  double prev = 0.0, est = 0.0;
  for (int it = 0; it < 500; ++it) {
    ComplexVector w = a.adjoint() * (a * v);
    est = std::sqrt(w.norm());
    if (w.norm() == 0.0) {
      // ones vector in the null space; restart from a fixed alternating vector
      for (Index i = 0; i < v.size(); ++i) v[i] = Complex(i % 2 ? -1.0 : 1.0, 0.3 * static_cast<double>(i % 3));
      v.normalize();
      continue;
    }
    v = w.normalized();
    if (std::abs(est - prev) <= 1e-12 * est) break;
    prev = est;
  }
  // the Rayleigh iterate underestimates; guard with a small margin
  return est * 1.01 + 1e-15;
}

}  // namespace detail

// Restores feasibility of z by a minimum-norm correction, when the residual
// lies in the range of A; returns z unchanged otherwise.
class FeasibilityProjector {
 public:
  explicit FeasibilityProjector(const ComplexMatrix& a) : cod_(a) {}

  ComplexVector operator()(const ComplexMatrix& a, const ComplexVector& z, const ComplexVector& y, double eta) const {
    const ComplexVector r = a * z - y;
    const double rn = r.norm();
    if (rn <= eta) return z;
    const ComplexVector excess = r * (1.0 - eta / rn);
    ComplexVector cand = z - cod_.solve(excess);
    return (a * cand - y).norm() < rn ? cand : z;
  }

 private:
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod_;
};

inline SolveResult solve_qcbp(const QcbpProblem& p, const SolveOptions& opts = {}) {
  p.validate();
  const ComplexMatrix& a = p.a;
  const Index n = a.cols();
  const RealVector w = p.weights.size() ? p.weights : RealVector::Ones(n);
  SolveResult res;

  const double ynorm = p.y.norm();
  if (ynorm <= p.eta) {
    // zero is feasible and minimal
    res.xhat = ComplexVector::Zero(n);
    res.residual = ynorm;
    res.converged = true;
    res.gap = 0.0;
    return res;
  }

  const double l = detail::operator_norm(a);
  double tau = 0.95 / l, sigma = 0.95 / l;
  double alpha = 0.5;
  constexpr double kDecay = 0.95, kBalance = 1.5;

  const FeasibilityProjector project(a);
  auto ball = [&](const ComplexVector& q) -> ComplexVector {
    const ComplexVector d = q - p.y;
    const double dn = d.norm();
    if (dn <= p.eta) return q;
    return p.y + d * (p.eta / dn);
  };

  ComplexVector z = ComplexVector::Zero(n), u = ComplexVector::Zero(a.rows());
  ComplexVector atu = ComplexVector::Zero(n);
  std::vector<double> history;  // objective at each check, for the stability window
  const int window_checks = std::max(1, opts.stability_window / std::max(1, opts.check_every));

  for (int it = 1; it <= opts.max_iters; ++it) {
    // primal: weighted complex soft threshold, acts on modulus, keeps phase
    ComplexVector zn = z - tau * atu;
    for (Index i = 0; i < n; ++i) {
      const double mag = std::abs(zn[i]);
      const double t = tau * w[i];
      zn[i] = mag > t ? zn[i] * ((mag - t) / mag) : Complex(0.0, 0.0);
    }
    const ComplexVector zbar = 2.0 * zn - z;
    // dual: prox of sigma g^*, g the indicator of the eta-ball around y
    const ComplexVector v = u + sigma * (a * zbar);
    const ComplexVector un = v - sigma * ball(v / sigma);
    const ComplexVector atun = a.adjoint() * un;

    // residual balancing between primal and dual progress
    const ComplexVector dz = z - zn, du = u - un;
    const double pres = (dz / tau - (atu - atun)).norm();
    const double dres = (du / sigma - a * dz).norm();
    if (pres > kBalance * dres * l) {
      tau /= (1.0 - alpha);
      sigma *= (1.0 - alpha);
      alpha *= kDecay;
    } else if (pres * kBalance < dres * l) {
      tau *= (1.0 - alpha);
      sigma /= (1.0 - alpha);
      alpha *= kDecay;
    }
    z = zn;
    u = un;
    atu = atun;
    res.iterations = it;

    if (it % opts.check_every != 0 && it != opts.max_iters) continue;

    const ComplexVector zf = project(a, z, p.y, p.eta);
    const double obj = detail::weighted_l1(zf, w);
    const double resid = (a * zf - p.y).norm();
    // dual certificate: scale u into the dual feasible set |(A^* u)_i| <= w_i
    double worst = 0.0;
    for (Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(atu[i]) / w[i]);
    const double scale = worst > 1.0 ? 1.0 / worst : 1.0;
    const double dual = -scale * (p.y.dot(u)).real() - p.eta * scale * u.norm();
    const double gap = obj - dual;
    history.push_back(obj);

    res.xhat = zf;
    res.objective = obj;
    res.residual = resid;
    res.gap = gap;

    const double tol = opts.primal_tol * (1.0 + obj);
    const bool stable = history.size() > static_cast<std::size_t>(window_checks) &&
                        std::abs(history.back() - history[history.size() - 1 - window_checks]) <= tol;
    if (resid <= p.eta + opts.feasibility_tol && gap <= tol && stable) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

struct RecoveryMetrics {
  double err2 = 0.0;
  double err1 = 0.0;
  double sigma = 0.0;           // best (s,M)-term l1 error of x_true
  double bound_ratio_l1 = 0.0;  // err1 / (sigma + sqrt(s) eta)
  double bound_ratio_l2 = 0.0;  // err2 / ((1 + (r rho)^{1/4}) (sigma / sqrt(s) + eta))
};

inline double safe_ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

inline RecoveryMetrics recovery_metrics(const ComplexVector& x_true, const ComplexVector& xhat,
                                        const SparsityPattern& s, double eta = 0.0) {
  require(x_true.size() == xhat.size() && x_true.size() == s.n(), ErrorCode::DimensionMismatch,
          "metric vectors must have length N");
  RecoveryMetrics m;
  const ComplexVector d = xhat - x_true;
  m.err2 = d.norm();
  m.err1 = d.cwiseAbs().sum();
  m.sigma = best_approx_error(x_true, s);
  const double st = std::sqrt(static_cast<double>(std::max<Index>(s.total(), 1)));
  m.bound_ratio_l1 = safe_ratio(m.err1, m.sigma + st * eta);
  const double rho = s.ratio();
  const double lead = 1.0 + std::pow(static_cast<double>(s.r()) * rho, 0.25);
  m.bound_ratio_l2 = std::isinf(lead) ? 0.0 : safe_ratio(m.err2, lead * (m.sigma / st + eta));
  return m;
}

// ---------------------------------------------------------------------------
// Recovery experiment harness.

enum class NoiseConvention {
  Plain,     // ||e|| = eta, radius eta
  ScaledByK  // ||e|| = sqrt(K) eta, radius sqrt(K) eta
};

inline const char* to_string(NoiseConvention c) { return c == NoiseConvention::Plain ? "plain" : "sqrtK"; }

struct SchemeParams {
  LevelStructure levels;
  std::vector<Index> m;
  Index r0 = 0;
  bool without_replacement = false;
};

struct ExperimentOptions {
  double eta = 0.0;
  NoiseConvention noise = NoiseConvention::Plain;
  bool weighted = false;
  double success_tol = 1e-4;
  MagnitudeModel magnitude = MagnitudeModel::Gaussian;
  SolveOptions solver;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  std::vector<Index> m;
  Index distinct_rows = 0;
  double radius = 0.0;
  RecoveryMetrics metrics;
  double rel_err = 0.0;
  bool success = false;
  bool converged = false;
  int iterations = 0;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  double success_rate = 0.0;
};

// Builds the measurement operator for one trial from its scheme seed.
using MeasurementFactory = std::function<MeasurementOperator(std::uint64_t)>;

inline MeasurementFactory subsampled_factory(const ComplexMatrix& u, const SchemeParams& sp) {
  return [&u, sp](std::uint64_t seed) {
    DrawOptions dopts;
    dopts.without_replacement = sp.without_replacement;
    return build_measurement(u, draw_scheme(sp.levels, sp.m, sp.r0, seed, dopts));
  };
}

// Dense real Gaussian baseline, N(0, 1/m) entries, redrawn each trial.
inline MeasurementFactory gaussian_factory(Index m, Index n) {
  return [m, n](std::uint64_t seed) {
    MeasurementOperator op;
    op.a = gaussian_matrix(m, n, seed);
    op.k_factor = 1.0;
    op.p = {1.0};
    op.scheme.m = {m};
    op.scheme.seed = seed;
    return op;
  };
}

// Trial t uses seed_t = derive_seed(master, t): the operator from stream 0,
// the signal from stream 1 and the noise direction from stream 2.
inline TrialRecord run_recovery_trial(const MeasurementFactory& make_op, const SparsityPattern& s,
                                      std::uint64_t seed_t, const ExperimentOptions& opts) {
  TrialRecord rec;
  rec.seed = seed_t;
  const MeasurementOperator op = make_op(derive_seed(seed_t, 0));
  require(op.cols() == s.n(), ErrorCode::DimensionMismatch, "operator width differs from N");
  rec.m = op.scheme.m;
  if (op.scheme.draws.empty()) {
    rec.distinct_rows = op.rows();
  } else {
    std::vector<Index> rows;
    for (const auto& d : op.scheme.draws) rows.insert(rows.end(), d.begin(), d.end());
    std::sort(rows.begin(), rows.end());
    rec.distinct_rows = std::unique(rows.begin(), rows.end()) - rows.begin();
  }
  Rng xr = make_rng(seed_t, 1);
  const ComplexVector x = random_sparse_vector(s, xr, opts.magnitude);

  QcbpProblem prob;
  prob.a = op.a;
  prob.y = op.a * x;
  const double radius = opts.noise == NoiseConvention::ScaledByK ? std::sqrt(op.k_factor) * opts.eta : opts.eta;
  if (radius > 0.0) {
    Rng nr = make_rng(seed_t, 2);
    ComplexVector e(prob.y.size());
    for (Index i = 0; i < e.size(); ++i) e[i] = Complex(standard_normal(nr), standard_normal(nr));
    prob.y += e * (radius / e.norm());
  }
  prob.eta = radius;
  if (opts.weighted) prob.weights = sparsity_weights(s);
  rec.radius = radius;

  const SolveResult sol = solve_qcbp(prob, opts.solver);
  rec.metrics = recovery_metrics(x, sol.xhat, s, radius);
  rec.rel_err = safe_ratio(rec.metrics.err2, x.norm());
  rec.success = rec.rel_err <= opts.success_tol;
  rec.converged = sol.converged;
  rec.iterations = sol.iterations;
  return rec;
}

inline ExperimentResult recovery_experiment(const MeasurementFactory& make_op, const SparsityPattern& s,
                                            std::uint64_t trials, std::uint64_t seed,
                                            const ExperimentOptions& opts = {}) {
  ExperimentResult out;
  out.trials.resize(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    out.trials[t] = run_recovery_trial(make_op, s, derive_seed(seed, t), opts);
  });
  std::uint64_t ok = 0;
  for (const auto& t : out.trials) ok += t.success ? 1 : 0;
  out.success_rate = trials ? static_cast<double>(ok) / static_cast<double>(trials) : 0.0;
  return out;
}

inline ExperimentResult exact_recovery_experiment(const ComplexMatrix& u, const SchemeParams& sp,
                                                  const SparsityPattern& s, std::uint64_t trials,
                                                  std::uint64_t seed, const ExperimentOptions& opts = {}) {
  require(u.rows() == u.cols() && u.cols() == s.n(), ErrorCode::DimensionMismatch, "experiment dimensions");
  return recovery_experiment(subsampled_factory(u, sp), s, trials, seed, opts);
}

}  // namespace ripl_lab
