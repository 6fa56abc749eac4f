#include "oracles.hpp"
#include "ripl_lab/operators.hpp"
#include "ripl_lab/recovery.hpp"

#include <gtest/gtest.h>

using namespace ripl_lab;

namespace {

ComplexMatrix to_complex(const RealMatrix& a) { return a.cast<Complex>(); }

}  // namespace

TEST(Qcbp, IdentityProjectsOntoBall) {
  QcbpProblem p;
  p.a = ComplexMatrix::Identity(2, 2);
  p.y = ComplexVector(2);
  p.y << 2.0, 0.0;
  p.eta = 1.0;
  const auto r = solve_qcbp(p);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.xhat[0].real(), 1.0, 1e-6);
  EXPECT_NEAR(std::abs(r.xhat[1]), 0.0, 1e-6);
  EXPECT_NEAR(r.objective, 1.0, 1e-6);
}

TEST(Qcbp, ZeroInsideBall) {
  QcbpProblem p;
  p.a = ComplexMatrix::Identity(3, 3);
  p.y = ComplexVector::Zero(3);
  auto r = solve_qcbp(p);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.xhat.norm(), 0.0);
  p.y << 0.1, 0.0, 0.0;
  p.eta = 0.2;
  r = solve_qcbp(p);
  EXPECT_EQ(r.xhat.norm(), 0.0);
  EXPECT_EQ(r.gap, 0.0);
}

TEST(Qcbp, InvertibleNoiseless) {
  Rng rng = make_rng(7, 0);
  const ComplexMatrix a = oracle::random_unitary(6, rng);
  ComplexVector x(6);
  for (Index i = 0; i < 6; ++i) x[i] = Complex(standard_normal(rng), standard_normal(rng));
  QcbpProblem p;
  p.a = a;
  p.y = a * x;
  const auto r = solve_qcbp(p);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.xhat - x).norm(), 1e-6);
}

TEST(Qcbp, RejectsBadInput) {
  QcbpProblem p;
  p.a = ComplexMatrix::Identity(2, 2);
  p.y = ComplexVector::Zero(3);
  EXPECT_THROW(solve_qcbp(p), Error);
  p.y = ComplexVector::Zero(2);
  p.eta = -1.0;
  EXPECT_THROW(solve_qcbp(p), Error);
  p.eta = 0.0;
  p.weights = RealVector::Zero(2);
  EXPECT_THROW(solve_qcbp(p), Error);
}

TEST(Qcbp, FeasibleOutput) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    QcbpProblem p;
    p.a = gaussian_matrix(8, 20, seed);
    Rng rng = make_rng(seed, 9);
    p.y = ComplexVector(8);
    for (Index i = 0; i < 8; ++i) p.y[i] = Complex(standard_normal(rng), standard_normal(rng));
    p.eta = seed % 2 ? 0.0 : 0.1;
    const auto r = solve_qcbp(p);
    EXPECT_LE((p.a * r.xhat - p.y).norm(), p.eta + 1e-8) << seed;
  }
}

TEST(Qcbp, MatchesVertexEnumeration) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng = make_rng(seed, 31);
    RealMatrix a(5, 10);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 10; ++j) a(i, j) = standard_normal(rng);
    RealVector y(5);
    for (Index i = 0; i < 5; ++i) y[i] = standard_normal(rng);
    const double ref = oracle::basis_pursuit_value(a, y);
    QcbpProblem p;
    p.a = to_complex(a);
    p.y = y.cast<Complex>();
    const auto r = solve_qcbp(p);
    EXPECT_NEAR(r.objective, ref, 1e-4 * std::max(1.0, ref)) << seed;
  }
}

TEST(Qcbp, WeightsOfOneMatchUnweighted) {
  QcbpProblem p;
  p.a = gaussian_matrix(6, 16, 3);
  Rng rng = make_rng(3, 1);
  p.y = ComplexVector(6);
  for (Index i = 0; i < 6; ++i) p.y[i] = Complex(standard_normal(rng), 0.0);
  const auto plain = solve_qcbp(p);
  p.weights = RealVector::Ones(16);
  const auto weighted = solve_qcbp(p);
  EXPECT_NEAR(plain.objective, weighted.objective, 1e-5);
}

TEST(Qcbp, ScalingEquivariance) {
  QcbpProblem p;
  p.a = gaussian_matrix(6, 16, 11);
  Rng rng = make_rng(11, 1);
  const SparsityPattern s(LevelStructure({0, 8, 16}, 16), {1, 1});
  p.y = p.a * random_sparse_vector(s, rng);
  p.eta = 0.01;
  const auto r1 = solve_qcbp(p);
  p.y *= 3.0;
  p.eta *= 3.0;
  const auto r3 = solve_qcbp(p);
  EXPECT_NEAR(r3.objective, 3.0 * r1.objective, 1e-4 * r3.objective);
}

TEST(Weights, Expansion) {
  const LevelStructure lv({0, 1, 5, 6}, 6);
  const auto w = sparsity_weights(SparsityPattern(lv, {1, 4, 0}));
  RealVector expect(6);
  expect << 1.0, 0.5, 0.5, 0.5, 0.5, 1.0;
  EXPECT_EQ(w, expect);
  EXPECT_THROW(expand_level_weights(lv, {1.0}), Error);
}

TEST(Metrics, ExactAndZero) {
  const LevelStructure lv({0, 2, 4}, 4);
  const SparsityPattern s(lv, {1, 1});
  ComplexVector x(4);
  x << 1.0, 0.0, 0.0, 2.0;
  const auto m = recovery_metrics(x, x, s);
  EXPECT_EQ(m.err2, 0.0);
  EXPECT_EQ(m.bound_ratio_l1, 0.0);
  EXPECT_EQ(m.bound_ratio_l2, 0.0);
  ComplexVector xh = x;
  xh[0] = 0.0;
  const auto n = recovery_metrics(x, xh, s);
  EXPECT_EQ(n.err1, 1.0);
  EXPECT_TRUE(std::isinf(n.bound_ratio_l1));
  ComplexVector y(4);
  y << 1.0, 0.5, 0.0, 2.0;
  const auto q = recovery_metrics(y, x, s, 0.1);
  EXPECT_DOUBLE_EQ(q.sigma, 0.5);
  EXPECT_DOUBLE_EQ(q.bound_ratio_l1, 0.5 / (0.5 + std::sqrt(2.0) * 0.1));
}

TEST(Experiment, SaturatedAlwaysRecovers) {
  const auto fh = fourier_haar_matrix(32);
  const auto lv = fh.layout.levels();
  SchemeParams sp{lv, {}, 0, false};
  for (Index k = 0; k < lv.levels(); ++k) sp.m.push_back(lv.width(k));
  sp.r0 = lv.levels();
  const SparsityPattern s(lv, {1, 1, 2, 2, 2});
  const auto out = exact_recovery_experiment(fh.u, sp, s, 10, 5);
  EXPECT_EQ(out.success_rate, 1.0);
  for (const auto& t : out.trials) EXPECT_EQ(t.distinct_rows, 32);
}

TEST(Experiment, SingleRowPerLevelFails) {
  const auto fh = fourier_haar_matrix(64);
  const auto lv = fh.layout.levels();
  SchemeParams sp{lv, std::vector<Index>(std::size_t(lv.levels()), 1), 0, false};
  const SparsityPattern s(lv, {1, 1, 2, 2, 2, 2});
  const auto out = exact_recovery_experiment(fh.u, sp, s, 10, 5);
  EXPECT_LE(out.success_rate, 0.1);
}

TEST(Experiment, NoiseNormIsRadius) {
  const auto fh = fourier_haar_matrix(16);
  const auto lv = fh.layout.levels();
  SchemeParams sp{lv, {1, 1, 2, 4}, 0, false};
  const SparsityPattern s(lv, {1, 1, 1, 1});
  ExperimentOptions o;
  o.eta = 0.05;
  o.noise = NoiseConvention::ScaledByK;
  const auto factory = subsampled_factory(fh.u, sp);
  const auto rec = run_recovery_trial(factory, s, 42, o);
  const auto op = factory(derive_seed(42, 0));
  EXPECT_DOUBLE_EQ(rec.radius, std::sqrt(op.k_factor) * 0.05);
  Rng xr = make_rng(42, 1);
  const ComplexVector x = random_sparse_vector(s, xr, o.magnitude);
  Rng nr = make_rng(42, 2);
  ComplexVector e(op.rows());
  for (Index i = 0; i < e.size(); ++i) e[i] = Complex(standard_normal(nr), standard_normal(nr));
  EXPECT_NEAR((e * (rec.radius / e.norm())).norm(), rec.radius, 1e-14);
}

TEST(Experiment, DeterministicAcrossThreads) {
  const auto fh = fourier_haar_matrix(32);
  const auto lv = fh.layout.levels();
  SchemeParams sp{lv, {2, 2, 4, 6, 8}, 2, false};
  const SparsityPattern s(lv, {1, 1, 1, 1, 1});
  setenv("RIPL_LAB_THREADS", "1", 1);
  const auto a = exact_recovery_experiment(fh.u, sp, s, 6, 77);
  setenv("RIPL_LAB_THREADS", "4", 1);
  const auto b = exact_recovery_experiment(fh.u, sp, s, 6, 77);
  unsetenv("RIPL_LAB_THREADS");
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].seed, b.trials[i].seed);
    EXPECT_EQ(a.trials[i].rel_err, b.trials[i].rel_err);
  }
}

TEST(Experiment, GaussianFactory) {
  const SparsityPattern s(LevelStructure::uniform(32, 1), {3});
  const auto out = recovery_experiment(gaussian_factory(20, 32), s, 5, 1);
  EXPECT_GE(out.success_rate, 0.8);
  EXPECT_EQ(out.trials[0].distinct_rows, 20);
  EXPECT_THROW(recovery_experiment(gaussian_factory(20, 31), s, 1, 1), Error);
}
