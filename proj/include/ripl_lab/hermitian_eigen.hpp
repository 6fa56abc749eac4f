#pragma once

// Cyclic Jacobi eigensolver for small dense Hermitian matrices. Gram
// submatrices in the RICL computations are at most total(s) wide, so the
// O(n^3) sweep cost is irrelevant and accuracy is what matters.

#include "ripl_lab/common.hpp"

#include <cmath>

namespace ripl_lab {

struct HermitianEigen {
  RealVector values;     // ascending
  ComplexMatrix vectors;  // columns match `values`; empty unless requested
  int sweeps = 0;
};

inline HermitianEigen hermitian_eigen(const ComplexMatrix& input, bool want_vectors = false,
                                      double off_tol = 1e-12, int max_sweeps = 100) {
  require(input.rows() == input.cols(), ErrorCode::NonSquare, "eigensolver needs a square matrix");
  const Index n = input.rows();
  ComplexMatrix a = 0.5 * (input + input.adjoint());
  ComplexMatrix v;
  if (want_vectors) v = ComplexMatrix::Identity(n, n);

  auto off_mass = [&] {
    double s = 0.0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  const double scale = std::max(a.norm(), 1e-300);
  int sweep = 0;
  for (; sweep < max_sweeps && off_mass() > off_tol * scale; ++sweep) {
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Complex beta = a(p, q);
        const double mag = std::abs(beta);
        if (mag <= 1e-300) continue;
        const Complex phase = beta / mag;  // e^{i phi}
        const double alpha = a(p, p).real(), gamma = a(q, q).real();
        const double theta = (gamma - alpha) / (2.0 * mag);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
        const Complex g_pp = c, g_pq = s, g_qp = -s * std::conj(phase), g_qq = c * std::conj(phase);
        for (Index i = 0; i < n; ++i) {
          const Complex aip = a(i, p), aiq = a(i, q);
          a(i, p) = aip * g_pp + aiq * g_qp;
          a(i, q) = aip * g_pq + aiq * g_qq;
        }
        for (Index j = 0; j < n; ++j) {
          const Complex apj = a(p, j), aqj = a(q, j);
          a(p, j) = std::conj(g_pp) * apj + std::conj(g_qp) * aqj;
          a(q, j) = std::conj(g_pq) * apj + std::conj(g_qq) * aqj;
        }
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        if (want_vectors) {
          for (Index i = 0; i < n; ++i) {
            const Complex vip = v(i, p), viq = v(i, q);
            v(i, p) = vip * g_pp + viq * g_qp;
            v(i, q) = vip * g_pq + viq * g_qq;
          }
        }
      }
    }
  }

  HermitianEigen out;
  out.sweeps = sweep;
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x).real() < a(y, y).real(); });
  out.values.resize(n);
  if (want_vectors) out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    out.values[i] = a(src, src).real();
    if (want_vectors) out.vectors.col(i) = v.col(src);
  }
  return out;
}

struct ExtremeEigenvalues {
  double min = 0.0;
  double max = 0.0;
};

inline ExtremeEigenvalues extreme_eigenvalues(const ComplexMatrix& h) {
  if (h.rows() == 0) return {};
  if (h.rows() == 1) return {h(0, 0).real(), h(0, 0).real()};
  const auto e = hermitian_eigen(h);
  return {e.values[0], e.values[e.values.size() - 1]};
}

}  // namespace ripl_lab
