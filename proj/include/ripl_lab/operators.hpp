#pragma once

// Concrete isometries: the centred DFT, the orthonormal Haar basis, their
// band-reordered product U = F * Phi, and a Gaussian baseline.

#include "ripl_lab/common.hpp"
#include "ripl_lab/levels.hpp"

#include <cmath>
#include <vector>

namespace ripl_lab {

// Row i of the natural-order DFT is frequency omega = i - N/2 + 1.
inline Index frequency_of_row(Index row, Index n) { return row - n / 2 + 1; }
inline Index row_of_frequency(Index omega, Index n) { return omega + n / 2 - 1; }

// Unitary DFT over frequencies -N/2+1 .. N/2 in natural order:
// F(omega, j) = exp(2 pi i j omega / N) / sqrt(N), j = 0..N-1.
inline ComplexMatrix dft_matrix(Index n) {
  require(is_power_of_two(n) && n >= 2, ErrorCode::NotPowerOfTwo, "DFT size must be 2^r, r >= 1");
  ComplexMatrix f(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index row = 0; row < n; ++row) {
    const Index omega = frequency_of_row(row, n);
    for (Index j = 0; j < n; ++j) {
      // reduce the exponent mod N before scaling to keep the phase exact
      const Index e = ((j * omega) % n + n) % n;
      f(row, j) = std::polar(norm, 2.0 * kPi * static_cast<double>(e) / static_cast<double>(n));
    }
  }
  return f;
}

// Columns: scaling function, mother wavelet, then for each scale j >= 1 the
// 2^j translates ordered left to right. Wavelets are + on the first half of
// their support and - on the second.
inline ComplexMatrix haar_matrix(Index n) {
  require(is_power_of_two(n) && n >= 2, ErrorCode::NotPowerOfTwo, "Haar size must be 2^r, r >= 1");
  ComplexMatrix phi = ComplexMatrix::Zero(n, n);
  phi.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  Index col = 1;
  for (Index translates = 1; translates < n; translates *= 2) {
    const Index support = n / translates;
    const double amp = std::sqrt(static_cast<double>(translates) / static_cast<double>(n));
    for (Index t = 0; t < translates; ++t, ++col) {
      const Index start = t * support;
      for (Index i = 0; i < support / 2; ++i) phi(start + i, col) = amp;
      for (Index i = support / 2; i < support; ++i) phi(start + i, col) = -amp;
    }
  }
  return phi;
}

// Dyadic frequency bands W_1 = {0, 1}, W_{k+1} = {-2^k+1..-2^{k-1}} u {2^{k-1}+1..2^k}.
struct BandLayout {
  Index n = 0;
  std::vector<std::vector<Index>> bands;  // frequencies, ascending inside each band
  std::vector<Index> row_frequency;       // band-ordered row -> frequency
  std::vector<Index> natural_row;         // band-ordered row -> natural DFT row

  Index r() const { return static_cast<Index>(bands.size()); }
  LevelStructure levels() const { return LevelStructure::dyadic(n); }
};

inline BandLayout band_layout(Index n) {
  require(is_power_of_two(n) && n >= 2, ErrorCode::NotPowerOfTwo, "band layout needs N = 2^r, r >= 1");
  const int r = log2_exact(n);
  BandLayout layout;
  layout.n = n;
  layout.bands.push_back({0, 1});
  for (int k = 1; k < r; ++k) {
    std::vector<Index> band;
    const Index hi = Index{1} << k, lo = Index{1} << (k - 1);
    for (Index w = -hi + 1; w <= -lo; ++w) band.push_back(w);
    for (Index w = lo + 1; w <= hi; ++w) band.push_back(w);
    layout.bands.push_back(std::move(band));
  }
  for (const auto& band : layout.bands)
    for (Index w : band) {
      layout.row_frequency.push_back(w);
      layout.natural_row.push_back(row_of_frequency(w, n));
    }
  return layout;
}

// DFT with rows permuted so that sampling level k holds band W_k.
inline ComplexMatrix band_ordered_dft(const BandLayout& layout) {
  const ComplexMatrix f = dft_matrix(layout.n);
  ComplexMatrix out(layout.n, layout.n);
  for (Index i = 0; i < layout.n; ++i) out.row(i) = f.row(layout.natural_row[static_cast<std::size_t>(i)]);
  return out;
}

struct FourierHaar {
  ComplexMatrix u;
  BandLayout layout;
};

inline FourierHaar fourier_haar_matrix(Index n) {
  FourierHaar out;
  out.layout = band_layout(n);
  out.u = band_ordered_dft(out.layout) * haar_matrix(n);
  return out;
}

// Real i.i.d. N(0, 1/m) entries, drawn column by column.
inline ComplexMatrix gaussian_matrix(Index m, Index n, Rng& rng) {
  require(m >= 1 && n >= 1, ErrorCode::InvalidArgument, "Gaussian matrix needs m, N >= 1");
  ComplexMatrix g(m, n);
  const double sd = 1.0 / std::sqrt(static_cast<double>(m));
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) g(i, j) = sd * standard_normal(rng);
  return g;
}

inline ComplexMatrix gaussian_matrix(Index m, Index n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return gaussian_matrix(m, n, rng);
}

// max |(M^* M - I)_{ij}|
inline double isometry_defect(const ComplexMatrix& m) {
  const ComplexMatrix g = m.adjoint() * m;
  return (g - ComplexMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

inline bool is_isometry(const ComplexMatrix& m, double tol) {
  require(m.rows() == m.cols(), ErrorCode::NonSquare, "isometry test needs a square matrix");
  return isometry_defect(m) <= tol;
}

inline bool is_real_matrix(const ComplexMatrix& m, double tol = 0.0) {
  return m.imag().cwiseAbs().maxCoeff() <= tol;
}

}  // namespace ripl_lab
