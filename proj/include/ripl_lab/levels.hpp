#pragma once

// Level structures, sparsity patterns and supports for the sparsity-in-levels
// model. Indices are 0-based throughout the library; level k (0-based) covers
// [boundary(k), boundary(k+1)).

#include "ripl_lab/common.hpp"

#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ripl_lab {

// Strictly increasing boundaries 0 = B_0 < B_1 < ... < B_r = N.
class LevelStructure {
 public:
  LevelStructure() = default;

  // `boundaries` may include the leading 0 or omit it.
  LevelStructure(std::vector<Index> boundaries, Index n) {
    if (boundaries.empty() || boundaries.front() != 0) boundaries.insert(boundaries.begin(), 0);
    validate(boundaries, n);
    b_ = std::move(boundaries);
  }

  explicit LevelStructure(std::vector<Index> boundaries)
      : LevelStructure(boundaries, boundaries.empty() ? 0 : boundaries.back()) {}

  // Checks every invariant; throws Error with the failing condition.
  static void validate(const std::vector<Index>& boundaries, Index n) {
    require(boundaries.size() >= 2, ErrorCode::EmptyLevel, "at least one level is required");
    require(boundaries.front() == 0, ErrorCode::NonMonotoneLevels, "boundaries must start at 0");
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
      require(boundaries[i] >= boundaries[i - 1], ErrorCode::NonMonotoneLevels,
              "boundaries must be increasing");
      require(boundaries[i] != boundaries[i - 1], ErrorCode::EmptyLevel,
              "level " + std::to_string(i) + " is empty");
    }
    require(boundaries.back() == n, ErrorCode::LastBoundaryMismatch,
            "last boundary " + std::to_string(boundaries.back()) + " != N = " + std::to_string(n));
  }

  static bool is_valid(const std::vector<Index>& boundaries, Index n) {
    try {
      validate(boundaries, n);
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  // Equal-width levels; n must be divisible by r.
  static LevelStructure uniform(Index n, Index r) {
    require(r >= 1 && n % r == 0, ErrorCode::InvalidArgument, "uniform levels need r | N");
    std::vector<Index> b(static_cast<std::size_t>(r) + 1);
    for (Index k = 0; k <= r; ++k) b[static_cast<std::size_t>(k)] = k * (n / r);
    return LevelStructure(b, n);
  }

  // B_k = 2^k, the wavelet-scale / frequency-band partition for N = 2^r.
  static LevelStructure dyadic(Index n) {
    require(is_power_of_two(n) && n >= 2, ErrorCode::NotPowerOfTwo, "dyadic levels need N = 2^r, r >= 1");
    std::vector<Index> b{0};
    for (Index v = 2; v <= n; v *= 2) b.push_back(v);
    return LevelStructure(b, n);
  }

  Index size() const { return b_.empty() ? 0 : b_.back(); }
  Index levels() const { return static_cast<Index>(b_.size()) - 1; }
  Index begin(Index k) const { return b_[static_cast<std::size_t>(k)]; }
  Index end(Index k) const { return b_[static_cast<std::size_t>(k) + 1]; }
  Index width(Index k) const { return end(k) - begin(k); }
  const std::vector<Index>& boundaries() const { return b_; }

  Index level_of(Index i) const {
    const auto it = std::upper_bound(b_.begin() + 1, b_.end(), i);
    return static_cast<Index>(it - b_.begin()) - 1;
  }

  bool is_dyadic() const {
    if (!is_power_of_two(size()) || size() < 2) return false;
    return b_ == dyadic(size()).b_;
  }

  friend bool operator==(const LevelStructure&, const LevelStructure&) = default;

 private:
  std::vector<Index> b_;
};

// Per-level sparsity budget s bound to a LevelStructure.
class SparsityPattern {
 public:
  SparsityPattern() = default;

  SparsityPattern(LevelStructure levels, std::vector<Index> s) : levels_(std::move(levels)), s_(std::move(s)) {
    require(static_cast<Index>(s_.size()) == levels_.levels(), ErrorCode::InvalidPattern,
            "pattern length " + std::to_string(s_.size()) + " != level count " +
                std::to_string(levels_.levels()));
    for (Index k = 0; k < levels_.levels(); ++k) {
      require(s_[k] >= 0, ErrorCode::InvalidPattern, "negative local sparsity");
      require(s_[k] <= levels_.width(k), ErrorCode::InvalidPattern,
              "s_" + std::to_string(k + 1) + " exceeds the level width");
    }
  }

  const LevelStructure& levels() const { return levels_; }
  const std::vector<Index>& s() const { return s_; }
  Index operator[](Index k) const { return s_[static_cast<std::size_t>(k)]; }
  Index r() const { return levels_.levels(); }
  Index n() const { return levels_.size(); }
  Index total() const { return std::accumulate(s_.begin(), s_.end(), Index{0}); }

  // max s_k / s_l over levels with s_l > 0. Infinite (with a warning) when a
  // zero level coexists with a nonzero one; 1 for the all-zero pattern.
  double ratio(Warnings* warnings = nullptr) const {
    Index lo = std::numeric_limits<Index>::max(), hi = 0;
    bool has_zero = false;
    for (Index v : s_) {
      if (v == 0) {
        has_zero = true;
        continue;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi == 0) return 1.0;
    if (has_zero) {
      if (warnings) warnings->push_back("sparsity ratio is infinite: some levels have s_k = 0");
      return std::numeric_limits<double>::infinity();
    }
    return static_cast<double>(hi) / static_cast<double>(lo);
  }

  // Componentwise factor * s_k clamped to the level width; `clamped` reports
  // whether any level hit its width.
  SparsityPattern scaled(Index factor, bool* clamped = nullptr) const {
    std::vector<Index> out(s_.size());
    bool any = false;
    for (Index k = 0; k < r(); ++k) {
      const Index want = factor * s_[static_cast<std::size_t>(k)];
      out[static_cast<std::size_t>(k)] = std::min(want, levels_.width(k));
      any = any || want > levels_.width(k);
    }
    if (clamped) *clamped = any;
    return SparsityPattern(levels_, std::move(out));
  }

  friend bool operator==(const SparsityPattern&, const SparsityPattern&) = default;

 private:
  LevelStructure levels_;
  std::vector<Index> s_;
};

struct SupportSet {
  std::vector<Index> indices;  // sorted
  std::vector<Index> counts;   // per-level

  friend bool operator==(const SupportSet&, const SupportSet&) = default;
};

// ---------------------------------------------------------------------------

namespace detail {

// Number of nonzeros per level, treating |x_i| <= tau as zero.
inline std::vector<Index> level_counts(const ComplexVector& x, const LevelStructure& levels, double tau) {
  std::vector<Index> c(static_cast<std::size_t>(levels.levels()), 0);
  for (Index k = 0; k < levels.levels(); ++k)
    for (Index i = levels.begin(k); i < levels.end(k); ++i)
      if (std::abs(x[i]) > tau) ++c[static_cast<std::size_t>(k)];
  return c;
}

inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > std::numeric_limits<std::uint64_t>::max() / b) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

inline std::uint64_t binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  __extension__ using u128 = unsigned __int128;
  u128 result = 1;
  const auto cap = static_cast<u128>(std::numeric_limits<std::uint64_t>::max());
  for (Index i = 1; i <= k; ++i) {
    // product of i consecutive integers is divisible by i!
    result = result * static_cast<u128>(n - k + i) / static_cast<u128>(i);
    if (result > cap) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(result);
}

}  // namespace detail

// Exact support test: at most s_k nonzeros in each level.
inline bool is_sparse_in_levels(const ComplexVector& x, const SparsityPattern& s, double tau = 0.0) {
  require(x.size() == s.n(), ErrorCode::DimensionMismatch, "vector length != N");
  require(tau >= 0.0, ErrorCode::InvalidArgument, "zero threshold must be non-negative");
  const auto c = detail::level_counts(x, s.levels(), tau);
  for (Index k = 0; k < s.r(); ++k)
    if (c[static_cast<std::size_t>(k)] > s[k]) return false;
  return true;
}

struct BestApproximation {
  ComplexVector z;
  double sigma = 0.0;  // ||x - z||_1
};

// Keeps the s_k largest-magnitude entries of each level (ties: lowest index).
inline BestApproximation best_approx_in_levels(const ComplexVector& x, const SparsityPattern& s) {
  require(x.size() == s.n(), ErrorCode::DimensionMismatch, "vector length != N");
  BestApproximation out{ComplexVector::Zero(x.size()), 0.0};
  std::vector<Index> order;
  for (Index k = 0; k < s.r(); ++k) {
    const auto& lv = s.levels();
    order.resize(static_cast<std::size_t>(lv.width(k)));
    std::iota(order.begin(), order.end(), lv.begin(k));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(x[a]) > std::abs(x[b]); });
    for (Index j = 0; j < s[k]; ++j) out.z[order[static_cast<std::size_t>(j)]] = x[order[static_cast<std::size_t>(j)]];
  }
  out.sigma = (x - out.z).cwiseAbs().sum();
  return out;
}

// sigma_{s,M}(x) alone.
inline double best_approx_error(const ComplexVector& x, const SparsityPattern& s) {
  return best_approx_in_levels(x, s).sigma;
}

// ---------------------------------------------------------------------------
// Support enumeration.
//
// Exact mode walks every support with exactly s_k indices in level k. Bounded
// mode walks every support with at most s_k; within a level, subsets are
// ordered by size and then lexicographically. Across levels the order is an
// odometer with the last level varying fastest, which for exact mode is the
// lexicographic order of the sorted index lists.
class SupportEnumerator {
 public:
  SupportEnumerator(SparsityPattern pattern, bool exact_counts)
      : pattern_(std::move(pattern)), exact_(exact_counts) {
    const auto r = static_cast<std::size_t>(pattern_.r());
    level_count_.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
      const Index w = pattern_.levels().width(static_cast<Index>(k));
      const Index s = pattern_[static_cast<Index>(k)];
      std::uint64_t c = 0;
      if (exact_) {
        c = detail::binomial(w, s);
      } else {
        for (Index t = 0; t <= s; ++t) c += detail::binomial(w, t);
      }
      level_count_[k] = c;
    }
    total_ = 1;
    for (auto c : level_count_) total_ = detail::saturating_mul(total_, c);
    reset();
  }

  // Product of per-level counts; saturates at uint64 max.
  std::uint64_t count() const { return total_; }

  static std::uint64_t count_exact(const SparsityPattern& p) { return SupportEnumerator(p, true).count(); }

  void reset() { seek(0); }

  // Positions the enumerator so the next call to next() yields item `rank`.
  void seek(std::uint64_t rank) {
    const auto r = level_count_.size();
    combos_.assign(r, {});
    position_ = rank;
    if (rank >= total_) return;
    for (std::size_t k = r; k-- > 0;) {
      const std::uint64_t local = rank % level_count_[k];
      rank /= level_count_[k];
      combos_[k] = unrank_level(static_cast<Index>(k), local);
    }
  }

  // Writes the next support into `out`; false when exhausted.
  bool next(SupportSet& out) {
    if (position_ >= total_) return false;
    materialize(out);
    ++position_;
    if (position_ < total_) advance();
    return true;
  }

  const SparsityPattern& pattern() const { return pattern_; }

 private:
  // Local combination (offsets within the level) for a rank inside level k.
  std::vector<Index> unrank_level(Index k, std::uint64_t rank) const {
    const Index w = pattern_.levels().width(k);
    Index size = pattern_[k];
    if (!exact_) {
      size = 0;
      while (rank >= detail::binomial(w, size)) {
        rank -= detail::binomial(w, size);
        ++size;
      }
    }
    std::vector<Index> c;
    c.reserve(static_cast<std::size_t>(size));
    Index start = 0;
    for (Index slot = 0; slot < size; ++slot) {
      for (Index v = start; v < w; ++v) {
        const std::uint64_t with_v = detail::binomial(w - v - 1, size - slot - 1);
        if (rank < with_v) {
          c.push_back(v);
          start = v + 1;
          break;
        }
        rank -= with_v;
      }
    }
    return c;
  }

  // Lexicographic successor of a combination of fixed size; false on wrap.
  static bool next_combination(std::vector<Index>& c, Index w) {
    const Index t = static_cast<Index>(c.size());
    for (Index i = t - 1; i >= 0; --i) {
      auto& ci = c[static_cast<std::size_t>(i)];
      if (ci < w - t + i) {
        ++ci;
        for (Index j = i + 1; j < t; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
        return true;
      }
    }
    return false;
  }

  bool advance_level(std::size_t k) {
    const Index w = pattern_.levels().width(static_cast<Index>(k));
    auto& c = combos_[k];
    if (next_combination(c, w)) return true;
    if (!exact_ && static_cast<Index>(c.size()) < std::min(pattern_[static_cast<Index>(k)], w)) {
      const auto t = c.size() + 1;
      c.resize(t);
      std::iota(c.begin(), c.end(), Index{0});
      return true;
    }
    // wrap to the first subset of this level
    if (!exact_) c.clear();
    else std::iota(c.begin(), c.end(), Index{0});
    return false;
  }

  void advance() {
    for (std::size_t k = combos_.size(); k-- > 0;)
      if (advance_level(k)) return;
  }

  void materialize(SupportSet& out) const {
    out.indices.clear();
    out.counts.assign(combos_.size(), 0);
    for (std::size_t k = 0; k < combos_.size(); ++k) {
      const Index base = pattern_.levels().begin(static_cast<Index>(k));
      for (Index off : combos_[k]) out.indices.push_back(base + off);
      out.counts[k] = static_cast<Index>(combos_[k].size());
    }
  }

  SparsityPattern pattern_;
  bool exact_;
  std::vector<std::uint64_t> level_count_;
  std::uint64_t total_ = 0;
  std::uint64_t position_ = 0;
  std::vector<std::vector<Index>> combos_;
};

// Collects every support; only for small patterns.
inline std::vector<SupportSet> enumerate_supports(const SparsityPattern& s, bool exact_counts) {
  SupportEnumerator en(s, exact_counts);
  std::vector<SupportSet> out;
  SupportSet cur;
  while (en.next(cur)) out.push_back(cur);
  return out;
}

enum class MagnitudeModel { Unit, Gaussian };

// Exactly s_k nonzeros per level at uniformly chosen positions.
inline ComplexVector random_sparse_vector(const SparsityPattern& s, Rng& rng,
                                          MagnitudeModel model = MagnitudeModel::Unit) {
  ComplexVector x = ComplexVector::Zero(s.n());
  std::vector<Index> pool;
  for (Index k = 0; k < s.r(); ++k) {
    const auto& lv = s.levels();
    pool.resize(static_cast<std::size_t>(lv.width(k)));
    std::iota(pool.begin(), pool.end(), lv.begin(k));
    for (Index j = 0; j < s[k]; ++j) {
      const auto pick = j + static_cast<Index>(uniform_below(rng, static_cast<std::uint64_t>(lv.width(k) - j)));
      std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(pick)]);
    }
    std::sort(pool.begin(), pool.begin() + s[k]);
    for (Index j = 0; j < s[k]; ++j) {
      Complex v;
      if (model == MagnitudeModel::Unit) {
        v = std::polar(1.0, 2.0 * kPi * uniform01(rng));
      } else {
        const double re = standard_normal(rng);
        const double im = standard_normal(rng);
        v = Complex(re, im) / std::sqrt(2.0);
        if (v == Complex(0.0, 0.0)) v = 1.0;
      }
      x[pool[static_cast<std::size_t>(j)]] = v;
    }
  }
  return x;
}

inline ComplexVector random_sparse_vector(const SparsityPattern& s, std::uint64_t seed,
                                          MagnitudeModel model = MagnitudeModel::Unit) {
  Rng rng = make_rng(seed);
  return random_sparse_vector(s, rng, model);
}

// x restricted to the given indices, zero elsewhere.
inline ComplexVector restrict_to(const ComplexVector& x, const std::vector<Index>& support) {
  ComplexVector z = ComplexVector::Zero(x.size());
  for (Index i : support) z[i] = x[i];
  return z;
}

}  // namespace ripl_lab
