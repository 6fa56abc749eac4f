#pragma once

// Shared vocabulary types, errors, seeded streams and the small parallel
// helper used by the enumeration-heavy routines.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ripl_lab {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode {
  NonMonotoneLevels,
  LastBoundaryMismatch,
  EmptyLevel,
  DimensionMismatch,
  NotPowerOfTwo,
  NonSquare,
  InvalidPattern,
  InvalidScheme,
  InvalidArgument,
  BudgetExceeded,
  NonConvergence,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonMonotoneLevels: return "non-monotone";
    case ErrorCode::LastBoundaryMismatch: return "last-boundary";
    case ErrorCode::EmptyLevel: return "empty-level";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::NotPowerOfTwo: return "not-power-of-two";
    case ErrorCode::NonSquare: return "non-square";
    case ErrorCode::InvalidPattern: return "invalid-pattern";
    case ErrorCode::InvalidScheme: return "invalid-scheme";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::BudgetExceeded: return "budget-exceeded";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

// Non-fatal conditions (rho infinite, corollary hypothesis violated, clamps)
// are collected here rather than printed.
using Warnings = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Seeded streams. Every randomized routine takes a 64-bit seed and derives
// independent sub-streams (per level, per trial) with splitmix64 so results do
// not depend on evaluation order.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

// Uniform double in [0,1) built from the raw 64-bit output so the value is
// identical across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) via rejection; portable across libraries.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % n));
  for (;;) {
    const std::uint64_t v = rng();
    if (v < limit) return v % n;
  }
}

// Standard normal by Box-Muller on uniform01, again for portability.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

// ---------------------------------------------------------------------------
// Parallelism. RIPL_LAB_THREADS caps the worker count; callers reduce results
// in index order so output never depends on scheduling.

inline unsigned thread_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RIPL_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

// Runs body(i) for i in [0, n). Each call must write only slot i of
// caller-owned storage.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next.store(n);
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline bool is_power_of_two(Index n) { return n >= 1 && (n & (n - 1)) == 0; }

inline int log2_exact(Index n) {
  int r = 0;
  while ((Index{1} << r) < n) ++r;
  return r;
}

}  // namespace ripl_lab
