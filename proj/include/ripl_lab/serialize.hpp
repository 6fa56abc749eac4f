#pragma once

// Key-value (JSON) schemas for the domain types, the binary matrix container
// and CSV debug forms.
//
// Binary matrix container, all fields little-endian:
//   bytes 0..7   magic "RIPLMAT1"
//   bytes 8..15  uint64 rows
//   bytes 16..23 uint64 cols
//   then rows * cols entries in row-major order, each float64 re, float64 im.

#include "ripl_lab/allocation.hpp"
#include "ripl_lab/coherence.hpp"
#include "ripl_lab/common.hpp"
#include "ripl_lab/levels.hpp"
#include "ripl_lab/operators.hpp"
#include "ripl_lab/recovery.hpp"
#include "ripl_lab/ripl.hpp"
#include "ripl_lab/sampling.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ripl_lab {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Levels and patterns

inline Json to_json(const LevelStructure& lv) {
  return Json{{"N", lv.size()}, {"boundaries", lv.boundaries()}};
}

inline LevelStructure levels_from_json(const Json& j) {
  require(j.contains("N") && j.contains("boundaries"), ErrorCode::InvalidArgument,
          "level structure needs N and boundaries");
  return LevelStructure(j.at("boundaries").get<std::vector<Index>>(), j.at("N").get<Index>());
}

inline Json to_json(const SparsityPattern& s) {
  Json j = to_json(s.levels());
  j["s"] = s.s();
  return j;
}

inline SparsityPattern pattern_from_json(const Json& j) {
  require(j.contains("s"), ErrorCode::InvalidArgument, "sparsity pattern needs s");
  return SparsityPattern(levels_from_json(j), j.at("s").get<std::vector<Index>>());
}

inline Json to_json(const BandLayout& b) {
  return Json{{"N", b.n}, {"bands", b.bands}, {"row_frequency", b.row_frequency}};
}

inline Json to_json(const ComplexVector& v) {
  std::vector<double> re(static_cast<std::size_t>(v.size())), im(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) {
    re[static_cast<std::size_t>(i)] = v[i].real();
    im[static_cast<std::size_t>(i)] = v[i].imag();
  }
  return Json{{"re", re}, {"im", im}};
}

inline ComplexVector vector_from_json(const Json& j) {
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  require(re.size() == im.size(), ErrorCode::DimensionMismatch, "re/im lengths differ");
  ComplexVector v(static_cast<Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) v[static_cast<Index>(i)] = Complex(re[i], im[i]);
  return v;
}

inline Json to_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Binary matrix container

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  require(static_cast<bool>(is), ErrorCode::Io, "truncated matrix header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

constexpr char kMatrixMagic[8] = {'R', 'I', 'P', 'L', 'M', 'A', 'T', '1'};

}  // namespace detail

inline void write_matrix_binary(std::ostream& os, const ComplexMatrix& m) {
  os.write(detail::kMatrixMagic, 8);
  detail::put_u64(os, static_cast<std::uint64_t>(m.rows()));
  detail::put_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      detail::put_f64(os, m(i, j).real());
      detail::put_f64(os, m(i, j).imag());
    }
}

inline ComplexMatrix read_matrix_binary(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  require(static_cast<bool>(is) && std::memcmp(magic, detail::kMatrixMagic, 8) == 0, ErrorCode::Io,
          "not a RIPLMAT1 matrix file");
  const auto rows = detail::get_u64(is), cols = detail::get_u64(is);
  require(rows >= 1 && cols >= 1 && rows * cols <= (std::uint64_t{1} << 28), ErrorCode::Io, "implausible matrix size");
  ComplexMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double re = detail::get_f64(is);
      const double im = detail::get_f64(is);
      require(std::isfinite(re) && std::isfinite(im), ErrorCode::Io, "non-finite matrix entry");
      m(i, j) = Complex(re, im);
    }
  return m;
}

inline void save_matrix(const std::string& path, const ComplexMatrix& m) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + path);
  write_matrix_binary(os, m);
}

inline ComplexMatrix load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot read " + path);
  return read_matrix_binary(is);
}

// Debug form: one line per entry, "row,col,re,im", 0-based indices.
inline void write_matrix_csv(std::ostream& os, const ComplexMatrix& m) {
  os << "row,col,re,im\n" << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) os << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag() << '\n';
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Content hash over the binary container bytes.
inline std::string content_hash(const ComplexMatrix& m) {
  std::ostringstream os;
  write_matrix_binary(os, m);
  return "fnv1a64:" + hex64(fnv1a64(os.str()));
}

// ---------------------------------------------------------------------------
// Schemes, operators, reports

inline Json to_json(const SamplingScheme& sc) {
  Json draws = Json::array();
  for (const auto& d : sc.draws) draws.push_back(d);
  std::vector<bool> sat(sc.saturated.begin(), sc.saturated.end());
  return Json{{"levels", to_json(sc.levels)}, {"m", sc.m},           {"r0", sc.r0},
              {"seed", sc.seed},             {"saturated", sat},    {"without_replacement", sc.without_replacement},
              {"draws", draws}};
}

inline SamplingScheme scheme_from_json(const Json& j) {
  SamplingScheme sc;
  sc.levels = levels_from_json(j.at("levels"));
  sc.m = j.at("m").get<std::vector<Index>>();
  sc.r0 = j.at("r0").get<Index>();
  sc.seed = j.at("seed").get<std::uint64_t>();
  const auto sat = j.at("saturated").get<std::vector<bool>>();
  sc.saturated.assign(sat.begin(), sat.end());
  sc.without_replacement = j.value("without_replacement", false);
  for (const auto& d : j.at("draws")) sc.draws.push_back(d.get<std::vector<Index>>());
  validate_scheme(sc);
  return sc;
}

inline Json to_json(const MeasurementOperator& op, bool embed = false) {
  Json j{{"source", op.source_id}, {"rows", op.rows()}, {"cols", op.cols()},
         {"p", op.p},              {"K", op.k_factor},  {"scheme", to_json(op.scheme)}};
  j["embedded"] = embed;
  if (embed) {
    Json rows = Json::array();
    for (Index i = 0; i < op.a.rows(); ++i) rows.push_back(to_json(ComplexVector(op.a.row(i).transpose())));
    j["A"] = rows;
  }
  return j;
}

inline Json to_json(const CoherenceProfile& p) {
  return Json{{"mu_global", p.mu_global},
              {"sampling_levels", to_json(p.sampling)},
              {"sparsity_levels", to_json(p.sparsity)},
              {"mu_local", to_json(p.mu_local)},
              {"mu_tilde", to_json(p.mu_tilde)}};
}

inline void write_profile_csv(std::ostream& os, const CoherenceProfile& p) {
  os << "k,l,mu,mu_tilde\n" << std::setprecision(17);
  for (Index k = 0; k < p.r(); ++k)
    for (Index l = 0; l < p.r(); ++l) os << k + 1 << ',' << l + 1 << ',' << p.mu_local(k, l) << ',' << p.mu_tilde(k, l) << '\n';
}

inline Json to_json(const RelativeSparsityResult& r) {
  return Json{{"S", r.s_rel},           {"exact", r.exact}, {"support", r.support},
              {"phase_index", r.phase_index}, {"evaluations", r.evaluations}};
}

inline Json to_json(const RiclReport& r) {
  return Json{{"delta", r.delta},
              {"method", to_string(r.method)},
              {"pattern", to_json(r.pattern)},
              {"support", r.support},
              {"lambda_min", r.lambda_min},
              {"lambda_max", r.lambda_max},
              {"supports_examined", r.supports_examined},
              {"trials", r.trials},
              {"witness", to_json(r.witness)}};
}

inline void write_support_extremes_csv(std::ostream& os, const RiclReport& r) {
  os << "support,lambda_min,lambda_max,deviation\n" << std::setprecision(17);
  for (const auto& e : r.per_support) {
    for (std::size_t i = 0; i < e.support.size(); ++i) os << (i ? ";" : "") << e.support[i];
    os << ',' << e.lambda_min << ',' << e.lambda_max << ',' << std::max(e.lambda_max - 1.0, 1.0 - e.lambda_min) << '\n';
  }
}

inline Json to_json(const Certification& c) {
  return Json{{"verdict", to_string(c.verdict)}, {"delta", c.delta},         {"threshold", c.threshold},
              {"rho", std::isinf(c.rho) ? Json("inf") : Json(c.rho)},
              {"clamped_2s", c.clamped},          {"doubled", to_json(c.doubled)}, {"report", to_json(c.report)},
              {"warnings", c.warnings}};
}

inline Json to_json(const Allocation& a) {
  std::vector<bool> cl(a.clamped.begin(), a.clamped.end());
  return Json{{"m", a.m},       {"total", a.total()}, {"raw", a.raw},          {"clamped", cl},
              {"any_clamped", a.any_clamped}, {"K", a.k_factor}, {"iterations", a.iterations}, {"warnings", a.warnings}};
}

inline Json to_json(const QcbpProblem& p) {
  Json rows = Json::array();
  for (Index i = 0; i < p.a.rows(); ++i) rows.push_back(to_json(ComplexVector(p.a.row(i).transpose())));
  std::vector<double> w(p.weights.data(), p.weights.data() + p.weights.size());
  return Json{{"A", rows}, {"y", to_json(p.y)}, {"eta", p.eta}, {"weights", w}};
}

inline QcbpProblem problem_from_json(const Json& j) {
  QcbpProblem p;
  const auto& rows = j.at("A");
  require(!rows.empty(), ErrorCode::InvalidArgument, "empty matrix");
  const ComplexVector first = vector_from_json(rows.at(0));
  p.a.resize(static_cast<Index>(rows.size()), first.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ComplexVector r = vector_from_json(rows.at(i));
    require(r.size() == first.size(), ErrorCode::DimensionMismatch, "ragged matrix rows");
    p.a.row(static_cast<Index>(i)) = r.transpose();
  }
  p.y = vector_from_json(j.at("y"));
  p.eta = j.at("eta").get<double>();
  const auto w = j.value("weights", std::vector<double>{});
  p.weights = Eigen::Map<const RealVector>(w.data(), static_cast<Index>(w.size()));
  p.validate();
  return p;
}

inline Json to_json(const SolveResult& r) {
  return Json{{"xhat", to_json(r.xhat)}, {"objective", r.objective}, {"residual", r.residual},
              {"iterations", r.iterations}, {"converged", r.converged}, {"gap", r.gap}};
}

}  // namespace ripl_lab
