#pragma once

// Batch drivers behind the ripl_lab command-line tool. Each command takes a
// JSON config merged over its defaults, writes its outputs under one
// directory and reports error records; the process exit code is 0 iff there
// are none.

#include "ripl_lab/allocation.hpp"
#include "ripl_lab/coherence.hpp"
#include "ripl_lab/common.hpp"
#include "ripl_lab/levels.hpp"
#include "ripl_lab/operators.hpp"
#include "ripl_lab/recovery.hpp"
#include "ripl_lab/ripl.hpp"
#include "ripl_lab/sampling.hpp"
#include "ripl_lab/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ripl_lab::cli {

inline constexpr const char* kVersion = "1.0.0";

enum class Format { Csv, Json };

struct RunOptions {
  Json config = Json::object();
  std::optional<std::uint64_t> seed;  // overrides config["seed"]
  std::filesystem::path out = ".";
  Format format = Format::Csv;
  bool out_given = false;  // selftest only writes when asked to
};

struct CommandResult {
  std::vector<std::string> errors;
  Warnings warnings;
  std::vector<std::string> files;
  std::string headline;  // one-line summary for stdout

  int exit_code() const { return errors.empty() ? 0 : 1; }
};

// ---------------------------------------------------------------------------
// Defaults

inline Json operator_defaults() {
  return Json{{"operator", "fourier-haar"},  {"N", 64},           {"matrix_file", nullptr},
              {"embed_matrix", false},      {"sampling_levels", "dyadic"}, {"sparsity_levels", nullptr},
              {"seed", nullptr}};
}

inline Json allocation_defaults() {
  return Json{{"mode", "haar-uniform"}, {"C", 1.0}, {"delta", 0.5}, {"eps", 0.5}, {"matched_scaling", false},
              {"target_total", nullptr}};
}

inline Json default_config(const std::string& command) {
  Json d = operator_defaults();
  if (command == "coherence") {
    d["relative_sparsity"] = nullptr;  // {"s": [...], "phases": 4, "budget": 5e7, "real_domain": false}
  } else if (command == "certify") {
    d["s"] = nullptr;
    d["m"] = "full";  // "full", per-level counts, or null to use "allocation"
    d["r0"] = 0;
    d["allocation"] = nullptr;
    d["without_replacement"] = false;
    d["exact_budget"] = 1000000;
    d["monte_carlo"] = true;
    d["mc_trials"] = 10000;
    d["per_support_csv"] = false;
  } else if (command == "recover") {
    d["s"] = nullptr;
    d["m"] = nullptr;
    d["r0"] = 0;
    d["allocation"] = nullptr;
    d["without_replacement"] = false;
    d["trials"] = 50;
    d["eta"] = 0.0;
    d["noise"] = "plain";
    d["weighted"] = false;
    d["success_tol"] = 1e-4;
    d["magnitude"] = "gaussian";
    d["baseline"] = nullptr;  // "uniform-random": single-level sampling at the same total
    d["solver"] = Json{{"max_iters", 50000}, {"primal_tol", 1e-7}, {"feasibility_tol", 1e-9}};
  } else if (command == "allocate") {
    d["s"] = nullptr;
    d["delta"] = 0.5;
    d["eps"] = 0.5;
    d["C"] = 1.0;
    d["r0"] = 0;
    d["modes"] = Json::array({"haar-uniform", "haar-nonuniform"});
    d["matched_scaling"] = true;
  } else if (command != "selftest") {
    throw Error(ErrorCode::InvalidArgument, "unknown command " + command);
  }
  return d;
}

// Merges user keys over the defaults; unknown keys are errors. Nested objects
// with object defaults are merged one level deep.
inline Json resolve_config(const std::string& command, const Json& user, std::vector<std::string>& errors) {
  Json out = default_config(command);
  if (!user.is_object()) {
    errors.push_back("config must be a JSON object");
    return out;
  }
  for (const auto& [key, value] : user.items()) {
    if (!out.contains(key)) {
      errors.push_back("unknown config key '" + key + "'");
      continue;
    }
    if (out[key].is_object() && value.is_object()) {
      for (const auto& [k2, v2] : value.items()) {
        if (!out[key].contains(k2)) errors.push_back("unknown config key '" + key + "." + k2 + "'");
        else out[key][k2] = v2;
      }
    } else {
      out[key] = value;
    }
  }
  if (out.contains("allocation") && out["allocation"].is_object()) {
    Json a = allocation_defaults();
    for (const auto& [k, v] : out["allocation"].items()) {
      if (!a.contains(k)) errors.push_back("unknown config key 'allocation." + k + "'");
      else a[k] = v;
    }
    out["allocation"] = a;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config interpretation

struct BuiltOperator {
  std::string kind;
  ComplexMatrix u;  // square isometry, or empty for the gaussian baseline
  std::string hash;
  Index n = 0;
};

inline BuiltOperator build_operator(const Json& cfg) {
  BuiltOperator b;
  b.kind = cfg.at("operator").get<std::string>();
  b.n = cfg.at("N").get<Index>();
  if (b.kind == "fourier-haar") {
    b.u = fourier_haar_matrix(b.n).u;
  } else if (b.kind == "dft") {
    b.u = dft_matrix(b.n);
  } else if (b.kind == "identity") {
    require(b.n >= 1, ErrorCode::InvalidArgument, "N must be >= 1");
    b.u = ComplexMatrix::Identity(b.n, b.n);
  } else if (b.kind == "haar") {
    b.u = haar_matrix(b.n);
  } else if (b.kind == "file") {
    require(cfg.at("matrix_file").is_string(), ErrorCode::Io, "operator 'file' needs matrix_file");
    b.u = load_matrix(cfg.at("matrix_file").get<std::string>());
    require(b.u.rows() == b.u.cols(), ErrorCode::NonSquare, "matrix file must hold a square isometry");
    b.n = b.u.cols();
  } else if (b.kind == "gaussian") {
    require(b.n >= 1, ErrorCode::InvalidArgument, "N must be >= 1");
    return b;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown operator '" + b.kind + "'");
  }
  b.hash = content_hash(b.u);
  return b;
}

inline LevelStructure parse_levels(const Json& spec, Index n) {
  if (spec.is_null() || (spec.is_string() && spec.get<std::string>() == "dyadic")) return LevelStructure::dyadic(n);
  if (spec.is_string() && spec.get<std::string>() == "single") return LevelStructure({n}, n);
  if (spec.is_object() && spec.contains("uniform")) return LevelStructure::uniform(n, spec.at("uniform").get<Index>());
  if (spec.is_array()) return LevelStructure(spec.get<std::vector<Index>>(), n);
  throw Error(ErrorCode::InvalidArgument, "level spec must be \"dyadic\", \"single\", {\"uniform\": r} or boundaries");
}

struct LevelPair {
  LevelStructure sampling;
  LevelStructure sparsity;
};

inline LevelPair parse_level_pair(const Json& cfg, Index n) {
  LevelPair p;
  p.sampling = parse_levels(cfg.at("sampling_levels"), n);
  p.sparsity = cfg.at("sparsity_levels").is_null() ? p.sampling : parse_levels(cfg.at("sparsity_levels"), n);
  return p;
}

inline SparsityPattern parse_pattern(const Json& cfg, const LevelStructure& sparsity) {
  require(cfg.at("s").is_array(), ErrorCode::InvalidPattern, "config needs s (one entry per sparsity level)");
  return SparsityPattern(sparsity, cfg.at("s").get<std::vector<Index>>());
}

inline HaarMode parse_haar_mode(const std::string& mode) {
  if (mode == "haar-uniform") return HaarMode::Uniform;
  if (mode == "haar-nonuniform") return HaarMode::Nonuniform;
  throw Error(ErrorCode::InvalidArgument, "unknown Haar allocation mode '" + mode + "'");
}

struct AllocationRequest {
  std::string mode;
  double delta = 0.5, eps = 0.5, c = 1.0;
  Index r0 = 0;
  bool matched_scaling = false;
};

// Runs one allocation calculator. General mode needs the coherence profile.
inline Allocation run_allocation(const AllocationRequest& req, const SparsityPattern& s,
                                 const CoherenceProfile* profile) {
  if (req.mode == "uniform-general") {
    require(profile != nullptr, ErrorCode::InvalidArgument, "uniform-general allocation needs a square operator");
    AllocationParams p;
    p.delta = req.delta;
    p.eps = req.eps;
    p.c = req.c;
    p.r0 = req.r0;
    return allocate_uniform(*profile, s, p);
  }
  HaarAllocationParams p;
  p.delta = req.delta;
  p.eps = req.eps;
  p.c = req.c;
  p.r0 = req.r0;
  p.mode = parse_haar_mode(req.mode);
  p.matched_scaling = req.matched_scaling;
  return allocate_haar(s, p);
}

struct ResolvedAllocation {
  Allocation allocation;
  double c = 0.0;
  bool calibrated = false;
};

inline ResolvedAllocation resolve_allocation(const Json& a, Index r0, const SparsityPattern& s,
                                             const CoherenceProfile* profile) {
  AllocationRequest req;
  req.mode = a.at("mode").get<std::string>();
  req.delta = a.at("delta").get<double>();
  req.eps = a.at("eps").get<double>();
  req.c = a.at("C").get<double>();
  req.r0 = r0;
  req.matched_scaling = a.at("matched_scaling").get<bool>();
  ResolvedAllocation out;
  if (a.at("target_total").is_null()) {
    out.allocation = run_allocation(req, s, profile);
    out.c = req.c;
    return out;
  }
  const Index target = a.at("target_total").get<Index>();
  const Calibration cal = calibrate_constant(
      [&](double c) {
        AllocationRequest q = req;
        q.c = c;
        return run_allocation(q, s, profile);
      },
      target);
  out.allocation = cal.allocation;
  out.c = cal.c;
  out.calibrated = true;
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::uint64_t effective_seed(const RunOptions& opt, const Json& cfg, bool required) {
  if (opt.seed) return *opt.seed;
  if (cfg.at("seed").is_number_unsigned() || cfg.at("seed").is_number_integer())
    return cfg.at("seed").get<std::uint64_t>();
  require(!required, ErrorCode::InvalidArgument, "this command is randomized and needs a seed (--seed or config seed)");
  return 0;
}

inline Json provenance(const std::string& command, const Json& cfg) {
  return Json{{"tool", "ripl_lab"},
              {"version", kVersion},
              {"command", command},
              {"config_hash", "fnv1a64:" + hex64(fnv1a64(cfg.dump()))},
              {"seed", cfg.contains("seed") ? cfg.at("seed") : Json(nullptr)},
              {"config", cfg}};
}

class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, CommandResult& result) : dir_(std::move(dir)), result_(result) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& contents) {
    const auto path = dir_ / name;
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + path.string());
    os << contents;
    result_.files.push_back(path.string());
  }

  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

 private:
  std::filesystem::path dir_;
  CommandResult& result_;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string join(const std::vector<Index>& v, char sep = ';') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : std::string()) + std::to_string(v[i]);
  return s;
}

// ---------------------------------------------------------------------------
// coherence

inline void cmd_coherence(const Json& cfg, const RunOptions& opt, CommandResult& res) {
  const BuiltOperator op = build_operator(cfg);
  require(op.u.size() > 0, ErrorCode::NonSquare, "coherence needs a square isometry; gaussian is not supported");
  const LevelPair lv = parse_level_pair(cfg, op.n);
  const CoherenceProfile prof = coherence_profile(op.u, lv.sampling, lv.sparsity);

  Json out = provenance("coherence", cfg);
  out["operator"] = Json{{"kind", op.kind}, {"N", op.n}, {"hash", op.hash}};
  out["profile"] = to_json(prof);

  std::string decay_csv;
  if (op.kind == "fourier-haar" && lv.sampling.is_dyadic() && lv.sparsity.is_dyadic()) {
    const RealMatrix ratios = haar_decay_ratios(prof.mu_local);
    out["decay_ratios"] = to_json(ratios);
    out["decay_max"] = ratios.maxCoeff();
    std::ostringstream os;
    os << "k,l,ratio\n" << std::setprecision(17);
    for (Index k = 0; k < ratios.rows(); ++k)
      for (Index l = 0; l < ratios.cols(); ++l) os << k + 1 << ',' << l + 1 << ',' << ratios(k, l) << '\n';
    decay_csv = os.str();
  }

  if (!cfg.at("relative_sparsity").is_null()) {
    const Json& rs = cfg.at("relative_sparsity");
    RelativeSparsityOptions ro;
    ro.phases = rs.value("phases", ro.phases);
    ro.budget = rs.value("budget", ro.budget);
    ro.real_domain = rs.value("real_domain", ro.real_domain);
    require(rs.contains("s"), ErrorCode::InvalidPattern, "relative_sparsity needs s");
    const SparsityPattern s(lv.sparsity, rs.at("s").get<std::vector<Index>>());
    const auto r = relative_sparsity(op.u, lv.sampling, s, ro);
    out["relative_sparsity"] = to_json(r);
    out["relative_sparsity"]["phases"] = ro.phases;
    out["relative_sparsity"]["real_domain"] = ro.real_domain;
  }

  OutputDir dir(opt.out, res);
  if (opt.format == Format::Csv) {
    std::ostringstream os;
    write_profile_csv(os, prof);
    dir.write("coherence.csv", os.str());
    if (!decay_csv.empty()) dir.write("decay.csv", decay_csv);
  }
  dir.write_json("coherence.json", out);
  std::ostringstream h;
  h << "coherence: mu=" << fmt(prof.mu_global) << " r=" << prof.r();
  if (out.contains("decay_max")) h << " decay_max=" << fmt(out["decay_max"].get<double>());
  res.headline = h.str();
}

// ---------------------------------------------------------------------------
// certify

inline void cmd_certify(const Json& cfg, const RunOptions& opt, CommandResult& res) {
  const std::uint64_t seed = effective_seed(opt, cfg, true);
  const BuiltOperator bop = build_operator(cfg);
  const LevelPair lv = parse_level_pair(cfg, bop.n);
  const SparsityPattern s = parse_pattern(cfg, lv.sparsity);
  const Index r0 = cfg.at("r0").get<Index>();

  MeasurementOperator op;
  Json alloc_json = nullptr;
  if (bop.kind == "gaussian") {
    require(cfg.at("m").is_number_integer(), ErrorCode::InvalidArgument, "gaussian operator needs an integer m (rows)");
    op = gaussian_factory(cfg.at("m").get<Index>(), bop.n)(derive_seed(seed, 0));
  } else {
    SamplingScheme scheme;
    const Json& m = cfg.at("m");
    if (m.is_string() && m.get<std::string>() == "full") {
      scheme = saturated_scheme(lv.sampling);
    } else {
      std::vector<Index> counts;
      if (m.is_array()) {
        counts = m.get<std::vector<Index>>();
      } else {
        require(cfg.at("allocation").is_object(), ErrorCode::InvalidArgument, "certify needs m or allocation");
        const CoherenceProfile prof = coherence_profile(bop.u, lv.sampling, lv.sparsity);
        const auto ra = resolve_allocation(cfg.at("allocation"), r0, s, &prof);
        counts = ra.allocation.m;
        alloc_json = to_json(ra.allocation);
        alloc_json["C"] = ra.c;
        res.warnings.insert(res.warnings.end(), ra.allocation.warnings.begin(), ra.allocation.warnings.end());
      }
      DrawOptions d;
      d.without_replacement = cfg.at("without_replacement").get<bool>();
      scheme = draw_scheme(lv.sampling, counts, r0, derive_seed(seed, 0), d);
    }
    op = build_measurement(bop.u, scheme, bop.hash);
  }

  CertifyOptions co;
  co.exact_budget = cfg.at("exact_budget").get<std::uint64_t>();
  co.allow_monte_carlo = cfg.at("monte_carlo").get<bool>();
  co.mc_trials = cfg.at("mc_trials").get<std::uint64_t>();
  co.seed = derive_seed(seed, 1);
  co.record_supports = cfg.at("per_support_csv").get<bool>();
  const Certification c = certify_recovery(op, s, co);
  res.warnings.insert(res.warnings.end(), c.warnings.begin(), c.warnings.end());

  Json out = provenance("certify", cfg);
  out["seed"] = seed;
  out["measurement"] = to_json(op, cfg.at("embed_matrix").get<bool>());
  if (!alloc_json.is_null()) out["allocation"] = alloc_json;
  out["certification"] = to_json(c);

  OutputDir dir(opt.out, res);
  if (opt.format == Format::Csv && co.record_supports && c.report.method == RiclMethod::ExactEnumeration) {
    std::ostringstream os;
    write_support_extremes_csv(os, c.report);
    dir.write("supports.csv", os.str());
  }
  dir.write_json("certify.json", out);
  res.headline = std::string("certify: ") + to_string(c.verdict) + " delta=" + fmt(c.delta) +
                 " threshold=" + fmt(c.threshold) + " method=" + to_string(c.report.method);
}

// ---------------------------------------------------------------------------
// recover

inline std::string trials_csv_header() {
  return "arm,trial,seed,m,distinct_rows,radius,err2,err1,sigma_sM,bound_ratio_l2,bound_ratio_l1,rel_err,success,"
         "converged,iterations\n";
}

inline void append_trials_csv(std::ostringstream& os, const std::string& arm, const ExperimentResult& r) {
  for (std::size_t t = 0; t < r.trials.size(); ++t) {
    const auto& tr = r.trials[t];
    os << arm << ',' << t << ',' << tr.seed << ',' << join(tr.m) << ',' << tr.distinct_rows << ',' << fmt(tr.radius)
       << ',' << fmt(tr.metrics.err2) << ',' << fmt(tr.metrics.err1) << ',' << fmt(tr.metrics.sigma) << ','
       << fmt(tr.metrics.bound_ratio_l2) << ',' << fmt(tr.metrics.bound_ratio_l1) << ',' << fmt(tr.rel_err) << ','
       << (tr.success ? 1 : 0) << ',' << (tr.converged ? 1 : 0) << ',' << tr.iterations << '\n';
  }
}

inline Json arm_summary(const ExperimentResult& r, const std::vector<Index>& m) {
  Index total = 0;
  for (Index v : m) total += v;
  std::uint64_t nonconv = 0;
  double worst_l2 = 0.0;
  for (const auto& t : r.trials) {
    nonconv += t.converged ? 0 : 1;
    worst_l2 = std::max(worst_l2, t.metrics.bound_ratio_l2);
  }
  return Json{{"m", m},
              {"total_m", total},
              {"success_rate", r.success_rate},
              {"trials", r.trials.size()},
              {"nonconverged", nonconv},
              {"max_bound_ratio_l2", worst_l2}};
}

inline void cmd_recover(const Json& cfg, const RunOptions& opt, CommandResult& res) {
  const std::uint64_t seed = effective_seed(opt, cfg, true);
  const BuiltOperator bop = build_operator(cfg);
  const LevelPair lv = parse_level_pair(cfg, bop.n);
  const SparsityPattern s = parse_pattern(cfg, lv.sparsity);
  const Index r0 = cfg.at("r0").get<Index>();
  const auto trials = cfg.at("trials").get<std::uint64_t>();

  ExperimentOptions eo;
  eo.eta = cfg.at("eta").get<double>();
  require(eo.eta >= 0.0, ErrorCode::InvalidArgument, "eta must be >= 0");
  const std::string noise = cfg.at("noise").get<std::string>();
  require(noise == "plain" || noise == "sqrtK", ErrorCode::InvalidArgument, "noise must be plain or sqrtK");
  eo.noise = noise == "plain" ? NoiseConvention::Plain : NoiseConvention::ScaledByK;
  eo.weighted = cfg.at("weighted").get<bool>();
  eo.success_tol = cfg.at("success_tol").get<double>();
  const std::string mag = cfg.at("magnitude").get<std::string>();
  require(mag == "gaussian" || mag == "unit", ErrorCode::InvalidArgument, "magnitude must be gaussian or unit");
  eo.magnitude = mag == "unit" ? MagnitudeModel::Unit : MagnitudeModel::Gaussian;
  const Json& so = cfg.at("solver");
  eo.solver.max_iters = so.at("max_iters").get<int>();
  eo.solver.primal_tol = so.at("primal_tol").get<double>();
  eo.solver.feasibility_tol = so.at("feasibility_tol").get<double>();

  Json out = provenance("recover", cfg);
  out["seed"] = seed;
  out["noise_convention"] = to_string(eo.noise);
  std::ostringstream csv;
  csv << trials_csv_header();

  std::vector<Index> counts;
  ExperimentResult main;
  if (bop.kind == "gaussian") {
    require(cfg.at("m").is_number_integer(), ErrorCode::InvalidArgument, "gaussian operator needs an integer m (rows)");
    const Index rows = cfg.at("m").get<Index>();
    counts = {rows};
    main = recovery_experiment(gaussian_factory(rows, bop.n), s, trials, seed, eo);
  } else {
    SchemeParams sp;
    sp.levels = lv.sampling;
    sp.r0 = r0;
    sp.without_replacement = cfg.at("without_replacement").get<bool>();
    if (cfg.at("m").is_array()) {
      counts = cfg.at("m").get<std::vector<Index>>();
    } else if (cfg.at("m").is_string() && cfg.at("m").get<std::string>() == "full") {
      for (Index k = 0; k < lv.sampling.levels(); ++k) counts.push_back(lv.sampling.width(k));
      sp.r0 = lv.sampling.levels();
    } else {
      require(cfg.at("allocation").is_object(), ErrorCode::InvalidArgument, "recover needs m or allocation");
      const CoherenceProfile prof = coherence_profile(bop.u, lv.sampling, lv.sparsity);
      const auto ra = resolve_allocation(cfg.at("allocation"), r0, s, &prof);
      counts = ra.allocation.m;
      out["allocation"] = to_json(ra.allocation);
      out["allocation"]["C"] = ra.c;
      out["allocation"]["calibrated"] = ra.calibrated;
      res.warnings.insert(res.warnings.end(), ra.allocation.warnings.begin(), ra.allocation.warnings.end());
    }
    sp.m = counts;
    main = exact_recovery_experiment(bop.u, sp, s, trials, seed, eo);
    out["source"] = bop.hash;
  }
  append_trials_csv(csv, "main", main);
  out["main"] = arm_summary(main, counts);
  std::string headline = "recover: success_rate=" + fmt(main.success_rate);

  if (!cfg.at("baseline").is_null()) {
    require(cfg.at("baseline") == "uniform-random" && bop.kind != "gaussian", ErrorCode::InvalidArgument,
            "baseline must be \"uniform-random\" on a square operator");
    SchemeParams bp;
    bp.levels = LevelStructure({bop.n}, bop.n);
    Index total = 0;
    for (Index v : counts) total += v;
    bp.m = {total};
    bp.without_replacement = cfg.at("without_replacement").get<bool>();
    const ExperimentResult base = exact_recovery_experiment(bop.u, bp, s, trials, seed, eo);
    append_trials_csv(csv, "baseline", base);
    out["baseline"] = arm_summary(base, bp.m);
    headline += " baseline=" + fmt(base.success_rate);
  }

  OutputDir dir(opt.out, res);
  if (opt.format == Format::Csv) dir.write("trials.csv", csv.str());
  dir.write_json("recover.json", out);
  if (out["main"]["nonconverged"].get<std::uint64_t>() > 0)
    res.warnings.push_back(std::to_string(out["main"]["nonconverged"].get<std::uint64_t>()) +
                           " trial(s) hit the iteration cap; flagged in the outputs");
  res.headline = headline;
}

// ---------------------------------------------------------------------------
// allocate

inline void cmd_allocate(const Json& cfg, const RunOptions& opt, CommandResult& res) {
  const BuiltOperator bop = build_operator(cfg);
  const LevelPair lv = parse_level_pair(cfg, bop.n);
  const SparsityPattern s = parse_pattern(cfg, lv.sparsity);

  AllocationRequest base;
  base.delta = cfg.at("delta").get<double>();
  base.eps = cfg.at("eps").get<double>();
  base.c = cfg.at("C").get<double>();
  base.r0 = cfg.at("r0").get<Index>();
  base.matched_scaling = cfg.at("matched_scaling").get<bool>();

  std::optional<CoherenceProfile> prof;
  if (bop.u.size() > 0) prof = coherence_profile(bop.u, lv.sampling, lv.sparsity);

  const auto modes = cfg.at("modes").get<std::vector<std::string>>();
  require(!modes.empty(), ErrorCode::InvalidArgument, "modes must not be empty");
  std::vector<Allocation> results;
  Json out = provenance("allocate", cfg);
  out["allocations"] = Json::object();
  for (const auto& mode : modes) {
    AllocationRequest req = base;
    req.mode = mode;
    results.push_back(run_allocation(req, s, prof ? &*prof : nullptr));
    out["allocations"][mode] = to_json(results.back());
    for (const auto& w : results.back().warnings) res.warnings.push_back(mode + ": " + w);
  }

  std::ostringstream csv;
  csv << "level,begin,end,width,s";
  for (const auto& mode : modes) csv << ",m_" << mode << ",raw_" << mode << ",clamped_" << mode;
  csv << '\n';
  for (Index k = 0; k < lv.sampling.levels(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    csv << k + 1 << ',' << lv.sampling.begin(k) + 1 << ',' << lv.sampling.end(k) << ',' << lv.sampling.width(k) << ','
        << (k < s.r() ? s[k] : 0);
    for (const auto& a : results) csv << ',' << a.m[ks] << ',' << fmt(a.raw[ks]) << ',' << (a.clamped[ks] ? 1 : 0);
    csv << '\n';
  }
  csv << "total,,,,";
  csv << s.total();
  for (const auto& a : results) csv << ',' << a.total() << ",,";
  csv << '\n';
  csv << "K,,,,";
  for (const auto& a : results) csv << ',' << fmt(a.k_factor) << ",,";
  csv << '\n';

  OutputDir dir(opt.out, res);
  if (opt.format == Format::Csv) dir.write("allocate.csv", csv.str());
  dir.write_json("allocate.json", out);
  std::string h = "allocate:";
  for (std::size_t i = 0; i < modes.size(); ++i) h += " " + modes[i] + "=" + join(results[i].m, ',');
  res.headline = h;
}

// ---------------------------------------------------------------------------
// selftest

struct SelfCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline std::vector<SelfCheck> run_selftest() {
  std::vector<SelfCheck> out;
  auto check = [&](const std::string& name, auto&& fn) {
    SelfCheck c{name, false, {}};
    try {
      c.pass = fn(c.detail);
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    out.push_back(c);
  };
  check("threshold r=1 rho=1", [](std::string& d) {
    const double t = ripl_threshold(1, 1.0);
    d = fmt(t);
    return std::abs(t - 4.0 / std::sqrt(41.0)) <= 1e-12;
  });
  check("dft unitary N=64", [](std::string& d) {
    const double e = isometry_defect(dft_matrix(64));
    d = fmt(e);
    return e <= 1e-12;
  });
  check("haar orthonormal N=64", [](std::string& d) {
    const double e = isometry_defect(haar_matrix(64));
    d = fmt(e);
    return e <= 1e-12;
  });
  check("fourier-haar coherence N=32", [](std::string& d) {
    const double mu = global_coherence(fourier_haar_matrix(32).u);
    d = fmt(mu);
    return std::abs(mu - 1.0) <= 1e-12;
  });
  check("saturated ricl N=16", [](std::string& d) {
    const auto fh = fourier_haar_matrix(16);
    const auto op = build_measurement(fh.u, saturated_scheme(fh.layout.levels()));
    const auto rep = ricl_exact(op, SparsityPattern(fh.layout.levels(), {1, 2, 2, 2}));
    d = fmt(rep.delta);
    return rep.delta <= 1e-10;
  });
  check("qcbp identity", [](std::string& d) {
    QcbpProblem p;
    p.a = ComplexMatrix::Identity(2, 2);
    p.y = ComplexVector::Zero(2);
    p.y[0] = 2.0;
    p.eta = 1.0;
    const auto r = solve_qcbp(p);
    d = fmt(r.objective);
    return r.converged && std::abs(r.xhat[0] - Complex(1.0)) <= 1e-6 && std::abs(r.xhat[1]) <= 1e-6;
  });
  check("matrix round trip", [](std::string& d) {
    const ComplexMatrix m = dft_matrix(8);
    std::stringstream ss;
    write_matrix_binary(ss, m);
    const ComplexMatrix back = read_matrix_binary(ss);
    d = content_hash(m);
    return back == m;
  });
  check("scheme replay", [](std::string& d) {
    const auto lv = LevelStructure::dyadic(32);
    const auto a = draw_scheme(lv, {2, 2, 3, 4, 5}, 1, 7);
    const auto b = draw_scheme(lv, {2, 2, 3, 4, 5}, 1, 7);
    d = join(a.draws.back(), ',');
    return to_json(a) == to_json(b);
  });
  return out;
}

inline void cmd_selftest(const Json& cfg, const RunOptions& opt, CommandResult& res) {
  const auto checks = run_selftest();
  Json out = provenance("selftest", cfg);
  out["checks"] = Json::array();
  std::size_t passed = 0;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
    out["checks"].push_back(Json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    if (c.pass) ++passed;
    else res.errors.push_back("selftest failed: " + c.name);
  }
  if (opt.out_given) {
    OutputDir dir(opt.out, res);
    dir.write_json("selftest.json", out);
  }
  res.headline = "selftest: " + std::to_string(passed) + "/" + std::to_string(checks.size()) + " passed";
}

// ---------------------------------------------------------------------------

inline CommandResult run_command(const std::string& command, const RunOptions& opt) {
  CommandResult res;
  try {
    Json cfg = resolve_config(command, opt.config, res.errors);
    if (!res.errors.empty()) return res;
    if (opt.seed) cfg["seed"] = *opt.seed;
    if (command == "coherence") cmd_coherence(cfg, opt, res);
    else if (command == "certify") cmd_certify(cfg, opt, res);
    else if (command == "recover") cmd_recover(cfg, opt, res);
    else if (command == "allocate") cmd_allocate(cfg, opt, res);
    else if (command == "selftest") cmd_selftest(cfg, opt, res);
  } catch (const Error& e) {
    res.errors.push_back(e.what());
  } catch (const Json::exception& e) {
    res.errors.push_back(std::string("config: ") + e.what());
  } catch (const std::exception& e) {
    res.errors.push_back(e.what());
  }
  return res;
}

}  // namespace ripl_lab::cli
