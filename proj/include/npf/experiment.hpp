#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "npf/config.hpp"
#include "npf/csv.hpp"
#include "npf/pde.hpp"
#include "npf/validation.hpp"

namespace npf {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kCriteriaFailed = 1, kConfigError = 2, kNumericalFailure = 3 };

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string command;  // forward | solve | sweep | validate
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool dump_paths = false;
};

/// Files written by one run; removed again unless committed.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
    created_dir_ = !std::filesystem::exists(dir_);
    std::filesystem::create_directories(dir_);
  }
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (!committed_) discard();
  }

  std::ofstream open(const std::string& name) {
    const auto path = dir_ / name;
    files_.push_back(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
  }

  void commit() { committed_ = true; }
  const std::vector<std::filesystem::path>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void discard() noexcept {
    std::error_code ec;
    for (const auto& f : files_) std::filesystem::remove(f, ec);
    if (created_dir_ && std::filesystem::is_empty(dir_, ec)) std::filesystem::remove(dir_, ec);
  }

  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
  bool created_dir_ = false;
  bool committed_ = false;
};

namespace detail {

inline std::vector<std::string> point_header(const std::string& prefix, int d) {
  std::vector<std::string> h;
  for (int j = 0; j < d; ++j) h.push_back(prefix + "_" + std::to_string(j));
  return h;
}

inline SimConfig sim_for_query(const ExperimentConfig& cfg, double t) {
  SimConfig sim = validation::sim_for(t, cfg.grid.horizon, cfg.dt(), cfg.mc.n_paths, cfg.mc.seed);
  sim.regression = cfg.regression;
  return sim;
}

inline void require_healthy(const BackwardSolution& sol, const std::string& what) {
  if (sol.diagnostics.diverged || !sol.y0.allFinite() || !sol.y0_stderr.allFinite()) {
    throw NumericalFailure(what + ": backward solver diverged (Picard updates grew or Y is not finite)");
  }
  if (sol.diagnostics.non_converged_steps > 0) {
    std::clog << "npf: note: " << what << ": Picard iteration stopped before tolerance on "
              << sol.diagnostics.non_converged_steps << " of " << sol.diagnostics.steps.size() << " steps\n";
  }
}

inline void write_forward_rows(CsvWriter& csv, int n, const CouplingStats& c, double t, const Vector& x, double dt,
                               const ExperimentConfig& cfg) {
  csv.field(n)
      .field(c.sup_X.mean)
      .field(c.sup_X.std_error)
      .field(c.sup_K.mean)
      .field(c.sup_K.std_error)
      .field(c.sup_k.mean)
      .field(c.sup_k.std_error)
      .field(t);
  for (Eigen::Index j = 0; j < x.size(); ++j) csv.field(x[j]);
  csv.field(dt).field(static_cast<std::uint64_t>(cfg.mc.n_paths)).field(cfg.mc.seed).end_row();
}

inline std::vector<std::string> forward_header(int d) {
  std::vector<std::string> h{"n", "mean_sup_X", "stderr_X", "mean_sup_K", "stderr_K", "mean_sup_k", "stderr_k", "t"};
  for (auto& s : point_header("x", d)) h.push_back(s);
  for (const char* s : {"dt", "n_paths", "seed"}) h.emplace_back(s);
  return h;
}

inline void run_forward(const ExperimentConfig& cfg, const problems::BuiltinProblem& b, OutputSet& out,
                        bool dump_paths) {
  const PdeProblem& pb = b.problem;
  const problems::Query& q = b.default_queries.front();
  const SimConfig sim = sim_for_query(cfg, q.t);
  const TimeGrid grid(q.t, pb.horizon, sim.steps);
  const NoiseBundle noise(sim.seed, sim.n_paths, grid, pb.forward.noise_dim);
  const PathBundle ref = simulate_reflected(pb.domain, pb.forward, grid, q.x, noise);
  if (dump_paths) {
    auto f = out.open("paths_reflected.csv");
    write_paths_csv(ref, f);
  }
  auto f = out.open("forward_convergence.csv");
  CsvWriter csv(f);
  csv.header(forward_header(pb.domain.dim()));
  for (int n : cfg.penalty_levels) {
    const PathBundle pen = simulate_penalized(pb.domain, pb.forward, n, grid, q.x, noise);
    if (dump_paths) {
      auto pf = out.open("paths_n" + std::to_string(n) + ".csv");
      write_paths_csv(pen, pf);
    }
    const CouplingStats c = coupling_error(pen, ref);
    if (!std::isfinite(c.sup_X.mean)) throw NumericalFailure("forward: non-finite penalized paths at n = " + std::to_string(n));
    write_forward_rows(csv, n, c, q.t, q.x, grid.dt(), cfg);
  }
}

inline void run_solve(const ExperimentConfig& cfg, const problems::BuiltinProblem& b, OutputSet& out,
                      bool dump_paths) {
  const PdeProblem& pb = b.problem;
  const int d = pb.domain.dim();
  auto f = out.open("solve.csv");
  CsvWriter csv(f);
  std::vector<std::string> h{"t"};
  for (auto& s : point_header("x", d)) h.push_back(s);
  for (const char* s : {"scheme", "n", "value", "stderr", "exact", "dt", "n_paths", "seed"}) h.emplace_back(s);
  csv.header(h);
  int qi = 0;
  for (const auto& q : b.default_queries) {
    const SimConfig sim = sim_for_query(cfg, q.t);
    std::vector<std::optional<int>> levels{std::nullopt};
    for (int n : cfg.penalty_levels) levels.emplace_back(n);
    for (const auto& level : levels) {
      const Evaluation ev = solve_point(pb, q.t, q.x, level, sim);
      const std::string tag = level ? "n" + std::to_string(*level) : "reflected";
      require_healthy(ev.solution, "solve " + tag);
      if (dump_paths) {
        auto pf = out.open("paths_q" + std::to_string(qi) + "_" + tag + ".csv");
        write_paths_csv(ev.paths, pf);
        auto df = out.open("bsde_q" + std::to_string(qi) + "_" + tag + ".csv");
        write_diagnostics_csv(ev.solution, df);
      }
      csv.field(q.t);
      for (int j = 0; j < d; ++j) csv.field(q.x[j]);
      csv.field(level ? "penalized" : "reflected").field(level ? *level : 0);
      csv.field(ev.estimate.value[0]).field(ev.estimate.std_error[0]);
      if (b.exact) {
        csv.field(b.exact(q.t, q.x));
      } else {
        csv.field("");
      }
      csv.field(ev.estimate.dt).field(static_cast<std::uint64_t>(sim.n_paths)).field(sim.seed).end_row();
    }
    ++qi;
  }
}

inline void run_sweep(const ExperimentConfig& cfg, const problems::BuiltinProblem& b, OutputSet& out) {
  const PdeProblem& pb = b.problem;
  const int d = pb.domain.dim();
  auto sf = out.open("pde_sweep.csv");
  auto ff = out.open("forward_convergence.csv");
  CsvWriter sweep_csv(sf), fwd_csv(ff);
  std::vector<std::string> h{"t"};
  for (auto& s : point_header("x", d)) h.push_back(s);
  for (const char* s : {"n", "u_n", "stderr", "u_ref", "stderr_ref", "gap", "gap_stderr", "bsde_gap",
                        "bsde_gap_stderr", "dt", "n_paths", "seed"}) {
    h.emplace_back(s);
  }
  sweep_csv.header(h);
  fwd_csv.header(forward_header(d));
  for (const auto& q : b.default_queries) {
    const SimConfig sim = sim_for_query(cfg, q.t);
    const SweepReport rep = sweep_penalty(pb, q.t, q.x, cfg.penalty_levels, sim);
    if (rep.diverged) throw NumericalFailure("sweep: backward solver diverged");
    for (std::size_t j = 0; j < rep.penalty_levels.size(); ++j) {
      const auto& e = rep.estimates_un[j];
      if (!e.value.allFinite() || !rep.estimate_u.value.allFinite()) throw NumericalFailure("sweep: non-finite estimate");
      sweep_csv.field(q.t);
      for (int k = 0; k < d; ++k) sweep_csv.field(q.x[k]);
      sweep_csv.field(rep.penalty_levels[j])
          .field(e.value[0])
          .field(e.std_error[0])
          .field(rep.estimate_u.value[0])
          .field(rep.estimate_u.std_error[0])
          .field(rep.gaps[j][0])
          .field(rep.gap_stderr[j][0])
          .field(rep.bsde_gap[j].mean)
          .field(rep.bsde_gap[j].std_error)
          .field(e.dt)
          .field(static_cast<std::uint64_t>(sim.n_paths))
          .field(sim.seed)
          .end_row();
      write_forward_rows(fwd_csv, rep.penalty_levels[j], rep.forward_gap[j], q.t, q.x, e.dt, cfg);
    }
  }
}

inline std::string compiler_id() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

inline void write_manifest(OutputSet& out, const RunOptions& opts, const nlohmann::json& resolved) {
  nlohmann::json m;
  m["command"] = opts.command;
  m["config"] = resolved;
  m["seed"] = resolved.contains("mc") ? resolved["mc"]["seed"] : nlohmann::json(opts.seed.value_or(42));
  m["dump_paths"] = opts.dump_paths;
  m["versions"] = {{"npf", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"compiler", compiler_id()},
                   {"cxx_standard", __cplusplus}};
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : out.files()) files.push_back(f.filename().string());
  m["files"] = files;
  auto f = out.open("manifest.json");
  f << m.dump(2) << '\n';
}

}  // namespace detail

/// Runs one experiment. Returns the process exit code; on failure every file
/// this run created is removed again.
inline int run_experiment(const RunOptions& opts, const std::optional<std::string>& config_text,
                          std::ostream& log = std::cerr) {
  ExperimentConfig cfg;
  try {
    if (opts.command == "validate") {
      cfg.problem_name = "validate";
      if (config_text) cfg = parse_config(*config_text);
    } else {
      if (!config_text) throw ConfigError("--config is required for '" + opts.command + "'");
      cfg = parse_config(*config_text);
    }
    if (opts.seed) cfg.mc.seed = *opts.seed;
    if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  } catch (const InputError& e) {
    log << "npf: config error: " << e.what() << '\n';
    return kConfigError;
  }

  std::optional<OutputSet> out;
  try {
    out.emplace(cfg.output_dir);
  } catch (const std::exception& e) {
    log << "npf: config error: cannot create output directory: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    nlohmann::json resolved;
    if (opts.command == "validate") {
      const auto results = validation::run_suite(cfg.mc.seed, [&](const validation::CriterionResult& r) {
        log << "criterion " << r.id << " " << (r.passed() ? "PASS" : "FAIL") << " " << r.title << " ("
            << format_double(r.seconds) << " s)\n";
      });
      {
        auto f = out->open("validate.csv");
        validation::write_results_csv(results, f);
      }
      {
        auto f = out->open("validate_timing.csv");
        validation::write_timing_csv(results, f);
      }
      resolved = {{"suite", "acceptance"}, {"mc", {{"seed", cfg.mc.seed}}}, {"output_dir", cfg.output_dir}};
      detail::write_manifest(*out, opts, resolved);
      out->commit();
      bool all = true;
      for (const auto& r : results) all = all && r.passed();
      return all ? kOk : kCriteriaFailed;
    }

    const problems::BuiltinProblem b = resolve_problem(cfg);
    if (opts.command == "forward") {
      detail::run_forward(cfg, b, *out, opts.dump_paths);
    } else if (opts.command == "solve") {
      detail::run_solve(cfg, b, *out, opts.dump_paths);
    } else if (opts.command == "sweep") {
      detail::run_sweep(cfg, b, *out);
    } else {
      throw ConfigError("unknown command '" + opts.command + "'");
    }
    detail::write_manifest(*out, opts, to_json(cfg));
    out->commit();
    return kOk;
  } catch (const ConfigError& e) {
    log << "npf: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InputError& e) {
    log << "npf: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalFailure& e) {
    log << "npf: numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    log << "npf: numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace npf
