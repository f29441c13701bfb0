#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "npf/csv.hpp"
#include "npf/fd_reference.hpp"
#include "npf/pde.hpp"
#include "npf/problems.hpp"

namespace npf::validation {

// One measured quantity against its bound; value <= bound passes.
struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed() const { return value <= bound; }
};

struct CriterionResult {
  int id = 0;
  std::string title;
  double budget_seconds = 0.0;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed()) return false;
    }
    return !checks.empty();
  }
};

// Checks that a_{j+1} <= a_j + 2 sqrt(s_j^2 + s_{j+1}^2); one check per pair.
inline void add_nonincreasing(std::vector<Check>& checks, const std::string& name, const std::vector<Estimate>& seq) {
  for (std::size_t j = 0; j + 1 < seq.size(); ++j) {
    const double slack = 2.0 * std::hypot(seq[j].std_error, seq[j + 1].std_error);
    checks.push_back({name + "[" + std::to_string(j + 1) + "]<=prev+2se", seq[j + 1].mean, seq[j].mean + slack});
  }
}

inline CriterionResult geometry_invariants(std::uint64_t seed) {
  CriterionResult r{1, "geometry invariants", 5.0, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-2.0, 3.0);
  constexpr int samples = 100000;
  for (int d = 1; d <= 3; ++d) {
    std::vector<std::pair<std::string, Domain>> domains;
    if (d == 1) domains.emplace_back("interval", Domain::interval(0.0, 1.0));
    domains.emplace_back("ball", Domain::ball(Vector::Constant(d, 0.5), 1.0));
    domains.emplace_back("box", Domain::box(Vector::Zero(d), Vector::LinSpaced(d, 1.0, 2.0)));
    for (const auto& [name, dom] : domains) {
      double inner = -1.0, delta_err = 0.0, idem = 0.0;
      Vector x(d);
      for (int s = 0; s < samples; ++s) {
        for (int j = 0; j < d; ++j) x[j] = coord(rng);
        const Vector p = dom.project(x);
        const Vector delta = dom.penalty_gradient(x);
        inner = std::max(inner, dom.inward_normal(x).dot(delta));
        delta_err = std::max(delta_err, (delta - 2.0 * (x - p)).cwiseAbs().maxCoeff());
        idem = std::max(idem, (dom.project(p) - p).cwiseAbs().maxCoeff());
      }
      const std::string tag = name + "_d" + std::to_string(d);
      r.checks.push_back({tag + ":max<grad_l,delta>", inner, 1e-12});
      r.checks.push_back({tag + ":max|delta-2(x-pi)|", delta_err, 1e-12});
      r.checks.push_back({tag + ":max|pi(pi(x))-pi(x)|", idem, 1e-12});
    }
  }
  return r;
}

inline CriterionResult forced_boundary(std::uint64_t seed) {
  CriterionResult r{2, "forced-boundary forward check", 1.0, {}};
  const Domain dom = Domain::interval(0.0, 1.0);
  const ForwardCoefficients fc = ForwardCoefficients::constant(Vector::Ones(1), Matrix::Zero(1, 1));
  const TimeGrid grid(0.0, 1.0, 1000);
  const NoiseBundle noise(seed, 4, grid, 1);
  const Vector x0 = Vector::Ones(1);
  const PathBundle ref = simulate_reflected(dom, fc, grid, x0, noise);
  const PathBundle pen = simulate_penalized(dom, fc, 100, grid, x0, noise);
  double x_dev = 0.0, k_err = 0.0, pen_err = 0.0;
  for (std::size_t p = 0; p < noise.n_paths(); ++p) {
    for (int i = 0; i <= grid.steps(); ++i) x_dev = std::max(x_dev, std::abs(ref.X(p, i)[0] - 1.0));
    k_err = std::max(k_err, std::abs(ref.k(p, grid.steps()) - 1.0));
    pen_err = std::max(pen_err, std::abs(pen.X(p, grid.steps())[0] - 1.005));
  }
  r.checks.push_back({"reflected:max|X-1|", x_dev, 0.0});
  r.checks.push_back({"reflected:|k_T-1|", k_err, 1e-9});
  r.checks.push_back({"penalized_n100:|X_T-1.005|", pen_err, 1e-6});
  return r;
}

inline CriterionResult coupled_forward(std::uint64_t seed) {
  CriterionResult r{3, "coupled pathwise convergence", 60.0, {}};
  const Domain dom = Domain::interval(0.0, 1.0);
  const ForwardCoefficients fc = problems::brownian_1d();
  const TimeGrid grid(0.0, 1.0, 1000);
  const NoiseBundle noise(seed, 2000, grid, 1);
  const Vector x0 = Vector::Constant(1, 0.5);
  const PathBundle ref = simulate_reflected(dom, fc, grid, x0, noise);
  std::vector<Estimate> sx, sK, sk;
  for (int n : {4, 16, 64, 256}) {
    const CouplingStats c = coupling_error(simulate_penalized(dom, fc, n, grid, x0, noise), ref);
    sx.push_back(c.sup_X);
    sK.push_back(c.sup_K);
    sk.push_back(c.sup_k);
  }
  add_nonincreasing(r.checks, "mean_sup_X", sx);
  add_nonincreasing(r.checks, "mean_sup_K", sK);
  add_nonincreasing(r.checks, "mean_sup_k", sk);
  r.checks.push_back({"mean_sup_X(256)/mean_sup_X(4)", sx.back().mean / sx.front().mean, 0.25});
  return r;
}

inline CriterionResult linear_bsde(std::uint64_t seed) {
  CriterionResult r{4, "BSDE linear sanity", 10.0, {}};
  const auto b = problems::linear_decay(1.0);
  const TimeGrid grid(0.0, 1.0, 100);
  const NoiseBundle noise(seed, 5000, grid, 1);
  const PathBundle paths = simulate_reflected(b.problem.domain, b.problem.forward, grid, problems::point(0.5), noise);
  const BackwardSolution sol = solve_bsde(paths, b.problem.backward, RegressionConfig{});
  r.checks.push_back({"|y0-exp(-1)|", std::abs(sol.y0[0] - std::exp(-1.0)), 5e-3});
  r.checks.push_back({"martingale_residual", martingale_residual(sol, paths, b.problem.backward), 5.0 * grid.dt()});
  return r;
}

inline SimConfig sim_for(double t, double horizon, double dt, std::size_t n_paths, std::uint64_t seed) {
  SimConfig sim;
  sim.steps = std::max(1, static_cast<int>(std::lround((horizon - t) / dt)));
  sim.n_paths = n_paths;
  sim.seed = seed;
  return sim;
}

inline CriterionResult neumann_heat(std::uint64_t seed) {
  using std::numbers::pi;
  CriterionResult r{5, "Neumann heat equation", 120.0, {}};
  const double T = 0.25;
  const auto b = problems::heat_neumann(T);
  const Vector x = problems::point(0.25);
  const double exact = b.exact(0.0, x);
  const auto fd = reference::crank_nicolson(*b.fd, 0.0, 400, 400);
  const double fd_value = reference::interpolate(fd, 0.0, 1.0, 0.25);
  r.checks.push_back({"|CN400-closed_form|", std::abs(fd_value - exact), 1e-4});
  const PointEstimate u = evaluate_u(b.problem, 0.0, x, sim_for(0.0, T, 1e-3, 20000, seed));
  r.checks.push_back({"|u-0.2059|", std::abs(u.value[0] - exact), std::max(3.0 * u.std_error[0], 0.02 * exact)});
  return r;
}

inline CriterionResult manufactured_nonlinear(std::uint64_t seed) {
  CriterionResult r{6, "nonlinear boundary + gradient driver", 180.0, {}};
  const double T = 0.5;
  const auto b = problems::manufactured_full(T);
  int q = 0;
  for (const auto& query : b.default_queries) {
    const PointEstimate u = evaluate_u(b.problem, query.t, query.x, sim_for(query.t, T, 1e-3, 20000, seed));
    const double exact = b.exact(query.t, query.x);
    r.checks.push_back({"q" + std::to_string(q++) + ":|u-u_exact|", std::abs(u.value[0] - exact),
                        std::max(3.0 * u.std_error[0], 0.05 * std::abs(exact))});
  }
  return r;
}

/// Criteria 7 and 8 share one sweep.
inline std::pair<CriterionResult, CriterionResult> heat_sweep(std::uint64_t seed) {
  CriterionResult r7{7, "penalty sweep (PDE level)", 240.0, {}};
  CriterionResult r8{8, "BSDE convergence", 0.0, {}};
  const double T = 0.25;
  const auto b = problems::heat_neumann(T);
  const SweepReport rep =
      sweep_penalty(b.problem, 0.0, problems::point(0.25), {4, 16, 64, 256}, sim_for(0.0, T, 1e-3, 20000, seed));
  std::vector<Estimate> gaps;
  for (std::size_t j = 0; j < rep.gaps.size(); ++j) gaps.push_back({rep.gaps[j][0], rep.gap_stderr[j][0]});
  add_nonincreasing(r7.checks, "gap", gaps);
  r7.checks.push_back({"final_gap", gaps.back().mean, std::max(3.0 * gaps.back().std_error, 0.01)});
  add_nonincreasing(r8.checks, "mean_sup|Yn-Y|^2", rep.bsde_gap);
  return {r7, r8};
}

inline CriterionResult assumption_probe(std::uint64_t seed) {
  CriterionResult r{10, "assumption probe", 5.0, {}};
  for (const auto& name : problems::builtin_names()) {
    const auto b = problems::make_builtin(name, 1.0);
    ProbeOptions opts;
    opts.t_max = b.problem.horizon;
    opts.noise_dim = b.problem.forward.noise_dim;
    const AssumptionReport rep = probe_assumptions(b.problem.backward, b.problem.domain, 10000, seed, opts);
    r.checks.push_back({name + ":violations", static_cast<double>(rep.violations.size()), 0.0});
  }
  return r;
}

/// Criteria 1-8 and 10; criterion 9 compares two runs of this suite.
inline std::vector<CriterionResult> run_suite(std::uint64_t seed,
                                              const std::function<void(const CriterionResult&)>& progress = {}) {
  using clock = std::chrono::steady_clock;
  std::vector<CriterionResult> out;
  auto timed = [&](auto&& fn) {
    const auto start = clock::now();
    auto result = fn();
    const double secs = std::chrono::duration<double>(clock::now() - start).count();
    return std::pair{std::move(result), secs};
  };
  auto push = [&](CriterionResult r, double secs) {
    r.seconds = secs;
    if (progress) progress(r);
    out.push_back(std::move(r));
  };
  {
    auto [r, s] = timed([&] { return geometry_invariants(seed); });
    push(std::move(r), s);
  }
  {
    auto [r, s] = timed([&] { return forced_boundary(seed); });
    push(std::move(r), s);
  }
  {
    auto [r, s] = timed([&] { return coupled_forward(seed); });
    push(std::move(r), s);
  }
  {
    auto [r, s] = timed([&] { return linear_bsde(seed); });
    push(std::move(r), s);
  }
  {
    auto [r, s] = timed([&] { return neumann_heat(seed); });
    push(std::move(r), s);
  }
  {
    auto [r, s] = timed([&] { return manufactured_nonlinear(seed); });
    push(std::move(r), s);
  }
  {
    auto [rr, s] = timed([&] { return heat_sweep(seed); });
    push(std::move(rr.first), s);
    push(std::move(rr.second), 0.0);
  }
  {
    auto [r, s] = timed([&] { return assumption_probe(seed); });
    push(std::move(r), s);
  }
  return out;
}

// Deterministic part of the report: criterion, check, value, bound, passed.
inline void write_results_csv(const std::vector<CriterionResult>& results, std::ostream& out) {
  CsvWriter csv(out);
  csv.header({"criterion", "check", "value", "bound", "passed"});
  for (const auto& r : results) {
    for (const auto& c : r.checks) {
      csv.field(r.id).field(c.name).field(c.value).field(c.bound).field(c.passed() ? 1 : 0).end_row();
    }
  }
}

// Wall-clock part: criterion, title, passed, seconds, budget_seconds.
inline void write_timing_csv(const std::vector<CriterionResult>& results, std::ostream& out) {
  CsvWriter csv(out);
  csv.header({"criterion", "title", "passed", "seconds", "budget_seconds"});
  for (const auto& r : results) {
    csv.field(r.id).field(r.title).field(r.passed() ? 1 : 0).field(r.seconds).field(r.budget_seconds).end_row();
  }
}

}  // namespace npf::validation
