#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "npf/backward.hpp"
#include "npf/domain.hpp"
#include "npf/forward.hpp"
#include "npf/stats.hpp"

namespace npf {

/// Semilinear parabolic problem with nonlinear Neumann condition
///   du/dt + L u + f(t, x, u, grad u sigma) = 0   in [0,T) x D,
///   du/dn + h(t, x, u) = 0                       on [0,T) x dD (n inward),
///   u(T, .) = g,
/// where L is the generator of dX = b dt + sigma dW.
struct PdeProblem {
  std::string name;
  Domain domain;
  ForwardCoefficients forward;
  BackwardCoefficients backward;
  double horizon = 1.0;

  void validate() const {
    forward.validate();
    backward.validate();
    if (forward.dim != domain.dim()) throw InputError("problem: drift dimension differs from the domain");
    if (!(horizon > 0.0)) throw InputError("problem: horizon must be > 0");
  }
};

struct SimConfig {
  int steps = 100;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 42;
  RegressionConfig regression;
};

struct PointEstimate {
  Vector value;
  Vector std_error;
  std::size_t n_paths = 0;
  double dt = 0.0;
  std::optional<int> penalty;  // empty for the reflected (limit) problem
};

// A point estimate together with the ensemble and backward solution behind it.
struct Evaluation {
  PointEstimate estimate;
  PathBundle paths;
  BackwardSolution solution;
};

/// Runs the forward scheme from (t, x) on [t, T] and solves the BSDE;
/// penalty = n selects the penalized scheme, nullopt the reflected one.
inline Evaluation solve_point(const PdeProblem& problem, double t, const Vector& x, std::optional<int> penalty,
                              const SimConfig& sim) {
  problem.validate();
  if (x.size() != problem.domain.dim()) throw InputError("query point has the wrong dimension");
  if (!(t >= 0.0 && t < problem.horizon)) throw InputError("query time must satisfy 0 <= t < T");
  if (!problem.domain.contains(x, 1e-12)) {
    throw InputError("query point lies outside the closed domain; u and u^n are only compared on D-bar");
  }
  const TimeGrid grid(t, problem.horizon, sim.steps);
  const NoiseBundle noise(sim.seed, sim.n_paths, grid, problem.forward.noise_dim);
  PathBundle paths = penalty ? simulate_penalized(problem.domain, problem.forward, *penalty, grid, x, noise)
                             : simulate_reflected(problem.domain, problem.forward, grid, x, noise);
  BackwardSolution solution = solve_bsde(paths, problem.backward, sim.regression);
  PointEstimate est{solution.y0, solution.y0_stderr, sim.n_paths, grid.dt(), penalty};
  return {std::move(est), std::move(paths), std::move(solution)};
}

// u^n(t, x) = Y^{t,x,n}_t
inline PointEstimate evaluate_un(const PdeProblem& problem, double t, const Vector& x, int n, const SimConfig& sim) {
  if (n < 1) throw InputError("penalty level must be ≥ 1");
  return solve_point(problem, t, x, n, sim).estimate;
}

// u(t, x) = Y^{t,x}_t
inline PointEstimate evaluate_u(const PdeProblem& problem, double t, const Vector& x, const SimConfig& sim) {
  return solve_point(problem, t, x, std::nullopt, sim).estimate;
}

struct SweepReport {
  double t = 0.0;
  Vector x;
  std::vector<int> penalty_levels;
  std::vector<PointEstimate> estimates_un;
  PointEstimate estimate_u;
  std::vector<Vector> gaps;        // |u^n - u|, per component
  std::vector<Vector> gap_stderr;  // sqrt(se_n^2 + se_u^2)
  std::vector<Estimate> bsde_gap;  // mean over paths of sup_i |Y^n_i - Y_i|^2
  std::vector<CouplingStats> forward_gap;
  std::vector<double> mean_sup_Y2;  // sup_i mean_paths |Y^n_i|^2
  double mean_sup_Y2_ref = 0.0;
  bool diverged = false;
};

namespace detail {

inline double sup_mean_square(const BackwardSolution& sol) {
  double worst = 0.0;
  std::vector<double> col(sol.n_paths());
  for (int i = 0; i <= sol.grid().steps(); ++i) {
    for (std::size_t p = 0; p < sol.n_paths(); ++p) col[p] = sol.Y(p, i).squaredNorm();
    worst = std::max(worst, sample_estimate(col).mean);
  }
  return worst;
}

inline Estimate sup_square_gap(const BackwardSolution& a, const BackwardSolution& b) {
  std::vector<double> sup(a.n_paths(), 0.0);
  for (std::size_t p = 0; p < a.n_paths(); ++p) {
    for (int i = 0; i <= a.grid().steps(); ++i) sup[p] = std::max(sup[p], (a.Y(p, i) - b.Y(p, i)).squaredNorm());
  }
  return sample_estimate(sup);
}

}  // namespace detail

/// Evaluates u^n for each penalty level and u once, all from the same seed so
/// the ensembles are pathwise coupled, and reports |u^n - u| together with
/// the pathwise BSDE gap and the forward coupling errors.
inline SweepReport sweep_penalty(const PdeProblem& problem, double t, const Vector& x,
                                 const std::vector<int>& penalty_levels, const SimConfig& sim) {
  for (std::size_t j = 0; j < penalty_levels.size(); ++j) {
    if (penalty_levels[j] < 1) throw InputError("penalty levels must be ≥ 1");
    if (j > 0 && penalty_levels[j] <= penalty_levels[j - 1]) {
      throw InputError("penalty_levels must be strictly increasing");
    }
  }
  SweepReport report;
  report.t = t;
  report.x = x;
  report.penalty_levels = penalty_levels;

  const Evaluation ref = solve_point(problem, t, x, std::nullopt, sim);
  report.estimate_u = ref.estimate;
  report.mean_sup_Y2_ref = detail::sup_mean_square(ref.solution);
  report.diverged = ref.solution.diagnostics.diverged;

  for (int n : penalty_levels) {
    const Evaluation pen = solve_point(problem, t, x, n, sim);
    const Vector gap = (pen.estimate.value - ref.estimate.value).cwiseAbs();
    const Vector se = (pen.estimate.std_error.array().square() + ref.estimate.std_error.array().square()).sqrt();
    report.estimates_un.push_back(pen.estimate);
    report.gaps.push_back(gap);
    report.gap_stderr.push_back(se);
    report.bsde_gap.push_back(detail::sup_square_gap(pen.solution, ref.solution));
    report.forward_gap.push_back(coupling_error(pen.paths, ref.paths));
    report.mean_sup_Y2.push_back(detail::sup_mean_square(pen.solution));
    report.diverged = report.diverged || pen.solution.diagnostics.diverged;
  }
  return report;
}

/// Smooth scalar function u(t, x) with its derivatives, used to build a
/// problem whose solution is known.
struct ManufacturedSolution {
  std::function<double(double, const Vector&)> value;
  std::function<double(double, const Vector&)> time_derivative;
  std::function<Vector(double, const Vector&)> gradient;
  std::function<Matrix(double, const Vector&)> hessian;
};

struct ManufacturedOptions {
  // Optional y/z dependence F(y, z) of the driver (z is the 1 x d' row grad u sigma).
  std::function<double(double, const Matrix&)> driver;
  // Optional y dependence H(y) of the boundary driver.
  std::function<double(double)> boundary;
  // Constants declared for the resulting (f, h, g).
  double mu_f = 0.0;
  double l_f = 0.0;
  double beta = 0.0;
  double growth_const = 0.0;
  std::string name = "manufactured";
};

/// Builds (f, h, g) so that u solves the Neumann problem:
///   f(t,x,y,z) = F(y,z) - F(u, grad u sigma) - du/dt - 1/2 tr(sigma sigma^T Hess u) - <b, grad u>
///   h(t,x,y)   = H(y) - H(u) - <grad u, inward normal>
///   g(x)       = u(T, x)
/// (F and H default to zero).
inline PdeProblem manufactured_problem(const ManufacturedSolution& u, const Domain& domain,
                                       const ForwardCoefficients& forward, double horizon,
                                       const ManufacturedOptions& opts = {}) {
  if (!u.value || !u.time_derivative || !u.gradient || !u.hessian) {
    throw InputError("manufactured solution needs value and all derivatives");
  }
  forward.validate();
  {
    const auto [lo, hi] = domain.bounding_box();
    const Vector probe = domain.project(0.5 * (lo + hi));
    const int d = domain.dim();
    if (u.gradient(horizon, probe).size() != d) throw InputError("manufactured gradient has the wrong shape");
    const Matrix hess = u.hessian(horizon, probe);
    if (hess.rows() != d || hess.cols() != d) throw InputError("manufactured Hessian has the wrong shape");
    if (forward.dim != d) throw InputError("forward coefficients and domain disagree on dimension");
  }

  auto source = [u, forward](double t, const Vector& x) {
    const Matrix sigma = forward.diffusion(x);
    const Matrix a = sigma * sigma.transpose();
    return -u.time_derivative(t, x) - 0.5 * (a.cwiseProduct(u.hessian(t, x))).sum() -
           forward.drift(x).dot(u.gradient(t, x));
  };

  BackwardCoefficients bc;
  bc.m = 1;
  bc.mu_f = opts.mu_f;
  bc.l_f = opts.l_f;
  bc.beta = opts.beta;
  bc.growth_const = opts.growth_const;
  bc.row_structure = true;
  bc.driver = [u, forward, source, F = opts.driver](double t, const Vector& x, const Vector& y, const Matrix& z) {
    double value = source(t, x);
    if (F) {
      const Matrix zu = u.gradient(t, x).transpose() * forward.diffusion(x);
      value += F(y[0], z) - F(u.value(t, x), zu);
    }
    return Vector::Constant(1, value);
  };
  bc.boundary_driver = [u, domain, H = opts.boundary](double t, const Vector& x, const Vector& y) {
    double value = -u.gradient(t, x).dot(domain.inward_normal(x));
    if (H) value += H(y[0]) - H(u.value(t, x));
    return Vector::Constant(1, value);
  };
  bc.terminal = [u, horizon](const Vector& x) { return Vector::Constant(1, u.value(horizon, x)); };

  PdeProblem problem{opts.name, domain, forward, std::move(bc), horizon};
  problem.validate();
  return problem;
}

}  // namespace npf
