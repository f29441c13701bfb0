#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "npf/csv.hpp"
#include "npf/domain.hpp"
#include "npf/forward.hpp"
#include "npf/parallel.hpp"
#include "npf/regression.hpp"
#include "npf/stats.hpp"

namespace npf {

/// Driver f(t, x, y, z), boundary driver h(t, x, y) and terminal condition
/// g(x) of the generalized BSDE
///   Y_s = g(X_T) + int_s^T f(r, X, Y, Z) dr + int_s^T h(r, X, Y) dk_r - int_s^T Z dW,
/// together with the constants they are declared to satisfy:
///   <y - y', f(y) - f(y')> <= mu_f |y - y'|^2,   |f(z) - f(z')| <= l_f |z - z'|,
///   <y - y', h(y) - h(y')> <= beta |y - y'|^2,
///   |f(t,x,y,0)|, |h(t,x,y)| <= C (1 + |y|),     |g(x)| <= C (1 + |x|).
struct BackwardCoefficients {
  using Driver = std::function<Vector(double, const Vector&, const Vector&, const Matrix&)>;
  using BoundaryDriver = std::function<Vector(double, const Vector&, const Vector&)>;
  using Terminal = std::function<Vector(const Vector&)>;

  Driver driver;
  BoundaryDriver boundary_driver;
  Terminal terminal;
  int m = 1;
  double mu_f = 0.0;
  double l_f = 0.0;
  double beta = 0.0;
  double growth_const = 0.0;
  bool row_structure = true;  // f_i depends on z only through row i

  void validate() const {
    if (!driver || !boundary_driver || !terminal) throw InputError("backward coefficients need f, h and g");
    if (m < 1) throw InputError("backward system size m must be ≥ 1");
    // beta = 0 is accepted for boundary drivers that do not depend on y.
    if (beta > 0.0) throw InputError("boundary monotonicity constant beta must be ≤ 0");
    if (l_f < 0.0 || growth_const < 0.0) throw InputError("l_f and growth constant must be ≥ 0");
  }
};

struct RegressionConfig {
  int basis_degree = 3;
  double ridge = 1e-8;
  int picard_iters = 3;
  double picard_tol = 1e-10;
  std::optional<double> clamp_bound;

  void validate() const {
    if (basis_degree < 0) throw InputError("regression.basis_degree must be ≥ 0");
    if (!(ridge >= 0.0)) throw InputError("regression.ridge must be ≥ 0");
    if (picard_iters < 1) throw InputError("regression.picard_iters must be ≥ 1");
    if (!(picard_tol > 0.0)) throw InputError("regression.picard_tol must be > 0");
    if (clamp_bound && !(*clamp_bound > 0.0)) throw InputError("regression.clamp_bound must be > 0");
  }
};

// Regression model of one backward step.
struct StepModel {
  PolynomialBasis basis;
  Matrix continuation;   // n_basis x m, estimates E[Y_{i+1} | X_i]
  Matrix z_coefficients; // n_basis x (m * d'), column-major vec of Z
  double ridge_used = 0.0;
};

struct StepDiagnostics {
  double time = 0.0;
  double picard_residual = 0.0;  // max over paths of the last Picard update
  int picard_iterations = 0;
  bool picard_converged = true;
  bool condition_warning = false;
  double mean_Y = 0.0;
  double mean_abs_Z = 0.0;
};

struct BackwardDiagnostics {
  std::vector<StepDiagnostics> steps;
  std::size_t non_converged_steps = 0;
  std::size_t condition_warnings = 0;
  bool diverged = false;   // Picard updates grew, or Y became non-finite
};

class BackwardSolution {
 public:
  BackwardSolution(TimeGrid grid, std::size_t n_paths, int m, int noise_dim)
      : grid_(grid),
        n_paths_(n_paths),
        m_(m),
        noise_dim_(noise_dim),
        Y_(n_paths * (grid.steps() + 1) * m, 0.0),
        Z_(n_paths * grid.steps() * m * noise_dim, 0.0),
        models(grid.steps()) {
    diagnostics.steps.resize(grid.steps());
  }

  const TimeGrid& grid() const { return grid_; }
  std::size_t n_paths() const { return n_paths_; }
  int m() const { return m_; }
  int noise_dim() const { return noise_dim_; }

  Eigen::Map<const Vector> Y(std::size_t p, int i) const { return {&Y_[y_offset(p, i)], m_}; }
  Eigen::Map<Vector> Y(std::size_t p, int i) { return {&Y_[y_offset(p, i)], m_}; }
  Eigen::Map<const Matrix> Z(std::size_t p, int i) const { return {&Z_[z_offset(p, i)], m_, noise_dim_}; }
  Eigen::Map<Matrix> Z(std::size_t p, int i) { return {&Z_[z_offset(p, i)], m_, noise_dim_}; }

  // Regression estimate of E[Y_{i+1} | X_i = x].
  Vector continuation(int i, const Vector& x) const {
    const auto& model = models.at(static_cast<std::size_t>(i));
    return model.continuation.transpose() * model.basis.evaluate(x);
  }

  Vector y0;         // ensemble mean of Y at t0
  Vector y0_stderr;  // standard error of the pathwise estimator of y0
  std::vector<StepModel> models;
  BackwardDiagnostics diagnostics;

 private:
  std::size_t y_offset(std::size_t p, int i) const {
    return (p * static_cast<std::size_t>(grid_.steps() + 1) + static_cast<std::size_t>(i)) * m_;
  }
  std::size_t z_offset(std::size_t p, int i) const {
    return (p * static_cast<std::size_t>(grid_.steps()) + static_cast<std::size_t>(i)) * m_ * noise_dim_;
  }

  TimeGrid grid_;
  std::size_t n_paths_;
  int m_;
  int noise_dim_;
  std::vector<double> Y_;
  std::vector<double> Z_;
};

namespace detail {

// Regression of each target column on the basis; columns whose entries are
// all bitwise equal are fitted exactly by the constant basis function.
inline RegressionResult fit_columns(const Matrix& features, const Matrix& targets, double ridge) {
  const Eigen::Index q = targets.cols();
  std::vector<Eigen::Index> varying;
  Matrix coeffs = Matrix::Zero(features.cols(), q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const double first = targets(0, c);
    if ((targets.col(c).array() == first).all()) {
      coeffs(0, c) = first;
    } else {
      varying.push_back(c);
    }
  }
  RegressionResult result;
  result.ridge_used = ridge;
  if (!varying.empty()) {
    Matrix sub(targets.rows(), static_cast<Eigen::Index>(varying.size()));
    for (std::size_t j = 0; j < varying.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = targets.col(varying[j]);
    result = regress(features, sub, ridge);
    for (std::size_t j = 0; j < varying.size(); ++j) {
      coeffs.col(varying[j]) = result.coefficients.col(static_cast<Eigen::Index>(j));
    }
  }
  result.coefficients = std::move(coeffs);
  return result;
}

inline double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Least-squares regression Monte Carlo for the generalized BSDE on a path
/// ensemble (penalized or reflected alike). Backward over i = steps-1 .. 0:
///   C_i = E_i[Y_{i+1}]                         (regression on X_i)
///   Z_i = E_i[(Y_{i+1} - C_i) dW_i^T] / dt
///   Y_i = C_i + f(t_i, X_i, Y_i, Z_i) dt + h(t_i, X_i, Y_i) dk_i   (Picard)
/// with dk_i = k_{i+1} - k_i taken from the bundle.
inline BackwardSolution solve_bsde(const PathBundle& paths, const BackwardCoefficients& coeffs,
                                   const RegressionConfig& reg) {
  coeffs.validate();
  reg.validate();

  const TimeGrid& grid = paths.grid();
  const std::size_t N = paths.n_paths();
  const int m = coeffs.m;
  const int dprime = paths.noise().noise_dim();
  const int d = paths.dim();
  const double dt = grid.dt();
  const int steps = grid.steps();

  BackwardSolution sol(grid, N, m, dprime);

  // Pathwise accumulation of int f dr + int h dk - int Z dW, for the error bar.
  Matrix pathwise = Matrix::Zero(N, m);

  parallel_for(N, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const Vector g = coeffs.terminal(Vector(paths.X(p, steps)));
      if (g.size() != m) throw InputError("terminal condition returned the wrong size");
      sol.Y(p, steps) = g;
    }
  });

  Matrix points(static_cast<Eigen::Index>(N), d);
  RowMatrix dW(static_cast<Eigen::Index>(N), dprime);
  Matrix next_Y(static_cast<Eigen::Index>(N), m);

  for (int i = steps - 1; i >= 0; --i) {
    const double t = grid.node(i);
    for (std::size_t p = 0; p < N; ++p) {
      points.row(static_cast<Eigen::Index>(p)) = paths.X(p, i).transpose();
      next_Y.row(static_cast<Eigen::Index>(p)) = sol.Y(p, i + 1).transpose();
    }

    StepModel& model = sol.models[static_cast<std::size_t>(i)];
    model.basis = PolynomialBasis::standardized(points, reg.basis_degree);
    const int nb = model.basis.size();
    RowMatrix features(static_cast<Eigen::Index>(N), nb);
    parallel_for(N, [&](std::size_t begin, std::size_t end) {
      for (std::size_t p = begin; p < end; ++p) {
        model.basis.evaluate(paths.X(p, i), Eigen::Map<Vector>(features.data() + p * nb, nb));
        paths.noise().increment(p, i, Eigen::Map<Vector>(dW.data() + p * dprime, dprime));
      }
    });

    const RegressionResult cont = detail::fit_columns(features, next_Y, reg.ridge);
    model.continuation = cont.coefficients;
    Matrix C = features * model.continuation;
    for (Eigen::Index c = 0; c < m; ++c) {
      // Constant columns are reproduced bit-exactly.
      if (model.continuation.col(c).tail(nb - 1).isZero(0.0)) C.col(c).setConstant(model.continuation(0, c));
    }
    if (reg.clamp_bound) C = C.cwiseMax(-*reg.clamp_bound).cwiseMin(*reg.clamp_bound);

    Matrix z_targets(static_cast<Eigen::Index>(N), m * dprime);
    for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(N); ++p) {
      for (int col = 0; col < dprime; ++col) {
        for (int r = 0; r < m; ++r) {
          z_targets(p, r + m * col) = (next_Y(p, r) - C(p, r)) * dW(p, col) / dt;
        }
      }
    }
    const RegressionResult zfit = detail::fit_columns(features, z_targets, reg.ridge);
    model.z_coefficients = zfit.coefficients;
    model.ridge_used = std::max(cont.ridge_used, zfit.ridge_used);
    Matrix Zhat = features * model.z_coefficients;
    for (Eigen::Index c = 0; c < Zhat.cols(); ++c) {
      if (model.z_coefficients.col(c).tail(nb - 1).isZero(0.0)) Zhat.col(c).setConstant(model.z_coefficients(0, c));
    }

    std::vector<double> residual(N, 0.0), first_residual(N, 0.0);
    std::vector<int> iterations(N, 0);
    parallel_for(N, [&](std::size_t begin, std::size_t end) {
      Matrix z(m, dprime);
      for (std::size_t p = begin; p < end; ++p) {
        const auto row = static_cast<Eigen::Index>(p);
        const Vector x = paths.X(p, i);
        const double dk = paths.k(p, i + 1) - paths.k(p, i);
        for (int col = 0; col < dprime; ++col) {
          for (int r = 0; r < m; ++r) z(r, col) = Zhat(row, r + m * col);
        }
        const Vector c = C.row(row).transpose();
        Vector y = c;
        Vector f_val, h_val = Vector::Zero(m);
        int it = 0;
        double res = 0.0;
        for (; it < reg.picard_iters;) {
          f_val = coeffs.driver(t, x, y, z);
          if (dk != 0.0) h_val = coeffs.boundary_driver(t, x, y);
          Vector next = c + f_val * dt;
          if (dk != 0.0) next += h_val * dk;
          res = detail::max_abs(next - y);
          if (it == 0) first_residual[p] = res;
          y = std::move(next);
          ++it;
          if (res <= reg.picard_tol * std::max(1.0, detail::max_abs(y))) break;
        }
        // Driver terms at the accepted Y, for the pathwise estimator.
        f_val = coeffs.driver(t, x, y, z);
        Vector incr = f_val * dt - z * dW.row(row).transpose();
        if (dk != 0.0) incr += coeffs.boundary_driver(t, x, y) * dk;
        pathwise.row(row) += incr.transpose();
        sol.Y(p, i) = y;
        sol.Z(p, i) = z;
        residual[p] = res;
        iterations[p] = it;
      }
    });

    StepDiagnostics& diag = sol.diagnostics.steps[static_cast<std::size_t>(i)];
    diag.time = t;
    diag.condition_warning = cont.condition_warning || zfit.condition_warning;
    bool finite = true;
    std::vector<double> ys(N), zs(N);
    for (std::size_t p = 0; p < N; ++p) {
      diag.picard_residual = std::max(diag.picard_residual, residual[p]);
      diag.picard_iterations = std::max(diag.picard_iterations, iterations[p]);
      const auto y = sol.Y(p, i);
      finite = finite && y.allFinite();
      if (residual[p] > reg.picard_tol * std::max(1.0, y.cwiseAbs().maxCoeff())) diag.picard_converged = false;
      if (iterations[p] > 1 && residual[p] > first_residual[p]) sol.diagnostics.diverged = true;
      ys[p] = y.mean();
      zs[p] = sol.Z(p, i).cwiseAbs().mean();
    }
    if (!finite) sol.diagnostics.diverged = true;
    diag.mean_Y = sample_estimate(ys).mean;
    diag.mean_abs_Z = sample_estimate(zs).mean;
    if (!diag.picard_converged) ++sol.diagnostics.non_converged_steps;
    if (diag.condition_warning) ++sol.diagnostics.condition_warnings;
  }

  sol.y0.resize(m);
  sol.y0_stderr.resize(m);
  std::vector<double> column(N);
  for (int r = 0; r < m; ++r) {
    for (std::size_t p = 0; p < N; ++p) column[p] = sol.Y(p, 0)[r];
    sol.y0[r] = sample_estimate(column).mean;
    for (std::size_t p = 0; p < N; ++p) column[p] = sol.Y(p, steps)[r] + pathwise(static_cast<Eigen::Index>(p), r);
    sol.y0_stderr[r] = sample_estimate(column).std_error;
  }
  return sol;
}

/// max_i | mean_paths [Y_{i+1} - Y_i + f dt + h dk - Z dW] |, the largest
/// per-step drift of the discrete martingale part.
inline double martingale_residual(const BackwardSolution& sol, const PathBundle& paths,
                                  const BackwardCoefficients& coeffs) {
  if (sol.n_paths() != paths.n_paths() || !(sol.grid() == paths.grid())) {
    throw InputError("martingale_residual: solution does not belong to this path bundle");
  }
  const std::size_t N = paths.n_paths();
  const double dt = paths.grid().dt();
  double worst = 0.0;
  std::vector<double> column(N);
  Matrix terms(static_cast<Eigen::Index>(N), sol.m());
  for (int i = 0; i < paths.steps(); ++i) {
    const double t = paths.grid().node(i);
    parallel_for(N, [&](std::size_t begin, std::size_t end) {
      Vector dw(paths.noise().noise_dim());
      for (std::size_t p = begin; p < end; ++p) {
        const Vector x = paths.X(p, i);
        const Vector y = sol.Y(p, i);
        const Matrix z = sol.Z(p, i);
        const double dk = paths.k(p, i + 1) - paths.k(p, i);
        paths.noise().increment(p, i, dw);
        Vector term = sol.Y(p, i + 1) - y + coeffs.driver(t, x, y, z) * dt - z * dw;
        if (dk != 0.0) term += coeffs.boundary_driver(t, x, y) * dk;
        terms.row(static_cast<Eigen::Index>(p)) = term.transpose();
      }
    });
    for (int r = 0; r < sol.m(); ++r) {
      for (std::size_t p = 0; p < N; ++p) column[p] = terms(static_cast<Eigen::Index>(p), r);
      worst = std::max(worst, std::abs(sample_estimate(column).mean));
    }
  }
  return worst;
}

// CSV: step, time, picard_residual, condition_warning, mean_Y, mean_absZ.
inline void write_diagnostics_csv(const BackwardSolution& sol, std::ostream& out) {
  CsvWriter csv(out);
  csv.header({"step", "time", "picard_residual", "condition_warning", "mean_Y", "mean_absZ"});
  for (std::size_t i = 0; i < sol.diagnostics.steps.size(); ++i) {
    const auto& s = sol.diagnostics.steps[i];
    csv.field(static_cast<std::int64_t>(i))
        .field(s.time)
        .field(s.picard_residual)
        .field(s.condition_warning ? 1 : 0)
        .field(s.mean_Y)
        .field(s.mean_abs_Z)
        .end_row();
  }
}

struct ProbeOptions {
  double t_min = 0.0;
  double t_max = 1.0;
  double y_range = 5.0;  // y, y' uniform in [-y_range, y_range]^m
  double z_range = 5.0;
  int noise_dim = 0;     // columns of z; 0 means the domain dimension
};

struct AssumptionReport {
  double mu_f_hat = -std::numeric_limits<double>::infinity();
  double l_f_hat = 0.0;
  double beta_hat = -std::numeric_limits<double>::infinity();
  double growth_hat = 0.0;
  std::vector<std::string> violations;
};

/// Empirical tightest constants for the monotonicity, Lipschitz and growth
/// conditions on (f, h, g), from random samples of (t, x, y, y', z, z').
/// x is drawn from the domain's bounding box widened by one unit, since
/// penalized paths leave the domain. A declared constant is violated when a
/// sampled ratio exceeds it by more than 1e-9 (1 + |declared|).
inline AssumptionReport probe_assumptions(const BackwardCoefficients& coeffs, const Domain& domain,
                                          std::size_t sample_count, std::uint64_t seed,
                                          const ProbeOptions& opts = {}) {
  coeffs.validate();
  if (sample_count < 2) throw InputError("probe_assumptions needs sample_count ≥ 2");
  AssumptionReport report;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto [lo, hi] = domain.bounding_box();
  lo.array() -= 1.0;
  hi.array() += 1.0;
  const int m = coeffs.m;
  const int dprime = opts.noise_dim > 0 ? opts.noise_dim : domain.dim();

  auto uniform_vec = [&](int n, double a, double b) {
    Vector v(n);
    for (int j = 0; j < n; ++j) v[j] = a + (b - a) * unit(rng);
    return v;
  };

  for (std::size_t s = 0; s < sample_count; ++s) {
    const double t = opts.t_min + (opts.t_max - opts.t_min) * unit(rng);
    Vector x(domain.dim());
    for (int j = 0; j < domain.dim(); ++j) x[j] = lo[j] + (hi[j] - lo[j]) * unit(rng);
    const Vector y = uniform_vec(m, -opts.y_range, opts.y_range);
    const Vector y2 = uniform_vec(m, -opts.y_range, opts.y_range);
    const Matrix z = uniform_vec(m * dprime, -opts.z_range, opts.z_range).reshaped(m, dprime);
    const Matrix z2 = uniform_vec(m * dprime, -opts.z_range, opts.z_range).reshaped(m, dprime);

    const double dy2 = (y - y2).squaredNorm();
    if (dy2 > 0.0) {
      report.mu_f_hat =
          std::max(report.mu_f_hat, (y - y2).dot(coeffs.driver(t, x, y, z) - coeffs.driver(t, x, y2, z)) / dy2);
      report.beta_hat = std::max(
          report.beta_hat, (y - y2).dot(coeffs.boundary_driver(t, x, y) - coeffs.boundary_driver(t, x, y2)) / dy2);
    }
    const double dz = (z - z2).norm();
    if (dz > 0.0) {
      report.l_f_hat = std::max(report.l_f_hat, (coeffs.driver(t, x, y, z) - coeffs.driver(t, x, y, z2)).norm() / dz);
    }
    const double ny = 1.0 + y.norm();
    report.growth_hat = std::max(report.growth_hat, coeffs.driver(t, x, y, Matrix::Zero(m, dprime)).norm() / ny);
    report.growth_hat = std::max(report.growth_hat, coeffs.boundary_driver(t, x, y).norm() / ny);
    report.growth_hat = std::max(report.growth_hat, coeffs.terminal(x).norm() / (1.0 + x.norm()));
  }

  auto check = [&](const char* name, double observed, double declared) {
    if (observed > declared + 1e-9 * (1.0 + std::abs(declared))) {
      report.violations.push_back(std::string(name) + ": observed " + format_double(observed) + " exceeds declared " +
                                  format_double(declared));
    }
  };
  check("mu_f", report.mu_f_hat, coeffs.mu_f);
  check("l_f", report.l_f_hat, coeffs.l_f);
  check("beta", report.beta_hat, coeffs.beta);
  check("growth", report.growth_hat, coeffs.growth_const);
  return report;
}

}  // namespace npf
