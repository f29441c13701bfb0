#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "npf/csv.hpp"
#include "npf/domain.hpp"
#include "npf/parallel.hpp"
#include "npf/philox.hpp"
#include "npf/stats.hpp"

namespace npf {

// Uniform grid t_i = t0 + i * dt on [t0, T].
class TimeGrid {
 public:
  TimeGrid(double t0, double horizon, int steps) : t0_(t0), horizon_(horizon), steps_(steps) {
    if (!(t0 >= 0.0) || !(t0 < horizon) || !std::isfinite(horizon)) {
      throw InputError("time grid requires 0 <= t0 < T");
    }
    if (steps < 1) throw InputError("grid.steps must be ≥ 1");
    dt_ = (horizon - t0) / steps;
  }

  double t0() const { return t0_; }
  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double dt() const { return dt_; }
  double node(int i) const { return i == steps_ ? horizon_ : t0_ + i * dt_; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double t0_;
  double horizon_;
  int steps_;
  double dt_ = 0.0;
};

/// Drift b : R^d -> R^d and diffusion sigma : R^d -> R^{d x d'} with the
/// growth constant C and Lipschitz constant mu they are declared to satisfy.
struct ForwardCoefficients {
  std::function<Vector(const Vector&)> drift;
  std::function<Matrix(const Vector&)> diffusion;
  int dim = 1;
  int noise_dim = 1;
  double growth_const = 0.0;
  double lipschitz_const = 0.0;

  static ForwardCoefficients constant(Vector b, Matrix sigma) {
    ForwardCoefficients c;
    c.dim = static_cast<int>(b.size());
    c.noise_dim = static_cast<int>(sigma.cols());
    c.growth_const = b.norm() + sigma.norm();
    c.lipschitz_const = 0.0;
    c.drift = [b = std::move(b)](const Vector&) { return b; };
    c.diffusion = [s = std::move(sigma)](const Vector&) { return s; };
    return c;
  }

  void validate() const {
    if (!drift || !diffusion) throw InputError("forward coefficients need drift and diffusion");
    if (dim < 1 || noise_dim < 1) throw InputError("forward coefficients need positive dimensions");
    if (growth_const < 0.0 || lipschitz_const < 0.0) {
      throw InputError("forward growth and Lipschitz constants must be >= 0");
    }
  }
};

/// Brownian increments as a pure function of (seed, path, step): the same
/// bundle can be replayed by any number of schemes and workers.
class NoiseBundle {
 public:
  NoiseBundle(std::uint64_t seed, std::size_t n_paths, TimeGrid grid, int noise_dim)
      : seed_(seed), n_paths_(n_paths), grid_(grid), noise_dim_(noise_dim), sqrt_dt_(std::sqrt(grid.dt())) {
    if (n_paths == 0) throw InputError("mc.n_paths must be ≥ 1");
    if (noise_dim < 1) throw InputError("noise dimension must be ≥ 1");
  }

  std::uint64_t seed() const { return seed_; }
  std::size_t n_paths() const { return n_paths_; }
  const TimeGrid& grid() const { return grid_; }
  int noise_dim() const { return noise_dim_; }

  // Writes noise_dim N(0, dt) draws into out.
  void increment(std::size_t path, int step, Eigen::Ref<Vector> out) const {
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    for (int j = 0; j < noise_dim_; j += 2) {
      const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(path),
                                    static_cast<std::uint32_t>(path >> 32), static_cast<std::uint32_t>(j / 2)};
      const auto z = normal_pair(ctr, key);
      out[j] = sqrt_dt_ * z[0];
      if (j + 1 < noise_dim_) out[j + 1] = sqrt_dt_ * z[1];
    }
  }

  Vector increment(std::size_t path, int step) const {
    Vector out(noise_dim_);
    increment(path, step, out);
    return out;
  }

  friend bool operator==(const NoiseBundle& a, const NoiseBundle& b) {
    return a.seed_ == b.seed_ && a.n_paths_ == b.n_paths_ && a.grid_ == b.grid_ && a.noise_dim_ == b.noise_dim_;
  }

 private:
  std::uint64_t seed_;
  std::size_t n_paths_;
  TimeGrid grid_;
  int noise_dim_;
  double sqrt_dt_;
};

struct Scheme {
  bool penalized = false;
  int penalty = 0;  // n, penalized scheme only

  static Scheme reflected() { return {}; }
  static Scheme penalized_with(int n) { return {true, n}; }
  std::string name() const { return penalized ? "penalized_n" + std::to_string(penalty) : "reflected"; }
};

/// Discretized trajectories (X, K, k) of one scheme, stored path-major:
/// X and K are [n_paths x (steps+1) x dim], k is [n_paths x (steps+1)].
class PathBundle {
 public:
  PathBundle(const NoiseBundle& noise, int dim, Scheme scheme, Vector start_point)
      : noise_(noise),
        dim_(dim),
        scheme_(scheme),
        start_(std::move(start_point)),
        X_(noise.n_paths() * nodes() * dim, 0.0),
        K_(noise.n_paths() * nodes() * dim, 0.0),
        k_(noise.n_paths() * nodes(), 0.0) {}

  const TimeGrid& grid() const { return noise_.grid(); }
  const NoiseBundle& noise() const { return noise_; }
  std::size_t n_paths() const { return noise_.n_paths(); }
  int dim() const { return dim_; }
  int steps() const { return grid().steps(); }
  const Scheme& scheme() const { return scheme_; }
  const Vector& start_point() const { return start_; }

  Eigen::Map<const Vector> X(std::size_t p, int i) const { return {&X_[offset(p, i)], dim_}; }
  Eigen::Map<const Vector> K(std::size_t p, int i) const { return {&K_[offset(p, i)], dim_}; }
  double k(std::size_t p, int i) const { return k_[p * nodes() + i]; }

  Eigen::Map<Vector> X(std::size_t p, int i) { return {&X_[offset(p, i)], dim_}; }
  Eigen::Map<Vector> K(std::size_t p, int i) { return {&K_[offset(p, i)], dim_}; }
  double& k(std::size_t p, int i) { return k_[p * nodes() + i]; }

  // State at an arbitrary time s <= T: before t0 the process sits at the
  // start point with zero compensator; otherwise the last node <= s.
  Vector X_at(std::size_t p, double s) const {
    if (s < grid().t0()) return start_;
    return X(p, node_index(s));
  }
  Vector K_at(std::size_t p, double s) const {
    if (s < grid().t0()) return Vector::Zero(dim_);
    return K(p, node_index(s));
  }
  double k_at(std::size_t p, double s) const {
    if (s < grid().t0()) return 0.0;
    return k(p, node_index(s));
  }

  // Number of steps that used penalty sub-stepping.
  std::size_t substepped_steps = 0;

 private:
  std::size_t nodes() const { return static_cast<std::size_t>(grid().steps()) + 1; }
  std::size_t offset(std::size_t p, int i) const { return (p * nodes() + static_cast<std::size_t>(i)) * dim_; }
  int node_index(double s) const {
    const double raw = std::floor((s - grid().t0()) / grid().dt() + 1e-9);
    return static_cast<int>(std::clamp(raw, 0.0, static_cast<double>(grid().steps())));
  }

  NoiseBundle noise_;
  int dim_;
  Scheme scheme_;
  Vector start_;
  std::vector<double> X_;
  std::vector<double> K_;
  std::vector<double> k_;
};

namespace detail {

inline void check_simulation_inputs(const Domain& domain, const ForwardCoefficients& coeffs, const TimeGrid& grid,
                                    const Vector& x0, const NoiseBundle& noise) {
  coeffs.validate();
  if (coeffs.dim != domain.dim()) throw InputError("forward coefficients and domain disagree on dimension");
  if (x0.size() != domain.dim()) throw InputError("start point has the wrong dimension");
  if (!x0.allFinite()) throw InputError("start point must be finite");
  if (!domain.contains(x0, 1e-12)) throw InputError("start point must lie in the closed domain");
  if (!(noise.grid() == grid)) throw InputError("noise grid does not match the simulation grid");
  if (noise.noise_dim() != coeffs.noise_dim) throw InputError("noise dimension does not match sigma columns");
}

}  // namespace detail

/// Euler-Maruyama for the penalized SDE
///   dX = [b(X) - n delta(X)] dt + sigma(X) dW,  dK = -n delta(X) dt,  dk = <grad l(X), dK>,
/// evaluated at the left endpoint of each step. When 2 n dt > 1 the explicit
/// penalty step would overshoot, so the penalty flow xdot = -n delta(x) is
/// integrated separately over the step: in closed form for boxes, with
/// ceil(4 n dt) explicit sub-steps for balls.
inline PathBundle simulate_penalized(const Domain& domain, const ForwardCoefficients& coeffs, int n,
                                     const TimeGrid& grid, const Vector& x0, const NoiseBundle& noise) {
  detail::check_simulation_inputs(domain, coeffs, grid, x0, noise);
  if (n < 1) throw InputError("penalty level n must be ≥ 1");

  const double dt = grid.dt();
  const bool stiff = 2.0 * n * dt > 1.0;
  if (stiff) {
    std::clog << "npf: warning: 2*n*dt = " << 2.0 * n * dt << " > 1 for n = " << n
              << "; integrating the penalty term with sub-steps\n";
  }
  const int substeps = static_cast<int>(std::ceil(4.0 * n * dt));
  const double decay = std::exp(-2.0 * n * dt);

  PathBundle bundle(noise, domain.dim(), Scheme::penalized_with(n), x0);
  std::atomic<std::size_t> substepped{0};

  parallel_for(noise.n_paths(), [&](std::size_t begin, std::size_t end) {
    Vector dw(noise.noise_dim());
    Vector dK(domain.dim());
    std::size_t local_substepped = 0;
    for (std::size_t p = begin; p < end; ++p) {
      Vector x = x0;
      Vector K = Vector::Zero(domain.dim());
      double k = 0.0;
      bundle.X(p, 0) = x;
      for (int i = 0; i < grid.steps(); ++i) {
        noise.increment(p, i, dw);
        const Vector diffusion_step = coeffs.drift(x) * dt + coeffs.diffusion(x) * dw;
        const Vector delta = domain.penalty_gradient(x);
        double dk = 0.0;
        if (delta.squaredNorm() == 0.0) {
          dK.setZero();
        } else if (!stiff) {
          dK = -static_cast<double>(n) * dt * delta;
          dk = domain.inward_normal(x).dot(dK);
        } else if (domain.separable_penalty()) {
          // Excess over the nearest face decays like exp(-2 n t); the
          // direction x - project(x) and hence grad l stay fixed.
          dK = -(1.0 - decay) * 0.5 * delta;
          dk = domain.inward_normal(x).dot(dK);
          ++local_substepped;
        } else {
          const double h = dt / substeps;
          Vector y = x;
          for (int s = 0; s < substeps; ++s) {
            const Vector step = -static_cast<double>(n) * h * domain.penalty_gradient(y);
            dk += domain.inward_normal(y).dot(step);
            y += step;
          }
          dK = y - x;
          ++local_substepped;
        }
        x += diffusion_step + dK;
        K += dK;
        k += dk;
        bundle.X(p, i + 1) = x;
        bundle.K(p, i + 1) = K;
        bundle.k(p, i + 1) = k;
      }
    }
    substepped += local_substepped;
  });
  bundle.substepped_steps = substepped.load();
  return bundle;
}

/// Projected Euler scheme for the reflected SDE: an unconstrained Euler step
/// followed by projection onto D-bar. The projection correction is the
/// compensator increment dK, which points along the inward normal at the
/// projected point, so the boundary functional grows by |dK|.
inline PathBundle simulate_reflected(const Domain& domain, const ForwardCoefficients& coeffs, const TimeGrid& grid,
                                     const Vector& x0, const NoiseBundle& noise) {
  detail::check_simulation_inputs(domain, coeffs, grid, x0, noise);
  const double dt = grid.dt();
  PathBundle bundle(noise, domain.dim(), Scheme::reflected(), x0);

  parallel_for(noise.n_paths(), [&](std::size_t begin, std::size_t end) {
    Vector dw(noise.noise_dim());
    for (std::size_t p = begin; p < end; ++p) {
      Vector x = x0;
      Vector K = Vector::Zero(domain.dim());
      double k = 0.0;
      bundle.X(p, 0) = x;
      for (int i = 0; i < grid.steps(); ++i) {
        noise.increment(p, i, dw);
        const Vector trial = x + coeffs.drift(x) * dt + coeffs.diffusion(x) * dw;
        x = domain.project(trial);
        const Vector dK = x - trial;
        K += dK;
        k += dK.norm();
        bundle.X(p, i + 1) = x;
        bundle.K(p, i + 1) = K;
        bundle.k(p, i + 1) = k;
      }
    }
  });
  return bundle;
}

struct CouplingStats {
  Estimate sup_X;  // E sup_s |X^n_s - X_s|
  Estimate sup_K;  // E sup_s |K^n_s - K_s|
  Estimate sup_k;  // E sup_s |k^n_s - k_s|
};

/// Monte Carlo estimates of the pathwise sup distances between two bundles
/// driven by the same Brownian increments.
inline CouplingStats coupling_error(const PathBundle& pen, const PathBundle& ref) {
  if (!(pen.noise() == ref.noise())) {
    throw InputError("coupling_error requires bundles built from the same noise (seed, grid, path count)");
  }
  if (pen.dim() != ref.dim()) throw InputError("coupling_error: dimension mismatch");
  if (pen.start_point() != ref.start_point()) throw InputError("coupling_error: start points differ");

  const std::size_t n_paths = pen.n_paths();
  std::vector<double> sx(n_paths), sK(n_paths), sk(n_paths);
  parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      double mx = 0.0, mK = 0.0, mk = 0.0;
      for (int i = 0; i <= pen.steps(); ++i) {
        mx = std::max(mx, (pen.X(p, i) - ref.X(p, i)).norm());
        mK = std::max(mK, (pen.K(p, i) - ref.K(p, i)).norm());
        mk = std::max(mk, std::abs(pen.k(p, i) - ref.k(p, i)));
      }
      sx[p] = mx;
      sK[p] = mK;
      sk[p] = mk;
    }
  });
  return {sample_estimate(sx), sample_estimate(sK), sample_estimate(sk)};
}

struct BoundaryCheckReport {
  std::size_t increments = 0;  // steps on which k increased
  std::size_t violations = 0;  // ... while X_{i+1} was farther than tol from the boundary
};

// k may only grow on steps that end on the boundary.
inline BoundaryCheckReport boundary_functional_increment_check(const PathBundle& bundle, const Domain& domain,
                                                               double tol) {
  BoundaryCheckReport report;
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (int i = 0; i < bundle.steps(); ++i) {
      if (bundle.k(p, i + 1) > bundle.k(p, i)) {
        ++report.increments;
        if (domain.boundary_distance(bundle.X(p, i + 1)) > tol) ++report.violations;
      }
    }
  }
  return report;
}

// CSV dump: path, step, time, X_0..X_{d-1}, K_0..K_{d-1}, k.
inline void write_paths_csv(const PathBundle& bundle, std::ostream& out) {
  CsvWriter csv(out);
  std::vector<std::string> header{"path", "step", "time"};
  for (int j = 0; j < bundle.dim(); ++j) header.push_back("X_" + std::to_string(j));
  for (int j = 0; j < bundle.dim(); ++j) header.push_back("K_" + std::to_string(j));
  header.push_back("k");
  csv.header(header);
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (int i = 0; i <= bundle.steps(); ++i) {
      csv.field(static_cast<std::uint64_t>(p)).field(static_cast<std::int64_t>(i)).field(bundle.grid().node(i));
      for (int j = 0; j < bundle.dim(); ++j) csv.field(bundle.X(p, i)[j]);
      for (int j = 0; j < bundle.dim(); ++j) csv.field(bundle.K(p, i)[j]);
      csv.field(bundle.k(p, i)).end_row();
    }
  }
}

}  // namespace npf
