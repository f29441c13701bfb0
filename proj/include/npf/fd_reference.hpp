#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "npf/domain.hpp"

namespace npf::reference {

// One-dimensional backward problem on [lo, hi]:
//   u_t + 1/2 sigma^2 u_xx + source(t, x) = 0,  u(T, x) = terminal(x),
//   inward-normal Neumann data  du/dn + flux = 0  at both ends, i.e.
//   u_x(lo) = -flux_lo(t)  and  u_x(hi) = flux_hi(t).
struct NeumannHeatProblem {
  double lo = 0.0;
  double hi = 1.0;
  double sigma = 1.0;
  double horizon = 1.0;
  std::function<double(double)> terminal;
  std::function<double(double, double)> source;  // may be empty
  std::function<double(double)> flux_lo;         // may be empty (zero flux)
  std::function<double(double)> flux_hi;
};

/// Crank-Nicolson with second-order ghost-point Neumann conditions and a
/// Rannacher start (the first time step is split into four implicit Euler
/// quarter steps to damp incompatible initial data). Returns u(t, .) on the
/// uniform grid with `space_cells` cells.
inline std::vector<double> crank_nicolson(const NeumannHeatProblem& pb, double t, int space_cells, int time_steps) {
  if (space_cells < 2 || time_steps < 1) throw InputError("crank_nicolson: grid too small");
  if (!(t < pb.horizon)) throw InputError("crank_nicolson: t must be < T");
  const int n = space_cells + 1;
  const double dx = (pb.hi - pb.lo) / space_cells;
  const double diff = 0.5 * pb.sigma * pb.sigma / (dx * dx);

  std::vector<double> u(n);
  for (int j = 0; j < n; ++j) u[j] = pb.terminal(pb.lo + j * dx);

  auto node = [&](int j) { return pb.lo + j * dx; };
  auto flux_lo = [&](double s) { return pb.flux_lo ? pb.flux_lo(s) : 0.0; };
  auto flux_hi = [&](double s) { return pb.flux_hi ? pb.flux_hi(s) : 0.0; };
  auto src = [&](double s, double x) { return pb.source ? pb.source(s, x) : 0.0; };

  // (A u)_j plus the inhomogeneous part of the ghost-point closure.
  auto apply = [&](const std::vector<double>& v, double s, std::vector<double>& out) {
    for (int j = 0; j < n; ++j) {
      double lap;
      if (j == 0) {
        lap = 2.0 * (v[1] - v[0]) + 2.0 * dx * flux_lo(s);
      } else if (j == n - 1) {
        lap = 2.0 * (v[n - 2] - v[n - 1]) + 2.0 * dx * flux_hi(s);
      } else {
        lap = v[j + 1] - 2.0 * v[j] + v[j - 1];
      }
      out[j] = diff * lap + src(s, node(j));
    }
  };

  // Solves (I - theta dtau A) u_new = rhs, boundary data at time s.
  std::vector<double> a(n), b(n), c(n);
  auto implicit_solve = [&](double theta_dtau, double s, std::vector<double>& rhs) {
    for (int j = 0; j < n; ++j) {
      a[j] = -theta_dtau * diff;
      b[j] = 1.0 + 2.0 * theta_dtau * diff;
      c[j] = -theta_dtau * diff;
    }
    c[0] = -2.0 * theta_dtau * diff;
    a[n - 1] = -2.0 * theta_dtau * diff;
    rhs[0] += theta_dtau * (diff * 2.0 * dx * flux_lo(s) + src(s, node(0)));
    rhs[n - 1] += theta_dtau * (diff * 2.0 * dx * flux_hi(s) + src(s, node(n - 1)));
    for (int j = 1; j < n - 1; ++j) rhs[j] += theta_dtau * src(s, node(j));
    // Thomas algorithm.
    for (int j = 1; j < n; ++j) {
      const double w = a[j] / b[j - 1];
      b[j] -= w * c[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    u[n - 1] = rhs[n - 1] / b[n - 1];
    for (int j = n - 2; j >= 0; --j) u[j] = (rhs[j] - c[j] * u[j + 1]) / b[j];
  };

  const double dtau = (pb.horizon - t) / time_steps;
  std::vector<double> rhs(n), au(n);
  double s = pb.horizon;
  // Rannacher start.
  for (int q = 0; q < 4; ++q) {
    const double h = 0.25 * dtau;
    rhs = u;
    implicit_solve(h, s - h, rhs);
    s -= h;
  }
  for (int k = 1; k < time_steps; ++k) {
    apply(u, s, au);
    for (int j = 0; j < n; ++j) rhs[j] = u[j] + 0.5 * dtau * au[j];
    implicit_solve(0.5 * dtau, s - dtau, rhs);
    s -= dtau;
  }
  return u;
}

// Linear interpolation of grid values on [lo, hi].
inline double interpolate(const std::vector<double>& values, double lo, double hi, double x) {
  const int cells = static_cast<int>(values.size()) - 1;
  const double pos = (x - lo) / (hi - lo) * cells;
  const int j = std::clamp(static_cast<int>(std::floor(pos)), 0, cells - 1);
  const double w = pos - j;
  return (1.0 - w) * values[j] + w * values[j + 1];
}

}  // namespace npf::reference
