#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "npf/fd_reference.hpp"
#include "npf/pde.hpp"

namespace npf::problems {

struct Query {
  double t = 0.0;
  Vector x;
};

// A ready-made problem with whatever reference solution is available for it.
struct BuiltinProblem {
  PdeProblem problem;
  std::function<double(double, const Vector&)> exact;  // closed form, if known
  std::optional<reference::NeumannHeatProblem> fd;    // 1-d finite-difference reference, if applicable
  std::vector<Query> default_queries;
};

inline ForwardCoefficients brownian_1d() {
  ForwardCoefficients fc = ForwardCoefficients::constant(Vector::Zero(1), Matrix::Identity(1, 1));
  fc.growth_const = 1.0;
  fc.lipschitz_const = 0.0;
  return fc;
}

inline BackwardCoefficients zero_drivers(BackwardCoefficients::Terminal g, double growth) {
  BackwardCoefficients bc;
  bc.driver = [](double, const Vector&, const Vector& y, const Matrix&) { return Vector::Zero(y.size()); };
  bc.boundary_driver = [](double, const Vector&, const Vector& y) { return Vector::Zero(y.size()); };
  bc.terminal = std::move(g);
  bc.growth_const = growth;
  return bc;
}

inline Vector point(double x) { return Vector::Constant(1, x); }

/// u_t + 1/2 u_xx = 0 on [0,1], zero Neumann flux, u(T) = cos(pi x);
/// u(t,x) = exp(-pi^2 (T-t)/2) cos(pi x).
inline BuiltinProblem heat_neumann(double horizon) {
  using std::numbers::pi;
  BuiltinProblem b{
      PdeProblem{"heat_neumann", Domain::interval(0.0, 1.0), brownian_1d(),
                 zero_drivers([](const Vector& x) { return Vector::Constant(1, std::cos(pi * x[0])); }, 1.0),
                 horizon},
      [horizon](double t, const Vector& x) { return std::exp(-pi * pi * (horizon - t) / 2.0) * std::cos(pi * x[0]); },
      reference::NeumannHeatProblem{0.0, 1.0, 1.0, horizon, [](double x) { return std::cos(pi * x); }, {}, {}, {}},
      {{0.0, point(0.25)}}};
  return b;
}

/// Unit boundary flux h = 1 with zero data: u(t,x) = E[k_T] for reflected
/// Brownian motion started at x.
inline BuiltinProblem constant_flux(double horizon) {
  BackwardCoefficients bc = zero_drivers([](const Vector&) { return Vector::Zero(1); }, 1.0);
  bc.boundary_driver = [](double, const Vector&, const Vector& y) { return Vector::Ones(y.size()); };
  auto one = [](double) { return 1.0; };
  return BuiltinProblem{
      PdeProblem{"constant_flux", Domain::interval(0.0, 1.0), brownian_1d(), std::move(bc), horizon},
      {},
      reference::NeumannHeatProblem{0.0, 1.0, 1.0, horizon, [](double) { return 0.0; }, {}, one, one},
      {{0.0, point(0.5)}}};
}

inline BuiltinProblem linear_decay(double horizon) {
  BackwardCoefficients bc = zero_drivers([](const Vector&) { return Vector::Ones(1); }, 1.0);
  bc.driver = [](double, const Vector&, const Vector& y, const Matrix&) -> Vector { return -y; };
  bc.mu_f = -1.0;
  return BuiltinProblem{
      PdeProblem{"linear_decay", Domain::interval(0.0, 1.0), brownian_1d(), std::move(bc), horizon},
      [horizon](double t, const Vector&) { return std::exp(-(horizon - t)); },
      std::nullopt,
      {{0.0, point(0.5)}}};
}

inline BuiltinProblem constant(double horizon, double value = 5.0) {
  BackwardCoefficients bc = zero_drivers([value](const Vector&) { return Vector::Constant(1, value); },
                                         std::abs(value));
  return BuiltinProblem{PdeProblem{"constant", Domain::interval(0.0, 1.0), brownian_1d(), std::move(bc), horizon},
                        [value](double, const Vector&) { return value; },
                        std::nullopt,
                        {{0.0, point(0.5)}}};
}

/// u = x^2 (time independent): f = -1, h = -<2x, n(x)>, i.e. h = 0 at x = 0
/// and h = 2 at x = 1.
inline BuiltinProblem manufactured_poly(double horizon) {
  ManufacturedSolution u{
      [](double, const Vector& x) { return x[0] * x[0]; },
      [](double, const Vector&) { return 0.0; },
      [](double, const Vector& x) { return Vector::Constant(1, 2.0 * x[0]); },
      [](double, const Vector&) { return Matrix::Constant(1, 1, 2.0); },
  };
  ManufacturedOptions opts;
  opts.name = "manufactured_poly";
  // |h| <= 2|x| <= 4 and |g| <= x^2 <= 4/3 (1 + |x|) on the probed box [-1, 2].
  opts.growth_const = 4.0;
  auto exact = u.value;
  PdeProblem pb = manufactured_problem(u, Domain::interval(0.0, 1.0), brownian_1d(), horizon, opts);
  return BuiltinProblem{std::move(pb), exact, std::nullopt,
                        {{0.0, point(0.1)}, {0.0, point(0.3)}, {0.0, point(0.5)}, {0.0, point(0.7)}, {0.0, point(0.9)}}};
}

/// u = exp(-(T-t)) (x^2 + cos(pi x)) / 2 with driver F(y, z) = -y + sin(z)/2
/// and boundary driver H(y) = -y + sin(y)/2 composed on top of the source
/// terms, so f depends on (y, z) and the Neumann condition is nonlinear in u.
inline BuiltinProblem manufactured_full(double horizon) {
  using std::numbers::pi;
  auto decay = [horizon](double t) { return std::exp(-(horizon - t)); };
  ManufacturedSolution u{
      [decay](double t, const Vector& x) { return decay(t) * (x[0] * x[0] + std::cos(pi * x[0])) / 2.0; },
      [decay](double t, const Vector& x) { return decay(t) * (x[0] * x[0] + std::cos(pi * x[0])) / 2.0; },
      [decay](double t, const Vector& x) {
        return Vector::Constant(1, decay(t) * (2.0 * x[0] - pi * std::sin(pi * x[0])) / 2.0);
      },
      [decay](double t, const Vector& x) {
        return Matrix::Constant(1, 1, decay(t) * (2.0 - pi * pi * std::cos(pi * x[0])) / 2.0);
      },
  };
  ManufacturedOptions opts;
  opts.name = "manufactured_full";
  opts.driver = [](double y, const Matrix& z) { return -y + 0.5 * std::sin(z(0, 0)); };
  opts.boundary = [](double y) { return -y + 0.5 * std::sin(y); };
  opts.mu_f = -1.0;
  opts.l_f = 0.5;
  opts.beta = -0.5;
  // On [-1, 2] x [0, T]: |f(.,y,0)| <= |y| + 1/2 + (2 + pi^2)/4 and
  // |h| <= 3/2 |y| + 3 + (4 + pi)/2, so C = 7 covers all three bounds.
  opts.growth_const = 7.0;
  auto exact = u.value;
  PdeProblem pb = manufactured_problem(u, Domain::interval(0.0, 1.0), brownian_1d(), horizon, opts);
  return BuiltinProblem{
      std::move(pb), exact, std::nullopt,
      {{0.0, point(0.0)}, {0.0, point(0.2)}, {0.0, point(0.4)}, {0.25 * horizon, point(0.1)},
       {0.25 * horizon, point(0.3)}}};
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"heat_neumann", "constant_flux",  "manufactured_poly",
                                              "manufactured_full", "linear_decay", "constant"};
  return names;
}

inline BuiltinProblem make_builtin(const std::string& name, double horizon) {
  if (name == "heat_neumann") return heat_neumann(horizon);
  if (name == "constant_flux") return constant_flux(horizon);
  if (name == "manufactured_poly") return manufactured_poly(horizon);
  if (name == "manufactured_full") return manufactured_full(horizon);
  if (name == "linear_decay") return linear_decay(horizon);
  if (name == "constant") return constant(horizon);
  throw InputError("unknown problem '" + name + "'");
}

}  // namespace npf::problems
