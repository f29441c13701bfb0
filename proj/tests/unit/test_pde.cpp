#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "npf/fd_reference.hpp"
#include "npf/pde.hpp"
#include "npf/problems.hpp"

using namespace npf;
using std::numbers::pi;

namespace {

SimConfig sim(int steps, std::size_t n_paths, std::uint64_t seed = 42) {
  SimConfig s;
  s.steps = steps;
  s.n_paths = n_paths;
  s.seed = seed;
  return s;
}

double scalar(const Vector& v) { return v[0]; }

}  // namespace

TEST(Pde, ConstantProblemIsExactForAllPenalties) {
  const auto b = problems::constant(1.0, 5.0);
  const Vector x = problems::point(0.3);
  const PointEstimate u = evaluate_u(b.problem, 0.0, x, sim(20, 300));
  EXPECT_EQ(u.value[0], 5.0);
  EXPECT_EQ(u.std_error[0], 0.0);
  for (int n : {1, 10, 1000}) {
    const PointEstimate un = evaluate_un(b.problem, 0.0, x, n, sim(20, 300));
    EXPECT_EQ(un.value[0], 5.0);
    EXPECT_EQ(un.std_error[0], 0.0);
    EXPECT_EQ(un.penalty, n);
  }
  const SweepReport rep = sweep_penalty(b.problem, 0.0, x, {4, 16, 64}, sim(20, 300));
  for (const auto& g : rep.gaps) EXPECT_EQ(g[0], 0.0);
  for (const auto& g : rep.bsde_gap) EXPECT_EQ(g.mean, 0.0);
  EXPECT_EQ(rep.estimates_un.size(), 3u);
}

TEST(Pde, TerminalContinuity) {
  const auto b = problems::manufactured_full(1.0);
  const Vector x = problems::point(0.4);
  for (double eps : {0.1, 0.01, 0.001}) {
    const PointEstimate u = evaluate_u(b.problem, 1.0 - eps, x, sim(5, 2000));
    const double g = b.problem.backward.terminal(x)[0];
    // |Y_t - g(x)| <= C eps (1 + |y|) from the drivers plus the drift of g.
    const double bound = b.problem.backward.growth_const * eps * (1.0 + std::abs(g) + 1.0) + 3.0 * u.std_error[0];
    EXPECT_LE(std::abs(u.value[0] - g), bound) << "eps = " << eps;
  }
}

TEST(Pde, HeatProblemWithinProjectionBias) {
  const auto b = problems::heat_neumann(0.25);
  const Vector x = problems::point(0.25);
  const PointEstimate u = evaluate_u(b.problem, 0.0, x, sim(100, 4000));
  // Monte Carlo error plus the O(sqrt(dt)) bias of the projected scheme at dt = 2.5e-3.
  EXPECT_NEAR(u.value[0], b.exact(0.0, x), 3.0 * u.std_error[0] + 0.03);
  EXPECT_GT(u.std_error[0], 0.0);
}

TEST(Pde, ContinuityInSpace) {
  const auto b = problems::heat_neumann(0.25);
  const PointEstimate a = evaluate_u(b.problem, 0.0, problems::point(0.25), sim(100, 4000));
  const PointEstimate c = evaluate_u(b.problem, 0.0, problems::point(0.26), sim(100, 4000));
  // |u_x| <= pi exp(-pi^2 / 8) on the domain.
  const double lipschitz = pi * std::exp(-pi * pi / 8.0) * 0.01;
  EXPECT_LE(std::abs(a.value[0] - c.value[0]), 3.0 * std::hypot(a.std_error[0], c.std_error[0]) + lipschitz);
}

TEST(Pde, QueryValidation) {
  const auto b = problems::heat_neumann(0.25);
  EXPECT_THROW(evaluate_u(b.problem, 0.0, problems::point(1.5), sim(10, 10)), InputError);
  EXPECT_THROW(evaluate_un(b.problem, 0.0, problems::point(-0.1), 4, sim(10, 10)), InputError);
  EXPECT_THROW(evaluate_u(b.problem, 0.25, problems::point(0.5), sim(10, 10)), InputError);
  EXPECT_THROW(evaluate_un(b.problem, 0.0, problems::point(0.5), 0, sim(10, 10)), InputError);
  try {
    sweep_penalty(b.problem, 0.0, problems::point(0.5), {16, 4}, sim(10, 10));
    FAIL();
  } catch (const InputError& e) {
    EXPECT_STREQ(e.what(), "penalty_levels must be strictly increasing");
  }
}

TEST(Manufactured, ConstantSolutionGivesZeroData) {
  ManufacturedSolution u{[](double, const Vector&) { return 3.0; }, [](double, const Vector&) { return 0.0; },
                         [](double, const Vector&) { return Vector::Zero(1); },
                         [](double, const Vector&) { return Matrix::Zero(1, 1); }};
  const PdeProblem pb = manufactured_problem(u, Domain::interval(0.0, 1.0), problems::brownian_1d(), 1.0);
  const Vector y = Vector::Constant(1, 1.7);
  for (double x : {0.0, 0.3, 1.0}) {
    EXPECT_EQ(scalar(pb.backward.driver(0.2, problems::point(x), y, Matrix::Zero(1, 1))), 0.0);
    EXPECT_EQ(scalar(pb.backward.boundary_driver(0.2, problems::point(x), y)), 0.0);
    EXPECT_EQ(scalar(pb.backward.terminal(problems::point(x))), 3.0);
  }
}

TEST(Manufactured, DecayingCosine) {
  const double T = 1.0;
  ManufacturedSolution u{
      [T](double t, const Vector& x) { return std::exp(-(T - t)) * std::cos(pi * x[0]); },
      [T](double t, const Vector& x) { return std::exp(-(T - t)) * std::cos(pi * x[0]); },
      [T](double t, const Vector& x) { return Vector::Constant(1, -pi * std::exp(-(T - t)) * std::sin(pi * x[0])); },
      [T](double t, const Vector& x) {
        return Matrix::Constant(1, 1, -pi * pi * std::exp(-(T - t)) * std::cos(pi * x[0]));
      }};
  const PdeProblem pb = manufactured_problem(u, Domain::interval(0.0, 1.0), problems::brownian_1d(), T);
  const Vector y = Vector::Zero(1);
  for (double t : {0.0, 0.5}) {
    for (double x : {0.1, 0.6}) {
      const double expected = (pi * pi / 2.0 - 1.0) * std::exp(-(T - t)) * std::cos(pi * x);
      EXPECT_NEAR(scalar(pb.backward.driver(t, problems::point(x), y, Matrix::Zero(1, 1))), expected, 1e-12);
    }
    EXPECT_NEAR(scalar(pb.backward.boundary_driver(t, problems::point(0.0), y)), 0.0, 1e-12);
    EXPECT_NEAR(scalar(pb.backward.boundary_driver(t, problems::point(1.0), y)), 0.0, 1e-12);
  }
}

TEST(Manufactured, Quadratic) {
  const auto b = problems::manufactured_poly(1.0);
  const Vector y = Vector::Constant(1, 0.4);
  EXPECT_NEAR(scalar(b.problem.backward.driver(0.3, problems::point(0.7), y, Matrix::Zero(1, 1))), -1.0, 1e-14);
  EXPECT_NEAR(scalar(b.problem.backward.boundary_driver(0.3, problems::point(0.0), y)), 0.0, 1e-14);
  EXPECT_NEAR(scalar(b.problem.backward.boundary_driver(0.3, problems::point(1.0), y)), 2.0, 1e-14);
}

// The exact solution satisfies u_t + 1/2 u_xx + f(t, x, u, u_x) = 0 inside and
// <u_x, n> + h(t, x, u) = 0 on the boundary; derivatives by central differences.
TEST(Manufactured, FullProblemSolvesItsPde) {
  const double T = 0.5;
  const auto b = problems::manufactured_full(T);
  const auto u = [&](double t, double x) { return b.exact(t, problems::point(x)); };
  const double h = 1e-4;
  for (double t : {0.0, 0.2, 0.4}) {
    for (double x : {0.05, 0.3, 0.5, 0.95}) {
      const double ut = (u(t + h, x) - u(t - h, x)) / (2 * h);
      const double ux = (u(t, x + h) - u(t, x - h)) / (2 * h);
      const double uxx = (u(t, x + h) - 2 * u(t, x) + u(t, x - h)) / (h * h);
      const double f = scalar(b.problem.backward.driver(t, problems::point(x), problems::point(u(t, x)),
                                                        Matrix::Constant(1, 1, ux)));
      EXPECT_NEAR(ut + 0.5 * uxx + f, 0.0, 1e-5) << "t = " << t << ", x = " << x;
    }
    for (auto [x, normal] : {std::pair{0.0, 1.0}, std::pair{1.0, -1.0}}) {
      const double ux = (u(t, x + h) - u(t, x - h)) / (2 * h);
      const double hb = scalar(b.problem.backward.boundary_driver(t, problems::point(x), problems::point(u(t, x))));
      EXPECT_NEAR(ux * normal + hb, 0.0, 1e-7);
    }
    // Off the solution the boundary driver follows H(y) = -y + sin(y)/2.
    const double y0 = u(t, 1.0);
    const double shifted = scalar(b.problem.backward.boundary_driver(t, problems::point(1.0), problems::point(y0 + 0.3)));
    const double base = scalar(b.problem.backward.boundary_driver(t, problems::point(1.0), problems::point(y0)));
    EXPECT_NEAR(shifted - base, -0.3 + 0.5 * (std::sin(y0 + 0.3) - std::sin(y0)), 1e-12);
  }
  EXPECT_NEAR(b.exact(T, problems::point(0.0)), 0.5, 1e-15);
}

TEST(Manufactured, RejectsBadShapes) {
  ManufacturedSolution u{[](double, const Vector&) { return 0.0; }, [](double, const Vector&) { return 0.0; },
                         [](double, const Vector&) { return Vector::Zero(2); },
                         [](double, const Vector&) { return Matrix::Zero(1, 1); }};
  EXPECT_THROW(manufactured_problem(u, Domain::interval(0.0, 1.0), problems::brownian_1d(), 1.0), InputError);
  u.gradient = {};
  EXPECT_THROW(manufactured_problem(u, Domain::interval(0.0, 1.0), problems::brownian_1d(), 1.0), InputError);
}

TEST(CrankNicolson, HeatMatchesSeparationOfVariables) {
  const auto b = problems::heat_neumann(0.25);
  const auto v = reference::crank_nicolson(*b.fd, 0.0, 400, 400);
  for (double x : {0.0, 0.25, 0.6, 1.0}) {
    EXPECT_NEAR(reference::interpolate(v, 0.0, 1.0, x), b.exact(0.0, problems::point(x)), 1e-4);
  }
}

TEST(CrankNicolson, QuadraticWithSourceAndFlux) {
  // u = x^2: source -1, u_x(0) = 0, u_x(1) = 2.
  reference::NeumannHeatProblem pb{0.0, 1.0, 1.0, 1.0, [](double x) { return x * x; },
                                   [](double, double) { return -1.0; }, [](double) { return 0.0; },
                                   [](double) { return 2.0; }};
  const auto v = reference::crank_nicolson(pb, 0.0, 100, 50);
  for (int j = 0; j <= 100; j += 10) EXPECT_NEAR(v[static_cast<std::size_t>(j)], (j / 100.0) * (j / 100.0), 1e-10);
}
