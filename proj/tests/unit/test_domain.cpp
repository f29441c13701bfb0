#include <random>

#include <gtest/gtest.h>

#include "npf/domain.hpp"

using npf::Domain;
using npf::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::vector<Domain> sample_domains() {
  return {Domain::interval(0.0, 1.0),
          Domain::interval(-0.5, 2.0),
          Domain::ball(vec({0.0, 0.0}), 1.0),
          Domain::ball(vec({0.5, 0.5, 0.5}), 0.75),
          Domain::box(vec({0.0, 0.0}), vec({1.0, 2.0})),
          Domain::box(vec({0.0, -1.0, 0.0}), vec({1.0, 1.0, 3.0}))};
}

}  // namespace

TEST(Domain, ProjectExamples) {
  EXPECT_DOUBLE_EQ(Domain::interval(0.0, 1.0).project(vec({1.7}))[0], 1.0);
  EXPECT_DOUBLE_EQ(Domain::interval(0.0, 1.0).project(vec({-0.3}))[0], 0.0);
  EXPECT_DOUBLE_EQ(Domain::interval(0.0, 1.0).project(vec({0.4}))[0], 0.4);
  EXPECT_TRUE(Domain::ball(vec({0.0, 0.0}), 1.0).project(vec({2.0, 0.0})).isApprox(vec({1.0, 0.0})));
  EXPECT_TRUE(Domain::box(vec({0.0, 0.0}), vec({1.0, 1.0})).project(vec({2.0, -1.0})).isApprox(vec({1.0, 0.0})));
}

TEST(Domain, PenaltyGradientExamples) {
  const Domain d = Domain::interval(0.0, 1.0);
  EXPECT_DOUBLE_EQ(d.penalty_gradient(vec({1.25}))[0], 0.5);
  EXPECT_DOUBLE_EQ(d.penalty_gradient(vec({-0.5}))[0], -1.0);
  EXPECT_EQ(d.penalty_gradient(vec({0.5}))[0], 0.0);
}

TEST(Domain, SignedDistanceAndCutoff) {
  const Domain d = Domain::interval(0.0, 1.0, 0.2);
  EXPECT_DOUBLE_EQ(d.signed_distance(vec({0.3})), 0.3);
  EXPECT_DOUBLE_EQ(d.signed_distance(vec({1.5})), -0.5);
  EXPECT_DOUBLE_EQ(d.distance_extension(vec({0.5})), 0.2);
  EXPECT_DOUBLE_EQ(d.distance_extension(vec({-3.0})), -0.2);
  const Domain ball = Domain::ball(vec({0.0, 0.0}), 2.0);
  EXPECT_DOUBLE_EQ(ball.signed_distance(vec({0.0, 3.0})), -1.0);
}

TEST(Domain, InwardNormal) {
  const Domain d = Domain::interval(0.0, 1.0);
  EXPECT_EQ(d.inward_normal(vec({0.0}))[0], 1.0);
  EXPECT_EQ(d.inward_normal(vec({1.0}))[0], -1.0);
  EXPECT_EQ(d.inward_normal(vec({2.0}))[0], -1.0);
  EXPECT_EQ(d.inward_normal(vec({0.5}))[0], 0.0);  // equidistant from both faces
  const Domain ball = Domain::ball(vec({0.0, 0.0}), 1.0);
  EXPECT_TRUE(ball.inward_normal(vec({0.0, 3.0})).isApprox(vec({0.0, -1.0})));
  EXPECT_TRUE(ball.inward_normal(vec({0.0, 0.0})).isZero(0.0));
  const Domain box = Domain::box(vec({0.0, 0.0}), vec({1.0, 1.0}));
  EXPECT_TRUE(box.inward_normal(vec({2.0, 2.0})).isApprox(vec({-1.0, -1.0}).normalized()));
  EXPECT_TRUE(box.inward_normal(vec({0.1, 0.5})).isApprox(vec({1.0, 0.0})));
}

TEST(Domain, RejectsBadInput) {
  EXPECT_THROW(Domain::interval(1.0, 0.0), npf::InputError);
  EXPECT_THROW(Domain::ball(vec({0.0}), -1.0), npf::InputError);
  EXPECT_THROW(Domain::box(vec({0.0, 0.0}), vec({1.0})), npf::InputError);
  EXPECT_THROW(Domain::box(vec({0.0, 1.0}), vec({1.0, 1.0})), npf::InputError);
  EXPECT_THROW(Domain::interval(0.0, 1.0, 0.0), npf::InputError);
  EXPECT_THROW(Domain::interval(0.0, 1.0).project(vec({0.0, 0.0})), npf::InputError);
}

TEST(Domain, RandomInvariants) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coord(-2.0, 3.0);
  for (const Domain& dom : sample_domains()) {
    Vector x(dom.dim());
    for (int s = 0; s < 20000; ++s) {
      for (int j = 0; j < dom.dim(); ++j) x[j] = coord(rng);
      const Vector p = dom.project(x);
      const Vector delta = dom.penalty_gradient(x);
      EXPECT_LE(dom.inward_normal(x).dot(delta), 1e-12);
      EXPECT_LE((delta - 2.0 * (x - p)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((dom.project(p) - p).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_TRUE(dom.contains(p, 1e-12));
      const bool inside = dom.contains(x);
      EXPECT_EQ(inside, delta.isZero(0.0));
      // Projection is the nearest point: no closer boundary point along the segment.
      EXPECT_NEAR((x - p).norm(), std::max(0.0, -dom.signed_distance(x)), 1e-12);
      if (!inside) {
        EXPECT_NEAR(dom.inward_normal(x).norm(), 1.0, 1e-12);
        EXPECT_LT(dom.inward_normal(x).dot(delta), 0.0);
      }
    }
  }
}

TEST(Domain, BoundingBox) {
  const auto [lo, hi] = Domain::ball(vec({1.0, -1.0}), 0.5).bounding_box();
  EXPECT_TRUE(lo.isApprox(vec({0.5, -1.5})));
  EXPECT_TRUE(hi.isApprox(vec({1.5, -0.5})));
}
