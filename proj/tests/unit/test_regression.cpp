#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "npf/regression.hpp"

using namespace npf;

namespace {

Matrix uniform_points(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix pts(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) pts(i, j) = u(rng);
  }
  return pts;
}

Matrix features_of(const PolynomialBasis& b, const Matrix& pts) {
  Matrix f(pts.rows(), b.size());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) f.row(i) = b.evaluate(pts.row(i).transpose()).transpose();
  return f;
}

}  // namespace

TEST(Regression, LinearFitMatchesClosedForm) {
  const Matrix pts = uniform_points(500, 1, 1);
  const PolynomialBasis basis = PolynomialBasis::standardized(pts, 1);
  ASSERT_EQ(basis.size(), 2);
  const Matrix F = features_of(basis, pts);
  const Matrix y = pts.array().square().matrix();
  const RegressionResult r = regress(F, y, 0.0);

  // Simple linear regression in the standardized coordinate z.
  const Vector z = F.col(1);
  const double zbar = z.mean();
  const double ybar = y.col(0).mean();
  const double slope = ((z.array() - zbar) * (y.col(0).array() - ybar)).sum() / (z.array() - zbar).square().sum();
  const double intercept = ybar - slope * zbar;
  EXPECT_NEAR(r.coefficients(0, 0), intercept, 1e-12);
  EXPECT_NEAR(r.coefficients(1, 0), slope, 1e-12);
  // Constants in the basis: fitted values preserve the sample mean.
  EXPECT_NEAR((F * r.coefficients).mean(), ybar, 1e-12);
  EXPECT_FALSE(r.rank_deficient);
}

TEST(Regression, RidgeMatchesNormalEquations) {
  const Matrix pts = uniform_points(300, 2, 2);
  const PolynomialBasis basis = PolynomialBasis::standardized(pts, 2);
  ASSERT_EQ(basis.size(), 6);
  const Matrix F = features_of(basis, pts);
  Matrix y(300, 2);
  y.col(0) = (pts.col(0).array() * pts.col(1).array()).matrix();
  y.col(1) = pts.col(0).array().sin().matrix();
  const double lambda = 0.5;
  const RegressionResult r = regress(F, y, lambda);

  // Independent oracle: Gaussian elimination on (F^T F + lambda I) c = F^T y.
  const int nb = basis.size();
  Matrix A = F.transpose() * F;
  A.diagonal().array() += lambda;
  Matrix rhs = F.transpose() * y;
  for (int k = 0; k < nb; ++k) {
    for (int i = k + 1; i < nb; ++i) {
      const double w = A(i, k) / A(k, k);
      A.row(i) -= w * A.row(k);
      rhs.row(i) -= w * rhs.row(k);
    }
  }
  Matrix c(nb, 2);
  for (int i = nb - 1; i >= 0; --i) {
    for (int col = 0; col < 2; ++col) {
      double s = rhs(i, col);
      for (int j = i + 1; j < nb; ++j) s -= A(i, j) * c(j, col);
      c(i, col) = s / A(i, i);
    }
  }
  EXPECT_LE((r.coefficients - c).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(r.ridge_used, lambda);
}

TEST(Regression, RankDeficientMinimumNorm) {
  Matrix F(4, 2);
  F << 1, 1, 2, 2, 3, 3, 4, 4;
  Matrix y(4, 1);
  y << 2, 4, 6, 8;
  const RegressionResult r = regress(F, y, 0.0);
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_TRUE(r.condition_warning);
  EXPECT_NEAR(r.coefficients(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(r.coefficients(1, 0), 1.0, 1e-12);
}

TEST(Regression, RejectsBadInput) {
  EXPECT_THROW(regress(Matrix::Ones(3, 1), Matrix::Ones(2, 1), 0.0), InputError);
  EXPECT_THROW(regress(Matrix::Ones(3, 1), Matrix::Ones(3, 1), -1.0), InputError);
  Matrix bad = Matrix::Ones(3, 1);
  bad(1, 0) = std::nan("");
  EXPECT_THROW(regress(bad, Matrix::Ones(3, 1), 0.0), InputError);
}

TEST(Basis, DropsDegenerateCoordinates) {
  Matrix pts = uniform_points(100, 3, 3);
  pts.col(1).setConstant(0.7);
  const PolynomialBasis b = PolynomialBasis::standardized(pts, 3);
  EXPECT_EQ(b.size(), 10);  // monomials of degree <= 3 in two variables
  for (const auto& e : b.exponents()) EXPECT_EQ(e[1], 0);
  EXPECT_EQ(PolynomialBasis::standardized(Matrix::Constant(50, 2, 0.3), 3).size(), 1);
}

TEST(Basis, OrderingAndValues) {
  const Matrix pts = uniform_points(1000, 2, 4);
  const PolynomialBasis b = PolynomialBasis::standardized(pts, 3);
  ASSERT_EQ(b.size(), 10);
  int last = 0;
  for (const auto& e : b.exponents()) {
    const int total = e[0] + e[1];
    EXPECT_GE(total, last);
    last = total;
  }
  Vector x(2);
  x << 0.2, 0.9;
  const Vector v = b.evaluate(x);
  const double z0 = (x[0] - b.mean()[0]) / b.scale()[0];
  const double z1 = (x[1] - b.mean()[1]) / b.scale()[1];
  for (int f = 0; f < b.size(); ++f) {
    const auto& e = b.exponents()[static_cast<std::size_t>(f)];
    EXPECT_NEAR(v[f], std::pow(z0, e[0]) * std::pow(z1, e[1]), 1e-12);
  }
  EXPECT_EQ(v[0], 1.0);
}
