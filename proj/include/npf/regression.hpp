#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "npf/domain.hpp"

namespace npf {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RegressionResult {
  Matrix coefficients;      // n_basis x q
  double ridge_used = 0.0;  // may exceed the requested ridge after a fallback
  bool rank_deficient = false;
  bool condition_warning = false;
};

/// Ridge least squares: argmin_C |features * C - targets|^2 + ridge |C|^2.
/// With ridge = 0 the minimum-norm solution is returned (rank deficiency is
/// flagged, not fatal). With ridge > 0 the normal equations are solved; a
/// numerically singular system is retried with a larger ridge and flagged.
inline RegressionResult regress(const Matrix& features, const Matrix& targets, double ridge) {
  if (features.rows() != targets.rows()) throw InputError("regress: features and targets disagree on rows");
  if (ridge < 0.0 || !std::isfinite(ridge)) throw InputError("regress: ridge must be >= 0");
  if (!features.allFinite() || !targets.allFinite()) throw InputError("regress: non-finite input");

  RegressionResult result;
  result.ridge_used = ridge;
  const Eigen::Index nb = features.cols();

  auto min_norm = [&] {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(features);
    result.rank_deficient = cod.rank() < nb;
    result.condition_warning = result.condition_warning || result.rank_deficient;
    result.coefficients = cod.solve(targets);
  };

  if (ridge == 0.0) {
    min_norm();
    return result;
  }

  const Matrix gram = features.transpose() * features;
  const Matrix rhs = features.transpose() * targets;
  const double scale = std::max(gram.diagonal().maxCoeff(), 1.0);
  double lambda = ridge;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Matrix system = gram;
    system.diagonal().array() += lambda;
    Eigen::LDLT<Matrix> ldlt(system);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-13) {
      result.coefficients = ldlt.solve(rhs);
      result.ridge_used = lambda;
      return result;
    }
    result.condition_warning = true;
    lambda = std::max(lambda * 100.0, 1e-12 * scale);
  }
  min_norm();
  return result;
}

/// Tensor-product monomials of total degree <= degree in standardized
/// coordinates (x - mean) / scale. Coordinates with (numerically) zero spread
/// are dropped, so a point cloud concentrated at one point yields the
/// constant basis only.
class PolynomialBasis {
 public:
  PolynomialBasis() = default;

  // points: one row per sample.
  static PolynomialBasis standardized(const Matrix& points, int degree) {
    PolynomialBasis b;
    const Eigen::Index n = points.rows();
    const int d = static_cast<int>(points.cols());
    b.mean_ = Vector::Zero(d);
    b.scale_ = Vector::Ones(d);
    std::vector<int> active;
    for (int j = 0; j < d; ++j) {
      const double m = points.col(j).mean();
      const double var = n > 1 ? (points.col(j).array() - m).square().sum() / static_cast<double>(n - 1) : 0.0;
      const double sd = std::sqrt(var);
      b.mean_[j] = m;
      if (sd > 1e-12 * (1.0 + std::abs(m))) {
        b.scale_[j] = sd;
        active.push_back(j);
      }
    }
    b.build_exponents(active, degree);
    return b;
  }

  int size() const { return static_cast<int>(exponents_.size()); }
  int degree() const { return degree_; }
  const Vector& mean() const { return mean_; }
  const Vector& scale() const { return scale_; }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  void evaluate(const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) const {
    const Eigen::Index d = mean_.size();
    // powers[j * (degree+1) + e] = z_j^e
    thread_local std::vector<double> powers;
    powers.assign(static_cast<std::size_t>(d * (degree_ + 1)), 1.0);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double z = (x[j] - mean_[j]) / scale_[j];
      for (int e = 1; e <= degree_; ++e) powers[j * (degree_ + 1) + e] = powers[j * (degree_ + 1) + e - 1] * z;
    }
    for (std::size_t f = 0; f < exponents_.size(); ++f) {
      double v = 1.0;
      for (Eigen::Index j = 0; j < d; ++j) v *= powers[j * (degree_ + 1) + exponents_[f][j]];
      out[static_cast<Eigen::Index>(f)] = v;
    }
  }

  Vector evaluate(const Eigen::Ref<const Vector>& x) const {
    Vector out(size());
    evaluate(x, out);
    return out;
  }

 private:
  void build_exponents(const std::vector<int>& active, int degree) {
    degree_ = degree;
    const auto d = static_cast<std::size_t>(mean_.size());
    exponents_.clear();
    std::vector<int> current(d, 0);
    // Grouped by total degree; the constant comes first.
    for (int total = 0; total <= degree; ++total) {
      append_degree(active, 0, total, current);
    }
  }

  void append_degree(const std::vector<int>& active, std::size_t pos, int remaining, std::vector<int>& current) {
    if (pos == active.size()) {
      if (remaining == 0) exponents_.push_back(current);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[active[pos]] = e;
      append_degree(active, pos + 1, remaining - e, current);
    }
    current[active[pos]] = 0;
  }

  Vector mean_;
  Vector scale_;
  int degree_ = 0;
  std::vector<std::vector<int>> exponents_;
};

}  // namespace npf
