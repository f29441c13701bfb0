#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Dense>

namespace npf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised for malformed arguments: dimension mismatches, violated
// preconditions, inconsistent ensembles.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct Ball {
  Vector center;
  double radius = 1.0;
};

struct AxisBox {
  Vector lo;
  Vector hi;
};

/// Closed convex domain D-bar with the geometric helpers of the penalization
/// scheme:
///   project            nearest point of D-bar,
///   penalty_gradient   delta(x) = 2 (x - project(x)), gradient of the squared distance,
///   distance_extension l(x), signed distance to the boundary (positive inside),
///                      clipped to [-normal_cutoff, normal_cutoff],
///   inward_normal      gradient of the signed distance, unit inward normal on the boundary.
///
/// The signed distance is used as is (no C2 mollification); its gradient is
/// only defined almost everywhere and inward_normal returns zero on the
/// medial axis (ball center, ties between faces).
class Domain {
 public:
  using Shape = std::variant<Interval, Ball, AxisBox>;

  static Domain interval(double lo, double hi, double normal_cutoff = 1.0) {
    return Domain(Interval{lo, hi}, normal_cutoff);
  }
  static Domain ball(Vector center, double radius, double normal_cutoff = 1.0) {
    return Domain(Ball{std::move(center), radius}, normal_cutoff);
  }
  static Domain box(Vector lo, Vector hi, double normal_cutoff = 1.0) {
    return Domain(AxisBox{std::move(lo), std::move(hi)}, normal_cutoff);
  }

  explicit Domain(Shape shape, double normal_cutoff = 1.0)
      : shape_(std::move(shape)), cutoff_(normal_cutoff) {
    if (!(normal_cutoff > 0.0) || !std::isfinite(normal_cutoff)) {
      throw InputError("normal_cutoff must be > 0");
    }
    std::visit([this](const auto& s) { validate(s); }, shape_);
  }

  int dim() const { return dim_; }
  double normal_cutoff() const { return cutoff_; }
  const Shape& shape() const { return shape_; }

  Vector project(const Vector& x) const {
    check(x);
    if (const auto* b = std::get_if<Ball>(&shape_)) {
      const Vector r = x - b->center;
      const double norm = r.norm();
      if (norm <= b->radius) return x;
      return b->center + (b->radius / norm) * r;
    }
    const auto [lo, hi] = box_bounds();
    return x.cwiseMax(lo).cwiseMin(hi);
  }

  Vector penalty_gradient(const Vector& x) const { return 2.0 * (x - project(x)); }

  // Unclipped signed distance to the boundary.
  double signed_distance(const Vector& x) const {
    check(x);
    if (const auto* b = std::get_if<Ball>(&shape_)) {
      return b->radius - (x - b->center).norm();
    }
    const auto [lo, hi] = box_bounds();
    const Vector p = x.cwiseMax(lo).cwiseMin(hi);
    const Vector outside = x - p;
    if (outside.squaredNorm() > 0.0) return -outside.norm();
    return std::min((x - lo).minCoeff(), (hi - x).minCoeff());
  }

  double distance_extension(const Vector& x) const {
    return std::clamp(signed_distance(x), -cutoff_, cutoff_);
  }

  /// Gradient of the signed distance. Beyond normal_cutoff the direction is
  /// kept (it is already constant along normal rays), so the inward pull
  /// never vanishes for far excursions.
  Vector inward_normal(const Vector& x) const {
    check(x);
    Vector n = Vector::Zero(dim_);
    if (const auto* b = std::get_if<Ball>(&shape_)) {
      const Vector r = x - b->center;
      const double norm = r.norm();
      if (norm > 0.0) n = -r / norm;
      return n;
    }
    const auto [lo, hi] = box_bounds();
    const Vector p = x.cwiseMax(lo).cwiseMin(hi);
    const Vector outside = p - x;
    const double out_norm = outside.norm();
    if (out_norm > 0.0) return outside / out_norm;

    // Inside or on the boundary: the nearest face wins, ties are singular.
    double best = std::numeric_limits<double>::infinity();
    int best_axis = -1;
    double best_sign = 0.0;
    bool tie = false;
    for (int i = 0; i < dim_; ++i) {
      const double to_lo = x[i] - lo[i];
      const double to_hi = hi[i] - x[i];
      for (const auto& [dist, sign] : {std::pair{to_lo, 1.0}, std::pair{to_hi, -1.0}}) {
        if (dist < best) {
          best = dist;
          best_axis = i;
          best_sign = sign;
          tie = false;
        } else if (dist == best) {
          tie = true;
        }
      }
    }
    if (!tie && best_axis >= 0) n[best_axis] = best_sign;
    return n;
  }

  bool contains(const Vector& x, double tol = 0.0) const { return signed_distance(x) >= -tol; }

  // Distance from x to the boundary (both sides).
  double boundary_distance(const Vector& x) const { return std::abs(signed_distance(x)); }

  // Axis-aligned bounding box of D-bar.
  std::pair<Vector, Vector> bounding_box() const {
    if (const auto* b = std::get_if<Ball>(&shape_)) {
      const Vector r = Vector::Constant(dim_, b->radius);
      return {b->center - r, b->center + r};
    }
    return {lo_, hi_};
  }

  /// True when the penalty flow xdot = -n delta(x) decays each coordinate
  /// independently toward its face (boxes and intervals).
  bool separable_penalty() const { return !std::holds_alternative<Ball>(shape_); }

 private:
  void validate(const Interval& s) {
    if (!(s.lo < s.hi) || !std::isfinite(s.lo) || !std::isfinite(s.hi)) {
      throw InputError("Interval requires finite lo < hi");
    }
    dim_ = 1;
    lo_ = Vector::Constant(1, s.lo);
    hi_ = Vector::Constant(1, s.hi);
  }
  void validate(const Ball& s) {
    if (s.center.size() == 0) throw InputError("Ball center must be non-empty");
    if (!(s.radius > 0.0) || !std::isfinite(s.radius)) throw InputError("Ball radius must be > 0");
    if (!s.center.allFinite()) throw InputError("Ball center must be finite");
    dim_ = static_cast<int>(s.center.size());
  }
  void validate(const AxisBox& s) {
    if (s.lo.size() == 0 || s.lo.size() != s.hi.size()) {
      throw InputError("AxisBox lo and hi must have the same non-zero length");
    }
    if (!s.lo.allFinite() || !s.hi.allFinite()) throw InputError("AxisBox bounds must be finite");
    for (Eigen::Index i = 0; i < s.lo.size(); ++i) {
      if (!(s.lo[i] < s.hi[i])) {
        throw InputError("AxisBox requires lo[" + std::to_string(i) + "] < hi[" + std::to_string(i) + "]");
      }
    }
    dim_ = static_cast<int>(s.lo.size());
    lo_ = s.lo;
    hi_ = s.hi;
  }

  std::pair<const Vector&, const Vector&> box_bounds() const { return {lo_, hi_}; }

  void check(const Vector& x) const {
    if (x.size() != dim_) {
      throw InputError("point has dimension " + std::to_string(x.size()) + ", domain has " +
                       std::to_string(dim_));
    }
  }

  Shape shape_;
  double cutoff_;
  int dim_ = 0;
  Vector lo_, hi_;  // box and interval bounds
};

}  // namespace npf
