#pragma once

#include "hmaxwell/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hmx {

/// Axis-aligned box [lo, hi].
struct Box3 {
  Point3 lo = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 hi = Point3::Constant(-std::numeric_limits<double>::infinity());

  static Box3 cube(const Point3& center, double side) {
    return {center.array() - 0.5 * side, center.array() + 0.5 * side};
  }

  bool empty() const { return (hi.array() < lo.array()).any(); }
  void extend(const Point3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Box3& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  Point3 extent() const { return empty() ? Point3::Zero() : Point3(hi - lo); }
  Point3 center() const { return 0.5 * (lo + hi); }
  double diameter() const { return extent().norm(); }
  /// Side of the smallest enclosing cube.
  double cube_side() const { return extent().maxCoeff(); }
  int longest_axis() const {
    Eigen::Index axis = 0;
    extent().maxCoeff(&axis);
    return static_cast<int>(axis);
  }
  bool contains(const Point3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
};

/// Euclidean distance between two boxes (0 if they touch or overlap).
inline double box_distance(const Box3& a, const Box3& b) {
  Point3 gap = Point3::Zero();
  for (int k = 0; k < 3; ++k) gap(k) = std::max({0.0, a.lo(k) - b.hi(k), b.lo(k) - a.hi(k)});
  return gap.norm();
}

/// Affine tetrahedron with cached barycentric gradients.
class TetGeometry {
 public:
  explicit TetGeometry(const std::array<Point3, 4>& v) : v_(v) {
    Eigen::Matrix3d J;
    J.col(0) = v[1] - v[0];
    J.col(1) = v[2] - v[0];
    J.col(2) = v[3] - v[0];
    const double det = J.determinant();
    const double scale = std::max({J.col(0).norm(), J.col(1).norm(), J.col(2).norm()});
    if (!(std::abs(det) > 1e-14 * scale * scale * scale)) throw std::domain_error("degenerate tetrahedron");
    volume_ = det / 6.0;
    const Eigen::Matrix3d Jinv = J.inverse();
    // lambda_k = row k-1 of Jinv applied to (x - v0), lambda_0 = 1 - sum
    for (int k = 1; k < 4; ++k) grad_[k] = Jinv.row(k - 1).transpose();
    grad_[0] = -(grad_[1] + grad_[2] + grad_[3]);
    jacobian_ = J;
  }

  const Point3& vertex(int k) const { return v_[k]; }
  /// Signed volume (positive for positively oriented vertex order).
  double signed_volume() const { return volume_; }
  double volume() const { return std::abs(volume_); }
  const Point3& grad_lambda(int k) const { return grad_[k]; }
  const Eigen::Matrix3d& jacobian() const { return jacobian_; }

  Point3 map(const Point3& ref) const { return v_[0] + jacobian_ * ref; }

  std::array<double, 4> barycentric(const Point3& x) const {
    std::array<double, 4> l{};
    double s = 0.0;
    for (int k = 1; k < 4; ++k) {
      l[k] = grad_[k].dot(x - v_[0]);
      s += l[k];
    }
    l[0] = 1.0 - s;
    return l;
  }

  double diameter() const {
    double d = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) d = std::max(d, (v_[a] - v_[b]).norm());
    return d;
  }

  Box3 bounding_box() const {
    Box3 b;
    for (const auto& p : v_) b.extend(p);
    return b;
  }

 private:
  std::array<Point3, 4> v_;
  std::array<Point3, 4> grad_;
  Eigen::Matrix3d jacobian_;
  double volume_ = 0.0;
};

/// Local edge (a, b) with a < b, in the fixed order used everywhere.
inline constexpr std::array<std::array<int, 2>, 6> kLocalEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
/// Local face k is opposite local vertex k.
inline constexpr std::array<std::array<int, 3>, 4> kLocalFaces{{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

/// True when the interiors of the tetrahedron and the box overlap with positive measure.
/// Separating-axis test over box normals, tet face normals and edge cross products.
inline bool tet_box_overlap(const TetGeometry& tet, const Box3& box, double tol) {
  std::vector<Point3> axes{Point3::UnitX(), Point3::UnitY(), Point3::UnitZ()};
  for (int k = 0; k < 4; ++k) axes.push_back(tet.grad_lambda(k));
  for (const auto& e : kLocalEdges) {
    const Point3 d = tet.vertex(e[1]) - tet.vertex(e[0]);
    for (int k = 0; k < 3; ++k) {
      const Point3 c = d.cross(Point3::Unit(k));
      if (c.norm() > 1e-12 * d.norm()) axes.push_back(c);
    }
  }
  for (const auto& raw : axes) {
    const Point3 axis = raw.normalized();
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (int k = 0; k < 4; ++k) {
      const double t = axis.dot(tet.vertex(k));
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    const Point3 c = box.center();
    const double r = 0.5 * (box.extent().array() * axis.array().abs()).sum();
    const double bmin = axis.dot(c) - r, bmax = axis.dot(c) + r;
    if (std::min(tmax, bmax) - std::max(tmin, bmin) <= tol) return false;
  }
  return true;
}

/// True when the closed tetrahedron lies in the closed box.
inline bool tet_inside_box(const TetGeometry& tet, const Box3& box, double tol) {
  for (int k = 0; k < 4; ++k)
    if (!box.contains(tet.vertex(k), tol)) return false;
  return true;
}

}  // namespace hmx
