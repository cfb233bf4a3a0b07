#pragma once

#include "hmaxwell/geometry.hpp"
#include "hmaxwell/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

namespace hmx {

using VectorField = std::function<Point3(const Point3&)>;

/// Values and (constant) curls of the six local Whitney functions at a point.
struct WhitneyValues {
  std::array<Point3, 6> value;
  std::array<Point3, 6> curl;
};

/// Whitney edge functions phi_ab = l_a grad l_b - l_b grad l_a, local edge a -> b with a < b.
inline WhitneyValues local_whitney(const TetGeometry& tet, const Point3& x) {
  const auto lam = tet.barycentric(x);
  WhitneyValues out;
  for (int e = 0; e < 6; ++e) {
    const int a = kLocalEdges[e][0], b = kLocalEdges[e][1];
    const Point3& ga = tet.grad_lambda(a);
    const Point3& gb = tet.grad_lambda(b);
    out.value[e] = lam[a] * gb - lam[b] * ga;
    out.curl[e] = 2.0 * ga.cross(gb);
  }
  return out;
}

inline std::array<Point3, 6> whitney_curls(const TetGeometry& tet) {
  std::array<Point3, 6> c;
  for (int e = 0; e < 6; ++e) c[e] = 2.0 * tet.grad_lambda(kLocalEdges[e][0]).cross(tet.grad_lambda(kLocalEdges[e][1]));
  return c;
}

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Local curl-curl matrix: the curls are constant, so the integral is |T| c_i . c_j.
inline Matrix6d local_curl_curl(const TetGeometry& tet) {
  const auto c = whitney_curls(tet);
  Matrix6d K;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) K(i, j) = tet.volume() * c[i].dot(c[j]);
  return K;
}

/// Local Whitney mass matrix with the symmetric 4-point rule (the integrand is quadratic).
inline Matrix6d local_mass(const TetGeometry& tet) {
  static const auto rule = tetrahedron_rule_p2();
  Matrix6d M = Matrix6d::Zero();
  const double jac = 6.0 * tet.volume();
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto w = local_whitney(tet, tet.map(rule.points[q]));
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) M(i, j) += rule.weights[q] * jac * w.value[i].dot(w.value[j]);
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < i; ++j) M(i, j) = M(j, i);
  return M;
}

/// Local nodal Laplacian: |T| grad l_a . grad l_b.
inline Eigen::Matrix4d local_nodal_stiffness(const TetGeometry& tet) {
  Eigen::Matrix4d S;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) S(a, b) = tet.volume() * tet.grad_lambda(a).dot(tet.grad_lambda(b));
  return S;
}

/// Local P1 mass: |T| (1 + delta_ab) / 20.
inline Eigen::Matrix4d local_nodal_mass(const TetGeometry& tet) {
  return tet.volume() / 20.0 * (Eigen::Matrix4d::Ones() + Eigen::Matrix4d::Identity());
}

/// Lowest-order Nedelec interpolant: coefficient of edge a -> b is the line integral of U along it.
inline Vector6d nedelec_interpolant(const TetGeometry& tet, const VectorField& field, int degree = 5) {
  const auto rule = segment_rule(degree);
  Vector6d c = Vector6d::Zero();
  for (int e = 0; e < 6; ++e) {
    const Point3& pa = tet.vertex(kLocalEdges[e][0]);
    const Point3 d = tet.vertex(kLocalEdges[e][1]) - pa;
    for (std::size_t q = 0; q < rule.size(); ++q) c(e) += rule.weights[q] * field(pa + rule.points[q](0) * d).dot(d);
  }
  return c;
}

/// Evaluate sum_e c_e phi_e at x.
inline Point3 evaluate_whitney(const TetGeometry& tet, const Vector6d& c, const Point3& x) {
  const auto w = local_whitney(tet, x);
  Point3 u = Point3::Zero();
  for (int e = 0; e < 6; ++e) u += c(e) * w.value[e];
  return u;
}

inline Point3 whitney_curl(const TetGeometry& tet, const Vector6d& c) {
  const auto curls = whitney_curls(tet);
  Point3 u = Point3::Zero();
  for (int e = 0; e < 6; ++e) u += c(e) * curls[e];
  return u;
}

/// Outward unit normal and area of local face k (opposite vertex k).
inline std::pair<Point3, double> face_normal_area(const TetGeometry& tet, int k) {
  const auto& f = kLocalFaces[k];
  Point3 n = (tet.vertex(f[1]) - tet.vertex(f[0])).cross(tet.vertex(f[2]) - tet.vertex(f[0]));
  const double area = 0.5 * n.norm();
  n.normalize();
  if (n.dot(tet.vertex(f[0]) - tet.vertex(k)) < 0.0) n = -n;
  return {n, area};
}

/// Lowest-order Raviart-Thomas interpolant: outward flux of U through each face.
/// Only constant-weight face moments are used.
inline Eigen::Vector4d rt_face_interpolant(const TetGeometry& tet, const VectorField& field, int degree = 4) {
  const auto rule = triangle_rule(degree);
  Eigen::Vector4d flux = Eigen::Vector4d::Zero();
  for (int k = 0; k < 4; ++k) {
    const auto& f = kLocalFaces[k];
    const auto [normal, area] = face_normal_area(tet, k);
    const Point3& p0 = tet.vertex(f[0]);
    const Point3 e1 = tet.vertex(f[1]) - p0, e2 = tet.vertex(f[2]) - p0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point3 x = p0 + rule.points[q](0) * e1 + rule.points[q](1) * e2;
      flux(k) += 2.0 * area * rule.weights[q] * field(x).dot(normal);
    }
  }
  return flux;
}

/// RT0 function with unit outward flux through face k: (x - p_k) / (3 |T|).
inline Point3 rt_basis(const TetGeometry& tet, int k, const Point3& x) { return (x - tet.vertex(k)) / (3.0 * tet.volume()); }

inline Point3 evaluate_rt(const TetGeometry& tet, const Eigen::Vector4d& flux, const Point3& x) {
  Point3 u = Point3::Zero();
  for (int k = 0; k < 4; ++k) u += flux(k) * rt_basis(tet, k, x);
  return u;
}

/// Max over faces of |flux of curl(r_T U) - flux of w_T(curl U)|.
inline double commuting_check(const TetGeometry& tet, const VectorField& field, const VectorField& curl_field,
                              int degree = 5) {
  const Point3 curl_r = whitney_curl(tet, nedelec_interpolant(tet, field, degree));
  const Eigen::Vector4d w = rt_face_interpolant(tet, curl_field, std::max(degree, 4));
  double residual = 0.0;
  for (int k = 0; k < 4; ++k) {
    const auto [normal, area] = face_normal_area(tet, k);
    residual = std::max(residual, std::abs(curl_r.dot(normal) * area - w(k)));
  }
  return residual;
}

}  // namespace hmx
