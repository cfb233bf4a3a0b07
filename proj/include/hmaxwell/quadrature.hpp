#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hmx {

using Point3 = Eigen::Vector3d;

/// A quadrature rule on a reference domain: points and weights.
template <int Dim>
struct QuadratureRule {
  std::vector<Eigen::Matrix<double, Dim, 1>> points;
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};

/// Gauss-Legendre rule with `n` points on [0, 1].
inline QuadratureRule<1> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  QuadratureRule<1> rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  // Legendre P_n and its derivative at x
  const auto legendre = [n](double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
  };
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    rule.points[i](0) = 0.5 * (1.0 - x);
    rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Points needed per direction so the rule is exact for polynomials of `degree`.
inline int gauss_points_for_degree(int degree) { return std::max(1, (degree + 2) / 2); }

/// Rule on the segment [0, 1] exact to `degree`.
inline QuadratureRule<1> segment_rule(int degree) { return gauss_legendre(gauss_points_for_degree(degree)); }

/// Collapsed (Duffy) product rule on the reference triangle {u, v >= 0, u + v <= 1}.
inline QuadratureRule<2> triangle_rule(int degree) {
  const auto g = gauss_legendre(gauss_points_for_degree(degree + 1));
  QuadratureRule<2> rule;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u = g.points[i](0);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double v = g.points[j](0) * (1.0 - u);
      rule.points.emplace_back(u, v);
      rule.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - u));
    }
  }
  return rule;
}

/// Collapsed product rule on the reference tetrahedron, weights sum to 1/6.
inline QuadratureRule<3> tetrahedron_rule(int degree) {
  const auto g = gauss_legendre(gauss_points_for_degree(degree + 2));
  QuadratureRule<3> rule;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u = g.points[i](0);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double v = g.points[j](0);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double w = g.points[k](0);
        const double x = u;
        const double y = v * (1.0 - u);
        const double z = w * (1.0 - u) * (1.0 - v);
        rule.points.emplace_back(x, y, z);
        rule.weights.push_back(g.weights[i] * g.weights[j] * g.weights[k] * (1.0 - u) * (1.0 - u) * (1.0 - v));
      }
    }
  }
  return rule;
}

/// Symmetric 4-point rule, exact for quadratics; weights sum to 1/6.
inline QuadratureRule<3> tetrahedron_rule_p2() {
  constexpr double a = 0.5854101966249685;
  constexpr double b = 0.1381966011250105;
  QuadratureRule<3> rule;
  rule.points = {Eigen::Vector3d(b, b, b), Eigen::Vector3d(a, b, b), Eigen::Vector3d(b, a, b),
                 Eigen::Vector3d(b, b, a)};
  rule.weights = {1.0 / 24.0, 1.0 / 24.0, 1.0 / 24.0, 1.0 / 24.0};
  return rule;
}

}  // namespace hmx
