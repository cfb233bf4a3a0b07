#pragma once

#include "hmaxwell/quadrature.hpp"

#include <array>
#include <cmath>
#include <random>
#include <vector>

namespace hmx {

/// Trivariate polynomial as a list of monomials c * x^i y^j z^k.
class Polynomial3 {
 public:
  struct Term {
    std::array<int, 3> exponent{};
    double coefficient = 0.0;
  };

  Polynomial3() = default;
  explicit Polynomial3(std::vector<Term> terms) : terms_(std::move(terms)) {}

  const std::vector<Term>& terms() const { return terms_; }

  double operator()(const Point3& x) const {
    double s = 0.0;
    for (const auto& t : terms_)
      s += t.coefficient * std::pow(x(0), t.exponent[0]) * std::pow(x(1), t.exponent[1]) * std::pow(x(2), t.exponent[2]);
    return s;
  }

  Polynomial3 derivative(int axis) const {
    std::vector<Term> d;
    for (const auto& t : terms_) {
      if (t.exponent[axis] == 0) continue;
      Term dt = t;
      dt.coefficient *= t.exponent[axis];
      --dt.exponent[axis];
      d.push_back(dt);
    }
    return Polynomial3(std::move(d));
  }

  /// All monomials of total degree <= `degree` with standard normal coefficients.
  template <class Rng>
  static Polynomial3 random(int degree, Rng& rng) {
    std::normal_distribution<double> normal;
    std::vector<Term> terms;
    for (int i = 0; i <= degree; ++i)
      for (int j = 0; i + j <= degree; ++j)
        for (int k = 0; i + j + k <= degree; ++k) terms.push_back({{i, j, k}, normal(rng)});
    return Polynomial3(std::move(terms));
  }

 private:
  std::vector<Term> terms_;
};

/// Vector field with polynomial components and an exact curl.
struct PolyVectorField {
  std::array<Polynomial3, 3> component;

  Point3 operator()(const Point3& x) const { return {component[0](x), component[1](x), component[2](x)}; }

  PolyVectorField curl() const {
    const auto diff = [this](int comp, int axis) { return component[comp].derivative(axis); };
    const auto sub = [](const Polynomial3& a, const Polynomial3& b) {
      auto terms = a.terms();
      for (auto t : b.terms()) {
        t.coefficient = -t.coefficient;
        terms.push_back(t);
      }
      return Polynomial3(std::move(terms));
    };
    return {{sub(diff(2, 1), diff(1, 2)), sub(diff(0, 2), diff(2, 0)), sub(diff(1, 0), diff(0, 1))}};
  }

  template <class Rng>
  static PolyVectorField random(int degree, Rng& rng) {
    return {{Polynomial3::random(degree, rng), Polynomial3::random(degree, rng), Polynomial3::random(degree, rng)}};
  }
};

}  // namespace hmx
