#include "hmaxwell/checks.hpp"
#include "hmaxwell/dual_basis.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

using namespace hmx;

TEST(DualBasis, BiorthogonalOnSeveralMeshes) {
  for (int n : {2, 3, 4}) {
    const Discretization d(n, 1.0);
    const auto basis = dual_basis(d.mesh, d.dofs);
    ASSERT_EQ(basis.size(), d.size());
    EXPECT_LT(dual_biorthogonality_defect(d.mesh, d.dofs, basis), 1e-12) << "n=" << n;
  }
}

TEST(DualBasis, CarrierIsFirstSupportTet) {
  const Discretization d(3, 1.0);
  const auto basis = dual_basis(d.mesh, d.dofs);
  for (int i = 0; i < basis.size(); ++i)
    EXPECT_EQ(basis.entries[i].carrier, d.mesh.support_tets(d.dofs.interior_edges[i]).front());
}

TEST(DualBasis, ApplyDualRecoversCoefficients) {
  const Discretization d(3, 1.0);
  const auto basis = dual_basis(d.mesh, d.dofs);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  Eigen::VectorXd mu(d.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = normal(rng);
  std::vector<int> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  const Eigen::VectorXd got = apply_dual<double>(d.mesh, d.dofs, basis, mu, all);
  EXPECT_LT((got - mu).cwiseAbs().maxCoeff(), 1e-12 * mu.cwiseAbs().maxCoeff());
}

TEST(DualBasis, CombinationLoadIsCoefficientVector) {
  const Discretization d(3, 1.0);
  const auto basis = dual_basis(d.mesh, d.dofs);
  const std::vector<int> sigma{2, 5, 11, 40};
  Eigen::VectorXd b(4);
  b << 1.0, -0.5, 2.0, 0.25;
  const Eigen::VectorXd f = dual_combination_load<double>(d.mesh, d.dofs, basis, sigma, b);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(d.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) expected(sigma[k]) = b(static_cast<Eigen::Index>(k));
  EXPECT_LT((f - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DualBasis, NormScalesLikeInverseSqrtH) {
  std::vector<double> scaled;
  for (int n : {2, 3, 4, 6}) {
    const Discretization d(n, 1.0);
    scaled.push_back(max_dual_norm(dual_basis(d.mesh, d.dofs)) * std::sqrt(d.h()));
  }
  const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
  EXPECT_LE(*hi / *lo, 2.0);
}

TEST(DualBasis, ScalingWithSideLength) {
  // Same topology on a box twice as large: h doubles, |lambda| shrinks by 2^{-1/2}.
  const Discretization a(3, 1.0), b(3, 2.0);
  const double sa = max_dual_norm(dual_basis(a.mesh, a.dofs)) * std::sqrt(a.h());
  const double sb = max_dual_norm(dual_basis(b.mesh, b.dofs)) * std::sqrt(b.h());
  EXPECT_NEAR(sa, sb, 1e-12 * sa);
}
