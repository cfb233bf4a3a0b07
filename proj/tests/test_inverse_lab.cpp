#include "hmaxwell/checks.hpp"
#include "hmaxwell/inverse_lab.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hmx;

TEST(FitDecay, PlainExponentialIsRecovered) {
  std::vector<double> r, e;
  for (int k = 1; k <= 20; ++k) {
    r.push_back(k);
    e.push_back(std::pow(2.0, -k));
  }
  const auto fit = fit_decay(r, e);
  ASSERT_TRUE(fit.fitted);
  EXPECT_NEAR(fit.q, 0.5, 1e-6);
  EXPECT_LT(fit.rms_exp, 1e-12);
}

TEST(FitDecay, RootExponentialIsRecovered) {
  std::vector<double> r, e;
  for (int k : {1, 2, 4, 8, 12, 16, 20, 40, 80}) {
    r.push_back(k);
    e.push_back(std::exp(-root_exponential_feature(k)));
  }
  const auto fit = fit_decay(r, e);
  EXPECT_NEAR(fit.b, 1.0, 1e-3);
  EXPECT_NEAR(fit.log_c_root, 0.0, 1e-9);
}

TEST(FitDecay, ConstantDataAndEdgeCases) {
  const std::vector<double> r{1, 2, 3, 4, 5}, c(5, 0.3);
  EXPECT_NEAR(fit_decay(r, c).q, 1.0, 1e-12);
  const std::vector<double> short_r{1, 2, 3}, short_e{1, 0.5, 0.25};
  EXPECT_THROW(fit_decay(short_r, short_e), std::invalid_argument);
  const std::vector<double> floor_e{1e-20, 1e-16, 0.0, 1e-15};
  const auto skipped = fit_decay(std::vector<double>{1, 2, 3, 4}, floor_e);
  EXPECT_FALSE(skipped.fitted);
  EXPECT_NE(skipped.notice.find("1e-14"), std::string::npos);
  const auto partial = fit_decay(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0.5, 0.25, 0.125, 0.0});
  EXPECT_TRUE(partial.fitted);
  EXPECT_EQ(partial.points, 3);
  EXPECT_NEAR(partial.q, 0.5, 1e-12);
}

TEST(DenseInverse, SingleDof) {
  const Discretization d(1, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  EXPECT_NEAR(B(0, 0), 1.0 / sys.A.coeff(0, 0), 1e-15 * std::abs(B(0, 0)));
}

TEST(DenseInverse, ResidualSymmetryAndMass) {
  const Discretization d(3, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const Eigen::MatrixXd A(sys.A);
  const Eigen::MatrixXd B = dense_inverse<double>(A);
  EXPECT_LE((A * B - Eigen::MatrixXd::Identity(A.rows(), A.cols())).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((B - B.transpose()).norm(), 1e-8 * B.norm());
  const Eigen::MatrixXd Mi = dense_inverse<double>(Eigen::MatrixXd(sys.M));
  EXPECT_LE((Mi - Mi.transpose()).norm(), 1e-10 * Mi.norm());
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(0.5 * (Mi + Mi.transpose())).info(), Eigen::Success);
}

TEST(DenseInverse, ComplexInverseIsComplexSymmetric) {
  const Discretization d(3, 1.0);
  const auto sys = assemble_system<Complex>(d.mesh, d.dofs, Complex(1.0, 0.5));
  const Eigen::MatrixXcd B = dense_inverse<Complex>(sys.A);
  EXPECT_LE((B - B.transpose()).norm(), 1e-8 * B.norm());
}

TEST(DenseInverse, SingularThrows) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Ones(4, 4);
  EXPECT_THROW(dense_inverse<double>(S), std::runtime_error);
  EXPECT_THROW(dense_inverse<double>(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(BlockSvd, TrivialBlocks) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(10, 10);
  const std::vector<int> a{0, 1, 2}, b{5, 6, 7, 8};
  EXPECT_EQ(block_svd<double>(I, a, b).cwiseAbs().maxCoeff(), 0.0);
  Eigen::MatrixXd R = Eigen::VectorXd::LinSpaced(10, 1, 10) * Eigen::VectorXd::LinSpaced(10, -2, 3).transpose();
  const Eigen::VectorXd s = block_svd<double>(R, a, b);
  EXPECT_GT(s(0), 0.0);
  EXPECT_LT(s(1), 1e-12 * s(0));
}

TEST(BlockSvd, FarBlocksOfFemInverse) {
  const Discretization d(4, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 8);
  const auto p = build_block_partition(tree, 2.0);
  ASSERT_FALSE(p.far.empty());
  const auto [t, s] = p.far.front();
  const Eigen::VectorXd sv = block_svd(B, tree, p, t, s);
  for (Eigen::Index k = 1; k < sv.size(); ++k) EXPECT_LE(sv(k), sv(k - 1));
  EXPECT_GE(sv.minCoeff(), 0.0);
  // Interlacing: a sub-block never has larger singular values.
  const std::vector<int> sub(tree[t].indices.begin(), tree[t].indices.begin() + tree[t].size() / 2);
  const Eigen::VectorXd ss = block_svd<double>(B, sub, tree[s].indices);
  for (Eigen::Index k = 0; k < ss.size(); ++k) EXPECT_LE(ss(k), sv(k) * (1 + 1e-12));
  const auto near = p.near.front();
  EXPECT_THROW(block_svd(B, tree, p, near.first, near.second), std::invalid_argument);
}

TEST(RankSweep, ExtremeRanks) {
  const Discretization d(4, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 8);
  const auto p = build_block_partition(tree, 2.0);
  ASSERT_FALSE(p.far.empty());
  const std::vector<int> ranks{0, d.size()};
  const auto sweep = rank_sweep(B, tree, p, ranks, {1e-10, 2000, 1});
  // r = 0: the error is the far part of B.
  Eigen::MatrixXd far_part = Eigen::MatrixXd::Zero(B.rows(), B.cols());
  for (const auto& [t, s] : p.far)
    for (int i : tree[t].indices)
      for (int j : tree[s].indices) far_part(i, j) = B(i, j);
  const double oracle = Eigen::JacobiSVD<Eigen::MatrixXd>(far_part).singularValues()(0);
  EXPECT_TRUE(sweep.rows[0].converged);
  EXPECT_NEAR(sweep.rows[0].abs_err, oracle, 1e-6 * oracle);
  // At full rank the error is rounding noise and the power iteration need not settle.
  EXPECT_LE(sweep.rows[1].rel_err, 1e-10);
  for (const auto& row : sweep.rows) {
    EXPECT_LE(row.abs_err, row.bound_value * 1.000001 + 1e-14 * sweep.inverse_norm);
  }
}

TEST(TransferCheck, IdentityOnEveryFarPair) {
  const Discretization d(4, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const auto basis = dual_basis(d.mesh, d.dofs);
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 8);
  const auto p = build_block_partition(tree, 2.0);
  ASSERT_FALSE(p.far.empty());
  const TransferCheck<double> check(d, sys, basis);
  for (const auto& [t, s] : p.far) {
    const auto res = check.check(B, tree[t].indices, tree[s].indices, 3, 42);
    EXPECT_LT(res.max_rel_discrepancy, 1e-8);
    EXPECT_LT(res.max_load_deviation, 1e-12);
  }
}

TEST(TransferCheck, ZeroAndUnitRightHandSides) {
  const Discretization d(4, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const auto basis = dual_basis(d.mesh, d.dofs);
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 8);
  const auto p = build_block_partition(tree, 2.0);
  const auto [t, s] = p.far.front();
  const auto& tau = tree[t].indices;
  const auto& sigma = tree[s].indices;
  const TransferCheck<double> check(d, sys, basis);
  const Eigen::MatrixXd block = extract_block(B, tau, sigma);
  const auto zero = check.run(block, tau, sigma, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sigma.size())));
  EXPECT_EQ(zero.first, 0.0);
  EXPECT_EQ(zero.second, 0.0);
  const auto unit = check.run(block, tau, sigma, Eigen::VectorXd::Unit(static_cast<Eigen::Index>(sigma.size()), 0));
  EXPECT_LT(unit.first, 1e-8);
  EXPECT_LT(unit.second, 1e-12);
}

TEST(DecayReport, OneEntryPerFarBlock) {
  const Discretization d(4, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 8);
  const auto p = build_block_partition(tree, 2.0);
  const auto rep = decay_report(B, tree, p);
  ASSERT_EQ(rep.blocks.size(), p.far.size());
  for (const auto& blk : rep.blocks) {
    EXPECT_EQ(blk.singular_values.size(), std::min(blk.rows, blk.cols));
    if (blk.fit.fitted) EXPECT_GT(blk.fit.q, 0.0);
  }
}
