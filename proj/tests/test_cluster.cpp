#include "hmaxwell/checks.hpp"
#include "hmaxwell/cluster.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

using namespace hmx;

namespace {

void expect_tree_invariants(const Discretization& d, const ClusterTree& tree) {
  for (int id = 0; id < static_cast<int>(tree.size()); ++id) {
    const auto& c = tree[id];
    ASSERT_FALSE(c.indices.empty()) << "empty cluster " << id;
    if (c.is_leaf()) {
      EXPECT_LE(static_cast<int>(c.size()), tree.n_leaf());
    } else {
      const auto& a = tree[c.children[0]];
      const auto& b = tree[c.children[1]];
      EXPECT_EQ(a.level, c.level + 1);
      std::vector<int> merged(a.indices);
      merged.insert(merged.end(), b.indices.begin(), b.indices.end());
      std::sort(merged.begin(), merged.end());
      EXPECT_EQ(merged, c.indices);
    }
    for (int i : c.indices)
      for (int t : d.mesh.support_tets(d.dofs.interior_edges[i]))
        for (int v : d.mesh.tets()[t]) EXPECT_TRUE(c.box.contains(d.mesh.vertices()[v], 1e-14));
  }
}

}  // namespace

TEST(Cluster, SmallIndexSetIsSingleRoot) {
  const Discretization d(2, 1.0);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, d.size());
  EXPECT_EQ(tree.size(), 1u);
  EXPECT_TRUE(tree[0].is_leaf());
  EXPECT_EQ(static_cast<int>(tree[0].size()), d.size());
}

TEST(Cluster, TreeInvariants) {
  const Discretization d(4, 1.0);
  for (int n_leaf : {8, 32}) {
    const auto tree = build_cluster_tree(d.mesh, d.dofs, n_leaf);
    expect_tree_invariants(d, tree);
    std::set<int> covered;
    for (int leaf : tree.leaves())
      for (int i : tree[leaf].indices) EXPECT_TRUE(covered.insert(i).second);
    EXPECT_EQ(static_cast<int>(covered.size()), d.size());
    EXPECT_EQ(tree[0].level, 0);
  }
}

TEST(Cluster, DepthIsLogarithmic) {
  for (int n : {3, 4, 6}) {
    const Discretization d(n, 1.0);
    const auto tree = build_cluster_tree(d.mesh, d.dofs, 16);
    EXPECT_LE(tree.depth(), 3.0 * std::log2(static_cast<double>(d.size())));
  }
}

TEST(Cluster, InvalidLeafSizeThrows) {
  const Discretization d(1, 1.0);
  EXPECT_THROW(build_cluster_tree(d.mesh, d.dofs, 0), std::invalid_argument);
}

TEST(Admissibility, Examples) {
  const Box3 unit{Point3::Zero(), Point3::Ones()};
  EXPECT_FALSE(is_admissible(unit, unit, 1e6));
  const Box3 far{Point3(11, 0, 0), Point3(12, 1, 1)};
  EXPECT_NEAR(box_distance(unit, far), 10.0, 1e-15);
  EXPECT_TRUE(is_admissible(unit, far, 1.0));
  // diam sqrt(3) against dist 1: needs eta >= sqrt(3)
  const Box3 near{Point3(2, 0, 0), Point3(3, 1, 1)};
  EXPECT_FALSE(is_admissible(unit, near, 1.7));
  EXPECT_TRUE(is_admissible(unit, near, 1.8));
  const Box3 touching{Point3(1, 0, 0), Point3(2, 1, 1)};
  EXPECT_FALSE(is_admissible(unit, touching, 1e6));
}

TEST(Partition, TilesIndexSquareExactly) {
  const Discretization d(4, 1.0);
  for (int n_leaf : {8, 16, 32})
    for (double eta : {1.0, 2.0}) {
      const auto tree = build_cluster_tree(d.mesh, d.dofs, n_leaf);
      const auto p = build_block_partition(tree, eta);
      EXPECT_TRUE(partition_tiles_exactly(tree, p)) << n_leaf << " " << eta;
      for (const auto& [t, s] : p.far) EXPECT_TRUE(is_admissible(tree[t].box, tree[s].box, eta));
      for (const auto& [t, s] : p.near) {
        EXPECT_TRUE(tree[t].is_leaf() && tree[s].is_leaf());
        EXPECT_FALSE(is_admissible(tree[t].box, tree[s].box, eta));
      }
    }
}

TEST(Partition, SparsityConstantRecount) {
  const Discretization d(4, 1.0);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 8);
  const auto p = build_block_partition(tree, 2.0);
  ASSERT_FALSE(p.far.empty());
  int expected = 0;
  for (int id = 0; id < static_cast<int>(tree.size()); ++id) {
    int as_row = 0, as_col = 0;
    for (const auto& [t, s] : p.far) {
      as_row += t == id;
      as_col += s == id;
    }
    expected = std::max({expected, as_row, as_col});
  }
  EXPECT_EQ(sparsity_constant(p), expected);
  EXPECT_GE(block_sparsity_constant(p), expected);
}

TEST(Partition, FarBlocksAreDisjointAndSymmetric) {
  const Discretization d(5, 1.0);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 32);
  const auto p = build_block_partition(tree, 2.0);
  std::set<std::pair<int, int>> far(p.far.begin(), p.far.end());
  for (const auto& [t, s] : p.far) {
    EXPECT_TRUE(far.count({s, t}));
    std::vector<int> common;
    std::set_intersection(tree[t].indices.begin(), tree[t].indices.end(), tree[s].indices.begin(),
                          tree[s].indices.end(), std::back_inserter(common));
    EXPECT_TRUE(common.empty());
  }
  EXPECT_THROW(build_block_partition(tree, 0.0), std::invalid_argument);
}
