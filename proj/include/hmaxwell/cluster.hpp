#pragma once

#include "hmaxwell/fem.hpp"
#include "hmaxwell/geometry.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hmx {

struct Cluster {
  std::vector<int> indices;  // sorted DOF ids
  Box3 box;                  // tight box over the supports of all members
  int level = 0;
  std::array<int, 2> children{-1, -1};

  bool is_leaf() const { return children[0] < 0; }
  std::size_t size() const { return indices.size(); }
  /// Side of the enclosing cube B_{R_tau}.
  double cube_side() const { return box.cube_side(); }
};

/// Binary geometric cluster tree over DOFs. Node 0 is the root.
class ClusterTree {
 public:
  ClusterTree() = default;

  /// `support_boxes[i]` bounds supp Psi_i, `anchors[i]` is the point used to split (edge midpoint).
  ClusterTree(std::vector<Box3> support_boxes, std::vector<Point3> anchors, int n_leaf)
      : support_(std::move(support_boxes)), anchor_(std::move(anchors)), n_leaf_(n_leaf) {
    if (n_leaf < 1) throw std::invalid_argument("ClusterTree: n_leaf must be >= 1");
    if (support_.size() != anchor_.size()) throw std::invalid_argument("ClusterTree: size mismatch");
    std::vector<int> all(support_.size());
    std::iota(all.begin(), all.end(), 0);
    build(std::move(all), 0);
  }

  const Cluster& operator[](int id) const { return nodes_.at(id); }
  const std::vector<Cluster>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  int root() const { return 0; }
  int n_leaf() const { return n_leaf_; }
  int num_indices() const { return static_cast<int>(support_.size()); }
  const std::vector<Box3>& support_boxes() const { return support_; }

  int depth() const {
    int d = 0;
    for (const auto& c : nodes_) d = std::max(d, c.level);
    return d;
  }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
    return out;
  }

 private:
  Box3 box_of(const std::vector<int>& idx) const {
    Box3 b;
    for (int i : idx) b.extend(support_[i]);
    return b;
  }

  static Box3 anchor_box(const std::vector<Point3>& anchors, const std::vector<int>& idx) {
    Box3 b;
    for (int i : idx) b.extend(anchors[i]);
    return b;
  }

  std::pair<std::vector<int>, std::vector<int>> split_at(const std::vector<int>& idx, int axis, double value) const {
    std::vector<int> lo, hi;
    for (int i : idx) (anchor_[i](axis) <= value ? lo : hi).push_back(i);
    return {std::move(lo), std::move(hi)};
  }

  // Midpoint bisection of the cluster box along its longest axis. If that leaves one side
  // empty, bisect the box of the anchors instead; identical anchors are split by count.
  std::pair<std::vector<int>, std::vector<int>> bisect(const std::vector<int>& idx, const Box3& box) const {
    int axis = box.longest_axis();
    auto parts = split_at(idx, axis, box.center()(axis));
    if (!parts.first.empty() && !parts.second.empty()) return parts;
    const Box3 ab = anchor_box(anchor_, idx);
    axis = ab.longest_axis();
    if (ab.extent()(axis) > 0.0) {
      parts = split_at(idx, axis, ab.center()(axis));
      if (!parts.first.empty() && !parts.second.empty()) return parts;
    }
    const auto mid = idx.begin() + static_cast<std::ptrdiff_t>(idx.size() / 2);
    return {std::vector<int>(idx.begin(), mid), std::vector<int>(mid, idx.end())};
  }

  int build(std::vector<int> idx, int level) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].box = box_of(idx);
    nodes_[id].level = level;
    if (static_cast<int>(idx.size()) > n_leaf_) {
      auto [lo, hi] = bisect(idx, nodes_[id].box);
      const int a = build(std::move(lo), level + 1);
      const int b = build(std::move(hi), level + 1);
      nodes_[id].children = {a, b};
    }
    std::sort(idx.begin(), idx.end());
    nodes_[id].indices = std::move(idx);
    return id;
  }

  std::vector<Box3> support_;
  std::vector<Point3> anchor_;
  int n_leaf_ = 1;
  std::vector<Cluster> nodes_;
};

/// Bounding box of supp Psi_i (union of the tets sharing the edge) for every DOF.
inline std::vector<Box3> dof_support_boxes(const Mesh& mesh, const DofMap& dofs) {
  std::vector<Box3> boxes(dofs.size());
  for (int i = 0; i < dofs.size(); ++i)
    for (int t : mesh.support_tets(dofs.interior_edges[i]))
      for (int v : mesh.tets()[t]) boxes[i].extend(mesh.vertices()[v]);
  return boxes;
}

inline ClusterTree build_cluster_tree(const Mesh& mesh, const DofMap& dofs, int n_leaf) {
  std::vector<Point3> anchors(dofs.size());
  for (int i = 0; i < dofs.size(); ++i) anchors[i] = mesh.edge_midpoint(dofs.interior_edges[i]);
  return ClusterTree(dof_support_boxes(mesh, dofs), std::move(anchors), n_leaf);
}

/// min{diam B_tau, diam B_sigma} <= eta * dist(B_tau, B_sigma), with dist > 0.
inline bool is_admissible(const Box3& a, const Box3& b, double eta) {
  const double dist = box_distance(a, b);
  return dist > 0.0 && std::min(a.diameter(), b.diameter()) <= eta * dist;
}

struct BlockPartition {
  std::vector<std::pair<int, int>> far;
  std::vector<std::pair<int, int>> near;
  double eta = 2.0;
};

inline BlockPartition build_block_partition(const ClusterTree& tree, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("build_block_partition: eta must be positive");
  BlockPartition p;
  p.eta = eta;
  if (tree.size() == 0) return p;
  std::vector<std::pair<int, int>> stack{{tree.root(), tree.root()}};
  while (!stack.empty()) {
    const auto [t, s] = stack.back();
    stack.pop_back();
    const Cluster& ct = tree[t];
    const Cluster& cs = tree[s];
    if (is_admissible(ct.box, cs.box, eta)) {
      p.far.emplace_back(t, s);
    } else if (ct.is_leaf() && cs.is_leaf()) {
      p.near.emplace_back(t, s);
    } else if (ct.is_leaf()) {
      for (int c : cs.children) stack.emplace_back(t, c);
    } else if (cs.is_leaf()) {
      for (int c : ct.children) stack.emplace_back(c, s);
    } else {
      for (int a : ct.children)
        for (int b : cs.children) stack.emplace_back(a, b);
    }
  }
  std::sort(p.far.begin(), p.far.end());
  std::sort(p.near.begin(), p.near.end());
  return p;
}

/// Max number of far-field partners of any cluster, as row or as column.
inline int sparsity_constant(const BlockPartition& p) {
  std::map<int, int> rows, cols;
  int c = 0;
  for (const auto& [t, s] : p.far) {
    c = std::max(c, ++rows[t]);
    c = std::max(c, ++cols[s]);
  }
  return c;
}

/// Same count over all blocks of the partition (far and near).
inline int block_sparsity_constant(const BlockPartition& p) {
  std::map<int, int> rows, cols;
  int c = 0;
  for (const auto* list : {&p.far, &p.near})
    for (const auto& [t, s] : *list) {
      c = std::max(c, ++rows[t]);
      c = std::max(c, ++cols[s]);
    }
  return c;
}

}  // namespace hmx
