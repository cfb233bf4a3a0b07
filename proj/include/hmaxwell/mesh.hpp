#pragma once

#include "hmaxwell/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hmx {

/// Global edge attached to a local tet edge, with orientation relative to the local direction.
struct SignedEdge {
  int id = -1;
  int sign = 1;
};

/// Structured Kuhn (Freudenthal) tetrahedralization of the box [lo, lo + L]^3.
///
/// Every subcube is split into six tetrahedra sharing its main diagonal. Vertices are
/// numbered lexicographically (x fastest), edges point from the lower to the higher vertex
/// id, and tets are stored positively oriented. The mesh is immutable after construction.
class Mesh {
 public:
  Mesh(int n, double L, Point3 lower = Point3::Zero()) : n_(n), L_(L), lower_(std::move(lower)) {
    if (n < 1) throw std::invalid_argument("Mesh: need n >= 1 subdivisions");
    if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("Mesh: side length must be positive");
    build_vertices();
    build_tets();
    build_edges();
    build_flags();
    build_metrics();
  }

  int subdivisions() const { return n_; }
  double side() const { return L_; }
  const Point3& lower() const { return lower_; }
  Box3 domain() const { return {lower_, lower_ + Point3::Constant(L_)}; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_tets() const { return tets_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 4>>& tets() const { return tets_; }
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<std::array<SignedEdge, 6>>& tet_edges() const { return tet_edges_; }
  const std::vector<bool>& boundary_vertex() const { return boundary_vertex_; }
  const std::vector<bool>& boundary_edge() const { return boundary_edge_; }

  TetGeometry geometry(int t) const {
    const auto& v = tets_.at(t);
    return TetGeometry({vertices_[v[0]], vertices_[v[1]], vertices_[v[2]], vertices_[v[3]]});
  }

  Point3 edge_midpoint(int e) const { return 0.5 * (vertices_[edges_[e][0]] + vertices_[edges_[e][1]]); }

  /// Tets containing edge `e`, in increasing tet id.
  std::span<const int> support_tets(int e) const {
    if (e < 0 || static_cast<std::size_t>(e) >= edges_.size())
      throw std::out_of_range("support_tets: invalid edge id " + std::to_string(e));
    return {edge_tets_.data() + edge_tets_offset_[e], edge_tets_.data() + edge_tets_offset_[e + 1]};
  }

  /// Tets containing vertex `v`, in increasing tet id.
  std::span<const int> vertex_tets(int v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= vertices_.size())
      throw std::out_of_range("vertex_tets: invalid vertex id " + std::to_string(v));
    return {vertex_tets_.data() + vertex_tets_offset_[v], vertex_tets_.data() + vertex_tets_offset_[v + 1]};
  }

  /// Local index (0..5) of global edge `e` in tet `t`, or -1.
  int local_edge_index(int t, int e) const {
    for (int k = 0; k < 6; ++k)
      if (tet_edges_[t][k].id == e) return k;
    return -1;
  }

  /// Mesh width: maximum tet diameter.
  double h() const { return h_; }
  /// Largest diam(T) / |T|^(1/3) over all tets.
  double shape_regularity() const { return gamma_; }

 private:
  int vertex_id(int i, int j, int k) const { return i + (n_ + 1) * (j + (n_ + 1) * k); }

  void build_vertices() {
    const double step = L_ / n_;
    vertices_.reserve(static_cast<std::size_t>(n_ + 1) * (n_ + 1) * (n_ + 1));
    for (int k = 0; k <= n_; ++k)
      for (int j = 0; j <= n_; ++j)
        for (int i = 0; i <= n_; ++i) vertices_.push_back(lower_ + step * Point3(i, j, k));
  }

  void build_tets() {
    // Paths from corner (0,0,0) to (1,1,1) along the axes in permuted order.
    constexpr std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    tets_.reserve(static_cast<std::size_t>(n_) * n_ * n_ * 6);
    for (int k = 0; k < n_; ++k)
      for (int j = 0; j < n_; ++j)
        for (int i = 0; i < n_; ++i)
          for (const auto& p : perms) {
            std::array<int, 3> c{i, j, k};
            std::array<int, 4> tet{};
            tet[0] = vertex_id(c[0], c[1], c[2]);
            for (int s = 0; s < 3; ++s) {
              ++c[p[s]];
              tet[s + 1] = vertex_id(c[0], c[1], c[2]);
            }
            const TetGeometry g({vertices_[tet[0]], vertices_[tet[1]], vertices_[tet[2]], vertices_[tet[3]]});
            if (g.signed_volume() < 0.0) std::swap(tet[2], tet[3]);
            tets_.push_back(tet);
          }
  }

  void build_edges() {
    std::map<std::pair<int, int>, int> index;
    for (const auto& t : tets_)
      for (const auto& le : kLocalEdges) {
        const int a = std::min(t[le[0]], t[le[1]]);
        const int b = std::max(t[le[0]], t[le[1]]);
        index.emplace(std::pair{a, b}, 0);
      }
    edges_.reserve(index.size());
    for (auto& [key, id] : index) {
      id = static_cast<int>(edges_.size());
      edges_.push_back({key.first, key.second});
    }
    tet_edges_.resize(tets_.size());
    std::vector<std::vector<int>> edge_tets(edges_.size());
    std::vector<std::vector<int>> vertex_tets(vertices_.size());
    for (std::size_t t = 0; t < tets_.size(); ++t) {
      const auto& tv = tets_[t];
      for (int l = 0; l < 6; ++l) {
        const int va = tv[kLocalEdges[l][0]], vb = tv[kLocalEdges[l][1]];
        const int id = index.at({std::min(va, vb), std::max(va, vb)});
        tet_edges_[t][l] = {id, va < vb ? 1 : -1};
        edge_tets[id].push_back(static_cast<int>(t));
      }
      for (int v : tv) vertex_tets[v].push_back(static_cast<int>(t));
    }
    flatten(edge_tets, edge_tets_, edge_tets_offset_);
    flatten(vertex_tets, vertex_tets_, vertex_tets_offset_);
  }

  static void flatten(const std::vector<std::vector<int>>& lists, std::vector<int>& data, std::vector<std::size_t>& offset) {
    offset.assign(1, 0);
    for (const auto& l : lists) {
      data.insert(data.end(), l.begin(), l.end());
      offset.push_back(data.size());
    }
  }

  bool on_face_plane(const Point3& p, int axis, double value) const { return std::abs(p(axis) - value) <= 1e-12 * L_; }

  void build_flags() {
    boundary_vertex_.assign(vertices_.size(), false);
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      for (int k = 0; k < 3; ++k)
        if (on_face_plane(vertices_[v], k, lower_(k)) || on_face_plane(vertices_[v], k, lower_(k) + L_))
          boundary_vertex_[v] = true;
    boundary_edge_.assign(edges_.size(), false);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const Point3& a = vertices_[edges_[e][0]];
      const Point3& b = vertices_[edges_[e][1]];
      for (int k = 0; k < 3; ++k)
        for (double value : {lower_(k), lower_(k) + L_})
          if (on_face_plane(a, k, value) && on_face_plane(b, k, value)) boundary_edge_[e] = true;
    }
  }

  void build_metrics() {
    h_ = 0.0;
    gamma_ = 0.0;
    for (std::size_t t = 0; t < tets_.size(); ++t) {
      const auto g = geometry(static_cast<int>(t));
      const double d = g.diameter();
      h_ = std::max(h_, d);
      gamma_ = std::max(gamma_, d / std::cbrt(g.volume()));
    }
  }

  int n_;
  double L_;
  Point3 lower_;
  std::vector<Point3> vertices_;
  std::vector<std::array<int, 4>> tets_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<SignedEdge, 6>> tet_edges_;
  std::vector<bool> boundary_vertex_;
  std::vector<bool> boundary_edge_;
  std::vector<int> edge_tets_;
  std::vector<std::size_t> edge_tets_offset_;
  std::vector<int> vertex_tets_;
  std::vector<std::size_t> vertex_tets_offset_;
  double h_ = 0.0;
  double gamma_ = 0.0;
};

inline Mesh build_box_mesh(int n, double L) { return Mesh(n, L); }

inline double mesh_width(const Mesh& mesh) { return mesh.h(); }

inline std::span<const int> support_tets(const Mesh& mesh, int edge_id) { return mesh.support_tets(edge_id); }

}  // namespace hmx
