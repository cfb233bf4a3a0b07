#pragma once

#include "hmaxwell/mesh.hpp"
#include "hmaxwell/whitney.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace hmx {

using SparseMatrix = Eigen::SparseMatrix<double>;
template <class Scalar>
using SparseMatrixT = Eigen::SparseMatrix<Scalar>;
template <class Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Complex = std::complex<double>;

template <class T>
inline constexpr bool is_complex_v = false;
template <class T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

/// Edge degrees of freedom of X_{h,0}: one per edge not lying on the boundary.
struct DofMap {
  std::vector<int> interior_edges;
  std::vector<int> edge_to_dof;  // -1 on boundary edges

  int size() const { return static_cast<int>(interior_edges.size()); }
  int dof(int edge) const { return edge_to_dof[edge]; }
};

inline DofMap make_dofmap(const Mesh& mesh) {
  DofMap map;
  map.edge_to_dof.assign(mesh.num_edges(), -1);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e)
    if (!mesh.boundary_edge()[e]) {
      map.edge_to_dof[e] = static_cast<int>(map.interior_edges.size());
      map.interior_edges.push_back(static_cast<int>(e));
    }
  return map;
}

/// Local-to-global data of one tet: DOF index (or -1) and orientation sign per local edge.
struct TetDofs {
  std::array<int, 6> dof;
  std::array<double, 6> sign;
};

inline TetDofs tet_dofs(const Mesh& mesh, const DofMap& dofs, int t) {
  TetDofs out;
  for (int l = 0; l < 6; ++l) {
    const auto& se = mesh.tet_edges()[t][l];
    out.dof[l] = dofs.dof(se.id);
    out.sign[l] = se.sign;
  }
  return out;
}

/// Curl-curl and mass matrices over DOF indices, integrated over a set of tets.
struct EdgeForms {
  SparseMatrix K;
  SparseMatrix M;
};

inline std::vector<int> all_tets(const Mesh& mesh) {
  std::vector<int> t(mesh.num_tets());
  std::iota(t.begin(), t.end(), 0);
  return t;
}

inline EdgeForms assemble_edge_forms(const Mesh& mesh, const DofMap& dofs, std::span<const int> tets) {
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(tets.size() * 36);
  mt.reserve(tets.size() * 36);
  for (int t : tets) {
    const auto g = mesh.geometry(t);
    const Matrix6d Kl = local_curl_curl(g);
    const Matrix6d Ml = local_mass(g);
    const auto td = tet_dofs(mesh, dofs, t);
    for (int i = 0; i < 6; ++i) {
      if (td.dof[i] < 0) continue;
      for (int j = 0; j < 6; ++j) {
        if (td.dof[j] < 0) continue;
        const double s = td.sign[i] * td.sign[j];
        kt.emplace_back(td.dof[i], td.dof[j], s * Kl(i, j));
        mt.emplace_back(td.dof[i], td.dof[j], s * Ml(i, j));
      }
    }
  }
  EdgeForms f;
  f.K.resize(dofs.size(), dofs.size());
  f.M.resize(dofs.size(), dofs.size());
  f.K.setFromTriplets(kt.begin(), kt.end());
  f.M.setFromTriplets(mt.begin(), mt.end());
  return f;
}

/// Interior-vertex space S^{1,1}_0 with its Laplacian and mass matrix.
struct NodalSpace {
  std::vector<int> interior_vertices;
  std::vector<int> vertex_to_dof;  // -1 on boundary vertices
  SparseMatrix stiffness;
  SparseMatrix mass;

  int size() const { return static_cast<int>(interior_vertices.size()); }
  int dof(int vertex) const { return vertex_to_dof[vertex]; }
};

struct NodalForms {
  SparseMatrix stiffness;
  SparseMatrix mass;
};

inline NodalForms assemble_nodal_forms(const Mesh& mesh, const std::vector<int>& vertex_to_dof, int size,
                                       std::span<const int> tets) {
  std::vector<Eigen::Triplet<double>> st, mt;
  for (int t : tets) {
    const auto g = mesh.geometry(t);
    const Eigen::Matrix4d S = local_nodal_stiffness(g);
    const Eigen::Matrix4d Mn = local_nodal_mass(g);
    const auto& tv = mesh.tets()[t];
    for (int a = 0; a < 4; ++a) {
      const int i = vertex_to_dof[tv[a]];
      if (i < 0) continue;
      for (int b = 0; b < 4; ++b) {
        const int j = vertex_to_dof[tv[b]];
        if (j < 0) continue;
        st.emplace_back(i, j, S(a, b));
        mt.emplace_back(i, j, Mn(a, b));
      }
    }
  }
  NodalForms f;
  f.stiffness.resize(size, size);
  f.mass.resize(size, size);
  f.stiffness.setFromTriplets(st.begin(), st.end());
  f.mass.setFromTriplets(mt.begin(), mt.end());
  return f;
}

inline NodalSpace make_nodal_space(const Mesh& mesh) {
  NodalSpace s;
  s.vertex_to_dof.assign(mesh.num_vertices(), -1);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.boundary_vertex()[v]) {
      s.vertex_to_dof[v] = static_cast<int>(s.interior_vertices.size());
      s.interior_vertices.push_back(static_cast<int>(v));
    }
  const auto tets = all_tets(mesh);
  auto forms = assemble_nodal_forms(mesh, s.vertex_to_dof, s.size(), tets);
  s.stiffness = std::move(forms.stiffness);
  s.mass = std::move(forms.mass);
  return s;
}

/// Discrete gradient: maps nodal coefficients of S^{1,1}_0 to edge coefficients in X_{h,0}.
struct GradientMatrix {
  SparseMatrix G;  // N_dofs x N_interior_vertices

  template <class Scalar>
  VectorT<Scalar> apply(const VectorT<Scalar>& p) const { return G.cast<Scalar>() * p; }
};

/// Edge a -> b carries p(b) - p(a); boundary vertices carry 0.
inline GradientMatrix discrete_gradient(const Mesh& mesh, const DofMap& dofs, const NodalSpace& nodal) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < dofs.size(); ++i) {
    const auto& e = mesh.edges()[dofs.interior_edges[i]];
    if (const int a = nodal.dof(e[0]); a >= 0) t.emplace_back(i, a, -1.0);
    if (const int b = nodal.dof(e[1]); b >= 0) t.emplace_back(i, b, 1.0);
  }
  GradientMatrix g;
  g.G.resize(dofs.size(), nodal.size());
  g.G.setFromTriplets(t.begin(), t.end());
  return g;
}

/// Galerkin matrices of a(E, Psi) = <curl E, curl Psi> - kappa <E, Psi>.
template <class Scalar>
struct GalerkinSystem {
  SparseMatrix K;
  SparseMatrix M;
  Complex kappa;
  SparseMatrixT<Scalar> A;

  int size() const { return static_cast<int>(K.rows()); }
};

template <class Scalar>
GalerkinSystem<Scalar> assemble_system(const Mesh& mesh, const DofMap& dofs, Complex kappa) {
  if (kappa == Complex(0.0)) throw std::invalid_argument("assemble_system: kappa must be nonzero");
  if constexpr (!is_complex_v<Scalar>)
    if (kappa.imag() != 0.0) throw std::invalid_argument("assemble_system: complex kappa needs a complex scalar type");
  const auto tets = all_tets(mesh);
  auto forms = assemble_edge_forms(mesh, dofs, tets);
  GalerkinSystem<Scalar> sys;
  sys.K = std::move(forms.K);
  sys.M = std::move(forms.M);
  sys.kappa = kappa;
  Scalar k;
  if constexpr (is_complex_v<Scalar>)
    k = kappa;
  else
    k = kappa.real();
  sys.A = sys.K.template cast<Scalar>() - k * sys.M.template cast<Scalar>();
  sys.A.makeCompressed();
  return sys;
}

/// Everything built from the mesh alone, bundled for convenience.
struct Discretization {
  Mesh mesh;
  DofMap dofs;
  NodalSpace nodal;
  GradientMatrix gradient;

  Discretization(int n, double L)
      : mesh(n, L), dofs(make_dofmap(mesh)), nodal(make_nodal_space(mesh)), gradient(discrete_gradient(mesh, dofs, nodal)) {}

  double h() const { return mesh.h(); }
  int size() const { return dofs.size(); }
};

/// Load vector f_i = <F, Psi_i> by tet quadrature of the given degree.
inline Eigen::VectorXd load_vector(const Mesh& mesh, const DofMap& dofs, const VectorField& field, int degree = 4) {
  const auto rule = tetrahedron_rule(degree);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dofs.size());
  for (int t = 0; t < static_cast<int>(mesh.num_tets()); ++t) {
    const auto g = mesh.geometry(t);
    const auto td = tet_dofs(mesh, dofs, t);
    if (std::all_of(td.dof.begin(), td.dof.end(), [](int d) { return d < 0; })) continue;
    const double jac = 6.0 * g.volume();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point3 x = g.map(rule.points[q]);
      const Point3 F = field(x);
      if (!F.allFinite()) throw std::runtime_error("load_vector: quadrature failure, non-finite field value");
      const auto w = local_whitney(g, x);
      for (int l = 0; l < 6; ++l)
        if (td.dof[l] >= 0) f(td.dof[l]) += rule.weights[q] * jac * td.sign[l] * F.dot(w.value[l]);
    }
  }
  return f;
}

/// L2(Omega) projection onto X_{h,0}: solves M u = f.
inline Eigen::VectorXd l2_project(const Mesh& mesh, const DofMap& dofs, const SparseMatrix& M, const VectorField& field,
                                  int degree = 4) {
  const Eigen::VectorXd f = load_vector(mesh, dofs, field, degree);
  Eigen::SimplicialLLT<SparseMatrix> llt(M);
  if (llt.info() != Eigen::Success) throw std::runtime_error("l2_project: mass matrix is not positive definite");
  Eigen::VectorXd u = llt.solve(f);
  const double fn = f.norm();
  if (fn > 0.0 && (M * u - f).norm() > 1e-10 * fn) throw std::runtime_error("l2_project: solve residual too large");
  return u;
}

/// Rows/columns selected from a sparse matrix by index lists.
template <class Scalar>
SparseMatrixT<Scalar> restrict_matrix(const SparseMatrixT<Scalar>& A, std::span<const int> rows, std::span<const int> cols) {
  std::vector<int> col_pos(A.cols(), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_pos[cols[j]] = static_cast<int>(j);
  std::vector<int> row_pos(A.rows(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) row_pos[rows[i]] = static_cast<int>(i);
  std::vector<Eigen::Triplet<Scalar>> t;
  for (int k = 0; k < A.outerSize(); ++k)
    for (typename SparseMatrixT<Scalar>::InnerIterator it(A, k); it; ++it)
      if (row_pos[it.row()] >= 0 && col_pos[it.col()] >= 0) t.emplace_back(row_pos[it.row()], col_pos[it.col()], it.value());
  SparseMatrixT<Scalar> R(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  R.setFromTriplets(t.begin(), t.end());
  return R;
}

/// Mesh-conforming region: a union of whole tets with its local edge and nodal spaces.
struct Region {
  std::vector<int> tets;          // sorted
  std::vector<int> edge_dofs;     // DOFs of edges of region tets, sorted
  std::vector<int> vertex_dofs;   // interior-vertex DOFs of region tets, sorted
  bool touches_boundary = false;  // some region vertex lies on the domain boundary
  EdgeForms edge_forms;           // over all DOFs, integrated over the region only
  NodalForms nodal_forms;         // over all interior vertices, integrated over the region only
};

inline Region make_region(const Discretization& d, std::vector<int> tets) {
  Region r;
  std::sort(tets.begin(), tets.end());
  tets.erase(std::unique(tets.begin(), tets.end()), tets.end());
  r.tets = std::move(tets);
  std::vector<char> edge_mark(d.dofs.size(), 0), vert_mark(d.nodal.size(), 0);
  for (int t : r.tets) {
    for (const auto& se : d.mesh.tet_edges()[t])
      if (const int k = d.dofs.dof(se.id); k >= 0) edge_mark[k] = 1;
    for (int v : d.mesh.tets()[t]) {
      if (d.mesh.boundary_vertex()[v]) r.touches_boundary = true;
      if (const int k = d.nodal.dof(v); k >= 0) vert_mark[k] = 1;
    }
  }
  for (int i = 0; i < d.dofs.size(); ++i)
    if (edge_mark[i]) r.edge_dofs.push_back(i);
  for (int i = 0; i < d.nodal.size(); ++i)
    if (vert_mark[i]) r.vertex_dofs.push_back(i);
  r.edge_forms = assemble_edge_forms(d.mesh, d.dofs, r.tets);
  r.nodal_forms = assemble_nodal_forms(d.mesh, d.nodal.vertex_to_dof, d.nodal.size(), r.tets);
  return r;
}

template <class Scalar>
struct GradientProjection {
  VectorT<Scalar> potential;      // nodal coefficients over all interior vertices (0 off the region)
  VectorT<Scalar> gradient;       // edge coefficients G p
  double orthogonality_residual;  // relative residual of the Galerkin orthogonality on the region
};

/// L2(region) projection onto gradients of the localized nodal space.
///
/// Solves <grad p, grad v>_D = <E, grad v>_D for all local v. When the region does not touch
/// the boundary the constant mode is removed by pinning the first local vertex to zero.
template <class Scalar>
GradientProjection<Scalar> pi_nabla_project(const Discretization& d, const Region& region, const VectorT<Scalar>& field) {
  const auto& vd = region.vertex_dofs;
  GradientProjection<Scalar> out;
  out.potential = VectorT<Scalar>::Zero(d.nodal.size());
  out.gradient = VectorT<Scalar>::Zero(d.dofs.size());
  out.orthogonality_residual = 0.0;
  if (vd.empty()) return out;

  const SparseMatrixT<Scalar> Gs = d.gradient.G.cast<Scalar>();
  const VectorT<Scalar> rhs_all = Gs.transpose() * (region.edge_forms.M.cast<Scalar>() * field);
  const std::size_t pinned = region.touches_boundary ? 0 : 1;
  const std::span<const int> free(vd.data() + pinned, vd.size() - pinned);
  if (!free.empty()) {
    const SparseMatrix gram = restrict_matrix(region.nodal_forms.stiffness, free, free);
    Eigen::SimplicialLDLT<SparseMatrixT<Scalar>> ldlt(gram.cast<Scalar>());
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("pi_nabla_project: singular gradient Gram matrix");
    VectorT<Scalar> rhs(static_cast<Eigen::Index>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = rhs_all(free[i]);
    const VectorT<Scalar> p = ldlt.solve(rhs);
    for (std::size_t i = 0; i < free.size(); ++i) out.potential(free[i]) = p(static_cast<Eigen::Index>(i));
  }
  out.gradient = Gs * out.potential;

  const VectorT<Scalar> res_all = rhs_all - region.nodal_forms.stiffness.cast<Scalar>() * out.potential;
  double res = 0.0, scale = 0.0;
  for (int v : vd) {
    res = std::max(res, std::abs(res_all(v)));
    scale = std::max(scale, std::abs(rhs_all(v)));
  }
  out.orthogonality_residual = scale > 0.0 ? res / scale : res;
  return out;
}

/// Squared L2 norm of an edge-element function over the region.
template <class Scalar>
double region_l2_norm_sq(const Region& region, const VectorT<Scalar>& u) {
  return std::real(u.dot(region.edge_forms.M.cast<Scalar>() * u));
}

}  // namespace hmx
