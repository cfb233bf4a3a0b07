#pragma once

#include "hmaxwell/fem.hpp"
#include "hmaxwell/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmx {

/// Concentric cubes B_R and B_{(1+eps)R} sharing a center; R is the side length.
struct ConcentricPair {
  Point3 center = Point3::Constant(0.5);
  double R = 0.4;
  double eps = 0.5;

  Box3 inner() const { return Box3::cube(center, R); }
  Box3 outer() const { return Box3::cube(center, (1.0 + eps) * R); }
  double outer_side() const { return (1.0 + eps) * R; }
};

enum class HarmonicVariant { curl, grad };

inline const char* to_string(HarmonicVariant v) { return v == HarmonicVariant::curl ? "curl" : "grad"; }

/// Tets whose interior meets the box with positive measure: the mesh-conforming region of B.
inline std::vector<int> tets_intersecting(const Mesh& mesh, const Box3& box) {
  const double tol = 1e-12 * mesh.side();
  std::vector<int> out;
  for (int t = 0; t < static_cast<int>(mesh.num_tets()); ++t)
    if (tet_box_overlap(mesh.geometry(t), box, tol)) out.push_back(t);
  return out;
}

/// Tets contained in the closed box.
inline std::vector<int> tets_inside(const Mesh& mesh, const Box3& box) {
  const double tol = 1e-12 * mesh.side();
  std::vector<int> out;
  for (int t = 0; t < static_cast<int>(mesh.num_tets()); ++t)
    if (tet_inside_box(mesh.geometry(t), box, tol)) out.push_back(t);
  return out;
}

/// Edge DOFs whose basis support lies in the closed box (intersected with the domain).
inline std::vector<int> edge_dofs_supported_in(const Mesh& mesh, const DofMap& dofs, const Box3& box) {
  const double tol = 1e-12 * mesh.side();
  std::vector<int> out;
  for (int i = 0; i < dofs.size(); ++i) {
    const auto sup = mesh.support_tets(dofs.interior_edges[i]);
    if (std::all_of(sup.begin(), sup.end(), [&](int t) { return tet_inside_box(mesh.geometry(t), box, tol); }))
      out.push_back(i);
  }
  return out;
}

/// Interior vertices whose hat-function support lies in the closed box.
inline std::vector<int> vertex_dofs_supported_in(const Mesh& mesh, const NodalSpace& nodal, const Box3& box) {
  const double tol = 1e-12 * mesh.side();
  std::vector<int> out;
  for (int i = 0; i < nodal.size(); ++i) {
    const auto sup = mesh.vertex_tets(nodal.interior_vertices[i]);
    if (std::all_of(sup.begin(), sup.end(), [&](int t) { return tet_inside_box(mesh.geometry(t), box, tol); }))
      out.push_back(i);
  }
  return out;
}

/// Discretely L-harmonic (curl) or discretely harmonic (grad) functions on a box.
///
/// The space is the nullspace of the constraint rows. Columns outside `active` carry no
/// constraint and are free; only the active part is stored, as an orthonormal basis.
template <class Scalar>
struct HarmonicSpace {
  HarmonicVariant variant = HarmonicVariant::curl;
  Box3 box;
  int total_size = 0;               // N (edge DOFs) or number of interior vertices
  std::vector<int> rows;            // constraint rows, sorted
  std::vector<int> active;          // columns of the local basis, sorted
  MatrixT<Scalar> local_basis;      // |active| x k, orthonormal
  Eigen::VectorXd singular_values;  // of the row-restricted operator
  double nullspace_tolerance = 0.0;
  double constraint_residual = 0.0;  // max over local columns of max_i |(Op u)_i|

  int local_dimension() const { return static_cast<int>(local_basis.cols()); }
  int dimension() const { return local_dimension() + total_size - static_cast<int>(active.size()); }

  /// Column j of the local basis as a global coefficient vector.
  VectorT<Scalar> global_column(int j) const {
    VectorT<Scalar> u = VectorT<Scalar>::Zero(total_size);
    for (std::size_t k = 0; k < active.size(); ++k) u(active[k]) = local_basis(static_cast<Eigen::Index>(k), j);
    return u;
  }
};

namespace detail {

inline std::vector<int> union_sorted(std::vector<int> a, std::span<const int> b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

template <class Scalar>
std::vector<int> column_support(const SparseMatrixT<Scalar>& op, std::span<const int> rows) {
  std::vector<char> row_mark(op.rows(), 0), col_mark(op.cols(), 0);
  for (int r : rows) row_mark[r] = 1;
  for (int k = 0; k < op.outerSize(); ++k)
    for (typename SparseMatrixT<Scalar>::InnerIterator it(op, k); it; ++it)
      if (row_mark[it.row()]) col_mark[it.col()] = 1;
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(op.cols()); ++j)
    if (col_mark[j]) out.push_back(j);
  return out;
}

template <class Scalar>
HarmonicSpace<Scalar> nullspace_of_rows(const SparseMatrixT<Scalar>& op, std::vector<int> rows,
                                        std::span<const int> extra_active) {
  HarmonicSpace<Scalar> s;
  s.total_size = static_cast<int>(op.cols());
  s.rows = std::move(rows);
  s.active = union_sorted(column_support(op, s.rows), extra_active);
  const auto na = static_cast<Eigen::Index>(s.active.size());
  if (s.rows.empty()) {
    s.local_basis = MatrixT<Scalar>::Identity(na, na);
    return s;
  }
  const MatrixT<Scalar> R(restrict_matrix<Scalar>(op, s.rows, s.active));
  Eigen::BDCSVD<MatrixT<Scalar>> svd(R, Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("harmonic_space: SVD did not converge");
  s.singular_values = svd.singularValues();
  const double s1 = s.singular_values.size() > 0 ? s.singular_values(0) : 0.0;
  s.nullspace_tolerance = 1e-10 * s1;
  Eigen::Index rank = 0;
  while (rank < s.singular_values.size() && s.singular_values(rank) > s.nullspace_tolerance) ++rank;
  s.local_basis = svd.matrixV().rightCols(na - rank);
  if (s.local_basis.cols() > 0) s.constraint_residual = (R * s.local_basis).cwiseAbs().maxCoeff();
  return s;
}

}  // namespace detail

/// Harmonic space on `box`. Constraint rows are DOFs supported in the closed box; the stored
/// basis covers the rows' column support plus `extra_active`.
template <class Scalar>
HarmonicSpace<Scalar> harmonic_space(const Discretization& d, const GalerkinSystem<Scalar>& system, const Box3& box,
                                     HarmonicVariant variant, std::span<const int> extra_active = {}) {
  HarmonicSpace<Scalar> s;
  if (variant == HarmonicVariant::curl) {
    s = detail::nullspace_of_rows<Scalar>(system.A, edge_dofs_supported_in(d.mesh, d.dofs, box), extra_active);
  } else {
    const SparseMatrixT<Scalar> L = d.nodal.stiffness.cast<Scalar>();
    s = detail::nullspace_of_rows<Scalar>(L, vertex_dofs_supported_in(d.mesh, d.nodal, box), extra_active);
  }
  s.variant = variant;
  s.box = box;
  return s;
}

/// Gram matrices of the h-weighted norm (h^2/R^2) |D u|^2 + (1/R^2) |u|^2 on a region,
/// with D = curl or grad.
struct TripleNorm {
  HarmonicVariant variant = HarmonicVariant::curl;
  double h = 0.0;
  double R = 0.0;
  SparseMatrix gram;
};

inline TripleNorm triple_norm(const Region& region, HarmonicVariant variant, double h, double R) {
  TripleNorm t{variant, h, R, {}};
  const double a = h * h / (R * R), b = 1.0 / (R * R);
  if (variant == HarmonicVariant::curl)
    t.gram = a * region.edge_forms.K + b * region.edge_forms.M;
  else
    t.gram = a * region.nodal_forms.stiffness + b * region.nodal_forms.mass;
  return t;
}

struct CaccioppoliResult {
  HarmonicVariant variant = HarmonicVariant::curl;
  double ratio = 0.0;       // max ||D u||_{B_R} / |||u|||_{(1+eps)R} over the space
  double normalized = 0.0;  // ratio * eps / (1 + eps)
  double h = 0.0;
  double h_over_R = 0.0;
  bool hypothesis_holds = false;  // h / R < eps / 4
  bool regularized = false;       // outer Gram was shifted by 1e-14 to make it definite
  int dimension = 0;              // local dimension of the space
  int inner_tets = 0;
  int outer_tets = 0;
  double constraint_residual = 0.0;
};

/// Largest Caccioppoli ratio over the harmonic space built on the outer box of `pair`.
///
/// Numerator over tets inside the closed B_R; denominator over the mesh-conforming region of
/// B_{(1+eps)R}, measured with R' = (1+eps)R. Functions vanishing on the outer region are
/// invisible to both sides and are left out.
template <class Scalar>
CaccioppoliResult caccioppoli_ratio(const Discretization& d, const GalerkinSystem<Scalar>& system,
                                    const ConcentricPair& pair, HarmonicVariant variant) {
  CaccioppoliResult res;
  res.variant = variant;
  res.h = d.h();
  res.h_over_R = d.h() / pair.R;
  res.hypothesis_holds = res.h_over_R < pair.eps / 4.0;

  const Region outer = make_region(d, tets_intersecting(d.mesh, pair.outer()));
  const Region inner = make_region(d, tets_inside(d.mesh, pair.inner()));
  res.inner_tets = static_cast<int>(inner.tets.size());
  res.outer_tets = static_cast<int>(outer.tets.size());
  const bool curl = variant == HarmonicVariant::curl;
  const std::vector<int>& outer_dofs = curl ? outer.edge_dofs : outer.vertex_dofs;

  const auto space = harmonic_space<Scalar>(d, system, pair.outer(), variant, outer_dofs);
  res.constraint_residual = space.constraint_residual;
  res.dimension = space.local_dimension();
  if (space.active.size() != outer_dofs.size())
    throw std::logic_error("caccioppoli_ratio: constraint columns leave the outer region");
  if (res.dimension == 0 || inner.tets.empty()) return res;

  const SparseMatrix& num_full = curl ? inner.edge_forms.K : inner.nodal_forms.stiffness;
  const SparseMatrix den_full = triple_norm(outer, variant, d.h(), pair.outer_side()).gram;
  const MatrixT<Scalar> Q = space.local_basis;
  const MatrixT<Scalar> Na(restrict_matrix<double>(num_full, space.active, space.active).template cast<Scalar>());
  const MatrixT<Scalar> Da(restrict_matrix<double>(den_full, space.active, space.active).template cast<Scalar>());
  MatrixT<Scalar> Nr = Q.adjoint() * Na * Q;
  MatrixT<Scalar> Dr = Q.adjoint() * Da * Q;
  Nr = (0.5 * (Nr + Nr.adjoint())).eval();
  Dr = (0.5 * (Dr + Dr.adjoint())).eval();

  Eigen::LLT<MatrixT<Scalar>> llt(Dr);
  if (llt.info() != Eigen::Success) {
    res.regularized = true;
    Dr += 1e-14 * MatrixT<Scalar>::Identity(Dr.rows(), Dr.cols());
    llt.compute(Dr);
    if (llt.info() != Eigen::Success) throw std::runtime_error("caccioppoli_ratio: outer Gram not definite after shift");
  }
  // C = L^{-1} N L^{-H}
  MatrixT<Scalar> C = llt.matrixL().solve(Nr);
  C = llt.matrixL().solve(C.adjoint().eval()).adjoint().eval();
  C = (0.5 * (C + C.adjoint())).eval();
  Eigen::SelfAdjointEigenSolver<MatrixT<Scalar>> eig(C, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::runtime_error("caccioppoli_ratio: eigensolver failed");
  const double lmax = std::max(0.0, eig.eigenvalues().maxCoeff());
  res.ratio = std::sqrt(lmax);
  res.normalized = res.ratio * pair.eps / (1.0 + pair.eps);
  return res;
}

/// E = z + grad p on a region, with grad p the L2(region) projection of E onto local gradients.
template <class Scalar>
struct HelmholtzSplit {
  VectorT<Scalar> z;
  VectorT<Scalar> p;       // nodal coefficients
  VectorT<Scalar> grad_p;  // edge coefficients G p
  double orthogonality_residual = 0.0;
  double norm_sq_e = 0.0, norm_sq_z = 0.0, norm_sq_grad = 0.0;
  double pythagoras_defect = 0.0;  // | |z|^2 + |grad p|^2 - |E|^2 | / |E|^2
};

template <class Scalar>
HelmholtzSplit<Scalar> local_helmholtz(const Discretization& d, const Region& region, const VectorT<Scalar>& e) {
  const auto proj = pi_nabla_project<Scalar>(d, region, e);
  HelmholtzSplit<Scalar> out;
  out.p = proj.potential;
  out.grad_p = proj.gradient;
  out.z = e - proj.gradient;
  out.orthogonality_residual = proj.orthogonality_residual;
  out.norm_sq_e = region_l2_norm_sq<Scalar>(region, e);
  out.norm_sq_z = region_l2_norm_sq<Scalar>(region, out.z);
  out.norm_sq_grad = region_l2_norm_sq<Scalar>(region, out.grad_p);
  const double gap = std::abs(out.norm_sq_z + out.norm_sq_grad - out.norm_sq_e);
  out.pythagoras_defect = out.norm_sq_e > 0.0 ? gap / out.norm_sq_e : gap;
  return out;
}

/// For E discretely L-harmonic on `box`, the gradient part of its split on the region of `box`
/// is discretely harmonic there. Returns max_v |<grad p, grad v>| / (|E| |grad v|) over interior
/// vertices v supported in the closed box.
template <class Scalar>
double gradient_part_harmonic_check(const Discretization& d, const Region& region, const Box3& box,
                                    const VectorT<Scalar>& e) {
  const double en = std::sqrt(region_l2_norm_sq<Scalar>(region, e));
  if (en == 0.0) return 0.0;
  const auto proj = pi_nabla_project<Scalar>(d, region, e);
  const VectorT<Scalar> lp = region.nodal_forms.stiffness.cast<Scalar>() * proj.potential;
  double res = 0.0;
  for (int v : vertex_dofs_supported_in(d.mesh, d.nodal, box)) {
    const double gv = std::sqrt(region.nodal_forms.stiffness.coeff(v, v));
    if (gv > 0.0) res = std::max(res, std::abs(lp(v)) / (en * gv));
  }
  return res;
}

template <class Scalar>
struct PotentialRecovery {
  VectorT<Scalar> potential;  // nodal coefficients over all interior vertices (0 off the region)
  double residual = 0.0;      // |G phi - v| / |v| over region edges
  double curl_defect = 0.0;   // |K_D v| / (|K_D|_F |v|)
};

/// Nodal potential phi with grad phi = v on a simply connected region, for v discretely curl-free
/// there. Least squares on the region's edges; the first local vertex is pinned when the region
/// does not touch the boundary.
template <class Scalar>
PotentialRecovery<Scalar> exact_sequence_recover(const Discretization& d, const Region& region,
                                                 const VectorT<Scalar>& v) {
  static const std::string failure = "input not curl-free or region not simply connected";
  PotentialRecovery<Scalar> out;
  out.potential = VectorT<Scalar>::Zero(d.nodal.size());
  const auto& ed = region.edge_dofs;
  VectorT<Scalar> vd(static_cast<Eigen::Index>(ed.size()));
  for (std::size_t i = 0; i < ed.size(); ++i) vd(static_cast<Eigen::Index>(i)) = v(ed[i]);
  const double vn = vd.norm();
  if (vn == 0.0) return out;

  const SparseMatrix Kd = restrict_matrix<double>(region.edge_forms.K, ed, ed);
  const double kn = Kd.norm();
  out.curl_defect = kn > 0.0 ? (Kd.cast<Scalar>() * vd).norm() / (kn * vn) : 0.0;
  if (out.curl_defect > 1e-10) throw std::invalid_argument(failure);

  const auto& vx = region.vertex_dofs;
  const std::size_t pinned = region.touches_boundary ? 0 : 1;
  const std::span<const int> free(vx.data() + pinned, vx.size() - pinned);
  VectorT<Scalar> phi = VectorT<Scalar>::Zero(static_cast<Eigen::Index>(free.size()));
  const SparseMatrix Gd = restrict_matrix<double>(d.gradient.G, ed, free);
  if (!free.empty()) {
    const SparseMatrix normal = Gd.transpose() * Gd;
    Eigen::SimplicialLDLT<SparseMatrixT<Scalar>> ldlt(normal.cast<Scalar>());
    if (ldlt.info() != Eigen::Success) throw std::runtime_error(failure);
    phi = ldlt.solve(Gd.transpose().cast<Scalar>() * vd);
  }
  out.residual = (Gd.cast<Scalar>() * phi - vd).norm() / vn;
  if (!(out.residual <= 1e-9)) throw std::runtime_error(failure);
  for (std::size_t i = 0; i < free.size(); ++i) out.potential(free[i]) = phi(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace hmx
