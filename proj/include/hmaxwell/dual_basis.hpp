#pragma once

#include "hmaxwell/fem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace hmx {

/// Functions lambda_i supported on a single carrier tet with <lambda_i, Psi_j> = delta_ij.
///
/// lambda_i is stored through its coefficients in the carrier's local Whitney basis; the
/// carrier is the first tet (in id order) containing the edge of DOF i.
struct DualBasis {
  struct Entry {
    int carrier = -1;
    Vector6d coefficients = Vector6d::Zero();
    double l2_norm = 0.0;
  };
  std::vector<Entry> entries;

  int size() const { return static_cast<int>(entries.size()); }
};

inline DualBasis dual_basis(const Mesh& mesh, const DofMap& dofs) {
  DualBasis basis;
  basis.entries.resize(dofs.size());
  for (int i = 0; i < dofs.size(); ++i) {
    const int edge = dofs.interior_edges[i];
    const auto support = mesh.support_tets(edge);
    auto& entry = basis.entries[i];
    entry.carrier = support.front();
    const int local = mesh.local_edge_index(entry.carrier, edge);
    const double sign = mesh.tet_edges()[entry.carrier][local].sign;
    const Matrix6d Ml = local_mass(mesh.geometry(entry.carrier));
    Eigen::LLT<Matrix6d> llt(Ml);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("dual_basis: singular local mass matrix on tet " + std::to_string(entry.carrier));
    // Psi_i restricted to the carrier is sign * phi_local
    entry.coefficients = sign * llt.solve(Vector6d::Unit(local));
    entry.l2_norm = std::sqrt(entry.coefficients.dot(Ml * entry.coefficients));
  }
  return basis;
}

/// Lambda_I(E_h)_i = <lambda_i, E_h> for an edge-element function given by DOF coefficients.
template <class Scalar>
VectorT<Scalar> apply_dual(const Mesh& mesh, const DofMap& dofs, const DualBasis& basis, const VectorT<Scalar>& coeffs,
                           std::span<const int> indices) {
  VectorT<Scalar> out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& entry = basis.entries[indices[k]];
    const Matrix6d Ml = local_mass(mesh.geometry(entry.carrier));
    const auto td = tet_dofs(mesh, dofs, entry.carrier);
    Eigen::Matrix<Scalar, 6, 1> local = Eigen::Matrix<Scalar, 6, 1>::Zero();
    for (int l = 0; l < 6; ++l)
      if (td.dof[l] >= 0) local(l) = td.sign[l] * coeffs(td.dof[l]);
    out(static_cast<Eigen::Index>(k)) = entry.coefficients.cast<Scalar>().dot(Ml.cast<Scalar>() * local);
  }
  return out;
}

/// Load vector f_j = <F_b, Psi_j> of F_b = sum_{i in cluster} b_i lambda_i.
template <class Scalar>
VectorT<Scalar> dual_combination_load(const Mesh& mesh, const DofMap& dofs, const DualBasis& basis,
                                      std::span<const int> indices, const VectorT<Scalar>& b) {
  VectorT<Scalar> f = VectorT<Scalar>::Zero(dofs.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& entry = basis.entries[indices[k]];
    const Matrix6d Ml = local_mass(mesh.geometry(entry.carrier));
    const Vector6d moments = Ml * entry.coefficients;  // <lambda_i, phi_l> for each local l
    const auto td = tet_dofs(mesh, dofs, entry.carrier);
    for (int l = 0; l < 6; ++l)
      if (td.dof[l] >= 0) f(td.dof[l]) += b(static_cast<Eigen::Index>(k)) * (td.sign[l] * moments(l));
  }
  return f;
}

}  // namespace hmx
