#pragma once

// Property checks shared by the command-line verifier and the acceptance suite.

#include "hmaxwell/cluster.hpp"
#include "hmaxwell/dual_basis.hpp"
#include "hmaxwell/fem.hpp"
#include "hmaxwell/harmonic_lab.hpp"
#include "hmaxwell/polynomial.hpp"
#include "hmaxwell/whitney.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hmx {

/// Tetrahedron with vertices uniform in the unit cube and volume at least `min_volume`.
template <class Rng>
TetGeometry random_tet(Rng& rng, double min_volume = 1e-2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    std::array<Point3, 4> v;
    for (auto& p : v) p = Point3(u(rng), u(rng), u(rng));
    const double vol = (v[1] - v[0]).cross(v[2] - v[0]).dot(v[3] - v[0]) / 6.0;
    if (std::abs(vol) < min_volume) continue;
    if (vol < 0) std::swap(v[2], v[3]);
    return TetGeometry(v);
  }
}

struct CommutingSuiteResult {
  double max_residual = 0.0;  // max over tets and fields of residual / max(1, largest face flux)
  int tets = 0;
  int fields = 0;
};

/// One random polynomial field of each degree 0..max_degree on each of `tets` random tets.
inline CommutingSuiteResult commuting_suite(int tets, int max_degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CommutingSuiteResult res;
  res.tets = tets;
  for (int t = 0; t < tets; ++t) {
    const auto tet = random_tet(rng);
    for (int deg = 0; deg <= max_degree; ++deg) {
      const auto field = PolyVectorField::random(deg, rng);
      const auto curl = field.curl();
      const Eigen::Vector4d w = rt_face_interpolant(tet, curl);
      const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
      res.max_residual = std::max(res.max_residual, commuting_check(tet, field, curl) / scale);
      ++res.fields;
    }
  }
  return res;
}

/// max_{i,j} |<lambda_i, Psi_j> - delta_ij|, integrated by a degree-4 rule on each carrier
/// (independent of the mass rule used to build the basis).
inline double dual_biorthogonality_defect(const Mesh& mesh, const DofMap& dofs, const DualBasis& basis) {
  const auto rule = tetrahedron_rule(4);
  double defect = 0.0;
  for (int i = 0; i < basis.size(); ++i) {
    const auto& entry = basis.entries[i];
    const auto g = mesh.geometry(entry.carrier);
    const auto td = tet_dofs(mesh, dofs, entry.carrier);
    Vector6d moments = Vector6d::Zero();  // <lambda_i, phi_l>
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto w = local_whitney(g, g.map(rule.points[q]));
      Point3 lam = Point3::Zero();
      for (int l = 0; l < 6; ++l) lam += entry.coefficients(l) * w.value[l];
      for (int l = 0; l < 6; ++l) moments(l) += rule.weights[q] * 6.0 * g.volume() * lam.dot(w.value[l]);
    }
    // Psi_j vanishes on the carrier unless j is one of its edges.
    for (int l = 0; l < 6; ++l) {
      if (td.dof[l] < 0) continue;
      const double target = td.dof[l] == i ? 1.0 : 0.0;
      defect = std::max(defect, std::abs(td.sign[l] * moments(l) - target));
    }
  }
  return defect;
}

inline double max_dual_norm(const DualBasis& basis) {
  double m = 0.0;
  for (const auto& e : basis.entries) m = std::max(m, e.l2_norm);
  return m;
}

/// True when every (row, col) of I x I is covered by exactly one block of the partition.
inline bool partition_tiles_exactly(const ClusterTree& tree, const BlockPartition& p) {
  const auto n = static_cast<std::size_t>(tree.num_indices());
  std::vector<unsigned char> hits(n * n, 0);
  for (const auto* list : {&p.far, &p.near})
    for (const auto& [t, s] : *list)
      for (int i : tree[t].indices)
        for (int j : tree[s].indices) {
          auto& h = hits[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
          if (h) return false;
          h = 1;
        }
  for (auto h : hits)
    if (!h) return false;
  return true;
}

/// A(i, j) == A(j, i) bit for bit.
template <class Scalar>
bool exactly_symmetric(const SparseMatrixT<Scalar>& A) {
  if (A.rows() != A.cols()) return false;
  for (int k = 0; k < A.outerSize(); ++k)
    for (typename SparseMatrixT<Scalar>::InnerIterator it(A, k); it; ++it)
      if (A.coeff(it.col(), it.row()) != it.value()) return false;
  return true;
}

/// max over trials of |K G p| / (|K|_F |G p|) for random nodal p.
inline double curl_grad_defect(const Discretization& d, const SparseMatrix& K, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double kn = K.norm();
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd p(d.nodal.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = normal(rng);
    const Eigen::VectorXd gp = d.gradient.G * p;
    if (gp.norm() == 0.0 || kn == 0.0) continue;
    worst = std::max(worst, (K * gp).norm() / (kn * gp.norm()));
  }
  return worst;
}

struct ExactSequenceTrials {
  double max_residual = 0.0;  // least-squares residual reported by the recovery
  double max_mismatch = 0.0;  // |G phi - v| / |v| recomputed on the region edges
  int trials = 0;
};

/// Random discretely curl-free fields v = G q on the region (q random on region vertices),
/// recovered through exact_sequence_recover.
inline ExactSequenceTrials exact_sequence_trials(const Discretization& d, const Region& region, int trials,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  ExactSequenceTrials out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(d.nodal.size());
    for (int v : region.vertex_dofs) q(v) = normal(rng);
    const Eigen::VectorXd v = d.gradient.G * q;
    const auto rec = exact_sequence_recover<double>(d, region, v);
    out.max_residual = std::max(out.max_residual, rec.residual);
    const Eigen::VectorXd gphi = d.gradient.G * rec.potential;
    double diff = 0.0, vn = 0.0;
    for (int e : region.edge_dofs) {
      diff += (gphi(e) - v(e)) * (gphi(e) - v(e));
      vn += v(e) * v(e);
    }
    if (vn > 0.0) out.max_mismatch = std::max(out.max_mismatch, std::sqrt(diff / vn));
  }
  return out;
}

}  // namespace hmx
