#pragma once

#include "hmaxwell/cluster.hpp"
#include "hmaxwell/fem.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmx {

/// Extract D(rows, cols) as a dense block.
template <class Scalar>
MatrixT<Scalar> extract_block(const MatrixT<Scalar>& D, std::span<const int> rows, std::span<const int> cols) {
  MatrixT<Scalar> B(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows.size(); ++i)
      B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = D(rows[i], cols[j]);
  return B;
}

/// Far-field block X * Y^H with orthonormal columns in X.
template <class Scalar>
struct LowRankBlock {
  MatrixT<Scalar> X;
  MatrixT<Scalar> Y;
  Eigen::VectorXd singular_values;  // full spectrum of the source block
  double truncation_error = 0.0;    // sigma_{r+1}, 0 when r >= min dimension

  Eigen::Index rank() const { return X.cols(); }
};

/// Truncated SVD of a dense block with the rank chosen from its singular values.
template <class Scalar, class RankRule>
LowRankBlock<Scalar> truncated_svd_by(const MatrixT<Scalar>& block, RankRule rank_of, const std::string& label) {
  LowRankBlock<Scalar> lr;
  const Eigen::Index m = std::min(block.rows(), block.cols());
  if (m == 0) {
    lr.X.resize(block.rows(), 0);
    lr.Y.resize(block.cols(), 0);
    return lr;
  }
  Eigen::BDCSVD<MatrixT<Scalar>> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("SVD did not converge on " + label);
  const Eigen::Index r = std::clamp<Eigen::Index>(rank_of(svd.singularValues()), 0, m);
  lr.singular_values = svd.singularValues();
  lr.X = svd.matrixU().leftCols(r);
  lr.Y = svd.matrixV().leftCols(r) * svd.singularValues().head(r).template cast<Scalar>().asDiagonal();
  lr.truncation_error = r < m ? svd.singularValues()(r) : 0.0;
  return lr;
}

/// Rank-`rank` truncated SVD of a dense block. Spectral-norm optimal.
template <class Scalar>
LowRankBlock<Scalar> truncated_svd(const MatrixT<Scalar>& block, Eigen::Index rank, const std::string& label = "block") {
  return truncated_svd_by(block, [rank](const Eigen::VectorXd&) { return rank; }, label);
}

/// Smallest rank with sigma_{r+1} <= tol * sigma_1.
inline Eigen::Index adaptive_rank(const Eigen::VectorXd& sigma, double tol) {
  if (sigma.size() == 0 || sigma(0) == 0.0) return 0;
  for (Eigen::Index r = 0; r < sigma.size(); ++r)
    if (sigma(r) <= tol * sigma(0)) return r;
  return sigma.size();
}

struct StorageStats {
  std::size_t scalars_far = 0;
  std::size_t scalars_near = 0;
  std::size_t bytes_far = 0;
  std::size_t bytes_near = 0;
  /// C_sp * (depth + 1) * r_max * N.
  double bound_value = 0.0;
  /// 2 * bound_value: both factors X and Y are stored.
  double far_bound = 0.0;

  std::size_t scalars() const { return scalars_far + scalars_near; }
};

/// Blockwise representation over a partition: dense near blocks, factored far blocks.
/// Holds non-owning pointers to the tree and partition, which must outlive it.
template <class Scalar>
class HMatrix {
 public:
  HMatrix(const ClusterTree& tree, const BlockPartition& partition) : tree_(&tree), partition_(&partition) {
    far_.resize(partition.far.size());
    near_.resize(partition.near.size());
  }

  const ClusterTree& tree() const { return *tree_; }
  const BlockPartition& partition() const { return *partition_; }
  Eigen::Index rows() const { return tree_->num_indices(); }

  std::vector<LowRankBlock<Scalar>>& far_blocks() { return far_; }
  const std::vector<LowRankBlock<Scalar>>& far_blocks() const { return far_; }
  std::vector<MatrixT<Scalar>>& near_blocks() { return near_; }
  const std::vector<MatrixT<Scalar>>& near_blocks() const { return near_; }

  VectorT<Scalar> matvec(const VectorT<Scalar>& x) const { return apply(x, false); }
  /// y = H^H x
  VectorT<Scalar> adjoint_matvec(const VectorT<Scalar>& x) const { return apply(x, true); }

  MatrixT<Scalar> reconstruct() const {
    MatrixT<Scalar> D = MatrixT<Scalar>::Zero(rows(), rows());
    const auto scatter = [&D](const auto& rows_idx, const auto& cols_idx, const MatrixT<Scalar>& B) {
      for (std::size_t j = 0; j < cols_idx.size(); ++j)
        for (std::size_t i = 0; i < rows_idx.size(); ++i)
          D(rows_idx[i], cols_idx[j]) = B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    for (std::size_t b = 0; b < far_.size(); ++b) {
      const auto& [t, s] = partition_->far[b];
      scatter((*tree_)[t].indices, (*tree_)[s].indices, MatrixT<Scalar>(far_[b].X * far_[b].Y.adjoint()));
    }
    for (std::size_t b = 0; b < near_.size(); ++b) {
      const auto& [t, s] = partition_->near[b];
      scatter((*tree_)[t].indices, (*tree_)[s].indices, near_[b]);
    }
    return D;
  }

  /// Largest far-block truncation error sigma_{r+1}.
  double max_truncation_error() const {
    double e = 0.0;
    for (const auto& b : far_) e = std::max(e, b.truncation_error);
    return e;
  }

  Eigen::Index max_rank() const {
    Eigen::Index r = 0;
    for (const auto& b : far_) r = std::max(r, b.rank());
    return r;
  }

 private:
  VectorT<Scalar> apply(const VectorT<Scalar>& x, bool adjoint) const {
    if (x.size() != rows()) throw std::invalid_argument("HMatrix: dimension mismatch");
    VectorT<Scalar> y = VectorT<Scalar>::Zero(rows());
    const auto run = [&](const std::vector<int>& row_idx, const std::vector<int>& col_idx, const auto& op) {
      const auto& in_idx = adjoint ? row_idx : col_idx;
      const auto& out_idx = adjoint ? col_idx : row_idx;
      VectorT<Scalar> xs(static_cast<Eigen::Index>(in_idx.size()));
      for (std::size_t i = 0; i < in_idx.size(); ++i) xs(static_cast<Eigen::Index>(i)) = x(in_idx[i]);
      const VectorT<Scalar> ys = op(xs);
      for (std::size_t i = 0; i < out_idx.size(); ++i) y(out_idx[i]) += ys(static_cast<Eigen::Index>(i));
    };
    for (std::size_t b = 0; b < far_.size(); ++b) {
      const auto& [t, s] = partition_->far[b];
      const auto& blk = far_[b];
      run((*tree_)[t].indices, (*tree_)[s].indices, [&](const VectorT<Scalar>& v) -> VectorT<Scalar> {
        if (adjoint) return blk.Y * (blk.X.adjoint() * v);
        return blk.X * (blk.Y.adjoint() * v);
      });
    }
    for (std::size_t b = 0; b < near_.size(); ++b) {
      const auto& [t, s] = partition_->near[b];
      const auto& blk = near_[b];
      run((*tree_)[t].indices, (*tree_)[s].indices, [&](const VectorT<Scalar>& v) -> VectorT<Scalar> {
        if (adjoint) return blk.adjoint() * v;
        return blk * v;
      });
    }
    return y;
  }

  const ClusterTree* tree_;
  const BlockPartition* partition_;
  std::vector<LowRankBlock<Scalar>> far_;
  std::vector<MatrixT<Scalar>> near_;
};

namespace detail {

template <class Scalar, class RankRule>
HMatrix<Scalar> compress(const MatrixT<Scalar>& D, const ClusterTree& tree, const BlockPartition& partition, RankRule rank_of) {
  if (D.rows() != tree.num_indices() || D.cols() != tree.num_indices())
    throw std::invalid_argument("compress_dense: matrix dimension does not match the cluster tree");
  HMatrix<Scalar> H(tree, partition);
  for (std::size_t b = 0; b < partition.far.size(); ++b) {
    const auto& [t, s] = partition.far[b];
    const MatrixT<Scalar> blk = extract_block(D, tree[t].indices, tree[s].indices);
    const std::string label = "far block " + std::to_string(b) + " (" + std::to_string(t) + "," + std::to_string(s) + ")";
    H.far_blocks()[b] = truncated_svd_by(blk, rank_of, label);
  }
  for (std::size_t b = 0; b < partition.near.size(); ++b) {
    const auto& [t, s] = partition.near[b];
    H.near_blocks()[b] = extract_block(D, tree[t].indices, tree[s].indices);
  }
  return H;
}

}  // namespace detail

/// Replace every far block of D by its best rank-`rank` approximation; copy near blocks.
template <class Scalar>
HMatrix<Scalar> compress_dense(const MatrixT<Scalar>& D, const ClusterTree& tree, const BlockPartition& partition, int rank) {
  if (rank < 0) throw std::invalid_argument("compress_dense: rank must be >= 0");
  return detail::compress(D, tree, partition, [rank](const Eigen::VectorXd&) { return Eigen::Index(rank); });
}

/// Per-block rank chosen as the smallest r with sigma_{r+1} <= tol * sigma_1 of that block.
template <class Scalar>
HMatrix<Scalar> compress_dense_adaptive(const MatrixT<Scalar>& D, const ClusterTree& tree, const BlockPartition& partition,
                                        double tol) {
  return detail::compress(D, tree, partition, [tol](const Eigen::VectorXd& s) { return adaptive_rank(s, tol); });
}

template <class Scalar>
VectorT<Scalar> matvec(const HMatrix<Scalar>& H, const VectorT<Scalar>& x) {
  return H.matvec(x);
}

template <class Scalar>
StorageStats storage_stats(const HMatrix<Scalar>& H) {
  StorageStats st;
  const auto& tree = H.tree();
  const auto& p = H.partition();
  for (std::size_t b = 0; b < p.far.size(); ++b) {
    const auto& [t, s] = p.far[b];
    st.scalars_far += static_cast<std::size_t>(H.far_blocks()[b].rank()) * (tree[t].size() + tree[s].size());
  }
  for (const auto& [t, s] : p.near) st.scalars_near += tree[t].size() * tree[s].size();
  st.bytes_far = st.scalars_far * sizeof(Scalar);
  st.bytes_near = st.scalars_near * sizeof(Scalar);
  st.bound_value = static_cast<double>(sparsity_constant(p)) * (tree.depth() + 1) * static_cast<double>(H.max_rank()) *
                   tree.num_indices();
  st.far_bound = 2.0 * st.bound_value;
  return st;
}

struct PowerIterationOptions {
  double tol = 1e-4;
  int max_iter = 500;
  std::uint64_t seed = 20240917;
};

struct SpectralEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Largest singular value of an operator given by y = E x and y = E^H x, by power iteration on E^H E.
template <class Scalar, class Apply, class ApplyAdjoint>
SpectralEstimate power_iteration_norm(Eigen::Index n, Apply apply, ApplyAdjoint apply_adjoint, const PowerIterationOptions& opt) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("power iteration: tol must be positive");
  SpectralEstimate est;
  if (n == 0) {
    est.converged = true;
    return est;
  }
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  VectorT<Scalar> x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if constexpr (is_complex_v<Scalar>)
      x(i) = Scalar(normal(rng), normal(rng));
    else
      x(i) = normal(rng);
  }
  x.normalize();
  double lambda = 0.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const VectorT<Scalar> y = apply(x);
    const double next = y.squaredNorm();
    est.iterations = it;
    if (next == 0.0) {
      lambda = 0.0;
      est.converged = true;
      break;
    }
    const bool done = it > 1 && std::abs(next - lambda) < opt.tol * next;
    lambda = next;
    if (done) {
      est.converged = true;
      break;
    }
    x = apply_adjoint(y);
    const double nx = x.norm();
    if (nx == 0.0) {
      est.converged = true;
      break;
    }
    x /= nx;
  }
  est.value = std::sqrt(lambda);
  return est;
}

/// Spectral norm of D - H by power iteration on the error operator.
template <class Scalar>
SpectralEstimate spectral_error(const MatrixT<Scalar>& D, const HMatrix<Scalar>& H, const PowerIterationOptions& opt = {}) {
  if (D.rows() != H.rows() || D.cols() != H.rows()) throw std::invalid_argument("spectral_error: dimension mismatch");
  return power_iteration_norm<Scalar>(
      D.rows(), [&](const VectorT<Scalar>& x) -> VectorT<Scalar> { return D * x - H.matvec(x); },
      [&](const VectorT<Scalar>& y) -> VectorT<Scalar> { return D.adjoint() * y - H.adjoint_matvec(y); }, opt);
}

/// Spectral norm of a dense matrix by the same power iteration.
template <class Scalar>
SpectralEstimate spectral_norm(const MatrixT<Scalar>& D, const PowerIterationOptions& opt = {}) {
  return power_iteration_norm<Scalar>(
      D.rows(), [&](const VectorT<Scalar>& x) -> VectorT<Scalar> { return D * x; },
      [&](const VectorT<Scalar>& y) -> VectorT<Scalar> { return D.adjoint() * y; }, opt);
}

}  // namespace hmx
