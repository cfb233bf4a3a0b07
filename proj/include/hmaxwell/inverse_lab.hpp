#pragma once

#include "hmaxwell/cluster.hpp"
#include "hmaxwell/dual_basis.hpp"
#include "hmaxwell/fem.hpp"
#include "hmaxwell/hmatrix.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmx {

/// Dense A^{-1} by LU with partial pivoting, checked by ||A B - I||_max <= 1e-8.
template <class Scalar>
MatrixT<Scalar> dense_inverse(const MatrixT<Scalar>& A, double max_condition = 1e12) {
  if (A.rows() != A.cols()) throw std::invalid_argument("dense_inverse: matrix must be square");
  const Eigen::Index n = A.rows();
  if (n == 0) return A;
  Eigen::PartialPivLU<MatrixT<Scalar>> lu(A);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / max_condition))
    throw std::runtime_error("dense_inverse: matrix is singular or ill-conditioned (rcond " + std::to_string(rcond) +
                             "); try a different kappa or mesh size");
  MatrixT<Scalar> B = lu.inverse();
  const double residual = (A * B - MatrixT<Scalar>::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-8))
    throw std::runtime_error("dense_inverse: residual ||AB - I||_max = " + std::to_string(residual) + " exceeds 1e-8");
  return B;
}

template <class Scalar>
MatrixT<Scalar> dense_inverse(const SparseMatrixT<Scalar>& A, double max_condition = 1e12) {
  return dense_inverse<Scalar>(MatrixT<Scalar>(A), max_condition);
}

/// Exact singular values of B(rows, cols), nonincreasing.
template <class Scalar>
Eigen::VectorXd block_svd(const MatrixT<Scalar>& B, std::span<const int> rows, std::span<const int> cols) {
  const MatrixT<Scalar> blk = extract_block(B, rows, cols);
  if (blk.size() == 0) return {};
  Eigen::BDCSVD<MatrixT<Scalar>> svd(blk);
  if (svd.info() != Eigen::Success) throw std::runtime_error("block_svd: SVD did not converge");
  return svd.singularValues();
}

/// Singular values of a far-field block (tau, sigma) of B.
template <class Scalar>
Eigen::VectorXd block_svd(const MatrixT<Scalar>& B, const ClusterTree& tree, const BlockPartition& partition, int tau,
                          int sigma) {
  if (std::find(partition.far.begin(), partition.far.end(), std::pair{tau, sigma}) == partition.far.end())
    throw std::invalid_argument("block_svd: (" + std::to_string(tau) + "," + std::to_string(sigma) +
                                ") is not a far-field block");
  return block_svd(B, tree[tau].indices, tree[sigma].indices);
}

/// Least-squares fits of two error models:
///   plain exponential   log e ~ log C + r log q
///   root exponential    log e ~ log C - b r^{1/4} / ln(r + 2)
struct DecayFit {
  bool fitted = false;
  std::string notice;
  int points = 0;
  double log_c_exp = 0.0, q = 0.0, rms_exp = 0.0;
  double log_c_root = 0.0, b = 0.0, rms_root = 0.0;
};

inline double root_exponential_feature(double r) { return std::pow(r, 0.25) / std::log(r + 2.0); }

inline DecayFit fit_decay(std::span<const double> ranks, std::span<const double> errors, double floor = 1e-14) {
  if (ranks.size() != errors.size()) throw std::invalid_argument("fit_decay: size mismatch");
  if (ranks.size() < 4) throw std::invalid_argument("fit_decay: need at least 4 data points");
  std::vector<double> r, y;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (errors[i] > floor) {
      r.push_back(ranks[i]);
      y.push_back(std::log(errors[i]));
    }
  DecayFit fit;
  fit.points = static_cast<int>(r.size());
  if (r.size() < 2) {
    std::ostringstream msg;
    msg << "fit skipped: fewer than two errors above the floor " << floor;
    fit.notice = msg.str();
    return fit;
  }
  const auto linear = [&](auto feature, double& intercept, double& slope, double& rms) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(r.size()), 2);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      X(static_cast<Eigen::Index>(i), 0) = 1.0;
      X(static_cast<Eigen::Index>(i), 1) = feature(r[i]);
      Y(static_cast<Eigen::Index>(i)) = y[i];
    }
    const Eigen::Vector2d c = X.colPivHouseholderQr().solve(Y);
    intercept = c(0);
    slope = c(1);
    rms = std::sqrt((X * c - Y).squaredNorm() / static_cast<double>(r.size()));
  };
  double slope = 0.0;
  linear([](double x) { return x; }, fit.log_c_exp, slope, fit.rms_exp);
  fit.q = std::exp(slope);
  linear([](double x) { return -root_exponential_feature(x); }, fit.log_c_root, fit.b, fit.rms_root);
  fit.fitted = true;
  if (r.size() < ranks.size()) fit.notice = std::to_string(ranks.size() - r.size()) + " point(s) at floor excluded";
  return fit;
}

/// Singular values of every far block, with both decay models fitted to each.
struct DecayReport {
  struct Block {
    int tau = -1, sigma = -1;
    Eigen::Index rows = 0, cols = 0;
    Eigen::VectorXd singular_values;
    DecayFit fit;
  };
  std::vector<Block> blocks;
};

template <class Scalar>
DecayReport decay_report(const MatrixT<Scalar>& B, const ClusterTree& tree, const BlockPartition& partition) {
  DecayReport rep;
  for (const auto& [t, s] : partition.far) {
    DecayReport::Block blk;
    blk.tau = t;
    blk.sigma = s;
    blk.rows = static_cast<Eigen::Index>(tree[t].size());
    blk.cols = static_cast<Eigen::Index>(tree[s].size());
    blk.singular_values = block_svd(B, tree[t].indices, tree[s].indices);
    const auto& sv = blk.singular_values;
    if (sv.size() >= 4) {
      std::vector<double> k(sv.size()), v(sv.begin(), sv.end());
      for (Eigen::Index i = 0; i < sv.size(); ++i) k[i] = static_cast<double>(i + 1);
      blk.fit = fit_decay(k, v);
    } else {
      blk.fit.notice = "fewer than 4 singular values";
    }
    rep.blocks.push_back(std::move(blk));
  }
  return rep;
}

struct SweepRow {
  int rank = 0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  bool converged = false;
  double max_block_sigma = 0.0;  // max over far blocks of sigma_{r+1}
  double bound_value = 0.0;      // C_sp (depth + 1) max_block_sigma
  std::size_t scalars = 0;
  int sparsity = 0;
  int depth = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double inverse_norm = 0.0;
};

/// Compress B = A^{-1} at each rank and measure the global spectral error against the
/// block-to-global bound C_sp (depth + 1) max sigma_{r+1}.
template <class Scalar>
SweepResult rank_sweep(const MatrixT<Scalar>& B, const ClusterTree& tree, const BlockPartition& partition,
                       std::span<const int> ranks, const PowerIterationOptions& opt = {}) {
  SweepResult out;
  out.inverse_norm = spectral_norm(B, opt).value;
  const int csp = sparsity_constant(partition);
  const int depth = tree.depth();
  for (int r : ranks) {
    const auto H = compress_dense(B, tree, partition, r);
    const auto est = spectral_error(B, H, opt);
    SweepRow row;
    row.rank = r;
    row.abs_err = est.value;
    row.rel_err = out.inverse_norm > 0.0 ? est.value / out.inverse_norm : 0.0;
    row.converged = est.converged;
    row.max_block_sigma = H.max_truncation_error();
    row.bound_value = static_cast<double>(csp) * (depth + 1) * row.max_block_sigma;
    row.scalars = storage_stats(H).scalars();
    row.sparsity = csp;
    row.depth = depth;
    out.rows.push_back(row);
  }
  return out;
}

/// Matrix-level transfer check: for b on sigma, F_b = sum b_i lambda_i has load vector b,
/// and the dual functionals of the Galerkin solution on tau reproduce A^{-1}|_{tau x sigma} b.
template <class Scalar>
class TransferCheck {
 public:
  TransferCheck(const Discretization& disc, const GalerkinSystem<Scalar>& system, const DualBasis& basis)
      : disc_(&disc), basis_(&basis) {
    lu_.compute(system.A);
    if (lu_.info() != Eigen::Success) throw std::runtime_error("TransferCheck: sparse LU failed");
  }

  struct Result {
    double max_rel_discrepancy = 0.0;  // max over samples of |Lambda_tau E - B b| / |B b|
    double max_load_deviation = 0.0;   // max over samples of |f - b|_inf on sigma, and |f|_inf off sigma
    Eigen::VectorXd singular_values;
    int samples = 0;
  };

  Result check(const MatrixT<Scalar>& B, std::span<const int> tau, std::span<const int> sigma, int samples,
               std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Result res;
    res.samples = samples;
    const MatrixT<Scalar> block = extract_block(B, tau, sigma);
    for (int k = 0; k < samples; ++k) {
      VectorT<Scalar> b(static_cast<Eigen::Index>(sigma.size()));
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        if constexpr (is_complex_v<Scalar>)
          b(i) = Scalar(normal(rng), normal(rng));
        else
          b(i) = normal(rng);
      }
      const auto one = run(block, tau, sigma, b);
      res.max_rel_discrepancy = std::max(res.max_rel_discrepancy, one.first);
      res.max_load_deviation = std::max(res.max_load_deviation, one.second);
    }
    if (block.size() > 0) {
      Eigen::BDCSVD<MatrixT<Scalar>> svd(block);
      res.singular_values = svd.singularValues();
    }
    return res;
  }

  /// Relative discrepancy and load deviation for one right-hand side b.
  std::pair<double, double> run(const MatrixT<Scalar>& block, std::span<const int> tau, std::span<const int> sigma,
                                const VectorT<Scalar>& b) const {
    const auto& d = *disc_;
    const VectorT<Scalar> f = dual_combination_load<Scalar>(d.mesh, d.dofs, *basis_, sigma, b);
    double load_dev = 0.0;
    std::vector<char> in_sigma(f.size(), 0);
    for (std::size_t i = 0; i < sigma.size(); ++i) {
      in_sigma[sigma[i]] = 1;
      load_dev = std::max(load_dev, std::abs(f(sigma[i]) - b(static_cast<Eigen::Index>(i))));
    }
    for (Eigen::Index i = 0; i < f.size(); ++i)
      if (!in_sigma[i]) load_dev = std::max(load_dev, std::abs(f(i)));
    const VectorT<Scalar> e = lu_.solve(f);
    const VectorT<Scalar> lhs = apply_dual<Scalar>(d.mesh, d.dofs, *basis_, e, tau);
    const VectorT<Scalar> rhs = block * b;
    const double scale = rhs.norm();
    const double diff = (lhs - rhs).norm();
    return {scale > 0.0 ? diff / scale : diff, load_dev};
  }

 private:
  const Discretization* disc_;
  const DualBasis* basis_;
  Eigen::SparseLU<SparseMatrixT<Scalar>> lu_;
};

}  // namespace hmx
