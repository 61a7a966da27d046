#pragma once

#include <vector>

#include <Eigen/Dense>

namespace trp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative singular-value tolerance: values below rank_tol() times the
/// largest are treated as zero everywhere a rank decision is made.
inline constexpr double rank_tol() { return 1e-12; }

/// Cholesky factor of a block-diagonal symmetric positive definite matrix,
/// stored per block. Solves and products never assemble the full matrix.
class BlockCholesky {
 public:
  BlockCholesky() = default;

  /// Factor the given SPD diagonal blocks. Throws NotPositiveDefiniteError
  /// naming the offending block if any factorization fails.
  static BlockCholesky factor(const std::vector<Matrix>& blocks);

  Eigen::Index rows() const { return total_; }
  const std::vector<Matrix>& blocks() const { return lower_; }

  /// y = L^{-1} b, columnwise for matrices.
  Matrix solve_lower(const Matrix& b) const;
  /// y = L^{-T} b.
  Matrix solve_upper(const Matrix& b) const;
  /// y = L b.
  Matrix apply_lower(const Matrix& b) const;

  double log_det() const;  // log det of the factored matrix L L^T

 private:
  std::vector<Matrix> lower_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index total_ = 0;
};

/// Precision matrix Lambda = Lambda0 + C^T A C with Lambda0 = L L^T block
/// diagonal, C of shape R x N carried by rows, and A symmetric (possibly
/// indefinite) of shape R x R. Lambda itself is never materialized.
struct StructuredPrecision {
  BlockCholesky base_factor;
  Matrix update_rows;  // C, R x N
  Matrix update_core;  // A, R x R symmetric
};

/// Shared factorization for sampling from N(0, Lambda^{-1}) and solving
/// Lambda x = b at O(N R^2) cost after an O(N R^2 + R^3) setup.
class StructuredSampler {
 public:
  explicit StructuredSampler(const StructuredPrecision& sp);

  /// Deterministic map of standard normals (xi1 of length R, xi2 of length N)
  /// to a draw with covariance exactly Lambda^{-1}.
  Vector sample(const Vector& xi1, const Vector& xi2) const;

  /// Lambda^{-1} b through the same factorization.
  Vector solve(const Vector& b) const;

  Eigen::Index dim() const { return base_->rows(); }
  Eigen::Index rank() const { return u1_.cols(); }

 private:
  const BlockCholesky* base_;
  Eigen::Index r_ = 0;  // core dimension; rank() <= r_ when R exceeds N
  Matrix u1_;           // N x min(N, R), orthonormal columns
  Vector phi_;          // eigenvalues of the core update
  Vector inv_sqrt_;     // (1 + phi)^{-1/2}
};

/// Draw from N(0, Lambda^{-1}) for a structured precision, given explicit
/// standard normal inputs. Wraps StructuredSampler for one-shot use.
Vector sample_structured_precision(const StructuredPrecision& sp,
                                   const Vector& xi1, const Vector& xi2);

/// Log pseudodeterminant of B^T diag(omega_inv) B for B of shape P x M with
/// full row rank: the sum of logs of the P nonzero eigenvalues, computed from
/// the P x P conjugated form without ever forming the M x M matrix. Throws
/// RankError if B is rank deficient under the working tolerance.
double pseudo_det_log(const Matrix& B, const Vector& omega_inv);

/// Projection of v onto the kernel of B, computed as v minus the fitted
/// values of the least-squares regression of v on the columns of B^T.
Vector kernel_project(const Matrix& B, const Vector& v);

}  // namespace trp
