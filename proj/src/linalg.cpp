#include "trp/linalg.hpp"

#include <cmath>
#include <string>

#include "trp/errors.hpp"

namespace trp {

BlockCholesky BlockCholesky::factor(const std::vector<Matrix>& blocks) {
  BlockCholesky out;
  out.lower_.reserve(blocks.size());
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Matrix& blk = blocks[k];
    if (blk.rows() != blk.cols() || blk.rows() == 0) {
      throw DegenerateDataError("BlockCholesky: block " + std::to_string(k) +
                                " is not square and nonempty");
    }
    Eigen::LLT<Matrix> llt(blk);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefiniteError("BlockCholesky: block " + std::to_string(k) +
                                     " is not positive definite");
    }
    out.offsets_.push_back(off);
    off += blk.rows();
    out.lower_.push_back(llt.matrixL());
  }
  out.total_ = off;
  return out;
}

Matrix BlockCholesky::solve_lower(const Matrix& b) const {
  Matrix y(b.rows(), b.cols());
  for (std::size_t k = 0; k < lower_.size(); ++k) {
    const Eigen::Index n = lower_[k].rows();
    y.middleRows(offsets_[k], n) = lower_[k].triangularView<Eigen::Lower>().solve(
        b.middleRows(offsets_[k], n));
  }
  return y;
}

Matrix BlockCholesky::solve_upper(const Matrix& b) const {
  Matrix y(b.rows(), b.cols());
  for (std::size_t k = 0; k < lower_.size(); ++k) {
    const Eigen::Index n = lower_[k].rows();
    y.middleRows(offsets_[k], n) =
        lower_[k].transpose().triangularView<Eigen::Upper>().solve(
            b.middleRows(offsets_[k], n));
  }
  return y;
}

Matrix BlockCholesky::apply_lower(const Matrix& b) const {
  Matrix y(b.rows(), b.cols());
  for (std::size_t k = 0; k < lower_.size(); ++k) {
    const Eigen::Index n = lower_[k].rows();
    y.middleRows(offsets_[k], n) =
        lower_[k].triangularView<Eigen::Lower>() * b.middleRows(offsets_[k], n);
  }
  return y;
}

double BlockCholesky::log_det() const {
  double ld = 0.0;
  for (const Matrix& L : lower_) ld += 2.0 * L.diagonal().array().log().sum();
  return ld;
}

StructuredSampler::StructuredSampler(const StructuredPrecision& sp)
    : base_(&sp.base_factor), r_(sp.update_rows.rows()) {
  const Eigen::Index n = sp.base_factor.rows();
  const Eigen::Index r = sp.update_rows.rows();
  if (sp.update_rows.cols() != n) {
    throw DegenerateDataError("StructuredSampler: update rows have " +
                              std::to_string(sp.update_rows.cols()) +
                              " columns, base has dimension " + std::to_string(n));
  }
  if (sp.update_core.rows() != r || sp.update_core.cols() != r) {
    throw DegenerateDataError("StructuredSampler: core must be R x R");
  }

  // Skinny SVD of L^{-1} C^T, then eigendecomposition of the rotated core.
  Matrix g = sp.base_factor.solve_lower(sp.update_rows.transpose());
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix& u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  Vector sig = svd.singularValues();

  Matrix core = sig.asDiagonal() * (v.transpose() * sp.update_core * v) *
                sig.asDiagonal();
  core = 0.5 * (core + core.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(core);
  if (eig.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("StructuredSampler: core eigendecomposition failed");
  }
  phi_ = eig.eigenvalues();
  if ((1.0 + phi_.array()).minCoeff() <= 1e-12) {
    throw NotPositiveDefiniteError(
        "StructuredSampler: updated precision is not positive definite "
        "(1 + phi reached " +
        std::to_string((1.0 + phi_.array()).minCoeff()) + ")");
  }
  u1_ = u * eig.eigenvectors();
  inv_sqrt_ = (1.0 + phi_.array()).inverse().sqrt();
}

Vector StructuredSampler::sample(const Vector& xi1, const Vector& xi2) const {
  if (xi1.size() != r_ || xi2.size() != base_->rows()) {
    throw DegenerateDataError("StructuredSampler::sample: noise vector sizes do not match");
  }
  // When R > N only min(N, R) directions exist; the surplus noise is unused.
  Vector t = u1_ * (inv_sqrt_.cwiseProduct(xi1.head(u1_.cols()))) + xi2 -
             u1_ * (u1_.transpose() * xi2);
  return base_->solve_upper(t);
}

Vector StructuredSampler::solve(const Vector& b) const {
  Vector t = base_->solve_lower(b);
  Vector w = u1_.transpose() * t;
  Vector scale = (1.0 + phi_.array()).inverse() - 1.0;
  t += u1_ * scale.cwiseProduct(w).matrix();
  return base_->solve_upper(t);
}

Vector sample_structured_precision(const StructuredPrecision& sp,
                                   const Vector& xi1, const Vector& xi2) {
  return StructuredSampler(sp).sample(xi1, xi2);
}

namespace {

// Shared rank guard: eigenvalues of B B^T are squared singular values of B.
Eigen::LLT<Matrix> checked_gram_factor(const Matrix& B, const char* who) {
  Matrix bbt = B * B.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(bbt, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmax <= 0.0 || lmin < rank_tol() * rank_tol() * lmax) {
    throw RankError(std::string(who) +
                    ": B is rank deficient (smallest singular value below "
                    "1e-12 of the largest)");
  }
  Eigen::LLT<Matrix> llt(bbt);
  if (llt.info() != Eigen::Success) {
    throw RankError(std::string(who) + ": Cholesky of B B^T failed");
  }
  return llt;
}

}  // namespace

double pseudo_det_log(const Matrix& B, const Vector& omega_inv) {
  if (omega_inv.size() != B.rows()) {
    throw DegenerateDataError("pseudo_det_log: omega_inv length must equal the rows of B");
  }
  if ((omega_inv.array() <= 0.0).any()) {
    throw DegenerateDataError("pseudo_det_log: omega_inv must be positive");
  }
  checked_gram_factor(B, "pseudo_det_log");

  // Nonzero eigenvalues of B^T Omega^{-1} B equal those of D B B^T D with
  // D = diag(sqrt(omega_inv)).
  Vector d = omega_inv.array().sqrt();
  Matrix small = d.asDiagonal() * (B * B.transpose()) * d.asDiagonal();
  Eigen::LLT<Matrix> llt(small);
  if (llt.info() != Eigen::Success) {
    throw RankError("pseudo_det_log: conjugated form not positive definite");
  }
  return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

Vector kernel_project(const Matrix& B, const Vector& v) {
  if (v.size() != B.cols()) {
    throw DegenerateDataError("kernel_project: v length must equal the columns of B");
  }
  Eigen::LLT<Matrix> llt = checked_gram_factor(B, "kernel_project");
  Vector w = llt.solve(B * v);
  return v - B.transpose() * w;
}

}  // namespace trp
