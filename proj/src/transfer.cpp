#include "trp/transfer.hpp"

#include <cmath>
#include <string>

#include "trp/errors.hpp"

namespace trp {

namespace {

// Solve M W = Rhs for SPD M, falling back to a spectral solve with the
// working rank rule when Cholesky fails on a barely conditioned M.
Matrix spd_solve(const Matrix& M, const Matrix& rhs, double tau) {
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
  const Vector& ev = eig.eigenvalues();
  const double lmax = ev.maxCoeff();
  if (tau == 0.0 && (lmax <= 0.0 || ev.minCoeff() < rank_tol() * lmax)) {
    throw SingularError(
        "build_transfer_matrix: sum_k eta_k G_k is singular with tau = 0");
  }
  Vector inv = ev;
  for (Eigen::Index i = 0; i < inv.size(); ++i) {
    inv[i] = ev[i] > rank_tol() * lmax ? 1.0 / ev[i] : 0.0;
  }
  return eig.eigenvectors() * inv.asDiagonal() *
         (eig.eigenvectors().transpose() * rhs);
}

}  // namespace

TransferMatrix build_transfer_matrix(const TransferProblem& problem,
                                     const Eigen::VectorXi& eta, double tau) {
  const Eigen::Index P = problem.p();
  const Eigen::Index K = problem.k();
  if (eta.size() != K) {
    throw DegenerateDataError("build_transfer_matrix: eta length must equal the source count");
  }
  if (tau < 0.0) {
    throw DegenerateDataError("build_transfer_matrix: tau must be nonnegative");
  }

  TransferMatrix out;
  out.eta = eta;
  out.tau = tau;
  out.T = Matrix::Zero(P, K * P);

  if (eta.sum() > 0) {
    Matrix M = tau * Matrix::Identity(P, P);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (eta[k] != 0) M += problem.sources[static_cast<std::size_t>(k)].gram;
    }
    if (tau == 0.0) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
      const double lmax = eig.eigenvalues().maxCoeff();
      if (lmax <= 0.0 || eig.eigenvalues().minCoeff() < rank_tol() * lmax) {
        throw SingularError(
            "build_transfer_matrix: sum_k eta_k G_k is singular with tau = 0");
      }
    }
    Matrix rhs(P, K * P);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (eta[k] != 0) {
        rhs.middleCols(k * P, P) = problem.sources[static_cast<std::size_t>(k)].gram;
      } else {
        rhs.middleCols(k * P, P).setZero();
      }
    }
    out.T = spd_solve(M, rhs, tau);
  }

  out.B = Matrix::Zero(P, (K + 1) * P);
  out.B.leftCols(P) = Matrix::Identity(P, P);
  out.B.rightCols(K * P) = -out.T;
  return out;
}

Vector transfer_operator_l1(const TransferProblem& problem,
                            const Eigen::VectorXi& eta, double tau,
                            const Vector& beta_S, double tol) {
  const Eigen::Index P = problem.p();
  const Eigen::Index K = problem.k();
  if (tau <= 0.0) {
    throw DegenerateDataError("transfer_operator_l1: tau must be positive");
  }
  if (beta_S.size() != K * P) {
    throw DegenerateDataError("transfer_operator_l1: beta_S must have K*P entries");
  }

  Matrix H = Matrix::Zero(P, P);
  Vector c = Vector::Zero(P);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (eta[k] == 0) continue;
    const Matrix& G = problem.sources[static_cast<std::size_t>(k)].gram;
    H += G;
    c += G * beta_S.segment(k * P, P);
  }

  Vector b = Vector::Zero(P);
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index p = 0; p < P; ++p) {
      double old = b[p];
      if (H(p, p) <= 0.0) {
        b[p] = 0.0;
      } else {
        double r = c[p] - H.row(p).dot(b) + H(p, p) * b[p];
        double mag = std::abs(r) - tau;
        b[p] = mag > 0.0 ? std::copysign(mag, r) / H(p, p) : 0.0;
      }
      max_change = std::max(max_change, std::abs(b[p] - old));
    }
    if (max_change < tol) return b;
  }
  throw ConvergenceError("transfer_operator_l1: coordinate descent exceeded 1e5 sweeps");
}

Matrix transfer_pseudoinverse(const TransferProblem& problem) {
  const Eigen::Index P = problem.p();
  const Eigen::Index K = problem.k();
  Matrix sum_g = Matrix::Zero(P, P);
  Matrix sum_g2 = Matrix::Zero(P, P);
  Matrix stack(K * P, P);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Matrix& G = problem.sources[static_cast<std::size_t>(k)].gram;
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) {
      throw SingularError("transfer_pseudoinverse: G_" + std::to_string(k + 1) +
                          " is not positive definite");
    }
    sum_g += G;
    sum_g2 += G * G;
    stack.middleRows(k * P, P) = G;
  }
  Eigen::LLT<Matrix> llt(sum_g2);
  if (llt.info() != Eigen::Success) {
    throw SingularError("transfer_pseudoinverse: sum of squared Grams is singular");
  }
  return stack * llt.solve(sum_g);
}

Vector pooled_minimizer_via_T(const TransferProblem& problem) {
  const Eigen::Index P = problem.p();
  const Eigen::Index K = problem.k();
  Vector stacked(K * P);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Dataset& d = problem.sources[static_cast<std::size_t>(k)];
    Eigen::LLT<Matrix> llt(d.gram);
    if (llt.info() != Eigen::Success) {
      throw SingularError("pooled_minimizer_via_T: G_" + std::to_string(k + 1) +
                          " is singular; OLS undefined");
    }
    stacked.segment(k * P, P) = llt.solve(d.xty);
  }
  TransferMatrix tm =
      build_transfer_matrix(problem, Eigen::VectorXi::Ones(K), 0.0);
  return tm.T * stacked;
}

}  // namespace trp
