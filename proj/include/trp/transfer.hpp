#pragma once

#include <Eigen/Dense>

#include "trp/dataset.hpp"
#include "trp/linalg.hpp"

namespace trp {

/// Pooling operator for source coefficients. T maps stacked source
/// coefficients to the ridge-pooled minimizer; B = [I | -T] maps joint
/// coefficients (target first) to the coupling residual beta_0 - T beta_S.
struct TransferMatrix {
  Matrix T;  // P x K P
  Matrix B;  // P x (K+1) P
  Eigen::VectorXi eta;
  double tau = 0.0;
};

/// Build the pooling operator T = (sum_k eta_k G_k + tau I)^{-1} [eta_1 G_1
/// ... eta_K G_K] and its residual map B. When every eta_k is zero, T is the
/// zero map regardless of tau. Requires sum_k eta_k G_k positive definite
/// when tau = 0; throws SingularError otherwise.
TransferMatrix build_transfer_matrix(const TransferProblem& problem,
                                     const Eigen::VectorXi& eta, double tau);

/// Minimize 0.5 sum_k eta_k (b_k - b)^T G_k (b_k - b) + tau ||b||_1 over b by
/// cyclic coordinate descent on the Gram form. beta_S holds the stacked
/// per-source coefficients. Throws ConvergenceError past 1e5 sweeps.
Vector transfer_operator_l1(const TransferProblem& problem,
                            const Eigen::VectorXi& eta, double tau,
                            const Vector& beta_S, double tol = 1e-10);

/// Right inverse of the tau = 0, all-sources pooling map: stack(G_k) *
/// (sum G_k^2)^{-1} * (sum G_k). Requires every G_k positive definite.
Matrix transfer_pseudoinverse(const TransferProblem& problem);

/// The tau = 0 pooling map applied to the stacked per-source OLS estimates,
/// which equals the pooled minimizer (sum G_k)^{-1} sum X_k^T y_k.
Vector pooled_minimizer_via_T(const TransferProblem& problem);

}  // namespace trp
