#pragma once

#include <utility>
#include <vector>

#include "trp/dataset.hpp"
#include "trp/linalg.hpp"
#include "trp/rng.hpp"

namespace trp {

struct LassoFit {
  Vector beta;
  double lambda = 0.0;
  std::vector<std::pair<double, double>> cv_path;  // (lambda, mean CV error)
};

enum class FirstStage { lasso, ridge };

/// Least squares (G + tau I)^{-1} X^T y with tau = 0; throws SingularError
/// when the Gram is singular.
Vector ols(const Dataset& dataset);

/// Ridge estimate with penalty tau > 0.
Vector ridge(const Dataset& dataset, double tau);

/// Ridge shrinkage toward an arbitrary center:
/// argmin 0.5 ||y - X b||^2 + tau/2 ||b - center||^2.
Vector ridge_toward(const Dataset& dataset, const Vector& center, double tau);

/// Lasso for 0.5 ||y - X b||^2 + lambda ||b||_1 by cyclic coordinate descent
/// with soft thresholding, 1e-9 coordinate tolerance.
LassoFit lasso_cd(const Dataset& dataset, double lambda);

/// K-fold cross-validated lasso over the given grid; picks the grid value
/// minimizing mean held-out squared error, breaking exact ties toward the
/// larger penalty, then refits on all rows. Fold assignment is drawn from the
/// supplied stream.
LassoFit cv_lasso(const Dataset& dataset, int n_folds,
                  const std::vector<double>& lambda_grid, Rng& rng);

/// Evenly log-spaced penalty grid from the null-model threshold ||X^T y||_inf
/// down by three decades, largest first.
std::vector<double> default_lambda_grid(const Dataset& dataset, int n_points = 20);

/// Two-step transfer estimate: pooled fit on row-concatenated sources with
/// the chosen first-stage penalty, then a lasso correction on the target
/// residuals; returns the sum.
Vector trans_lasso(const TransferProblem& problem, FirstStage first_stage,
                   double lambda1, double lambda2);

/// OLS on all rows of target and sources concatenated.
Vector pooled_ols(const TransferProblem& problem);

}  // namespace trp
