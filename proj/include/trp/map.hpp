#pragma once

#include <utility>
#include <vector>

#include "trp/dataset.hpp"
#include "trp/linalg.hpp"

namespace trp {

/// Posterior-mode problem: the transfer problem plus the coupling strength,
/// the pooling regularizer tau, and the kernel ridge lambda_p, which is
/// folded into every per-dataset Gram before hat estimates are formed.
struct MapProblem {
  TransferProblem problem;
  double lambda_t = 0.0;
  double tau = 0.0;
  double lambda_p = 0.0;
};

struct MapSolution {
  Vector beta_A;
  Vector z;  // pooled coordinates T beta_S at the optimum
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// One iterate of the naive alternation on (beta_0, z).
struct BlockCdIterate {
  Vector beta0;
  Vector z;
  double objective = 0.0;
};

/// Closed-form univariate posterior mode for the objective
/// (b - beta0_hat)^2 / (2 s0) + (z - z_hat)^2 / (2 sz) + lambda_t |b - z|.
/// Returns (beta0_star, z_star).
std::pair<double, double> map_univariate(double beta0_hat, double z_hat, double s0,
                                         double sz, double lambda_t);

/// Univariate two-step estimate: the source estimate plus the
/// soft-thresholded correction toward the target estimate.
double translasso_univariate(double beta0_hat, double z_hat, double s0,
                             double lambda_t);

/// Mode objective in hat form: sum of Gram-weighted squared distances to the
/// per-dataset estimates plus lambda_t ||beta_0 - T beta_S||_1, with
/// lambda_p^2 folded into the Grams. Falls back to the data-space form when a
/// folded Gram is singular. The two forms differ by a beta-independent
/// constant.
double map_objective(const Vector& beta_A, const TransferProblem& problem,
                     double lambda_t, double tau, double lambda_p = 0.0);

/// Data-space form of the same objective: residual sums of squares plus the
/// ridge and coupling terms, no hat estimates needed.
double map_objective_data_space(const Vector& beta_A, const TransferProblem& problem,
                                double lambda_t, double tau, double lambda_p = 0.0);

/// Exact mode via the change of coordinates that makes the nonsmooth term
/// axis-aligned: profiles out the pooled and kernel components analytically,
/// solves the remaining l1-regularized quadratic by coordinate descent, then
/// recovers all blocks from the stationarity conditions.
MapSolution map_transformed_cd(const MapProblem& mp);

/// Quadratic penalty method: for each C in the schedule, alternate gradient
/// steps on the coefficients with soft-threshold updates of the split
/// variable z at threshold lambda_t / C. A nonpositive step selects a safe
/// 1/L step per stage (L by power iteration); an explicit positive step is
/// used verbatim and may trigger StepSizeError on divergence.
MapSolution map_quadratic_penalty(const MapProblem& mp,
                                  const std::vector<double>& c_schedule = {},
                                  double step = 0.0);

/// Naive block coordinate descent on (beta_0, z): alternates exact block
/// minimizations of the profiled objective. Returns the trajectory including
/// the initial point; stops early once an alternation changes nothing.
std::vector<BlockCdIterate> naive_block_cd(const MapProblem& mp, const Vector& beta0_init,
                                           const Vector& z_init, int max_sweeps);

}  // namespace trp
