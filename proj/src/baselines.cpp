#include "trp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "trp/errors.hpp"

namespace trp {

namespace {

double soft_threshold(double x, double t) {
  const double mag = std::abs(x) - t;
  return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
}

Dataset stack_rows(const std::vector<const Dataset*>& parts) {
  Eigen::Index rows = 0;
  for (const Dataset* d : parts) rows += d->n();
  Matrix x(rows, parts.front()->p());
  Vector y(rows);
  Eigen::Index at = 0;
  for (const Dataset* d : parts) {
    x.middleRows(at, d->n()) = d->X;
    y.segment(at, d->n()) = d->y;
    at += d->n();
  }
  return Dataset(std::move(x), std::move(y));
}

}  // namespace

Vector ols(const Dataset& dataset) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(dataset.gram);
  if (es.eigenvalues()[0] < rank_tol() * std::max(es.eigenvalues().maxCoeff(), 1.0))
    throw SingularError("Gram matrix is singular; OLS is not defined");
  return dataset.gram.llt().solve(dataset.xty);
}

Vector ridge(const Dataset& dataset, double tau) {
  if (!(tau > 0.0)) throw Error("ridge penalty must be positive");
  const Matrix g =
      dataset.gram + tau * Matrix::Identity(dataset.p(), dataset.p());
  return g.llt().solve(dataset.xty);
}

Vector ridge_toward(const Dataset& dataset, const Vector& center, double tau) {
  if (!(tau > 0.0)) throw Error("ridge penalty must be positive");
  if (center.size() != dataset.p())
    throw Error("center has length " + std::to_string(center.size()) +
                ", expected " + std::to_string(dataset.p()));
  const Matrix g =
      dataset.gram + tau * Matrix::Identity(dataset.p(), dataset.p());
  return g.llt().solve((dataset.xty + tau * center).eval());
}

LassoFit lasso_cd(const Dataset& dataset, double lambda) {
  if (!(lambda >= 0.0)) throw Error("lasso penalty must be nonnegative");
  const Eigen::Index p = dataset.p();
  Vector beta = Vector::Zero(p);
  constexpr int kMaxSweeps = 100000;
  constexpr double kTol = 1e-9;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = dataset.gram(j, j);
      double next;
      if (gjj <= 1e-300) {
        next = 0.0;
      } else {
        const double partial =
            dataset.xty[j] - dataset.gram.row(j).dot(beta) + gjj * beta[j];
        next = soft_threshold(partial, lambda) / gjj;
      }
      max_change = std::max(max_change, std::abs(next - beta[j]));
      beta[j] = next;
    }
    if (max_change < kTol) {
      LassoFit fit;
      fit.beta = beta;
      fit.lambda = lambda;
      return fit;
    }
  }
  throw ConvergenceError("lasso coordinate descent exceeded " +
                         std::to_string(kMaxSweeps) + " sweeps");
}

std::vector<double> default_lambda_grid(const Dataset& dataset, int n_points) {
  if (n_points < 2) throw Error("lambda grid needs at least two points");
  const double lambda_max =
      std::max(dataset.xty.lpNorm<Eigen::Infinity>(), 1e-12);
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i)
    grid[static_cast<std::size_t>(i)] =
        lambda_max * std::pow(10.0, -3.0 * i / (n_points - 1.0));
  return grid;
}

LassoFit cv_lasso(const Dataset& dataset, int n_folds,
                  const std::vector<double>& lambda_grid, Rng& rng) {
  if (n_folds < 2) throw Error("cross validation needs at least two folds");
  if (dataset.n() < n_folds)
    throw Error("cross validation needs at least one row per fold");
  if (lambda_grid.empty()) throw Error("lambda grid is empty");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(dataset.n()));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }

  std::vector<std::pair<double, double>> path;
  double best_lambda = lambda_grid.front();
  double best_error = std::numeric_limits<double>::infinity();
  for (const double lambda : lambda_grid) {
    double total_error = 0.0;
    for (int fold = 0; fold < n_folds; ++fold) {
      std::vector<Eigen::Index> train, test;
      for (std::size_t i = 0; i < order.size(); ++i)
        (static_cast<int>(i) % n_folds == fold ? test : train).push_back(order[i]);
      Matrix xt(static_cast<Eigen::Index>(train.size()), dataset.p());
      Vector yt(static_cast<Eigen::Index>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        xt.row(static_cast<Eigen::Index>(i)) = dataset.X.row(train[i]);
        yt[static_cast<Eigen::Index>(i)] = dataset.y[train[i]];
      }
      const Vector beta = lasso_cd(Dataset(std::move(xt), std::move(yt)), lambda).beta;
      double fold_error = 0.0;
      for (const Eigen::Index row : test) {
        const double r = dataset.y[row] - dataset.X.row(row).dot(beta);
        fold_error += r * r;
      }
      total_error += fold_error / static_cast<double>(test.size());
    }
    const double mean_error = total_error / n_folds;
    path.emplace_back(lambda, mean_error);
    if (mean_error < best_error ||
        (mean_error == best_error && lambda > best_lambda)) {
      best_error = mean_error;
      best_lambda = lambda;
    }
  }

  LassoFit fit = lasso_cd(dataset, best_lambda);
  fit.cv_path = std::move(path);
  return fit;
}

Vector trans_lasso(const TransferProblem& problem, FirstStage first_stage,
                   double lambda1, double lambda2) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw Error("trans_lasso penalties must be positive");
  std::vector<const Dataset*> sources;
  sources.reserve(problem.sources.size());
  for (const Dataset& d : problem.sources) sources.push_back(&d);
  const Dataset pooled_sources = stack_rows(sources);
  const Vector beta_tilde = first_stage == FirstStage::lasso
                                ? lasso_cd(pooled_sources, lambda1).beta
                                : ridge(pooled_sources, lambda1);
  const Vector residuals = problem.target.y - problem.target.X * beta_tilde;
  const Vector delta =
      lasso_cd(Dataset(problem.target.X, residuals), lambda2).beta;
  return beta_tilde + delta;
}

Vector pooled_ols(const TransferProblem& problem) {
  std::vector<const Dataset*> parts;
  parts.push_back(&problem.target);
  for (const Dataset& d : problem.sources) parts.push_back(&d);
  return ols(stack_rows(parts));
}

}  // namespace trp
