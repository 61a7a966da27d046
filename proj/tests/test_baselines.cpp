#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "trp/baselines.hpp"
#include "trp/errors.hpp"

#include "util.hpp"

using trp::Matrix;
using trp::Vector;

namespace {

// KKT residual of 0.5 ||y - X b||^2 + lambda ||b||_1 at b.
double lasso_kkt_violation(const trp::Dataset& d, const Vector& beta,
                           double lambda) {
  const Vector grad = d.gram * beta - d.xty;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (std::abs(beta[j]) > 1e-10) {
      worst = std::max(worst, std::abs(grad[j] + lambda * (beta[j] > 0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::max(0.0, std::abs(grad[j]) - lambda));
    }
  }
  return worst;
}

trp::Dataset orthonormal_design(trp::Rng& rng, Eigen::Index n, Eigen::Index p) {
  Matrix a(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) a(i, j) = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ() *
                   Matrix::Identity(n, p);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.normal() * 2.0;
  return trp::Dataset(q, y);
}

}  // namespace

TEST_CASE("least squares matches a direct solve and flags singular designs") {
  trp::Rng rng(401);
  const auto d = testutil::random_dataset(rng, 30, 4);
  const Vector direct = d.gram.ldlt().solve(d.xty);
  CHECK((trp::ols(d) - direct).norm() < 1e-10);

  Matrix x(2, 4);
  x.setZero();
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  Vector y(2);
  y << 1.0, 2.0;
  CHECK_THROWS_AS(trp::ols(trp::Dataset(x, y)), trp::SingularError);
}

TEST_CASE("ridge solves the shifted normal equations") {
  trp::Rng rng(402);
  const auto d = testutil::random_dataset(rng, 25, 3);
  const double tau = 1.7;
  const Vector expected =
      (d.gram + tau * Matrix::Identity(3, 3)).llt().solve(d.xty);
  CHECK((trp::ridge(d, tau) - expected).norm() < 1e-10);
  CHECK_THROWS_AS(trp::ridge(d, 0.0), trp::Error);
}

TEST_CASE("ridge toward a center interpolates between the limits") {
  trp::Rng rng(403);
  const auto d = testutil::random_dataset(rng, 25, 3);
  Vector center(3);
  center << 2.0, -1.0, 0.5;

  const Vector heavy = trp::ridge_toward(d, center, 1e10);
  CHECK((heavy - center).norm() < 1e-5);

  const Vector light = trp::ridge_toward(d, center, 1e-10);
  CHECK((light - trp::ols(d)).norm() < 1e-6);

  const double tau = 2.3;
  const Vector expected = (d.gram + tau * Matrix::Identity(3, 3))
                              .llt()
                              .solve(d.xty + tau * center);
  CHECK((trp::ridge_toward(d, center, tau) - expected).norm() < 1e-10);
}

TEST_CASE("lasso satisfies its optimality conditions") {
  trp::Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = testutil::random_dataset(rng, 40, 6);
    const double lambda = 0.5 + 4.0 * rng.uniform();
    const auto fit = trp::lasso_cd(d, lambda);
    CHECK(lasso_kkt_violation(d, fit.beta, lambda) < 1e-6);
  }
}

TEST_CASE("lasso shrinks to zero above the null threshold") {
  trp::Rng rng(405);
  const auto d = testutil::random_dataset(rng, 30, 5);
  const double threshold = d.xty.cwiseAbs().maxCoeff();
  CHECK(trp::lasso_cd(d, threshold * 1.0001).beta.isZero(1e-12));
  CHECK(!trp::lasso_cd(d, threshold * 0.9).beta.isZero(1e-8));
}

TEST_CASE("lasso has the soft threshold form on orthonormal designs") {
  trp::Rng rng(406);
  const auto d = orthonormal_design(rng, 40, 5);
  const double lambda = 0.8;
  const auto fit = trp::lasso_cd(d, lambda);
  for (Eigen::Index j = 0; j < 5; ++j) {
    const double raw = d.xty[j];
    const double expected =
        std::copysign(std::max(0.0, std::abs(raw) - lambda), raw);
    CHECK(fit.beta[j] == doctest::Approx(expected).epsilon(1e-7));
  }
}

TEST_CASE("default penalty grid spans three decades from the null threshold") {
  trp::Rng rng(407);
  const auto d = testutil::random_dataset(rng, 30, 4);
  const auto grid = trp::default_lambda_grid(d, 12);
  REQUIRE(grid.size() == 12);
  CHECK(grid.front() ==
        doctest::Approx(d.xty.cwiseAbs().maxCoeff()).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(grid.front() * 1e-3).epsilon(1e-9));
  CHECK(std::is_sorted(grid.rbegin(), grid.rend()));
  const double ratio = grid[1] / grid[0];
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    CHECK(grid[i + 1] / grid[i] == doctest::Approx(ratio).epsilon(1e-9));
  }
}

TEST_CASE("cross validated lasso is reproducible and refits on all rows") {
  trp::Rng rng(408);
  const auto d = testutil::random_dataset(rng, 60, 5);
  const auto grid = trp::default_lambda_grid(d, 10);

  trp::Rng fold_rng_a(9), fold_rng_b(9);
  const auto a = trp::cv_lasso(d, 5, grid, fold_rng_a);
  const auto b = trp::cv_lasso(d, 5, grid, fold_rng_b);
  CHECK(a.lambda == b.lambda);
  CHECK((a.beta - b.beta).norm() == 0.0);

  REQUIRE(a.cv_path.size() == grid.size());
  double best = a.cv_path.front().second;
  double best_lambda = a.cv_path.front().first;
  for (const auto& [lambda, err] : a.cv_path) {
    if (err < best) {
      best = err;
      best_lambda = lambda;
    }
  }
  CHECK(a.lambda == best_lambda);
  CHECK(lasso_kkt_violation(d, a.beta, a.lambda) < 1e-6);
}

TEST_CASE("cross validation breaks ties toward the larger penalty") {
  // With a pure-noise response of zero, every penalty at or above the null
  // threshold has identical CV error, so the largest grid value must win.
  Matrix x(8, 2);
  x << 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1;
  Vector y = Vector::Zero(8);
  trp::Dataset d(x, y);
  trp::Rng rng(7);
  const std::vector<double> grid = {4.0, 2.0, 1.0};
  const auto fit = trp::cv_lasso(d, 4, grid, rng);
  CHECK(fit.lambda == 4.0);
  CHECK(fit.beta.isZero(0.0));
}

TEST_CASE("two step transfer estimate obeys its limiting penalties") {
  trp::Rng rng(409);
  const auto problem = testutil::random_problem(rng, 3, 2, 25, 40);

  Matrix stacked_x(80, 3);
  Vector stacked_y(80);
  stacked_x << problem.sources[0].X, problem.sources[1].X;
  stacked_y << problem.sources[0].y, problem.sources[1].y;
  const trp::Dataset pooled(stacked_x, stacked_y);

  // Tiny second penalty: the correction is an unregularized refit, so the
  // estimate collapses to the target fit regardless of the first stage.
  const Vector near_target =
      trp::trans_lasso(problem, trp::FirstStage::lasso, 0.3, 1e-10);
  CHECK((near_target - trp::ols(problem.target)).cwiseAbs().maxCoeff() < 1e-5);

  // Huge second penalty: the correction vanishes and the pooled first-stage
  // fit is returned unchanged.
  const Vector near_pooled =
      trp::trans_lasso(problem, trp::FirstStage::ridge, 0.7, 1e9);
  const Vector pooled_ridge = trp::ridge(pooled, 0.7);
  CHECK((near_pooled - pooled_ridge).cwiseAbs().maxCoeff() < 1e-6);

  const Vector lasso_first =
      trp::trans_lasso(problem, trp::FirstStage::lasso, 0.7, 1e9);
  CHECK((lasso_first - trp::lasso_cd(pooled, 0.7).beta).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("pooled least squares uses every dataset row") {
  trp::Rng rng(410);
  const auto problem = testutil::random_problem(rng, 2, 2, 10, 15);
  Matrix all_x(40, 2);
  Vector all_y(40);
  all_x << problem.target.X, problem.sources[0].X, problem.sources[1].X;
  all_y << problem.target.y, problem.sources[0].y, problem.sources[1].y;
  const Vector direct = trp::ols(trp::Dataset(all_x, all_y));
  CHECK((trp::pooled_ols(problem) - direct).norm() < 1e-10);
}
