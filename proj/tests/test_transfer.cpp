#include "doctest.h"

#include <cmath>
#include <vector>

#include "trp/errors.hpp"
#include "trp/transfer.hpp"

#include "util.hpp"

using trp::Matrix;
using trp::Vector;

namespace {

Vector stacked_source_ols(const trp::TransferProblem& problem) {
  const auto p = problem.p();
  Vector stacked(problem.k() * p);
  for (Eigen::Index k = 0; k < problem.k(); ++k) {
    const auto& d = problem.sources[static_cast<std::size_t>(k)];
    stacked.segment(k * p, p) = d.gram.llt().solve(d.xty);
  }
  return stacked;
}

}  // namespace

TEST_CASE("transfer matrix is zero when every source is excluded") {
  trp::Rng rng(101);
  const auto problem = testutil::random_problem(rng, 3, 2, 10, 20);
  for (double tau : {0.0, 0.7}) {
    const auto tm =
        trp::build_transfer_matrix(problem, Eigen::VectorXi::Zero(2), tau);
    CHECK(tm.T.norm() == 0.0);
    CHECK(tm.B.leftCols(3).isApprox(Matrix::Identity(3, 3)));
    CHECK(tm.B.rightCols(6).norm() == 0.0);
  }
}

TEST_CASE("transfer matrix solves the pooled normal equations") {
  trp::Rng rng(102);
  const auto problem = testutil::random_problem(rng, 4, 3, 12, 25);
  Eigen::VectorXi eta(3);
  eta << 1, 0, 1;
  const double tau = 0.3;
  const auto tm = trp::build_transfer_matrix(problem, eta, tau);

  Matrix m = tau * Matrix::Identity(4, 4);
  m += problem.sources[0].gram;
  m += problem.sources[2].gram;
  // Included sources appear with their Grams, excluded ones as zero columns.
  CHECK((m * tm.T.middleCols(0, 4) - problem.sources[0].gram).norm() < 1e-9);
  CHECK(tm.T.middleCols(4, 4).norm() == 0.0);
  CHECK((m * tm.T.middleCols(8, 4) - problem.sources[2].gram).norm() < 1e-9);
  CHECK(tm.B.rightCols(12).isApprox(-tm.T));
}

TEST_CASE("transfer matrix with tau zero requires a positive definite pool") {
  trp::Rng rng(103);
  // A single source with fewer rows than covariates has a singular Gram.
  std::vector<trp::Dataset> sources = {testutil::random_dataset(rng, 2, 4)};
  trp::TransferProblem problem(testutil::random_dataset(rng, 8, 4),
                               std::move(sources));
  CHECK_THROWS_AS(
      trp::build_transfer_matrix(problem, Eigen::VectorXi::Ones(1), 0.0),
      trp::SingularError);
  // A positive tau regularizes the same pool.
  const auto tm =
      trp::build_transfer_matrix(problem, Eigen::VectorXi::Ones(1), 0.5);
  CHECK(tm.T.allFinite());
}

TEST_CASE("pseudoinverse identities and pooled minimizer") {
  trp::Rng rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = 2 + static_cast<Eigen::Index>(rng.uniform() * 3);
    const auto k = 1 + static_cast<Eigen::Index>(rng.uniform() * 3);
    const auto problem =
        testutil::random_problem(rng, p, k, p + 6, p + 15);

    const auto tm =
        trp::build_transfer_matrix(problem, Eigen::VectorXi::Ones(k), 0.0);
    const Matrix t_pinv = trp::transfer_pseudoinverse(problem);

    CHECK((tm.T * t_pinv - Matrix::Identity(p, p)).norm() < 1e-9);
    const Matrix proj = t_pinv * tm.T;
    CHECK((proj * proj - proj).norm() < 1e-9 * (1.0 + proj.norm()));

    // Applying T to the stacked per-source fits solves the pooled problem.
    Matrix sum_g = Matrix::Zero(p, p);
    Vector sum_xty = Vector::Zero(p);
    for (const auto& d : problem.sources) {
      sum_g += d.gram;
      sum_xty += d.xty;
    }
    const Vector pooled = sum_g.llt().solve(sum_xty);
    CHECK((tm.T * stacked_source_ols(problem) - pooled).norm() <
          1e-9 * (1.0 + pooled.norm()));
    CHECK((trp::pooled_minimizer_via_T(problem) - pooled).norm() <
          1e-9 * (1.0 + pooled.norm()));
  }
}

TEST_CASE("l1 pooling operator satisfies its optimality conditions") {
  trp::Rng rng(105);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = 2 + static_cast<Eigen::Index>(rng.uniform() * 3);
    const auto k = 1 + static_cast<Eigen::Index>(rng.uniform() * 2);
    const auto problem = testutil::random_problem(rng, p, k, p + 5, p + 12);
    const double tau = 0.2 + 2.0 * rng.uniform();
    const Vector beta_s = rng.normal_vector(k * p);
    Eigen::VectorXi eta = Eigen::VectorXi::Ones(k);

    const Vector b = trp::transfer_operator_l1(problem, eta, tau, beta_s);

    Matrix h = Matrix::Zero(p, p);
    Vector c = Vector::Zero(p);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& g = problem.sources[static_cast<std::size_t>(j)].gram;
      h += g;
      c += g * beta_s.segment(j * p, p);
    }
    const Vector grad = h * b - c;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (b[j] != 0.0) {
        CHECK(std::abs(grad[j] + tau * (b[j] > 0 ? 1.0 : -1.0)) < 1e-6);
      } else {
        CHECK(std::abs(grad[j]) <= tau + 1e-6);
      }
    }
  }
}

TEST_CASE("l1 pooling operator rejects tau zero") {
  trp::Rng rng(106);
  const auto problem = testutil::random_problem(rng, 2, 1, 8, 10);
  CHECK_THROWS_AS(trp::transfer_operator_l1(problem, Eigen::VectorXi::Ones(1),
                                            0.0, Vector::Zero(2)),
                  trp::DegenerateDataError);
}

TEST_CASE("l1 pooling operator with excluded sources returns zero") {
  trp::Rng rng(107);
  const auto problem = testutil::random_problem(rng, 3, 2, 8, 15);
  const Vector b = trp::transfer_operator_l1(
      problem, Eigen::VectorXi::Zero(2), 1.0, rng.normal_vector(6));
  CHECK(b.norm() == 0.0);
}
