#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "trp/errors.hpp"
#include "trp/gibbs.hpp"
#include "trp/slice.hpp"
#include "trp/transfer.hpp"

#include "util.hpp"

using trp::Matrix;
using trp::Vector;

namespace {

trp::TransferProblem zero_response_copy(const trp::TransferProblem& problem) {
  std::vector<trp::Dataset> sources;
  for (const auto& s : problem.sources) {
    sources.emplace_back(s.X, Vector::Zero(s.n()));
  }
  return trp::TransferProblem(
      trp::Dataset(problem.target.X, Vector::Zero(problem.target.n())),
      std::move(sources));
}

trp::ModelState basic_state(const trp::TransferProblem& problem) {
  trp::ModelState state;
  state.beta_A = Vector::Zero((problem.k() + 1) * problem.p());
  state.omega = Vector::Ones(problem.p());
  state.eta = Eigen::VectorXi::Ones(problem.k());
  return state;
}

Matrix dense_joint_precision(const trp::TransferProblem& problem,
                             const trp::ModelState& state,
                             trp::PriorKind kind) {
  const auto p = problem.p();
  const auto k = problem.k();
  const auto dim = (k + 1) * p;
  Matrix precision = Matrix::Zero(dim, dim);
  for (Eigen::Index j = 0; j <= k; ++j) {
    precision.block(j * p, j * p, p, p) = problem.dataset(j).gram;
  }
  const Matrix b =
      trp::build_transfer_matrix(problem, state.eta, state.tau).B;
  const Vector w = trp::effective_omega_inv(state, kind);
  precision += b.transpose() * w.asDiagonal() * b;
  const Matrix proj =
      Matrix::Identity(dim, dim) -
      b.transpose() * (b * b.transpose()).llt().solve(b);
  precision += state.lambda_p * state.lambda_p * proj;
  return precision;
}

}  // namespace

TEST_CASE("joint coefficient draw has the exact conditional mean") {
  trp::Rng rng(201);
  for (auto kind : {trp::PriorKind::laplace, trp::PriorKind::gaussian}) {
    const auto problem = testutil::random_problem(rng, 3, 2, 12, 18);
    trp::ModelState state = basic_state(problem);
    state.omega = Vector::Ones(3) * 0.8;
    state.omega[1] = 2.5;
    state.lambda_t = 1.3;
    state.lambda_p = 0.7;
    state.tau = 0.4;
    state.sigma2 = 1.9;

    // Identical generator seeds cancel the noise term, isolating the mean.
    trp::Rng rng_a(777), rng_b(777);
    const Vector with_data = trp::sample_beta_A(state, problem, kind, rng_a);
    const Vector no_data =
        trp::sample_beta_A(state, zero_response_copy(problem), kind, rng_b);
    const Vector mean = with_data - no_data;

    Vector xty((problem.k() + 1) * problem.p());
    for (Eigen::Index j = 0; j <= problem.k(); ++j) {
      xty.segment(j * problem.p(), problem.p()) = problem.dataset(j).xty;
    }
    const Vector oracle =
        dense_joint_precision(problem, state, kind).llt().solve(xty);
    CHECK((mean - oracle).norm() < 1e-8 * (1.0 + oracle.norm()));
  }
}

TEST_CASE("sigma2 conditional shape and rate match a dense computation") {
  trp::Rng rng(202);
  const auto problem = testutil::random_problem(rng, 2, 2, 9, 11);
  trp::ModelState state = basic_state(problem);
  state.beta_A = rng.normal_vector(6);
  state.omega << 0.5, 3.0;
  state.lambda_t = 0.9;
  state.lambda_p = 1.4;
  state.tau = 0.6;

  const auto [shape, rate] =
      trp::sigma2_shape_rate(state, problem, trp::PriorKind::laplace);
  CHECK(shape == doctest::Approx((9 + 11 + 11 + 6) / 2.0));

  double rss = 0.0;
  for (Eigen::Index j = 0; j <= 2; ++j) {
    const auto& d = problem.dataset(j);
    rss += (d.y - d.X * state.beta_A.segment(j * 2, 2)).squaredNorm();
  }
  const Matrix b = trp::build_transfer_matrix(problem, state.eta, 0.6).B;
  const Vector gap = b * state.beta_A;
  double q_omega = 0.0;
  for (Eigen::Index i = 0; i < 2; ++i) q_omega += gap[i] * gap[i] / state.omega[i];
  const Matrix proj = Matrix::Identity(6, 6) -
                      b.transpose() * (b * b.transpose()).llt().solve(b);
  const double q_perp = (proj * state.beta_A).squaredNorm();
  CHECK(rate == doctest::Approx((rss + q_omega + 1.4 * 1.4 * q_perp) / 2.0)
                    .epsilon(1e-10));
}

TEST_CASE("omega update is all ones under the gaussian prior") {
  trp::Rng rng(203);
  const auto problem = testutil::random_problem(rng, 2, 1, 8, 10);
  trp::ModelState state = basic_state(problem);
  state.beta_A = rng.normal_vector(4);
  const Vector omega =
      trp::sample_omega(state, problem, trp::PriorKind::gaussian, rng);
  CHECK(omega.isApprox(Vector::Ones(2)));
  CHECK(trp::effective_omega_inv(state, trp::PriorKind::gaussian)[0] ==
        doctest::Approx(state.lambda_t * state.lambda_t));
}

TEST_CASE("inverse omega draws have the inverse gaussian mean") {
  trp::Rng rng(204);
  const auto problem = testutil::random_problem(rng, 2, 1, 8, 10);
  trp::ModelState state = basic_state(problem);
  state.beta_A = Vector::Ones(4);
  state.beta_A[2] = 0.4;  // make the coupling gaps nonzero and distinct
  state.beta_A[3] = -0.2;
  state.sigma2 = 1.21;
  state.lambda_t = 1.7;

  const Matrix b = trp::build_transfer_matrix(problem, state.eta, state.tau).B;
  const Vector gap = b * state.beta_A;

  const int n = 60000;
  Vector total = Vector::Zero(2);
  for (int i = 0; i < n; ++i) {
    const Vector omega =
        trp::sample_omega(state, problem, trp::PriorKind::laplace, rng);
    total += omega.cwiseInverse();
  }
  total /= static_cast<double>(n);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double expected =
        std::sqrt(state.sigma2) * state.lambda_t / std::abs(gap[j]);
    CHECK(total[j] == doctest::Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("wald sampler moments") {
  trp::Rng rng(205);
  const double mu = 2.0, shape = 3.0;
  std::vector<double> draws;
  draws.reserve(100000);
  for (int i = 0; i < 100000; ++i) draws.push_back(rng.inverse_gaussian(mu, shape));
  const double m = testutil::mean(draws);
  double var = 0.0;
  for (double d : draws) var += (d - m) * (d - m);
  var /= static_cast<double>(draws.size() - 1);
  CHECK(m == doctest::Approx(mu).epsilon(0.02));
  CHECK(var == doctest::Approx(mu * mu * mu / shape).epsilon(0.1));
}

TEST_CASE("slice sampler reproduces a gamma target") {
  trp::Rng rng(206);
  const auto logf = [](double x) { return 2.0 * std::log(x) - 2.0 * x; };
  double x = 1.0;
  std::vector<double> draws;
  for (int i = 0; i < 30000; ++i) {
    x = trp::slice_sample_positive(logf, x, 1.0, rng);
    draws.push_back(x);
  }
  CHECK(testutil::mean(draws) == doctest::Approx(1.5).epsilon(0.05));
}

TEST_CASE("eta log odds equals the config density difference") {
  trp::Rng rng(207);
  const auto problem = testutil::random_problem(rng, 2, 3, 10, 14);
  trp::ModelState state = basic_state(problem);
  state.beta_A = rng.normal_vector(8);
  state.lambda_t = 1.1;
  state.lambda_p = 0.9;
  state.rho = 0.3;
  state.eta << 1, 0, 1;

  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXi on = state.eta, off = state.eta;
    on[k] = 1;
    off[k] = 0;
    const double direct =
        trp::eta_log_odds(k, state, problem, trp::PriorKind::laplace);
    const double via_configs =
        trp::eta_config_log_density(state, problem, on, trp::PriorKind::laplace) -
        trp::eta_config_log_density(state, problem, off, trp::PriorKind::laplace);
    CHECK(direct == doctest::Approx(via_configs).epsilon(1e-10));
  }
}

TEST_CASE("chains are deterministic under a fixed seed") {
  trp::Rng rng(208);
  const auto problem = testutil::random_problem(rng, 2, 2, 12, 16);
  trp::SamplerConfig config;
  config.n_iter = 200;
  config.n_burnin = 50;
  config.seed = 42;
  const auto a = trp::run_chain(problem, config);
  const auto b = trp::run_chain(problem, config);
  REQUIRE(a.draws.rows() == b.draws.rows());
  CHECK((a.draws - b.draws).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.count() == 150);

  config.thin = 4;
  const auto c = trp::run_chain(problem, config);
  CHECK(c.count() == 37);  // floor((200 - 50) / 4)
}

TEST_CASE("fixing parameters pins the corresponding draw columns") {
  trp::Rng rng(209);
  const auto problem = testutil::random_problem(rng, 2, 2, 12, 16);
  trp::SamplerConfig config;
  config.n_iter = 120;
  config.n_burnin = 20;
  config.seed = 3;
  config.tau_fixed = 0.75;
  Eigen::VectorXi eta(2);
  eta << 1, 0;
  config.eta_fixed = eta;
  config.lambda_t_fixed = 1.25;

  const auto draws = trp::run_chain(problem, config);
  const Matrix tau_col = draws.block("tau");
  const Matrix lt_col = draws.block("lambda_t");
  const Matrix eta_cols = draws.block("eta");
  CHECK(tau_col.minCoeff() == 0.75);
  CHECK(tau_col.maxCoeff() == 0.75);
  CHECK(lt_col.minCoeff() == 1.25);
  CHECK(lt_col.maxCoeff() == 1.25);
  CHECK(eta_cols.col(0).minCoeff() == 1.0);
  CHECK(eta_cols.col(1).maxCoeff() == 0.0);
  CHECK_THROWS_AS(draws.span("nonexistent"), trp::Error);
}

TEST_CASE("identical replica temperatures always swap") {
  trp::Rng rng(210);
  const auto problem = testutil::random_problem(rng, 2, 2, 10, 14);
  trp::SamplerConfig config;
  config.n_iter = 300;
  config.n_burnin = 50;
  config.n_temperatures = 3;
  config.temperature_spacing = 1.0;
  config.seed = 9;
  const auto draws = trp::run_chain(problem, config);
  REQUIRE(draws.swap_stats.size() == 2);
  CHECK(draws.swap_stats[0] == 1.0);
  CHECK(draws.swap_stats[1] == 1.0);
}

TEST_CASE("tempered chain visits multiple inclusion configurations") {
  // Two sources that contradict each other keep several eta configurations
  // plausible, so the cold chain should move between them.
  trp::Rng rng(211);
  Matrix x0(10, 2), x1(40, 2), x2(40, 2);
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) x0(i, j) = rng.normal();
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      x1(i, j) = rng.normal();
      x2(i, j) = rng.normal();
    }
  Vector beta_good(2), beta_bad(2);
  beta_good << 1.0, 1.0;
  beta_bad << -3.0, 2.0;
  Vector y0 = x0 * beta_good, y1 = x1 * beta_good, y2 = x2 * beta_bad;
  for (Eigen::Index i = 0; i < 10; ++i) y0[i] += 0.5 * rng.normal();
  for (Eigen::Index i = 0; i < 40; ++i) {
    y1[i] += 0.5 * rng.normal();
    y2[i] += 0.5 * rng.normal();
  }
  std::vector<trp::Dataset> sources;
  sources.emplace_back(std::move(x1), std::move(y1));
  sources.emplace_back(std::move(x2), std::move(y2));
  trp::TransferProblem problem(trp::Dataset(std::move(x0), std::move(y0)),
                               std::move(sources));

  trp::SamplerConfig config;
  config.n_iter = 10000;
  config.n_burnin = 1000;
  config.n_temperatures = 5;
  config.seed = 17;
  const auto draws = trp::run_chain(problem, config);

  const Matrix eta_cols = draws.block("eta");
  std::set<std::pair<int, int>> visited;
  for (Eigen::Index r = 0; r < eta_cols.rows(); ++r) {
    visited.insert({static_cast<int>(eta_cols(r, 0)),
                    static_cast<int>(eta_cols(r, 1))});
  }
  CHECK(visited.size() >= 2);
  bool attempted = false;
  for (double s : draws.swap_stats) attempted = attempted || s > 0.0;
  CHECK(attempted);
}

TEST_CASE("gaussian chain with couplings off reduces to per dataset fits") {
  trp::Rng rng(212);
  const auto problem = testutil::random_problem(rng, 2, 1, 200, 60);
  trp::SamplerConfig config;
  config.n_iter = 6000;
  config.n_burnin = 1000;
  config.prior_kind = trp::PriorKind::gaussian;
  config.seed = 12;
  config.lambda_t_fixed = 0.0;
  config.lambda_p_fixed = 2.0;
  config.tau_fixed = 1.0;
  config.eta_fixed = Eigen::VectorXi::Zero(1);

  const auto draws = trp::run_chain(problem, config);
  const Matrix beta = draws.block("beta");
  const Vector posterior_mean = beta.colwise().mean().transpose();

  const Vector target_ols = problem.target.gram.llt().solve(problem.target.xty);
  // With eta = 0 the kernel penalty falls on the source block only.
  const Matrix penalized =
      problem.sources[0].gram + 4.0 * Matrix::Identity(2, 2);
  const Vector source_ridge = penalized.llt().solve(problem.sources[0].xty);

  CHECK((posterior_mean.head(2) - target_ols).cwiseAbs().maxCoeff() < 0.05);
  CHECK((posterior_mean.tail(2) - source_ridge).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("generic sampler with the l1 penalty off matches ridge posteriors") {
  trp::Rng rng(213);
  const auto problem = testutil::random_problem(rng, 2, 1, 30, 40);
  trp::SamplerConfig config;
  config.n_iter = 24000;
  config.n_burnin = 4000;
  config.seed = 21;
  config.lambda_t_fixed = 0.0;
  config.lambda_p_fixed = 2.0;
  config.tau_fixed = 1.0;

  const auto draws =
      trp::run_generic_mwg(problem, trp::PenaltyKind::l1, config);
  const Vector posterior_mean =
      draws.block("beta").colwise().mean().transpose();

  for (Eigen::Index j = 0; j <= 1; ++j) {
    const auto& d = problem.dataset(j);
    const Matrix penalized = d.gram + 4.0 * Matrix::Identity(2, 2);
    const Vector ridge_fit = penalized.llt().solve(d.xty);
    CHECK((posterior_mean.segment(j * 2, 2) - ridge_fit).cwiseAbs().maxCoeff() <
          0.06);
  }
  CHECK(draws.acceptance_stats.count("coord_accept_rate") == 1);
}

TEST_CASE("generic l2 sampler agrees with the gibbs chain") {
  trp::Rng rng(214);
  const auto problem = testutil::random_problem(rng, 2, 1, 25, 35);

  trp::SamplerConfig gibbs_config;
  gibbs_config.n_iter = 16000;
  gibbs_config.n_burnin = 3000;
  gibbs_config.prior_kind = trp::PriorKind::gaussian;
  gibbs_config.seed = 31;
  gibbs_config.eta_fixed = Eigen::VectorXi::Ones(1);
  const auto gibbs = trp::run_chain(problem, gibbs_config);

  trp::SamplerConfig mwg_config;
  mwg_config.n_iter = 60000;
  mwg_config.n_burnin = 10000;
  mwg_config.seed = 32;
  const auto mwg = trp::run_generic_mwg(problem, trp::PenaltyKind::l2, mwg_config);

  const auto compare_mean = [&](const std::string& name, double guard) {
    const Matrix a = gibbs.block(name);
    const Matrix b = mwg.block(name);
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      std::vector<double> xa(a.rows()), xb(b.rows());
      for (Eigen::Index r = 0; r < a.rows(); ++r) xa[static_cast<std::size_t>(r)] = a(r, c);
      for (Eigen::Index r = 0; r < b.rows(); ++r) xb[static_cast<std::size_t>(r)] = b(r, c);
      const double se = std::sqrt(
          std::pow(testutil::batch_means_se(xa, 500), 2) +
          std::pow(testutil::batch_means_se(xb, 500), 2));
      CHECK(std::abs(testutil::mean(xa) - testutil::mean(xb)) <
            5.0 * se + guard);
    }
  };
  compare_mean("beta", 0.01);
  compare_mean("sigma2", 0.02);
}

TEST_CASE("posterior predictions use the draw mixture") {
  const Eigen::Index p = 2, k = 1;
  trp::PosteriorDraws draws;
  draws.p = p;
  draws.k = k;
  draws.layout = {{"beta", {0, 4}}, {"sigma2", {4, 5}}};
  draws.draws.resize(3, 5);
  Vector beta0(2);
  beta0 << 1.5, -0.5;
  for (int r = 0; r < 3; ++r) {
    draws.draws(r, 0) = beta0[0];
    draws.draws(r, 1) = beta0[1];
    draws.draws(r, 2) = 9.0;
    draws.draws(r, 3) = 9.0;
    draws.draws(r, 4) = 0.64;  // constant noise variance
  }
  Matrix x_new(2, 2);
  x_new << 1.0, 2.0, -1.0, 0.5;

  const auto summary = trp::posterior_predict(draws, x_new, 0.9);
  const Vector expected_mean = x_new * beta0;
  CHECK((summary.mean - expected_mean).norm() < 1e-12);
  const double z95 = 1.6448536269514722;
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(summary.lower[i] ==
          doctest::Approx(expected_mean[i] - z95 * 0.8).epsilon(1e-6));
    CHECK(summary.upper[i] ==
          doctest::Approx(expected_mean[i] + z95 * 0.8).epsilon(1e-6));
  }

  Matrix bad(1, 3);
  bad.setZero();
  CHECK_THROWS_AS(trp::posterior_predict(draws, bad, 0.9), trp::Error);
  CHECK_THROWS_AS(trp::posterior_predict(draws, x_new, 1.5), trp::Error);
}

TEST_CASE("invalid sampler configurations are rejected") {
  trp::Rng rng(215);
  const auto problem = testutil::random_problem(rng, 2, 1, 8, 10);
  trp::SamplerConfig config;
  config.n_iter = 100;
  config.n_burnin = 100;  // burnin must be strictly smaller
  CHECK_THROWS_AS(trp::run_chain(problem, config), trp::Error);

  config.n_burnin = 10;
  config.thin = 0;
  CHECK_THROWS_AS(trp::run_chain(problem, config), trp::Error);

  config.thin = 1;
  config.tau_fixed = -1.0;
  CHECK_THROWS_AS(trp::run_chain(problem, config), trp::Error);

  config.tau_fixed.reset();
  config.n_temperatures = 0;
  CHECK_THROWS_AS(trp::run_chain(problem, config), trp::Error);

  config.n_temperatures = 2;
  config.temperature_spacing = 0.5;
  CHECK_THROWS_AS(trp::run_chain(problem, config), trp::Error);

  config.temperature_spacing = 2.0;
  Eigen::VectorXi wrong(3);
  wrong.setOnes();
  config.eta_fixed = wrong;  // problem has one source
  CHECK_THROWS_AS(trp::run_chain(problem, config), trp::Error);
}
