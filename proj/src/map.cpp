#include "trp/map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "trp/errors.hpp"
#include "trp/transfer.hpp"

namespace trp {

namespace {

double soft_threshold(double x, double t) {
  const double mag = std::abs(x) - t;
  return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
}

void validate_map_problem(const MapProblem& mp) {
  if (!(mp.lambda_t >= 0.0)) throw Error("lambda_t must be nonnegative");
  if (!(mp.tau >= 0.0)) throw Error("tau must be nonnegative");
  if (!(mp.lambda_p >= 0.0)) throw Error("lambda_p must be nonnegative");
}

/// min_x 0.5 (x - c)^T Q (x - c) + lambda sum_p |x_p - d_p| by cyclic
/// coordinate descent, Q symmetric positive semidefinite.
Vector l1_shifted_quadratic(const Matrix& Q, const Vector& c, const Vector& d,
                            double lambda, Vector x, int* sweeps_used = nullptr,
                            int max_sweeps = 100000, double tol = 1e-12) {
  const Eigen::Index n = x.size();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      const double qpp = Q(p, p);
      double next;
      if (qpp <= 1e-300) {
        next = d[p];
      } else {
        const double offdiag = Q.row(p).dot(x - c) - qpp * (x[p] - c[p]);
        const double target = c[p] - offdiag / qpp;
        next = d[p] + soft_threshold(target - d[p], lambda / qpp);
      }
      max_change = std::max(max_change, std::abs(next - x[p]));
      x[p] = next;
    }
    if (max_change < tol * (1.0 + x.cwiseAbs().maxCoeff())) {
      if (sweeps_used) *sweeps_used = sweep + 1;
      return x;
    }
  }
  throw ConvergenceError("coordinate descent exceeded " +
                         std::to_string(max_sweeps) + " sweeps");
}

Matrix folded_gram(const Dataset& d, double lambda_p) {
  return d.gram + lambda_p * lambda_p * Matrix::Identity(d.p(), d.p());
}

/// Hat-space geometry shared by the transformed solver and the naive
/// alternation: folded Grams and ridge hats, the pooling map with its
/// pseudoinverse and kernel basis, and the profiled curvature D of the pooled
/// coordinates.
struct HatSpace {
  Matrix g0;       // folded target Gram
  Vector beta0_hat;
  Matrix t;        // P x KP pooling map on raw Grams
  Matrix t_pinv;   // KP x P
  Matrix v2;       // KP x (KP - P), orthonormal kernel basis of T
  Matrix gs;       // folded source Gram, block diagonal
  Vector beta_s_hat;
  Vector z_hat;    // T beta_s_hat
  Vector a_hat;    // V2^T beta_s_hat
  Matrix d;        // profiled curvature of z
  Matrix m;        // V2^T GS V2
};

HatSpace build_hat_space(const MapProblem& mp) {
  const TransferProblem& problem = mp.problem;
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  HatSpace hs;

  hs.g0 = folded_gram(problem.target, mp.lambda_p);
  Eigen::LLT<Matrix> llt0(hs.g0);
  if (llt0.info() != Eigen::Success)
    throw NotPositiveDefiniteError("folded target Gram is not positive definite");
  hs.beta0_hat = llt0.solve(problem.target.xty);

  hs.gs = Matrix::Zero(k * p, k * p);
  hs.beta_s_hat.resize(k * p);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Matrix gj = folded_gram(problem.sources[static_cast<std::size_t>(j)],
                                  mp.lambda_p);
    Eigen::LLT<Matrix> llt(gj);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefiniteError("folded Gram for source " + std::to_string(j + 1) +
                                     " is not positive definite");
    hs.gs.block(j * p, j * p, p, p) = gj;
    hs.beta_s_hat.segment(j * p, p) =
        llt.solve(problem.sources[static_cast<std::size_t>(j)].xty);
  }

  hs.t = build_transfer_matrix(problem, Eigen::VectorXi::Ones(k), mp.tau).T;
  Eigen::JacobiSVD<Matrix> svd(hs.t, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv[sv.size() - 1] < rank_tol() * sv[0])
    throw RankError("pooling map is rank deficient");
  hs.t_pinv = svd.matrixV().leftCols(p) * sv.cwiseInverse().asDiagonal() *
              svd.matrixU().transpose();
  hs.v2 = svd.matrixV().rightCols(k * p - p);

  hs.z_hat = hs.t * hs.beta_s_hat;
  hs.a_hat = hs.v2.transpose() * hs.beta_s_hat;
  hs.m = hs.v2.transpose() * hs.gs * hs.v2;

  Matrix middle = hs.gs;
  if (hs.v2.cols() > 0) {
    const Matrix gsv2 = hs.gs * hs.v2;
    middle -= gsv2 * hs.m.llt().solve(gsv2.transpose());
  }
  hs.d = hs.t_pinv.transpose() * middle * hs.t_pinv;
  hs.d = ((hs.d + hs.d.transpose()) / 2.0).eval();
  return hs;
}

double hat_pair_objective(const HatSpace& hs, double lambda_t, const Vector& beta0,
                          const Vector& z) {
  const Vector r0 = beta0 - hs.beta0_hat;
  const Vector rz = z - hs.z_hat;
  return 0.5 * r0.dot(hs.g0 * r0) + 0.5 * rz.dot(hs.d * rz) +
         lambda_t * (beta0 - z).lpNorm<1>();
}

}  // namespace

std::pair<double, double> map_univariate(double beta0_hat, double z_hat, double s0,
                                         double sz, double lambda_t) {
  if (!(s0 > 0.0) || !(sz > 0.0)) throw Error("s0 and sz must be positive");
  if (!(lambda_t >= 0.0)) throw Error("lambda_t must be nonnegative");
  const double pooled =
      (beta0_hat / s0 + z_hat / sz) / (1.0 / s0 + 1.0 / sz);
  const double gap = soft_threshold(beta0_hat - z_hat, (s0 + sz) * lambda_t);
  const double beta0_star = pooled + s0 / (s0 + sz) * gap;
  const double z_star = pooled - sz / (s0 + sz) * gap;
  return {beta0_star, z_star};
}

double translasso_univariate(double beta0_hat, double z_hat, double s0,
                             double lambda_t) {
  if (!(s0 > 0.0)) throw Error("s0 must be positive");
  return z_hat + soft_threshold(beta0_hat - z_hat, s0 * lambda_t);
}

double map_objective_data_space(const Vector& beta_A, const TransferProblem& problem,
                                double lambda_t, double tau, double lambda_p) {
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  if (beta_A.size() != (k + 1) * p)
    throw Error("beta_A has length " + std::to_string(beta_A.size()) + ", expected " +
                std::to_string((k + 1) * p));
  double value = 0.0;
  for (Eigen::Index j = 0; j <= k; ++j) {
    const Dataset& d = problem.dataset(j);
    value += 0.5 * (d.y - d.X * beta_A.segment(j * p, p)).squaredNorm();
  }
  value += 0.5 * lambda_p * lambda_p * beta_A.squaredNorm();
  const Matrix t = build_transfer_matrix(problem, Eigen::VectorXi::Ones(k), tau).T;
  value += lambda_t * (beta_A.head(p) - t * beta_A.tail(k * p)).lpNorm<1>();
  return value;
}

double map_objective(const Vector& beta_A, const TransferProblem& problem,
                     double lambda_t, double tau, double lambda_p) {
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  if (beta_A.size() != (k + 1) * p)
    throw Error("beta_A has length " + std::to_string(beta_A.size()) + ", expected " +
                std::to_string((k + 1) * p));
  double value = 0.0;
  for (Eigen::Index j = 0; j <= k; ++j) {
    const Matrix g = folded_gram(problem.dataset(j), lambda_p);
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success)
      return map_objective_data_space(beta_A, problem, lambda_t, tau, lambda_p);
    const Vector hat = llt.solve(problem.dataset(j).xty);
    const Vector r = beta_A.segment(j * p, p) - hat;
    value += 0.5 * r.dot(g * r);
  }
  const Matrix t = build_transfer_matrix(problem, Eigen::VectorXi::Ones(k), tau).T;
  value += lambda_t * (beta_A.head(p) - t * beta_A.tail(k * p)).lpNorm<1>();
  return value;
}

MapSolution map_transformed_cd(const MapProblem& mp) {
  validate_map_problem(mp);
  const Eigen::Index p = mp.problem.p();
  const HatSpace hs = build_hat_space(mp);

  const Eigen::LLT<Matrix> sum_llt((hs.g0 + hs.d).eval());
  if (sum_llt.info() != Eigen::Success)
    throw NotPositiveDefiniteError("profiled curvature is not positive definite");
  Matrix s = hs.g0 - hs.g0 * sum_llt.solve(hs.g0);
  s = ((s + s.transpose()) / 2.0).eval();

  const Vector w_hat = hs.beta0_hat - hs.z_hat;
  int sweeps = 0;
  const Vector w = l1_shifted_quadratic(s, w_hat, Vector::Zero(p), mp.lambda_t,
                                        w_hat, &sweeps);

  const Vector z = sum_llt.solve(hs.g0 * (hs.beta0_hat - w) + hs.d * hs.z_hat);
  const Vector beta0 = w + z;
  Vector beta_s = hs.t_pinv * z;
  if (hs.v2.cols() > 0) {
    const Vector a = hs.a_hat - hs.m.llt().solve(hs.v2.transpose() * hs.gs *
                                                 (hs.t_pinv * (z - hs.z_hat)));
    beta_s += hs.v2 * a;
  }

  MapSolution out;
  out.beta_A.resize(beta0.size() + beta_s.size());
  out.beta_A << beta0, beta_s;
  out.z = z;
  out.objective = map_objective(out.beta_A, mp.problem, mp.lambda_t, mp.tau, mp.lambda_p);
  out.iterations = sweeps;
  out.converged = true;
  return out;
}

namespace {

/// Largest eigenvalue of the penalized quadratic's Hessian map
/// v -> G_A v + lambda_p^2 v + C B^T B v, by power iteration.
double penalty_lipschitz(const TransferProblem& problem, const Matrix& b,
                         double lambda_p, double c) {
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  const Eigen::Index dim = (k + 1) * p;
  auto apply = [&](const Vector& v) {
    Vector out = lambda_p * lambda_p * v + c * (b.transpose() * (b * v));
    for (Eigen::Index j = 0; j <= k; ++j)
      out.segment(j * p, p) += problem.dataset(j).gram * v.segment(j * p, p);
    return out;
  };
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
  v /= v.norm();
  double lam = 1.0;
  for (int it = 0; it < 60; ++it) {
    Vector w = apply(v);
    lam = w.norm();
    if (!(lam > 0.0)) return 1.0;
    v = w / lam;
  }
  return lam * 1.02;
}

}  // namespace

MapSolution map_quadratic_penalty(const MapProblem& mp,
                                  const std::vector<double>& c_schedule,
                                  double step) {
  validate_map_problem(mp);
  std::vector<double> schedule = c_schedule;
  if (schedule.empty())
    for (int t = 0; t <= 8; ++t) schedule.push_back(std::pow(10.0, t));
  for (std::size_t i = 0; i < schedule.size(); ++i)
    if (!(schedule[i] > 0.0) || (i > 0 && schedule[i] <= schedule[i - 1]))
      throw Error("c_schedule must be positive and strictly increasing");

  const TransferProblem& problem = mp.problem;
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  const Matrix b = build_transfer_matrix(problem, Eigen::VectorXi::Ones(k), mp.tau).B;
  const double lp2 = mp.lambda_p * mp.lambda_p;

  Vector beta((k + 1) * p);
  for (Eigen::Index j = 0; j <= k; ++j) {
    const Dataset& d = problem.dataset(j);
    beta.segment(j * p, p) = folded_gram(d, std::max(mp.lambda_p, 1e-6))
                                 .llt()
                                 .solve(d.xty);
  }

  auto fit_gradient = [&](const Vector& v) {
    Vector g = lp2 * v;
    for (Eigen::Index j = 0; j <= k; ++j)
      g.segment(j * p, p) +=
          problem.dataset(j).gram * v.segment(j * p, p) - problem.dataset(j).xty;
    return g;
  };
  auto fit_value = [&](const Vector& v) {
    double val = 0.5 * lp2 * v.squaredNorm();
    for (Eigen::Index j = 0; j <= k; ++j) {
      const Dataset& d = problem.dataset(j);
      val += 0.5 * (d.y - d.X * v.segment(j * p, p)).squaredNorm();
    }
    return val;
  };

  constexpr int kMaxInner = 100000;
  constexpr double kStageTol = 1e-10;
  int total_iters = 0;
  bool converged = false;
  Vector z = Vector::Zero(p);

  for (const double c : schedule) {
    const double used_step = step > 0.0 ? step : 1.0 / penalty_lipschitz(problem, b, mp.lambda_p, c);
    double prev_value = std::numeric_limits<double>::infinity();
    int rise_streak = 0;
    double grad_inf = std::numeric_limits<double>::infinity();

    for (int it = 0; it < kMaxInner; ++it) {
      const Vector coupled = b * beta;
      z = coupled.unaryExpr(
          [&](double x) { return soft_threshold(x, mp.lambda_t / c); });
      const Vector grad = fit_gradient(beta) + c * (b.transpose() * (coupled - z));
      grad_inf = grad.lpNorm<Eigen::Infinity>();
      if (grad_inf < kStageTol) break;
      beta -= used_step * grad;
      ++total_iters;

      const double value = fit_value(beta) + mp.lambda_t * z.lpNorm<1>() +
                           0.5 * c * (b * beta - z).squaredNorm();
      if (!std::isfinite(value))
        throw StepSizeError("quadratic penalty objective is not finite");
      rise_streak = value > prev_value ? rise_streak + 1 : 0;
      if (rise_streak >= 100)
        throw StepSizeError("quadratic penalty objective rose for 100 consecutive steps");
      prev_value = value;
    }

    const double residual = (b * beta - z).lpNorm<Eigen::Infinity>();
    converged = residual < 1e-8 && grad_inf < 1e-8;
  }

  MapSolution out;
  out.beta_A = beta;
  out.z = z;
  out.objective = map_objective(beta, problem, mp.lambda_t, mp.tau, mp.lambda_p);
  out.iterations = total_iters;
  out.converged = converged;
  return out;
}

std::vector<BlockCdIterate> naive_block_cd(const MapProblem& mp,
                                           const Vector& beta0_init,
                                           const Vector& z_init, int max_sweeps) {
  validate_map_problem(mp);
  const Eigen::Index p = mp.problem.p();
  if (beta0_init.size() != p || z_init.size() != p)
    throw Error("init blocks must each have length " + std::to_string(p));
  if (max_sweeps <= 0) throw Error("max_sweeps must be positive");
  const HatSpace hs = build_hat_space(mp);

  std::vector<BlockCdIterate> trajectory;
  Vector beta0 = beta0_init;
  Vector z = z_init;
  trajectory.push_back({beta0, z, hat_pair_objective(hs, mp.lambda_t, beta0, z)});

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector beta0_next =
        l1_shifted_quadratic(hs.g0, hs.beta0_hat, z, mp.lambda_t, beta0);
    const Vector z_next =
        l1_shifted_quadratic(hs.d, hs.z_hat, beta0_next, mp.lambda_t, z);
    const double change =
        std::max((beta0_next - beta0).lpNorm<Eigen::Infinity>(),
                 (z_next - z).lpNorm<Eigen::Infinity>());
    beta0 = beta0_next;
    z = z_next;
    trajectory.push_back({beta0, z, hat_pair_objective(hs, mp.lambda_t, beta0, z)});
    if (change < 1e-12) break;
  }
  return trajectory;
}

}  // namespace trp
