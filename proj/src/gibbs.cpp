#include "trp/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "trp/errors.hpp"
#include "trp/slice.hpp"

namespace trp {

namespace {

constexpr double kOmegaInvFloor = 1e-12;
constexpr double kOmegaInvCeil = 1e12;
constexpr double kWaldGapFloor = 1e-300;
constexpr double kWaldMeanCap = 1e300;

Vector stacked_xty(const TransferProblem& problem) {
  const Eigen::Index p = problem.p();
  Vector out((problem.k() + 1) * p);
  for (Eigen::Index j = 0; j <= problem.k(); ++j)
    out.segment(j * p, p) = problem.dataset(j).xty;
  return out;
}

double residual_sum_of_squares(const Vector& beta_A, const TransferProblem& problem) {
  const Eigen::Index p = problem.p();
  double rss = 0.0;
  for (Eigen::Index j = 0; j <= problem.k(); ++j) {
    const Dataset& d = problem.dataset(j);
    rss += (d.y - d.X * beta_A.segment(j * p, p)).squaredNorm();
  }
  return rss;
}

/// (B b)^T diag(omega_inv) (B b) and || P_perp b ||^2.
std::pair<double, double> coupling_quadratics(const Vector& beta_A, const Matrix& B,
                                              const Vector& omega_inv) {
  const Vector v = B * beta_A;
  const double q_omega = v.dot(omega_inv.cwiseProduct(v));
  const double q_perp = kernel_project(B, beta_A).squaredNorm();
  return {q_omega, q_perp};
}

double log_half_cauchy(double x) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(2.0 / std::numbers::pi) - std::log1p(x * x);
}

double bernoulli_from_log_odds(double log_odds, Rng& rng) {
  double p;
  if (log_odds > 35.0)
    p = 1.0;
  else if (log_odds < -35.0)
    p = 0.0;
  else
    p = 1.0 / (1.0 + std::exp(-log_odds));
  return rng.uniform() < p ? 1.0 : 0.0;
}

}  // namespace

std::pair<int, int> PosteriorDraws::span(const std::string& name) const {
  for (const auto& entry : layout)
    if (entry.first == name) return entry.second;
  throw Error("unknown parameter block: " + name);
}

Matrix PosteriorDraws::block(const std::string& name) const {
  const auto [begin, end] = span(name);
  return draws.middleCols(begin, end - begin);
}

Vector effective_omega_inv(const ModelState& state, PriorKind kind) {
  if (kind == PriorKind::gaussian)
    return Vector::Constant(state.omega.size(), state.lambda_t * state.lambda_t);
  return state.omega.cwiseInverse();
}

Vector sample_beta_A(const ModelState& state, const TransferProblem& problem,
                     PriorKind kind, Rng& rng) {
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  const double lp2 = state.lambda_p * state.lambda_p;
  const TransferMatrix tm = build_transfer_matrix(problem, state.eta, state.tau);

  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(k) + 1);
  for (Eigen::Index j = 0; j <= k; ++j)
    blocks.push_back(problem.dataset(j).gram + lp2 * Matrix::Identity(p, p));

  // Lambda = blockdiag(G_j + lp^2 I) + B^T (Omega^{-1} - lp^2 (B B^T)^{-1}) B,
  // which equals X^T X + B^T Omega^{-1} B + lp^2 P_perp.
  const Matrix bbt = Matrix::Identity(p, p) + tm.T * tm.T.transpose();
  Matrix core = Matrix(effective_omega_inv(state, kind).asDiagonal());
  core -= lp2 * bbt.llt().solve(Matrix::Identity(p, p));
  core = ((core + core.transpose()) / 2.0).eval();

  const StructuredPrecision prec{BlockCholesky::factor(blocks), tm.B, core};
  const StructuredSampler sampler(prec);
  const Vector mean = sampler.solve(stacked_xty(problem));
  const Vector draw = sampler.sample(rng.normal_vector(p), rng.normal_vector((k + 1) * p));
  return mean + std::sqrt(state.sigma2) * draw;
}

std::pair<double, double> sigma2_shape_rate(const ModelState& state,
                                            const TransferProblem& problem,
                                            PriorKind kind) {
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  const TransferMatrix tm = build_transfer_matrix(problem, state.eta, state.tau);
  const auto [q_omega, q_perp] =
      coupling_quadratics(state.beta_A, tm.B, effective_omega_inv(state, kind));
  const double rss = residual_sum_of_squares(state.beta_A, problem);
  const double shape = (problem.total_n() + (k + 1) * p) / 2.0;
  const double rate =
      (rss + q_omega + state.lambda_p * state.lambda_p * q_perp) / 2.0;
  return {shape, rate};
}

double sample_sigma2(const ModelState& state, const TransferProblem& problem,
                     PriorKind kind, Rng& rng, double prior_shape,
                     double prior_rate) {
  const auto [shape, rate] = sigma2_shape_rate(state, problem, kind);
  const double total_rate = rate + prior_rate;
  if (!(total_rate > 0.0) || !std::isfinite(total_rate))
    throw DegenerateDataError("sigma^2 conditional has nonpositive rate " +
                              std::to_string(total_rate));
  return rng.inverse_gamma(shape + prior_shape, total_rate);
}

Vector sample_omega(const ModelState& state, const TransferProblem& problem,
                    PriorKind kind, Rng& rng) {
  const Eigen::Index p = problem.p();
  if (kind == PriorKind::gaussian) return Vector::Ones(p);
  const TransferMatrix tm = build_transfer_matrix(problem, state.eta, state.tau);
  const Vector v = tm.B * state.beta_A;
  const double sigma = std::sqrt(state.sigma2);
  const double lt = state.lambda_t;
  Vector omega(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double gap = std::max(std::abs(v[i]), kWaldGapFloor);
    const double mean = std::min(sigma * lt / gap, kWaldMeanCap);
    double inv = rng.inverse_gaussian(mean, lt * lt);
    inv = std::clamp(inv, kOmegaInvFloor, kOmegaInvCeil);
    omega[i] = 1.0 / inv;
  }
  return omega;
}

ScaleHyperDraw sample_scale_hyperparams(const ModelState& state,
                                        const TransferProblem& problem,
                                        PriorKind prior, HyperUpdateKind kind,
                                        Rng& rng) {
  const double p = static_cast<double>(problem.p());
  const double kp = static_cast<double>(problem.k()) * p;
  const TransferMatrix tm = build_transfer_matrix(problem, state.eta, state.tau);
  const double q_perp = kernel_project(tm.B, state.beta_A).squaredNorm();

  // Slice updates start from the current value; a chain holding a scale fixed
  // at the support boundary 0 discards the draw, so any interior start works.
  const double start_t =
      state.lambda_t > 0.0 ? state.lambda_t * state.lambda_t : 1.0;
  const double start_p =
      state.lambda_p > 0.0 ? state.lambda_p * state.lambda_p : 1.0;

  ScaleHyperDraw out{};
  double lt2;
  if (prior == PriorKind::gaussian) {
    const double q_t = (tm.B * state.beta_A).squaredNorm();
    const double rate_t = 1.0 / state.a_t + q_t / (2.0 * state.sigma2);
    lt2 = slice_sample_positive(
        [p, rate_t](double x) {
          return ((p - 1.0) / 2.0) * std::log(x) - x * rate_t;
        },
        start_t, std::max(1.0, start_t), rng);
  } else if (kind == HyperUpdateKind::inverse_gamma) {
    const double scale_t = 1.0 / state.a_t + state.omega.sum() / 2.0;
    lt2 = rng.inverse_gamma(p + 0.5, scale_t);
  } else {
    const double rate_t = 1.0 / state.a_t + state.omega.sum() / 2.0;
    lt2 = slice_sample_positive(
        [p, rate_t](double x) { return (p - 0.5) * std::log(x) - x * rate_t; },
        start_t, std::max(1.0, start_t), rng);
  }
  out.lambda_t = std::sqrt(lt2);
  out.a_t = rng.inverse_gamma(1.0, 1.0 + lt2);

  double lp2;
  if (kind == HyperUpdateKind::inverse_gamma) {
    const double scale_p = 1.0 / state.a_p + q_perp / state.sigma2;
    lp2 = rng.inverse_gamma((kp + 1.0) / 2.0, scale_p);
  } else {
    const double rate_p = 1.0 / state.a_p + q_perp / (2.0 * state.sigma2);
    lp2 = slice_sample_positive(
        [kp, rate_p](double x) {
          return ((kp - 1.0) / 2.0) * std::log(x) - x * rate_p;
        },
        start_p, std::max(1.0, start_p), rng);
  }
  out.lambda_p = std::sqrt(lp2);
  out.a_p = rng.inverse_gamma(1.0, 1.0 + lp2);
  return out;
}

double eta_config_log_density(const ModelState& state,
                              const TransferProblem& problem,
                              const Eigen::VectorXi& eta, PriorKind kind) {
  const TransferMatrix tm = build_transfer_matrix(problem, eta, state.tau);
  const Vector omega_inv = effective_omega_inv(state, kind);
  const double ld = pseudo_det_log(tm.B, omega_inv);
  const auto [q_omega, q_perp] = coupling_quadratics(state.beta_A, tm.B, omega_inv);
  const double quad = q_omega + state.lambda_p * state.lambda_p * q_perp;
  const double rho = std::clamp(state.rho, 1e-12, 1.0 - 1e-12);
  const double n_on = static_cast<double>(eta.sum());
  const double n_off = static_cast<double>(eta.size()) - n_on;
  return 0.5 * ld - quad / (2.0 * state.sigma2) + n_on * std::log(rho) +
         n_off * std::log1p(-rho);
}

double eta_log_odds(int k, const ModelState& state,
                    const TransferProblem& problem, PriorKind kind) {
  Eigen::VectorXi on = state.eta;
  Eigen::VectorXi off = state.eta;
  on[k] = 1;
  off[k] = 0;
  return eta_config_log_density(state, problem, on, kind) -
         eta_config_log_density(state, problem, off, kind);
}

void sample_eta_tempered(const ModelState& state, const TransferProblem& problem,
                         PriorKind kind, double spacing,
                         std::vector<Eigen::VectorXi>& replicas, Rng& rng,
                         std::vector<int>* swap_attempts,
                         std::vector<int>* swap_accepts) {
  const int n_rep = static_cast<int>(replicas.size());
  const int k = static_cast<int>(problem.k());
  for (int ell = 0; ell < n_rep; ++ell) {
    const double temp = std::pow(spacing, -static_cast<double>(ell));
    Eigen::VectorXi& eta = replicas[static_cast<std::size_t>(ell)];
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXi on = eta;
      Eigen::VectorXi off = eta;
      on[j] = 1;
      off[j] = 0;
      const double lo = eta_config_log_density(state, problem, on, kind) -
                        eta_config_log_density(state, problem, off, kind);
      eta[j] = bernoulli_from_log_odds(temp * lo, rng) > 0.5 ? 1 : 0;
    }
  }
  for (int ell = 0; ell + 1 < n_rep; ++ell) {
    const double t_hot = std::pow(spacing, -static_cast<double>(ell + 1));
    const double t_cold = std::pow(spacing, -static_cast<double>(ell));
    const double f_cold = eta_config_log_density(
        state, problem, replicas[static_cast<std::size_t>(ell)], kind);
    const double f_hot = eta_config_log_density(
        state, problem, replicas[static_cast<std::size_t>(ell + 1)], kind);
    const double log_acc = (t_cold - t_hot) * (f_hot - f_cold);
    if (swap_attempts) ++(*swap_attempts)[static_cast<std::size_t>(ell)];
    if (std::log(rng.uniform()) < log_acc) {
      std::swap(replicas[static_cast<std::size_t>(ell)],
                replicas[static_cast<std::size_t>(ell + 1)]);
      if (swap_accepts) ++(*swap_accepts)[static_cast<std::size_t>(ell)];
    }
  }
}

double sample_rho(const Eigen::VectorXi& eta, Rng& rng) {
  const double on = static_cast<double>(eta.sum());
  const double off = static_cast<double>(eta.size()) - on;
  return rng.beta(on + 0.5, off + 0.5);
}

double tau_log_density(const ModelState& state, const TransferProblem& problem,
                       PriorKind kind, double tau) {
  if (!(tau > 0.0)) return -std::numeric_limits<double>::infinity();
  const TransferMatrix tm = build_transfer_matrix(problem, state.eta, tau);
  const Vector omega_inv = effective_omega_inv(state, kind);
  const double ld = pseudo_det_log(tm.B, omega_inv);
  const auto [q_omega, q_perp] = coupling_quadratics(state.beta_A, tm.B, omega_inv);
  const double quad = q_omega + state.lambda_p * state.lambda_p * q_perp;
  return 0.5 * ld - quad / (2.0 * state.sigma2) + log_half_cauchy(tau);
}

double mh_tau(const ModelState& state, const TransferProblem& problem,
              PriorKind kind, Rng& rng, TauMhState& mh, double adapt_step,
              double target_accept) {
  const double sd = std::exp(mh.log_sd);
  const double proposal = state.tau + sd * rng.normal();
  ++mh.attempts;
  double alpha = 0.0;
  double result = state.tau;
  if (proposal > 0.0) {
    const double lr = tau_log_density(state, problem, kind, proposal) -
                      tau_log_density(state, problem, kind, state.tau);
    alpha = lr >= 0.0 ? 1.0 : std::exp(lr);
    if (rng.uniform() < alpha) {
      result = proposal;
      ++mh.accepts;
    }
  }
  if (adapt_step > 0.0) {
    mh.log_sd += adapt_step * (alpha - target_accept);
    mh.log_sd = std::clamp(mh.log_sd, std::log(1e-8), std::log(1e8));
  }
  return result;
}

namespace {

std::vector<std::pair<std::string, std::pair<int, int>>> draw_layout(int p, int k) {
  std::vector<std::pair<std::string, std::pair<int, int>>> layout;
  int at = 0;
  auto add = [&](const std::string& name, int width) {
    layout.emplace_back(name, std::make_pair(at, at + width));
    at += width;
  };
  add("beta", (k + 1) * p);
  add("sigma2", 1);
  add("omega", p);
  add("eta", k);
  add("rho", 1);
  add("lambda_t", 1);
  add("lambda_p", 1);
  add("tau", 1);
  add("a_t", 1);
  add("a_p", 1);
  return layout;
}

void write_row(Matrix& draws, Eigen::Index row, const ModelState& state) {
  Eigen::Index at = 0;
  draws.row(row).segment(at, state.beta_A.size()) = state.beta_A.transpose();
  at += state.beta_A.size();
  draws(row, at++) = state.sigma2;
  draws.row(row).segment(at, state.omega.size()) = state.omega.transpose();
  at += state.omega.size();
  draws.row(row).segment(at, state.eta.size()) = state.eta.cast<double>().transpose();
  at += state.eta.size();
  draws(row, at++) = state.rho;
  draws(row, at++) = state.lambda_t;
  draws(row, at++) = state.lambda_p;
  draws(row, at++) = state.tau;
  draws(row, at++) = state.a_t;
  draws(row, at++) = state.a_p;
}

ModelState initial_state(const TransferProblem& problem, const SamplerConfig& config) {
  const Eigen::Index p = problem.p();
  const Eigen::Index k = problem.k();
  ModelState state;
  state.beta_A.resize((k + 1) * p);
  double rss = 0.0;
  for (Eigen::Index j = 0; j <= k; ++j) {
    const Dataset& d = problem.dataset(j);
    const Vector b = (d.gram + Matrix::Identity(p, p)).llt().solve(d.xty);
    state.beta_A.segment(j * p, p) = b;
    rss += (d.y - d.X * b).squaredNorm();
  }
  state.sigma2 = std::max(rss / static_cast<double>(problem.total_n()), 1e-6);
  state.omega = Vector::Ones(p);
  if (config.eta_fixed) {
    if (config.eta_fixed->size() != k)
      throw Error("eta_fixed has length " + std::to_string(config.eta_fixed->size()) +
                  ", expected " + std::to_string(k));
    state.eta = *config.eta_fixed;
  } else {
    state.eta = Eigen::VectorXi::Ones(k);
  }
  state.rho = 0.5;
  state.lambda_t = config.lambda_t_fixed.value_or(1.0);
  state.lambda_p = config.lambda_p_fixed.value_or(1.0);
  state.tau = config.tau_fixed.value_or(1.0);
  state.a_t = 1.0;
  state.a_p = 1.0;
  return state;
}

void validate_config(const SamplerConfig& config) {
  if (config.n_iter <= 0) throw Error("n_iter must be positive");
  if (config.n_burnin < 0 || config.n_burnin >= config.n_iter)
    throw Error("n_burnin must lie in [0, n_iter)");
  if (config.thin <= 0) throw Error("thin must be positive");
  if (config.n_temperatures <= 0) throw Error("n_temperatures must be positive");
  if (!(config.temperature_spacing >= 1.0))
    throw Error("temperature_spacing must be at least 1");
  if (config.tau_fixed && !(*config.tau_fixed > 0.0))
    throw Error("tau_fixed must be positive");
  if (config.lambda_t_fixed && !(*config.lambda_t_fixed >= 0.0))
    throw Error("lambda_t_fixed must be nonnegative");
  if (config.lambda_p_fixed && !(*config.lambda_p_fixed >= 0.0))
    throw Error("lambda_p_fixed must be nonnegative");
  if (config.sigma2_prior_shape < 0.0 || config.sigma2_prior_rate < 0.0)
    throw Error("sigma^2 prior parameters must be nonnegative");
}

}  // namespace

PosteriorDraws run_chain(const TransferProblem& problem, const SamplerConfig& config) {
  validate_config(config);
  const int p = static_cast<int>(problem.p());
  const int k = static_cast<int>(problem.k());
  Rng rng(config.seed, 0);
  ModelState state = initial_state(problem, config);

  const int n_rep = config.n_temperatures;
  std::vector<Eigen::VectorXi> replicas(static_cast<std::size_t>(n_rep), state.eta);
  std::vector<int> swap_attempts(static_cast<std::size_t>(std::max(n_rep - 1, 0)), 0);
  std::vector<int> swap_accepts(swap_attempts.size(), 0);
  TauMhState mh;

  const int n_kept = (config.n_iter - config.n_burnin) / config.thin;
  PosteriorDraws out;
  out.layout = draw_layout(p, k);
  out.draws.resize(n_kept, out.layout.back().second.second);
  out.config = config;
  out.p = p;
  out.k = k;

  Eigen::Index row = 0;
  for (int iter = 0; iter < config.n_iter; ++iter) {
    try {
      state.beta_A = sample_beta_A(state, problem, config.prior_kind, rng);
      state.sigma2 = sample_sigma2(state, problem, config.prior_kind, rng,
                                   config.sigma2_prior_shape, config.sigma2_prior_rate);
      state.omega = sample_omega(state, problem, config.prior_kind, rng);
      const ScaleHyperDraw hyper = sample_scale_hyperparams(
          state, problem, config.prior_kind, config.hyper_update_kind, rng);
      if (!config.lambda_t_fixed) state.lambda_t = hyper.lambda_t;
      if (!config.lambda_p_fixed) state.lambda_p = hyper.lambda_p;
      state.a_t = hyper.a_t;
      state.a_p = hyper.a_p;
      if (!config.eta_fixed) {
        sample_eta_tempered(state, problem, config.prior_kind,
                            config.temperature_spacing, replicas, rng,
                            &swap_attempts, &swap_accepts);
        state.eta = replicas[0];
      }
      state.rho = sample_rho(state.eta, rng);
      if (!config.tau_fixed) {
        const double adapt_step =
            iter < config.n_burnin ? std::pow(iter + 1.0, -0.6) : 0.0;
        state.tau = mh_tau(state, problem, config.prior_kind, rng, mh, adapt_step,
                           config.mh_target_accept);
      }
    } catch (const Error& err) {
      throw Error(std::string(err.what()) + " (sampler iteration " +
                  std::to_string(iter) + ")");
    }
    if (iter >= config.n_burnin && (iter - config.n_burnin + 1) % config.thin == 0)
      write_row(out.draws, row++, state);
  }

  out.acceptance_stats["tau_accept_rate"] =
      mh.attempts > 0 ? static_cast<double>(mh.accepts) / static_cast<double>(mh.attempts)
                      : 0.0;
  out.acceptance_stats["tau_proposal_sd"] = std::exp(mh.log_sd);
  out.swap_stats.resize(swap_attempts.size());
  for (std::size_t i = 0; i < swap_attempts.size(); ++i)
    out.swap_stats[i] = swap_attempts[i] > 0
                            ? static_cast<double>(swap_accepts[i]) / swap_attempts[i]
                            : 0.0;
  return out;
}

namespace {

/// Unnormalized log joint of the reference sampler at fixed eta and tau. The
/// l2 penalty couples through the linear map B; the l1 penalty couples
/// through the nonlinear pooling operator with a plain ridge on all
/// coefficients standing in for the kernel term.
struct MwgDensity {
  const TransferProblem& problem;
  PenaltyKind penalty;
  Eigen::VectorXi eta;
  double prior_shape;
  double prior_rate;

  double coupling_l1(const Vector& beta_A, double tau) const {
    const Eigen::Index p = problem.p();
    const Vector beta_s = beta_A.tail(problem.k() * p);
    const Vector pooled = transfer_operator_l1(problem, eta, tau, beta_s);
    return (beta_A.head(p) - pooled).lpNorm<1>();
  }

  /// A penalty with zero strength drops out together with its normalizing
  /// sigma powers, leaving that subspace unpenalized.
  double log_joint(const Vector& beta_A, double sigma2, double lambda_t,
                   double lambda_p, double tau, const Matrix* B) const {
    const double p = static_cast<double>(problem.p());
    const double k = static_cast<double>(problem.k());
    const double rss = residual_sum_of_squares(beta_A, problem);
    double value = -rss / (2.0 * sigma2);
    double prior_dims = 0.0;
    if (penalty == PenaltyKind::l2) {
      if (lambda_t > 0.0) {
        const Vector v = *B * beta_A;
        value += p * std::log(lambda_t) -
                 lambda_t * lambda_t * v.squaredNorm() / (2.0 * sigma2);
        prior_dims += p;
      }
      if (lambda_p > 0.0) {
        const double q_perp = kernel_project(*B, beta_A).squaredNorm();
        value += k * p * std::log(lambda_p) -
                 lambda_p * lambda_p * q_perp / (2.0 * sigma2);
        prior_dims += k * p;
      }
    } else {
      if (lambda_t > 0.0) {
        const double gap = coupling_l1(beta_A, tau);
        value += p * std::log(lambda_t) - lambda_t * gap / std::sqrt(sigma2);
        prior_dims += p;
      }
      if (lambda_p > 0.0) {
        value += (k + 1.0) * p * std::log(lambda_p) -
                 lambda_p * lambda_p * beta_A.squaredNorm() / (2.0 * sigma2);
        prior_dims += (k + 1.0) * p;
      }
    }
    value -= (static_cast<double>(problem.total_n()) + prior_dims) / 2.0 *
             std::log(sigma2);
    value -= (prior_shape + 1.0) * std::log(sigma2) + prior_rate / sigma2;
    return value;
  }
};

}  // namespace

PosteriorDraws run_generic_mwg(const TransferProblem& problem, PenaltyKind penalty,
                               const SamplerConfig& config) {
  validate_config(config);
  const int p = static_cast<int>(problem.p());
  const int k = static_cast<int>(problem.k());
  const Eigen::Index dim = static_cast<Eigen::Index>(k + 1) * p;
  Rng rng(config.seed, 0);
  ModelState state = initial_state(problem, config);

  MwgDensity density{problem, penalty, state.eta, config.sigma2_prior_shape,
                     config.sigma2_prior_rate};

  Matrix coupling_b;
  auto rebuild_b = [&]() {
    if (penalty == PenaltyKind::l2)
      coupling_b = build_transfer_matrix(problem, state.eta, state.tau).B;
  };
  rebuild_b();

  Vector log_sd = Vector::Zero(dim);
  long coord_attempts = 0;
  long coord_accepts = 0;
  TauMhState mh;

  const int n_kept = (config.n_iter - config.n_burnin) / config.thin;
  PosteriorDraws out;
  out.layout = draw_layout(p, k);
  out.draws.resize(n_kept, out.layout.back().second.second);
  out.config = config;
  out.p = p;
  out.k = k;

  const Matrix* b_ptr = penalty == PenaltyKind::l2 ? &coupling_b : nullptr;
  double current = density.log_joint(state.beta_A, state.sigma2, state.lambda_t,
                                     state.lambda_p, state.tau, b_ptr);

  Eigen::Index row = 0;
  for (int iter = 0; iter < config.n_iter; ++iter) {
    const double adapt_step =
        iter < config.n_burnin ? std::pow(iter + 1.0, -0.6) : 0.0;

    for (Eigen::Index i = 0; i < dim; ++i) {
      Vector proposal = state.beta_A;
      proposal[i] += std::exp(log_sd[i]) * rng.normal();
      const double prop_value = density.log_joint(proposal, state.sigma2, state.lambda_t,
                                                  state.lambda_p, state.tau, b_ptr);
      const double lr = prop_value - current;
      const double alpha = lr >= 0.0 ? 1.0 : std::exp(lr);
      ++coord_attempts;
      if (rng.uniform() < alpha) {
        state.beta_A = proposal;
        current = prop_value;
        ++coord_accepts;
      }
      if (adapt_step > 0.0) {
        log_sd[i] += adapt_step * (alpha - config.mh_target_accept);
        log_sd[i] = std::clamp(log_sd[i], std::log(1e-8), std::log(1e8));
      }
    }

    state.sigma2 = slice_sample_positive(
        [&](double s2) {
          return density.log_joint(state.beta_A, s2, state.lambda_t, state.lambda_p,
                                   state.tau, b_ptr);
        },
        state.sigma2, std::max(1.0, state.sigma2), rng);

    if (!config.lambda_t_fixed) {
      state.lambda_t = slice_sample_positive(
          [&](double lt) {
            return density.log_joint(state.beta_A, state.sigma2, lt, state.lambda_p,
                                     state.tau, b_ptr) +
                   log_half_cauchy(lt);
          },
          state.lambda_t, std::max(1.0, state.lambda_t), rng);
    }
    if (!config.lambda_p_fixed) {
      state.lambda_p = slice_sample_positive(
          [&](double lp) {
            return density.log_joint(state.beta_A, state.sigma2, state.lambda_t, lp,
                                     state.tau, b_ptr) +
                   log_half_cauchy(lp);
          },
          state.lambda_p, std::max(1.0, state.lambda_p), rng);
    }

    if (penalty == PenaltyKind::l2 && !config.tau_fixed) {
      ModelState view = state;
      view.omega = Vector::Ones(p);  // the l2 coupling has no scale mixture
      state.tau = mh_tau(view, problem, PriorKind::gaussian, rng, mh, adapt_step,
                         config.mh_target_accept);
      rebuild_b();
      current = density.log_joint(state.beta_A, state.sigma2, state.lambda_t,
                                  state.lambda_p, state.tau, b_ptr);
    } else {
      current = density.log_joint(state.beta_A, state.sigma2, state.lambda_t,
                                  state.lambda_p, state.tau, b_ptr);
    }

    if (iter >= config.n_burnin && (iter - config.n_burnin + 1) % config.thin == 0) {
      ModelState snapshot = state;
      snapshot.omega = Vector::Ones(p);
      snapshot.rho = 0.5;
      snapshot.a_t = 1.0;
      snapshot.a_p = 1.0;
      write_row(out.draws, row++, snapshot);
    }
  }

  out.acceptance_stats["coord_accept_rate"] =
      coord_attempts > 0
          ? static_cast<double>(coord_accepts) / static_cast<double>(coord_attempts)
          : 0.0;
  if (mh.attempts > 0)
    out.acceptance_stats["tau_accept_rate"] =
        static_cast<double>(mh.accepts) / static_cast<double>(mh.attempts);
  return out;
}

namespace {

double standard_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Quantile of the equally weighted mixture of N(mu_m, sd_m^2) by bisection.
double mixture_quantile(const Vector& mu, const Vector& sd, double prob) {
  const double sd_max = sd.maxCoeff();
  double lo = mu.minCoeff() - 12.0 * sd_max;
  double hi = mu.maxCoeff() + 12.0 * sd_max;
  auto cdf = [&](double t) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < mu.size(); ++m)
      acc += standard_normal_cdf((t - mu[m]) / sd[m]);
    return acc / static_cast<double>(mu.size());
  };
  for (int i = 0; i < 200 && hi - lo > 1e-10 * (1.0 + std::abs(hi) + std::abs(lo));
       ++i) {
    const double mid = (lo + hi) / 2.0;
    (cdf(mid) < prob ? lo : hi) = mid;
  }
  return (lo + hi) / 2.0;
}

}  // namespace

PredictiveSummary posterior_predict(const PosteriorDraws& draws, const Matrix& X_new,
                                    double level) {
  if (draws.count() == 0) throw Error("posterior_predict needs at least one draw");
  if (!(level > 0.0 && level < 1.0)) throw Error("level must lie in (0, 1)");
  if (X_new.cols() != draws.p)
    throw Error("X_new has " + std::to_string(X_new.cols()) + " columns, expected " +
                std::to_string(draws.p));
  const Matrix beta0 = draws.block("beta").leftCols(draws.p);
  const Vector sigma2 = draws.block("sigma2").col(0);
  const Vector sd = sigma2.cwiseSqrt();

  PredictiveSummary out;
  out.level = level;
  out.mean = X_new * beta0.colwise().mean().transpose();
  out.lower.resize(X_new.rows());
  out.upper.resize(X_new.rows());
  const double tail = (1.0 - level) / 2.0;
  for (Eigen::Index i = 0; i < X_new.rows(); ++i) {
    const Vector mu = beta0 * X_new.row(i).transpose();
    out.lower[i] = mixture_quantile(mu, sd, tail);
    out.upper[i] = mixture_quantile(mu, sd, 1.0 - tail);
  }
  return out;
}

}  // namespace trp
