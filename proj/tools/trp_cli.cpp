#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "trp/baselines.hpp"
#include "trp/bench.hpp"
#include "trp/errors.hpp"
#include "trp/generators.hpp"
#include "trp/gibbs.hpp"
#include "trp/io.hpp"
#include "trp/map.hpp"
#include "trp/rng.hpp"

namespace {

std::string fmt(double value) {
  if (std::isnan(value)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string out_file(const std::string& out_dir, const std::string& name) {
  std::filesystem::create_directories(out_dir);
  return (std::filesystem::path(out_dir) / name).string();
}

void write_named_values(
    const std::string& path,
    const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw trp::IoError("cannot open file for writing: " + path);
  out << "name,value\n";
  for (const auto& [name, value] : rows) {
    out << name << "," << fmt(value) << "\n";
  }
  if (!out) throw trp::IoError("failed while writing: " + path);
}

std::vector<std::pair<std::string, double>> coefficient_rows(
    const trp::Vector& beta_A, Eigen::Index p, Eigen::Index k) {
  std::vector<std::pair<std::string, double>> rows;
  for (Eigen::Index j = 0; j < p; ++j) {
    rows.emplace_back("beta0_" + std::to_string(j + 1), beta_A[j]);
  }
  for (Eigen::Index s = 0; s < k; ++s) {
    for (Eigen::Index j = 0; j < p; ++j) {
      rows.emplace_back("source" + std::to_string(s + 1) + "_" +
                            std::to_string(j + 1),
                        beta_A[(s + 1) * p + j]);
    }
  }
  return rows;
}

struct CommonFlags {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string manifest_path;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--seed", flags.seed, "RNG seed");
  sub->add_option("--out", flags.out_dir, "output directory");
  sub->add_option("--manifest", flags.manifest_path, "manifest JSON path");
}

int run_fit_gibbs(const CommonFlags& flags, bool seed_given, int iters,
                  int burnin, int temps, const std::string& prior,
                  const std::string& hyper) {
  if (flags.manifest_path.empty()) {
    std::cerr << "fit-gibbs requires --manifest\n";
    return 1;
  }
  if (burnin >= iters) {
    std::cerr << "--burnin must be smaller than --iters\n";
    return 1;
  }
  const trp::Manifest manifest = trp::load_manifest(flags.manifest_path);
  const trp::TransferProblem problem = trp::load_problem(manifest);

  trp::SamplerConfig config;
  config.n_iter = iters;
  config.n_burnin = burnin;
  config.n_temperatures = temps;
  config.prior_kind =
      prior == "gaussian" ? trp::PriorKind::gaussian : trp::PriorKind::laplace;
  config.hyper_update_kind = hyper == "inverse-gamma"
                                 ? trp::HyperUpdateKind::inverse_gamma
                                 : trp::HyperUpdateKind::slice;
  config.seed = seed_given ? flags.seed : manifest.seed;

  const trp::PosteriorDraws draws = trp::run_chain(problem, config);
  trp::save_draws(out_file(flags.out_dir, "draws.csv"),
                  out_file(flags.out_dir, "meta.json"), draws);
  std::cout << "wrote " << draws.count() << " draws for P=" << draws.p
            << ", K=" << draws.k << "\n";
  return 0;
}

int run_fit_map(const CommonFlags& flags, double lambda_t, double tau,
                double lambda_p, const std::string& solver) {
  if (flags.manifest_path.empty()) {
    std::cerr << "fit-map requires --manifest\n";
    return 1;
  }
  const trp::Manifest manifest = trp::load_manifest(flags.manifest_path);
  const trp::TransferProblem problem = trp::load_problem(manifest);

  trp::MapProblem mp{problem, lambda_t, tau, lambda_p};
  const trp::MapSolution sol = solver == "penalty"
                                   ? trp::map_quadratic_penalty(mp)
                                   : trp::map_transformed_cd(mp);

  auto rows = coefficient_rows(sol.beta_A, problem.p(), problem.k());
  rows.emplace_back("objective", sol.objective);
  rows.emplace_back("iterations", static_cast<double>(sol.iterations));
  rows.emplace_back("converged", sol.converged ? 1.0 : 0.0);
  write_named_values(out_file(flags.out_dir, "map.csv"), rows);
  std::cout << "objective " << fmt(sol.objective) << "\n";
  return 0;
}

int run_translasso(const CommonFlags& flags, bool seed_given, double lambda1,
                   double lambda2) {
  if (flags.manifest_path.empty()) {
    std::cerr << "translasso requires --manifest\n";
    return 1;
  }
  const trp::Manifest manifest = trp::load_manifest(flags.manifest_path);
  const trp::TransferProblem problem = trp::load_problem(manifest);
  const std::uint64_t seed = seed_given ? flags.seed : manifest.seed;

  if (lambda1 <= 0.0 || lambda2 <= 0.0) {
    Eigen::Index total_rows = 0;
    for (const auto& s : problem.sources) total_rows += s.n();
    trp::Matrix x_all(total_rows, problem.p());
    trp::Vector y_all(total_rows);
    Eigen::Index at = 0;
    for (const auto& s : problem.sources) {
      x_all.middleRows(at, s.n()) = s.X;
      y_all.segment(at, s.n()) = s.y;
      at += s.n();
    }
    const trp::Dataset stacked(std::move(x_all), std::move(y_all));
    if (lambda1 <= 0.0) {
      trp::Rng rng(seed, 2);
      lambda1 =
          trp::cv_lasso(stacked, 5, trp::default_lambda_grid(stacked), rng)
              .lambda;
    }
    if (lambda2 <= 0.0) {
      trp::Rng rng(seed, 3);
      const trp::LassoFit stage1 = trp::lasso_cd(stacked, lambda1);
      trp::Dataset residual(problem.target.X,
                            problem.target.y - problem.target.X * stage1.beta);
      lambda2 =
          trp::cv_lasso(residual, 5, trp::default_lambda_grid(residual), rng)
              .lambda;
    }
  }

  const trp::Vector beta =
      trp::trans_lasso(problem, trp::FirstStage::lasso, lambda1, lambda2);
  std::vector<std::pair<std::string, double>> rows;
  rows.emplace_back("lambda1", lambda1);
  rows.emplace_back("lambda2", lambda2);
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    rows.emplace_back("beta_" + std::to_string(j + 1), beta[j]);
  }
  write_named_values(out_file(flags.out_dir, "translasso.csv"), rows);
  std::cout << "lambda1 " << fmt(lambda1) << " lambda2 " << fmt(lambda2)
            << "\n";
  return 0;
}

int run_bench(const CommonFlags& flags, bool seed_given,
              const std::string& generator, const std::vector<int>& k_values,
              int reps, const std::vector<std::string>& methods,
              double holdout, int p, int n_target, double contamination,
              int gibbs_iters, int gibbs_burnin, int threads) {
  if (generator.empty() && flags.manifest_path.empty()) {
    std::cerr << "bench requires --generator sparse or --manifest\n";
    return 1;
  }

  trp::BenchConfig config;
  config.k_values = k_values;
  config.n_reps = reps;
  config.methods = methods;
  config.holdout_fraction = holdout;
  config.seed = flags.seed;
  config.p = p;
  config.n_target = n_target;
  config.contamination = contamination;
  config.gibbs_iters = gibbs_iters;
  config.gibbs_burnin = gibbs_burnin;
  config.n_threads = threads;

  if (!flags.manifest_path.empty()) {
    const trp::Manifest manifest = trp::load_manifest(flags.manifest_path);
    config.problem = trp::load_problem(manifest);
    if (!seed_given) config.seed = manifest.seed;
  }

  const auto results = trp::run_benchmark(config);
  trp::write_bench_csv(out_file(flags.out_dir, "results.csv"), results);
  std::cout << "wrote " << results.size() << " result rows\n";
  return 0;
}

int run_demo_simpson(const CommonFlags& flags, int seeds, int iters,
                     int burnin, int n_per_cluster, double noise_sd) {
  if (burnin >= iters) {
    std::cerr << "--burnin must be smaller than --iters\n";
    return 1;
  }
  trp::SimpsonDemoConfig config;
  config.n_seeds = seeds;
  config.seed = flags.seed;
  config.n_per_cluster = n_per_cluster;
  config.noise_sd = noise_sd;
  config.gibbs_iters = iters;
  config.gibbs_burnin = burnin;

  const auto rows = trp::run_simpson_demo(config);
  {
    const std::string path = out_file(flags.out_dir, "simpson.csv");
    std::ofstream out(path);
    if (!out) throw trp::IoError("cannot open file for writing: " + path);
    out << "method,seed,mse\n";
    for (const auto& r : rows) {
      out << r.method << "," << r.seed_index << "," << fmt(r.mse) << "\n";
    }
    if (!out) throw trp::IoError("failed while writing: " + path);
  }
  const auto medians = trp::simpson_medians(rows);
  {
    const std::string path = out_file(flags.out_dir, "simpson_medians.csv");
    std::ofstream out(path);
    if (!out) throw trp::IoError("cannot open file for writing: " + path);
    out << "method,median_mse\n";
    for (const auto& [method, median] : medians) {
      out << method << "," << fmt(median) << "\n";
    }
    if (!out) throw trp::IoError("failed while writing: " + path);
  }
  for (const auto& [method, median] : medians) {
    std::cout << method << " median mse " << fmt(median) << "\n";
  }
  return 0;
}

int run_demo_cd_failure(const CommonFlags& flags) {
  // One-covariate instance: target estimate 0.75 with curvature 1/0.3,
  // source estimate -0.3 with curvature 1/0.5, coupling 0.5.
  trp::Matrix x0(1, 1), x1(1, 1);
  trp::Vector y0(1), y1(1);
  x0(0, 0) = 1.0 / std::sqrt(0.3);
  y0[0] = 0.75 / std::sqrt(0.3);
  x1(0, 0) = 1.0 / std::sqrt(0.5);
  y1[0] = -0.3 / std::sqrt(0.5);
  std::vector<trp::Dataset> sources;
  sources.emplace_back(std::move(x1), std::move(y1));
  trp::TransferProblem problem(trp::Dataset(std::move(x0), std::move(y0)),
                               std::move(sources));
  trp::MapProblem mp{problem, 0.5, 0.0, 0.0};

  trp::Vector beta0_init(1), z_init(1);
  beta0_init[0] = -1.5;
  z_init[0] = 0.7;
  const auto trajectory = trp::naive_block_cd(mp, beta0_init, z_init, 100);

  {
    const std::string path = out_file(flags.out_dir, "trajectory.csv");
    std::ofstream out(path);
    if (!out) throw trp::IoError("cannot open file for writing: " + path);
    out << "sweep,beta0,z,objective\n";
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
      out << i << "," << fmt(trajectory[i].beta0[0]) << ","
          << fmt(trajectory[i].z[0]) << "," << fmt(trajectory[i].objective)
          << "\n";
    }
    if (!out) throw trp::IoError("failed while writing: " + path);
  }

  const auto [beta0_star, z_star] = trp::map_univariate(0.75, -0.3, 0.3, 0.5, 0.5);
  const double best =
      0.5 * (beta0_star - 0.75) * (beta0_star - 0.75) / 0.3 +
      0.5 * (z_star + 0.3) * (z_star + 0.3) / 0.5 +
      0.5 * std::abs(beta0_star - z_star);
  write_named_values(out_file(flags.out_dir, "optimum.csv"),
                     {{"beta0_star", beta0_star},
                      {"z_star", z_star},
                      {"objective", best}});
  std::cout << "block CD stopped at objective "
            << fmt(trajectory.back().objective) << ", optimum " << fmt(best)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-regression toolkit"};
  app.require_subcommand(1);

  CommonFlags fg_flags, fm_flags, tl_flags, bench_flags, ds_flags, dc_flags;

  auto* fit_gibbs = app.add_subcommand("fit-gibbs", "Run the Gibbs sampler");
  add_common(fit_gibbs, fg_flags);
  int fg_iters = 10000, fg_burnin = 2000, fg_temps = 5;
  std::string fg_prior = "laplace", fg_hyper = "slice";
  fit_gibbs->add_option("--iters", fg_iters, "total iterations");
  fit_gibbs->add_option("--burnin", fg_burnin, "burn-in iterations");
  fit_gibbs->add_option("--temps", fg_temps, "tempering replica count");
  fit_gibbs->add_option("--prior", fg_prior, "coupling prior")
      ->check(CLI::IsMember({"laplace", "gaussian"}));
  fit_gibbs->add_option("--hyper", fg_hyper, "hyperparameter update rule")
      ->check(CLI::IsMember({"slice", "inverse-gamma"}));

  auto* fit_map = app.add_subcommand("fit-map", "Compute the posterior mode");
  add_common(fit_map, fm_flags);
  double fm_lambda_t = 1.0, fm_tau = 1.0, fm_lambda_p = 0.0;
  std::string fm_solver = "transformed";
  fit_map->add_option("--lambda-t", fm_lambda_t, "coupling strength");
  fit_map->add_option("--tau", fm_tau, "pooling regularizer");
  fit_map->add_option("--lambda-p", fm_lambda_p, "kernel ridge strength");
  fit_map->add_option("--solver", fm_solver, "mode solver")
      ->check(CLI::IsMember({"transformed", "penalty"}));

  auto* translasso = app.add_subcommand("translasso", "Two-step baseline");
  add_common(translasso, tl_flags);
  double tl_lambda1 = 0.0, tl_lambda2 = 0.0;
  translasso->add_option("--lambda1", tl_lambda1,
                         "stage-1 penalty (CV when omitted)");
  translasso->add_option("--lambda2", tl_lambda2,
                         "stage-2 penalty (CV when omitted)");

  auto* bench = app.add_subcommand("bench", "Held-out MSE benchmark");
  add_common(bench, bench_flags);
  std::string bench_generator;
  std::vector<int> bench_k = {2, 4, 8};
  int bench_reps = 50;
  std::vector<std::string> bench_methods = {"trp-gibbs", "trp-map",
                                            "trans-lasso", "target-lasso",
                                            "pooled-ols"};
  double bench_holdout = 0.2, bench_contamination = 0.5;
  int bench_p = 10, bench_n_target = 50;
  int bench_gibbs_iters = 2000, bench_gibbs_burnin = 500, bench_threads = 0;
  bench->add_option("--generator", bench_generator, "synthetic data generator")
      ->check(CLI::IsMember({"sparse"}));
  bench->add_option("--k", bench_k, "source counts to sweep");
  bench->add_option("--reps", bench_reps, "repetitions per source count");
  bench->add_option("--methods", bench_methods, "methods to run");
  bench->add_option("--holdout", bench_holdout, "held-out fraction");
  bench->add_option("--p", bench_p, "covariate count");
  bench->add_option("--n-target", bench_n_target, "target rows");
  bench->add_option("--contamination", bench_contamination,
                    "fraction of contaminated sources");
  bench->add_option("--gibbs-iters", bench_gibbs_iters,
                    "sampler iterations per fit");
  bench->add_option("--gibbs-burnin", bench_gibbs_burnin,
                    "sampler burn-in per fit");
  bench->add_option("--threads", bench_threads, "worker threads (0 = auto)");

  auto* demo_simpson = app.add_subcommand("demo-simpson", "Two-cluster demo");
  add_common(demo_simpson, ds_flags);
  int ds_seeds = 10, ds_iters = 3000, ds_burnin = 1000, ds_n_per_cluster = 60;
  double ds_noise = 1.0;
  demo_simpson->add_option("--seeds", ds_seeds, "number of seeds");
  demo_simpson->add_option("--iters", ds_iters, "sampler iterations");
  demo_simpson->add_option("--burnin", ds_burnin, "sampler burn-in");
  demo_simpson->add_option("--n-per-cluster", ds_n_per_cluster,
                           "rows per cluster");
  demo_simpson->add_option("--noise", ds_noise, "noise standard deviation");

  auto* demo_cd = app.add_subcommand(
      "demo-cd-failure", "Block-CD stall on the one-covariate instance");
  add_common(demo_cd, dc_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(fit_gibbs)) {
      return run_fit_gibbs(fg_flags, fit_gibbs->count("--seed") > 0, fg_iters,
                           fg_burnin, fg_temps, fg_prior, fg_hyper);
    }
    if (app.got_subcommand(fit_map)) {
      return run_fit_map(fm_flags, fm_lambda_t, fm_tau, fm_lambda_p, fm_solver);
    }
    if (app.got_subcommand(translasso)) {
      return run_translasso(tl_flags, translasso->count("--seed") > 0,
                            tl_lambda1, tl_lambda2);
    }
    if (app.got_subcommand(bench)) {
      return run_bench(bench_flags, bench->count("--seed") > 0,
                       bench_generator, bench_k, bench_reps, bench_methods,
                       bench_holdout, bench_p, bench_n_target,
                       bench_contamination, bench_gibbs_iters,
                       bench_gibbs_burnin, bench_threads);
    }
    if (app.got_subcommand(demo_simpson)) {
      return run_demo_simpson(ds_flags, ds_seeds, ds_iters, ds_burnin,
                              ds_n_per_cluster, ds_noise);
    }
    if (app.got_subcommand(demo_cd)) {
      return run_demo_cd_failure(dc_flags);
    }
  } catch (const trp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
