#include "trp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "trp/baselines.hpp"
#include "trp/errors.hpp"
#include "trp/generators.hpp"
#include "trp/gibbs.hpp"
#include "trp/map.hpp"
#include "trp/rng.hpp"

namespace trp {

namespace {

constexpr double kMapTau = 1.0;
constexpr double kMapLambdaP = 1.0;
const std::vector<double> kMapLambdaGrid = {0.05, 0.15, 0.5, 1.5, 5.0, 15.0, 50.0};

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Split {
  Dataset train;
  Matrix x_test;
  Vector y_test;
};

Split split_target(const Dataset& target, double fraction, Rng& rng) {
  const SplitIndices idx = bench_split_rows(target.n(), fraction, rng);
  const auto n_test = static_cast<Eigen::Index>(idx.test.size());
  const auto n_train = static_cast<Eigen::Index>(idx.train.size());
  Matrix x_train(n_train, target.p()), x_test(n_test, target.p());
  Vector y_train(n_train), y_test(n_test);
  for (Eigen::Index i = 0; i < n_test; ++i) {
    x_test.row(i) = target.X.row(idx.test[static_cast<std::size_t>(i)]);
    y_test[i] = target.y[idx.test[static_cast<std::size_t>(i)]];
  }
  for (Eigen::Index i = 0; i < n_train; ++i) {
    x_train.row(i) = target.X.row(idx.train[static_cast<std::size_t>(i)]);
    y_train[i] = target.y[idx.train[static_cast<std::size_t>(i)]];
  }
  return Split{Dataset(std::move(x_train), std::move(y_train)),
               std::move(x_test), std::move(y_test)};
}

double holdout_mse(const Vector& beta, const Matrix& x_test,
                   const Vector& y_test) {
  return (y_test - x_test * beta).squaredNorm() /
         static_cast<double>(y_test.size());
}

Vector fit_trp_gibbs(const TransferProblem& problem, const BenchConfig& config,
                     std::uint64_t seed) {
  SamplerConfig sc;
  sc.n_iter = config.gibbs_iters;
  sc.n_burnin = config.gibbs_burnin;
  sc.seed = seed;
  const PosteriorDraws draws = run_chain(problem, sc);
  const auto span = draws.span("beta");
  const auto p = problem.p();
  return draws.draws.middleCols(span.first, p).colwise().mean().transpose();
}

// Selects lambda_t by 5-fold CV on the target, then refits on all of it.
Vector fit_trp_map(const TransferProblem& problem, Rng& rng) {
  const auto n = problem.target.n();
  const int n_folds = 5;
  if (n < n_folds) throw DegenerateDataError("too few target rows for CV");

  std::vector<Eigen::Index> fold(static_cast<std::size_t>(n));
  std::iota(fold.begin(), fold.end(), Eigen::Index{0});
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform() * (i + 1));
    std::swap(fold[static_cast<std::size_t>(i)],
              fold[static_cast<std::size_t>(std::min(j, i))]);
  }

  double best_lambda = kMapLambdaGrid.front();
  double best_error = std::numeric_limits<double>::infinity();
  for (const double lambda : kMapLambdaGrid) {
    double total = 0.0;
    Eigen::Index total_rows = 0;
    for (int f = 0; f < n_folds; ++f) {
      std::vector<Eigen::Index> train_rows, test_rows;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<int>(i) % n_folds == f) {
          test_rows.push_back(fold[static_cast<std::size_t>(i)]);
        } else {
          train_rows.push_back(fold[static_cast<std::size_t>(i)]);
        }
      }
      if (test_rows.empty() || train_rows.empty()) continue;
      Matrix x_tr(static_cast<Eigen::Index>(train_rows.size()), problem.p());
      Vector y_tr(static_cast<Eigen::Index>(train_rows.size()));
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        x_tr.row(static_cast<Eigen::Index>(i)) =
            problem.target.X.row(train_rows[i]);
        y_tr[static_cast<Eigen::Index>(i)] = problem.target.y[train_rows[i]];
      }
      TransferProblem sub(Dataset(std::move(x_tr), std::move(y_tr)),
                          problem.sources);
      MapProblem mp{sub, lambda, kMapTau, kMapLambdaP};
      const MapSolution sol = map_transformed_cd(mp);
      const Vector beta0 = sol.beta_A.head(problem.p());
      for (const auto r : test_rows) {
        const double resid =
            problem.target.y[r] - problem.target.X.row(r).dot(beta0);
        total += resid * resid;
        ++total_rows;
      }
    }
    const double mean_error = total / static_cast<double>(total_rows);
    if (mean_error < best_error ||
        (mean_error == best_error && lambda > best_lambda)) {
      best_error = mean_error;
      best_lambda = lambda;
    }
  }

  MapProblem mp{problem, best_lambda, kMapTau, kMapLambdaP};
  return map_transformed_cd(mp).beta_A.head(problem.p());
}

Vector fit_trans_lasso(const TransferProblem& problem, Rng& rng) {
  std::vector<const Dataset*> srcs;
  for (const auto& s : problem.sources) srcs.push_back(&s);
  Matrix x_all(problem.total_n() - problem.target.n(), problem.p());
  Vector y_all(x_all.rows());
  Eigen::Index at = 0;
  for (const auto* s : srcs) {
    x_all.middleRows(at, s->n()) = s->X;
    y_all.segment(at, s->n()) = s->y;
    at += s->n();
  }
  Dataset stacked(std::move(x_all), std::move(y_all));
  const LassoFit stage1 =
      cv_lasso(stacked, 5, default_lambda_grid(stacked), rng);

  Dataset residual(problem.target.X,
                   problem.target.y - problem.target.X * stage1.beta);
  const LassoFit stage2 =
      cv_lasso(residual, 5, default_lambda_grid(residual), rng);

  return trans_lasso(problem, FirstStage::lasso, stage1.lambda, stage2.lambda);
}

Vector fit_method(const std::string& method, const TransferProblem& problem,
                  const BenchConfig& config, std::uint64_t seed) {
  if (method == "trp-gibbs") return fit_trp_gibbs(problem, config, seed);
  if (method == "trp-map") {
    Rng rng(seed, 1);
    return fit_trp_map(problem, rng);
  }
  if (method == "trans-lasso") {
    Rng rng(seed, 2);
    return fit_trans_lasso(problem, rng);
  }
  if (method == "target-lasso") {
    Rng rng(seed, 3);
    return cv_lasso(problem.target, 5, default_lambda_grid(problem.target), rng)
        .beta;
  }
  if (method == "pooled-ols") return pooled_ols(problem);
  throw Error("unknown benchmark method: " + method);
}

void validate_bench_config(const BenchConfig& config) {
  static const std::vector<std::string> known = {
      "trp-gibbs", "trp-map", "trans-lasso", "target-lasso", "pooled-ols"};
  if (config.methods.empty()) throw Error("benchmark needs at least one method");
  for (const auto& m : config.methods) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw Error("unknown benchmark method: " + m);
    }
  }
  if (!(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0)) {
    throw Error("holdout_fraction must lie in (0, 1)");
  }
  if (config.n_reps < 1) throw Error("n_reps must be positive");
  if (!config.problem && config.k_values.empty()) {
    throw Error("benchmark needs k_values or a fixed problem");
  }
  for (const int k : config.k_values) {
    if (k < 1) throw Error("k_values must all be positive");
  }
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

std::uint64_t bench_task_seed(std::uint64_t master, int k, int rep) {
  return mix64(master + mix64(static_cast<std::uint64_t>(k) +
                              mix64(static_cast<std::uint64_t>(rep))));
}

SplitIndices bench_split_rows(Eigen::Index n, double fraction, Rng& rng) {
  const auto n_test = static_cast<Eigen::Index>(
      std::lround(fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) {
    throw DegenerateDataError("holdout split leaves no train or test rows");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform() * (i + 1));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(std::min(j, i))]);
  }
  SplitIndices split;
  split.test.assign(idx.begin(), idx.begin() + n_test);
  split.train.assign(idx.begin() + n_test, idx.end());
  return split;
}

std::vector<BenchResult> run_benchmark(const BenchConfig& config) {
  validate_bench_config(config);

  std::vector<int> k_values =
      config.problem ? std::vector<int>{static_cast<int>(config.problem->k())}
                     : config.k_values;
  const std::size_t n_methods = config.methods.size();
  const std::size_t n_tasks = k_values.size() * static_cast<std::size_t>(config.n_reps);
  std::vector<BenchResult> results(n_tasks * n_methods);

  auto run_task = [&](std::size_t task) {
    const std::size_t k_index = task / static_cast<std::size_t>(config.n_reps);
    const int rep = static_cast<int>(task % static_cast<std::size_t>(config.n_reps));
    const int k = k_values[k_index];
    const std::uint64_t task_seed = bench_task_seed(config.seed, k, rep);

    BenchResult* rows = results.data() + task * n_methods;
    for (std::size_t m = 0; m < n_methods; ++m) {
      rows[m] = BenchResult{config.methods[m], k, rep,
                            std::numeric_limits<double>::quiet_NaN(), 0.0};
    }

    std::optional<TransferProblem> generated;
    const TransferProblem* base = nullptr;
    try {
      if (config.problem) {
        base = &*config.problem;
      } else {
        generated = gen_sparse_transfer(task_seed, config.p, k,
                                        config.n_target, config.n_source_range,
                                        config.s_sparsity, config.contamination)
                        .problem;
        base = &*generated;
      }
    } catch (const Error&) {
      return;  // all rows already NaN
    }

    Rng split_rng(task_seed, 100);
    Split split;
    try {
      split = split_target(base->target, config.holdout_fraction, split_rng);
    } catch (const Error&) {
      return;
    }
    const TransferProblem train_problem(std::move(split.train), base->sources);

    for (std::size_t m = 0; m < n_methods; ++m) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Vector beta = fit_method(config.methods[m], train_problem,
                                       config, task_seed);
        rows[m].mse = holdout_mse(beta, split.x_test, split.y_test);
      } catch (const Error&) {
        // NaN row stands; the run continues.
      }
      const auto t1 = std::chrono::steady_clock::now();
      rows[m].seconds = std::chrono::duration<double>(t1 - t0).count();
    }
  };

  unsigned n_threads = config.n_threads > 0
                           ? static_cast<unsigned>(config.n_threads)
                           : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_tasks));

  if (n_threads <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (unsigned w = 0; w < n_threads; ++w) {
      workers.emplace_back([&] {
        while (true) {
          const std::size_t t = next.fetch_add(1);
          if (t >= n_tasks) break;
          run_task(t);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  return results;
}

std::vector<SimpsonDemoRow> run_simpson_demo(const SimpsonDemoConfig& config) {
  if (config.n_seeds < 1) throw Error("demo needs at least one seed");
  if (config.n_train < 3) throw Error("demo needs at least three train rows");

  std::vector<SimpsonDemoRow> rows;
  for (int s = 0; s < config.n_seeds; ++s) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
    const TransferProblem full =
        gen_simpsons(seed, config.n_per_cluster, config.noise_sd);

    const auto n = full.target.n();
    const auto n_train = static_cast<Eigen::Index>(config.n_train);
    if (n_train >= n) throw Error("demo train slice leaves no test rows");
    Dataset train(full.target.X.topRows(n_train), full.target.y.head(n_train));
    const Matrix x_test = full.target.X.bottomRows(n - n_train);
    const Vector y_test = full.target.y.tail(n - n_train);
    const TransferProblem problem(std::move(train), full.sources);

    auto score = [&](const std::string& method, const Vector& beta) {
      rows.push_back(
          SimpsonDemoRow{method, s, holdout_mse(beta, x_test, y_test)});
    };
    auto record_failure = [&](const std::string& method) {
      rows.push_back(SimpsonDemoRow{method, s,
                                    std::numeric_limits<double>::quiet_NaN()});
    };

    try {
      SamplerConfig sc;
      sc.n_iter = config.gibbs_iters;
      sc.n_burnin = config.gibbs_burnin;
      sc.seed = mix64(config.seed + mix64(static_cast<std::uint64_t>(s)));
      const PosteriorDraws draws = run_chain(problem, sc);
      const auto span = draws.span("beta");
      const Vector beta = draws.draws.middleCols(span.first, problem.p())
                              .colwise()
                              .mean()
                              .transpose();
      score("trp-gibbs", beta);
    } catch (const Error&) {
      record_failure("trp-gibbs");
    }

    try {
      score("target-ols", ols(problem.target));
    } catch (const Error&) {
      record_failure("target-ols");
    }

    try {
      const auto p = problem.p();
      Vector center = Vector::Zero(p);
      std::vector<Vector> fits;
      for (const auto& src : problem.sources) {
        fits.push_back(ols(src));
        center += fits.back();
      }
      center /= static_cast<double>(fits.size());
      Vector variance = Vector::Zero(p);
      for (const auto& f : fits) {
        variance += (f - center).cwiseAbs2();
      }
      variance /= static_cast<double>(fits.size());
      Matrix penalized = problem.target.gram;
      Vector rhs = problem.target.xty;
      for (Eigen::Index j = 0; j < p; ++j) {
        const double precision = 1.0 / std::max(variance[j], 1e-2);
        penalized(j, j) += precision;
        rhs[j] += precision * center[j];
      }
      const Eigen::LLT<Matrix> llt(penalized);
      if (llt.info() != Eigen::Success) {
        throw NotPositiveDefiniteError("hierarchical ridge system not PD");
      }
      score("hier-mean-ridge", llt.solve(rhs));
    } catch (const Error&) {
      record_failure("hier-mean-ridge");
    }
  }
  return rows;
}

std::vector<std::pair<std::string, double>> simpson_medians(
    const std::vector<SimpsonDemoRow>& rows) {
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) {
      order.push_back(r.method);
    }
  }
  std::vector<std::pair<std::string, double>> medians;
  for (const auto& method : order) {
    std::vector<double> values;
    for (const auto& r : rows) {
      if (r.method == method && !std::isnan(r.mse)) values.push_back(r.mse);
    }
    if (values.empty()) {
      medians.emplace_back(method, std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median = n % 2 == 1
                              ? values[n / 2]
                              : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    medians.emplace_back(method, median);
  }
  return medians;
}

std::string bench_results_csv(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  out << "method,K,rep,mse,seconds\n";
  for (const auto& r : results) {
    out << r.method << "," << r.k << "," << r.rep << ","
        << format_double(r.mse) << "," << format_double(r.seconds) << "\n";
  }
  return out.str();
}

void write_bench_csv(const std::string& path,
                     const std::vector<BenchResult>& results) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << bench_results_csv(results);
  if (!out) throw IoError("failed while writing: " + path);
}

std::vector<BenchResult> read_bench_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("results file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "method,K,rep,mse,seconds") {
    throw ParseError("unexpected results header: " + line);
  }

  auto parse_double = [](const std::string& field, std::size_t row,
                         std::size_t col) {
    if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto [ptr, ec] =
        std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
      throw ParseError("invalid numeric field '" + field + "' at row " +
                       std::to_string(row) + " column " + std::to_string(col));
    }
    return v;
  };
  auto parse_int = [](const std::string& field, std::size_t row,
                      std::size_t col) {
    int v = 0;
    const auto [ptr, ec] =
        std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
      throw ParseError("invalid integer field '" + field + "' at row " +
                       std::to_string(row) + " column " + std::to_string(col));
    }
    return v;
  };

  std::vector<BenchResult> results;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 5) {
      throw ParseError("expected 5 fields at row " + std::to_string(row_number));
    }
    BenchResult r;
    r.method = fields[0];
    r.k = parse_int(fields[1], row_number, 2);
    r.rep = parse_int(fields[2], row_number, 3);
    r.mse = parse_double(fields[3], row_number, 4);
    r.seconds = parse_double(fields[4], row_number, 5);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace trp
