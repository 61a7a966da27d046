#include "trp/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "trp/errors.hpp"
#include "trp/rng.hpp"

namespace trp {

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
  const double u = rng.uniform();
  const int span = hi - lo + 1;
  int v = lo + static_cast<int>(u * span);
  return std::min(v, hi);
}

// First m entries of a uniformly shuffled 0..n-1.
std::vector<int> random_subset(Rng& rng, int n, int m) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < m; ++i) {
    const int j = uniform_int(rng, i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  return idx;
}

Vector sparse_coefficients(Rng& rng, int p, int s) {
  Vector beta = Vector::Zero(p);
  for (int j : random_subset(rng, p, s)) beta[j] = rng.normal();
  return beta;
}

Dataset cluster_rows(Rng& rng, int n, double x_lo, double x_hi,
                     double intercept, double slope, double noise_sd) {
  Matrix x(n, 2);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * rng.uniform();
    x(i, 0) = 1.0;
    x(i, 1) = xv;
    y[i] = intercept + slope * xv + noise_sd * rng.normal();
  }
  return Dataset(std::move(x), std::move(y));
}

Dataset gaussian_dataset(Rng& rng, int n, const Vector& beta, double noise_sd) {
  const auto p = beta.size();
  Matrix x(n, p);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  }
  Vector y = x * beta;
  for (int i = 0; i < n; ++i) y[i] += noise_sd * rng.normal();
  return Dataset(std::move(x), std::move(y));
}

}  // namespace

TransferProblem gen_simpsons(std::uint64_t seed, int n_per_cluster,
                             double noise_sd) {
  if (n_per_cluster < 10) {
    throw DimensionError("gen_simpsons needs n_per_cluster >= 10, got " +
                         std::to_string(n_per_cluster));
  }
  if (!(noise_sd >= 0.0)) {
    throw DimensionError("gen_simpsons needs noise_sd >= 0");
  }
  Rng rng(seed);

  // Cluster A: x in [0.5, 1.5], y = 0.5 - x. Cluster B: x in [2, 3],
  // y = 4 - x. Centers (1, -0.5) and (2.5, 1.5) make the across-cluster
  // slope +4/3 while each within-cluster slope is -1.
  Dataset source_a =
      cluster_rows(rng, n_per_cluster, 0.5, 1.5, 0.5, -1.0, noise_sd);
  Dataset source_b =
      cluster_rows(rng, n_per_cluster, 2.0, 3.0, 4.0, -1.0, noise_sd);

  Dataset target_a =
      cluster_rows(rng, n_per_cluster, 0.5, 1.5, 0.5, -1.0, noise_sd);
  Dataset target_b =
      cluster_rows(rng, n_per_cluster, 2.0, 3.0, 4.0, -1.0, noise_sd);

  const int n = 2 * n_per_cluster;
  Matrix x(n, 2);
  Vector y(n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = uniform_int(rng, 0, i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  for (int i = 0; i < n; ++i) {
    const int src = order[static_cast<std::size_t>(i)];
    const Dataset& d = src < n_per_cluster ? target_a : target_b;
    const int row = src < n_per_cluster ? src : src - n_per_cluster;
    x.row(i) = d.X.row(row);
    y[i] = d.y[row];
  }

  std::vector<Dataset> sources;
  sources.push_back(std::move(source_a));
  sources.push_back(std::move(source_b));
  return TransferProblem(Dataset(std::move(x), std::move(y)),
                         std::move(sources));
}

SparseTransferInstance gen_sparse_transfer(std::uint64_t seed, int P, int K,
                                           int n_target,
                                           std::pair<int, int> n_source_range,
                                           int s_sparsity, double contamination,
                                           double perturbation,
                                           double noise_sd) {
  if (P < 2) throw DimensionError("gen_sparse_transfer needs P >= 2");
  if (K < 1) throw DimensionError("gen_sparse_transfer needs K >= 1");
  if (n_target < 1) throw DimensionError("gen_sparse_transfer needs n_target >= 1");
  if (n_source_range.first < 1 || n_source_range.first > n_source_range.second) {
    throw DimensionError("gen_sparse_transfer needs 1 <= n_min <= n_max");
  }
  if (s_sparsity < 1 || s_sparsity > P) {
    throw DimensionError("gen_sparse_transfer needs s_sparsity in [1, P]");
  }
  if (!(contamination >= 0.0 && contamination <= 1.0)) {
    throw DimensionError("gen_sparse_transfer needs contamination in [0, 1]");
  }
  Rng rng(seed);

  Vector beta_true = sparse_coefficients(rng, P, s_sparsity);

  const int n_contaminated =
      static_cast<int>(std::lround(contamination * K));
  Eigen::VectorXi contaminated = Eigen::VectorXi::Zero(K);
  for (int k : random_subset(rng, K, n_contaminated)) contaminated[k] = 1;

  std::vector<Dataset> sources;
  sources.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const int n_k =
        uniform_int(rng, n_source_range.first, n_source_range.second);
    Vector beta_k;
    if (contaminated[k]) {
      beta_k = sparse_coefficients(rng, P, s_sparsity);
    } else {
      beta_k = beta_true;
      for (Eigen::Index j = 0; j < P; ++j) {
        beta_k[j] += perturbation * rng.normal();
      }
    }
    sources.push_back(gaussian_dataset(rng, n_k, beta_k, noise_sd));
  }

  Dataset target = gaussian_dataset(rng, n_target, beta_true, noise_sd);

  return SparseTransferInstance{
      TransferProblem(std::move(target), std::move(sources)),
      std::move(beta_true), std::move(contaminated)};
}

}  // namespace trp
