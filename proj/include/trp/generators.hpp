#pragma once

#include <cstdint>
#include <utility>

#include "trp/dataset.hpp"

namespace trp {

/// Two-cluster toy: both sources have slope -1 within their own x-range, but
/// the cluster centers line up so the pooled fit has positive slope. The
/// target mixes both clusters (n_per_cluster rows each), so target-only fits
/// on a few rows are unstable while the pooled center predicts well.
/// Columns are [intercept, x]. Requires n_per_cluster >= 10.
TransferProblem gen_simpsons(std::uint64_t seed, int n_per_cluster,
                             double noise_sd);

struct SparseTransferInstance {
  TransferProblem problem;
  Vector beta_true;             // target coefficients, s-sparse
  Eigen::VectorXi contaminated; // per-source flag: 1 = independent coefficients
};

/// Sparse-coefficient target with K sources. Informative sources share the
/// target coefficients plus perturbation * N(0, I); a round(contamination*K)
/// subset instead draws fresh independent s-sparse coefficients. Designs and
/// noise are Gaussian. Requires P >= 2, s_sparsity in [1, P], contamination
/// in [0, 1], 1 <= n_source_range.first <= n_source_range.second.
SparseTransferInstance gen_sparse_transfer(
    std::uint64_t seed, int P, int K, int n_target,
    std::pair<int, int> n_source_range, int s_sparsity, double contamination,
    double perturbation = 0.05, double noise_sd = 0.5);

}  // namespace trp
