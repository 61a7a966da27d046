#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "trp/dataset.hpp"
#include "trp/linalg.hpp"
#include "trp/rng.hpp"

namespace testutil {

inline trp::Matrix random_spd(trp::Rng& rng, Eigen::Index n,
                              double jitter = 0.5) {
  trp::Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  return a * a.transpose() / static_cast<double>(n) +
         jitter * trp::Matrix::Identity(n, n);
}

inline trp::Dataset random_dataset(trp::Rng& rng, Eigen::Index n,
                                   Eigen::Index p, double noise_sd = 0.5) {
  trp::Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  }
  trp::Vector beta = rng.normal_vector(p);
  trp::Vector y = x * beta;
  for (Eigen::Index i = 0; i < n; ++i) y[i] += noise_sd * rng.normal();
  return trp::Dataset(std::move(x), std::move(y));
}

inline trp::TransferProblem random_problem(trp::Rng& rng, Eigen::Index p,
                                           Eigen::Index k,
                                           Eigen::Index n_target,
                                           Eigen::Index n_source,
                                           double noise_sd = 0.5) {
  std::vector<trp::Dataset> sources;
  for (Eigen::Index j = 0; j < k; ++j) {
    sources.push_back(random_dataset(rng, n_source, p, noise_sd));
  }
  return trp::TransferProblem(random_dataset(rng, n_target, p, noise_sd),
                              std::move(sources));
}

// Dense reference for the log pseudodeterminant of B^T diag(w) B: assemble
// the full M x M matrix, eigendecompose, and sum logs of the eigenvalues
// above the relative cutoff.
inline double dense_pseudo_det_log(const trp::Matrix& b, const trp::Vector& w) {
  const trp::Matrix full = b.transpose() * w.asDiagonal() * b;
  Eigen::SelfAdjointEigenSolver<trp::Matrix> eig(full);
  const double lmax = eig.eigenvalues().cwiseAbs().maxCoeff();
  double total = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()[i];
    if (v > 1e-10 * lmax) total += std::log(v);
  }
  return total;
}

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

// Two-stage 2-D grid search: a coarse pass over the box, then a fine pass
// around the coarse winner.
inline GridPoint grid_search_2d(const std::function<double(double, double)>& f,
                                double lo_x, double hi_x, double lo_y,
                                double hi_y, double coarse, double fine) {
  GridPoint best;
  bool first = true;
  for (double x = lo_x; x <= hi_x + 0.5 * coarse; x += coarse) {
    for (double y = lo_y; y <= hi_y + 0.5 * coarse; y += coarse) {
      const double v = f(x, y);
      if (first || v < best.value) {
        best = {x, y, v};
        first = false;
      }
    }
  }
  GridPoint refined = best;
  for (double x = best.x - coarse; x <= best.x + coarse + 0.5 * fine;
       x += fine) {
    for (double y = best.y - coarse; y <= best.y + coarse + 0.5 * fine;
         y += fine) {
      const double v = f(x, y);
      if (v < refined.value) refined = {x, y, v};
    }
  }
  return refined;
}

inline double mean(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

// Standard error of the mean of a correlated sequence via batch means.
inline double batch_means_se(const std::vector<double>& xs,
                             std::size_t batch) {
  const std::size_t n_batches = xs.size() / batch;
  std::vector<double> means;
  means.reserve(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) total += xs[b * batch + i];
    means.push_back(total / static_cast<double>(batch));
  }
  const double m = mean(means);
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  var /= static_cast<double>(n_batches - 1);
  return std::sqrt(var / static_cast<double>(n_batches));
}

inline double iid_se(const std::vector<double>& xs) {
  const double m = mean(xs);
  double var = 0.0;
  for (double v : xs) var += (v - m) * (v - m);
  var /= static_cast<double>(xs.size() - 1);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace testutil
