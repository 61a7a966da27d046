#pragma once

#include <vector>

#include "trp/linalg.hpp"

namespace trp {

/// One regression dataset with cached Gram matrix X^T X and X^T y.
struct Dataset {
  Matrix X;
  Vector y;
  Matrix gram;
  Vector xty;

  Dataset() = default;
  Dataset(Matrix X_in, Vector y_in);

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// A target dataset together with K >= 1 source datasets sharing the same
/// covariate dimension P.
struct TransferProblem {
  Dataset target;
  std::vector<Dataset> sources;

  TransferProblem() = default;
  TransferProblem(Dataset target_in, std::vector<Dataset> sources_in);

  Eigen::Index p() const { return target.p(); }
  Eigen::Index k() const { return static_cast<Eigen::Index>(sources.size()); }
  Eigen::Index total_n() const;

  /// Dataset by joint index: 0 is the target, 1..K are the sources.
  const Dataset& dataset(Eigen::Index j) const {
    return j == 0 ? target : sources[static_cast<std::size_t>(j - 1)];
  }
};

}  // namespace trp
