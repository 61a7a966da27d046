#include "trp/dataset.hpp"

#include <string>

#include "trp/errors.hpp"

namespace trp {

Dataset::Dataset(Matrix X_in, Vector y_in) : X(std::move(X_in)), y(std::move(y_in)) {
  if (X.rows() == 0 || X.cols() == 0) {
    throw DegenerateDataError("Dataset: design matrix must have at least one row and column");
  }
  if (y.size() != X.rows()) {
    throw DegenerateDataError("Dataset: y has " + std::to_string(y.size()) +
                              " entries but X has " + std::to_string(X.rows()) + " rows");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw DegenerateDataError("Dataset: non-finite values in X or y");
  }
  gram = X.transpose() * X;
  xty = X.transpose() * y;
}

TransferProblem::TransferProblem(Dataset target_in, std::vector<Dataset> sources_in)
    : target(std::move(target_in)), sources(std::move(sources_in)) {
  if (sources.empty()) {
    throw DegenerateDataError("TransferProblem: at least one source dataset is required");
  }
  for (std::size_t k = 0; k < sources.size(); ++k) {
    if (sources[k].p() != target.p()) {
      throw DegenerateDataError("TransferProblem: source " + std::to_string(k + 1) +
                                " has " + std::to_string(sources[k].p()) +
                                " covariates, target has " + std::to_string(target.p()));
    }
  }
}

Eigen::Index TransferProblem::total_n() const {
  Eigen::Index n = target.n();
  for (const Dataset& d : sources) n += d.n();
  return n;
}

}  // namespace trp
