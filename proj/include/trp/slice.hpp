#pragma once

#include <functional>

#include "trp/rng.hpp"

namespace trp {

/// One univariate slice-sampling transition for the unnormalized log density
/// `logf`, using stepping out with width `w` and shrinkage. Throws
/// ConvergenceError if stepping out exceeds `max_steps` expansions on either
/// side or shrinkage fails to land inside the slice.
double slice_sample(const std::function<double(double)>& logf, double x0,
                    double w, Rng& rng, int max_steps = 200);

/// Slice transition for a parameter constrained to be positive, performed on
/// the log scale with the Jacobian folded in.
double slice_sample_positive(const std::function<double(double)>& logf,
                             double x0, double w, Rng& rng,
                             int max_steps = 200);

}  // namespace trp
