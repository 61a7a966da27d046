#include "trp/slice.hpp"

#include <cmath>

#include "trp/errors.hpp"

namespace trp {

double slice_sample(const std::function<double(double)>& logf, double x0,
                    double w, Rng& rng, int max_steps) {
  const double f0 = logf(x0);
  if (!std::isfinite(f0)) {
    throw DegenerateDataError("slice_sample: log density not finite at the current point");
  }
  const double level = f0 + std::log(rng.uniform());

  double left = x0 - w * rng.uniform();
  double right = left + w;
  int steps = 0;
  while (logf(left) > level) {
    left -= w;
    if (++steps > max_steps) {
      throw ConvergenceError("slice_sample: stepping out exceeded the expansion cap (left)");
    }
  }
  steps = 0;
  while (logf(right) > level) {
    right += w;
    if (++steps > max_steps) {
      throw ConvergenceError("slice_sample: stepping out exceeded the expansion cap (right)");
    }
  }

  for (int i = 0; i < 1000; ++i) {
    double x1 = left + (right - left) * rng.uniform();
    if (logf(x1) > level) return x1;
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  throw ConvergenceError("slice_sample: shrinkage failed to find a point in the slice");
}

double slice_sample_positive(const std::function<double(double)>& logf,
                             double x0, double w, Rng& rng, int max_steps) {
  if (x0 <= 0.0) {
    throw DegenerateDataError("slice_sample_positive: current point must be positive");
  }
  auto logf_u = [&logf](double u) { return logf(std::exp(u)) + u; };
  double u1 = slice_sample(logf_u, std::log(x0), w, rng, max_steps);
  return std::exp(u1);
}

}  // namespace trp
