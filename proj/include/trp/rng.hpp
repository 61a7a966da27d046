#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace trp {

/// Seeded random stream. All stochastic operations in the library take one of
/// these explicitly so runs are reproducible draw-for-draw. Distribution
/// objects are constructed fresh per call, making every draw a pure function
/// of the generator state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream & 0xffffffffu),
                      static_cast<std::uint32_t>(stream >> 32)};
    gen_.seed(seq);
  }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
  }

  double normal() {
    return std::normal_distribution<double>(0.0, 1.0)(gen_);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Gamma(shape, rate); mean shape/rate.
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(gen_);
  }

  /// Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x);
  /// the scale argument is the rate of the associated gamma distribution.
  double inverse_gamma(double shape, double scale) {
    return scale / std::gamma_distribution<double>(shape, 1.0)(gen_);
  }

  double exponential(double rate) {
    return std::exponential_distribution<double>(rate)(gen_);
  }

  double beta(double a, double b) {
    double x = std::gamma_distribution<double>(a, 1.0)(gen_);
    double y = std::gamma_distribution<double>(b, 1.0)(gen_);
    return x / (x + y);
  }

  /// Inverse Gaussian (Wald) with mean mu and shape s, sampled by the
  /// transformation-with-rejection method of Michael, Schucany and Haas.
  double inverse_gaussian(double mu, double s) {
    double z = normal();
    double v = z * z;
    double x = mu + mu * mu * v / (2.0 * s) -
               mu / (2.0 * s) * std::sqrt(4.0 * mu * s * v + mu * mu * v * v);
    if (uniform() <= mu / (mu + x)) return x;
    return mu * mu / x;
  }

  /// Standard half-Cauchy draw.
  double half_cauchy() {
    return std::abs(std::cauchy_distribution<double>(0.0, 1.0)(gen_));
  }

  std::uint64_t raw() { return gen_(); }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace trp
