#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

namespace bds {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// log of the Poisson(lambda) pmf at x.
inline double log_poisson_pmf(double lambda, int x) {
  if (lambda <= 0.0) return x == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return x * std::log(lambda) - lambda - std::lgamma(x + 1.0);
}

inline double poisson_pmf(double lambda, int x) { return std::exp(log_poisson_pmf(lambda, x)); }

/// log pmf of NB(r,p) in the convention pi(x) = Gamma(r+x)/(Gamma(r) x!) (1-p)^r p^x.
inline double log_negative_binomial_pmf(double r, double p, int x) {
  if (p <= 0.0) return x == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return std::lgamma(r + x) - std::lgamma(r) - std::lgamma(x + 1.0) + r * std::log1p(-p) +
         x * std::log(p);
}

inline double negative_binomial_pmf(double r, double p, int x) {
  return std::exp(log_negative_binomial_pmf(r, p, x));
}

inline double log_sum_exp(const Vec& logs) {
  double m = logs.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((logs.array() - m).exp().sum());
}

/// Order-insensitive pairwise summation; used for reproducible reductions.
inline double pairwise_sum(const std::vector<double>& xs, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += xs[i];
    return s;
  }
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(xs, lo, mid) + pairwise_sum(xs, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& xs) { return pairwise_sum(xs, 0, xs.size()); }

/// Regularized lower incomplete gamma P(a,x); series/continued-fraction split.
double gamma_p(double a, double x);

/// Survival function of a chi-square variable with k degrees of freedom.
inline double chi_square_sf(double stat, int dof) { return 1.0 - gamma_p(0.5 * dof, 0.5 * stat); }

/// Counter-based generator: splitmix64 stream, split per (seed, stream id).
/// Identical (seed, stream) always reproduces the same draws regardless of
/// thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed ^ mix(stream ^ 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform on (0,1); never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

/// Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(int n, Vec& nodes, Vec& weights);

/// Generalized Gauss-Laguerre rule for weight x^alpha e^{-x} on (0,inf),
/// normalized so the weights sum to 1 (probability quadrature for Gamma(alpha+1, 1)).
void gauss_laguerre_normalized(int n, double alpha, Vec& nodes, Vec& weights);

}  // namespace bds
