#pragma once

#include <optional>

#include "bds/bdp.hpp"

namespace bds {

/// Finitely supported (truncated) probability weights on {0..N} with the mass
/// beyond N tracked explicitly. sum(weights)+tail_mass stays within 1e-12 of 1.
struct DiscreteMeasure {
  Vec weights;
  double tail_mass = 0.0;

  int size() const { return static_cast<int>(weights.size()); }
  double operator()(int x) const { return (x >= 0 && x < size()) ? weights(x) : 0.0; }

  double mean() const;
  double integrate(const std::function<double(int)>& f) const;
  Vec cdf() const;

  void validate() const;
};

/// Positive weight sequence tabulated on {0..N} with cached prefix sums
/// prefix(x) = sum_{k<x} u(k); d_u(x,y) = |prefix(y)-prefix(x)|.
struct WeightSequence {
  Vec value;
  Vec prefix;  // size N+2, prefix(0)=0

  static WeightSequence tabulate(const Weight& u, int n);
  double du(int x, int y) const { return std::abs(prefix(y) - prefix(x)); }
  double min_value() const { return value.minCoeff(); }
};

/// Rate-shape family I_phi(lambda): the law whose Stein operator is
/// lambda g(x+1) - phi(x) g(x). phi(0) is never read.
struct PhiFamily {
  std::function<double(int)> phi;
  double lambda;
};

DiscreteMeasure poisson_measure(double lambda, int n);
/// NB(r,p) with pmf Gamma(r+x)/(Gamma(r) x!) (1-p)^r p^x (mean rp/(1-p)).
DiscreteMeasure negative_binomial_measure(double r, double p, int n);
DiscreteMeasure geometric_measure(double rho, int n);
/// pi(x) = (x+1)/(2e x!): the Poisson(1) size-biased law.
DiscreteMeasure size_biased_poisson_measure(int n);
/// Built by the detailed-balance recursion pi(x+1) phi(x+1) = lambda pi(x);
/// throws if the series fails to normalize at the requested truncation.
DiscreteMeasure i_phi_measure(const PhiFamily& family, int n);

/// Dirac mass at a point.
DiscreteMeasure dirac_measure(int x, int n);

/// pi(x) = pi(0) prod_{y<=x} alpha(y-1)/beta(y), normalized on {0..N} with a
/// geometric tail bound recorded.
DiscreteMeasure invariant_measure(const BirthDeathRates& rates, int n);

/// NB(r, theta_t(p)) with theta_t(p) = 1 - (1-p)/(1 - p e^{-(1-p)t}): the
/// instantaneous law of a GWI process started at 0.
DiscreteMeasure kendall_law(double r, double p, double t, int n);

/// Convolution of two truncated measures (tail masses add, plus spill).
DiscreteMeasure convolve(const DiscreteMeasure& a, const DiscreteMeasure& b, int n);

// Distances. Each checks that the combined tail mass is below `tail_tol` and
// throws otherwise (the error message suggests enlarging N).
double tv_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tail_tol = 1e-6);
double kolmogorov_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           double tail_tol = 1e-6);
/// W_{d_u} via the monotone-coupling identity sum_x u(x)|F_mu(x)-F_nu(x)|.
double wasserstein_du(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                      const WeightSequence& u, double tail_tol = 1e-6);

/// Exact optimal-transport cost by successive-shortest-path min-cost flow on
/// the (tiny) bipartite support graph. Test oracle for wasserstein_du.
double transport_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const WeightSequence& u);

std::string measure_to_json(const DiscreteMeasure& m);
std::string measure_to_csv(const DiscreteMeasure& m);

}  // namespace bds
