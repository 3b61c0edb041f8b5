#pragma once

#include "bds/intertwine.hpp"
#include "bds/measures.hpp"

namespace bds {

/// Building blocks of the explicit Stein solution:
/// e_plus(i)  = (1/(alpha(i) pi(i))) sum_{k<=i} pi(k), defined on {0..N};
/// e_minus(i) = (1/(beta(i) pi(i)))  sum_{k>=i} pi(k), defined on {1..N}
/// (entry 0 is +infinity; the truncated upper sum includes the recorded tail).
struct SteinHelpers {
  DiscreteMeasure pi;
  Vec e_plus;
  Vec e_minus;
  Vec prefix;  // prefix(i) = sum_{k<=i} pi(k)
  Vec suffix;  // suffix(i) = sum_{k>=i} pi(k) + tail, accumulated from the top
};

SteinHelpers stein_helpers(const BirthDeathRates& rates, const DiscreteMeasure& pi, int n);

/// Which solution of the (underdetermined) Stein equation is reported:
/// first-factor computations pin g(0)=0, second-factor ones pin dg(0)=0.
enum class Normalization { AtZero, FlatAtZero };

struct SteinSolution {
  Vec g;  // values on {0..N}
  Normalization normalization;
};

/// Solution via the summed closed form, choosing between the lower and upper
/// partial sums so the division by alpha(x) pi(x) stays relatively accurate.
SteinSolution stein_solve(const BirthDeathRates& rates, const DiscreteMeasure& pi,
                          const std::function<double(int)>& f, int n, Normalization norm);

/// Independent oracle: the one-term recurrence alpha(x)g(x+1)-beta(x)g(x)=h(x)
/// run by backward substitution from the tail anchor g(N+1)=0, which is the
/// numerically stable direction (the forward direction amplifies rounding by
/// prod beta/alpha).
SteinSolution stein_solve_recursive(const BirthDeathRates& rates, const DiscreteMeasure& pi,
                                    const std::function<double(int)>& f, int n,
                                    Normalization norm);

struct ExplicitSteinValue {
  double g;   // g_{1_j}(i)
  double dg;  // d g_{1_j}(i)
};

/// Closed form of g_{1_j}(i) and its gradient from e^{+-}; defined for i >= 1
/// only (at i=0 the value is pure normalization convention) and throws there.
ExplicitSteinValue stein_solution_explicit(const SteinHelpers& h, int j, int i);

enum class TestClass { Bounded, Lipschitz, Kolmogorov };
enum class FactorOrder { First, Second };

struct FactorValue {
  double value = 0.0;
  int argmax = 0;
  bool near_boundary = false;
};

/// Exact (truncated) Stein factor via the argmax test functions. Second-order
/// factors and the Kolmogorov second factor require V_1 >= 0 and throw
/// otherwise. The Lipschitz first factor is realized by the sharpness function
/// f(x) = -sum_{k=1}^x u(k-1) (exact when V_u is constant).
FactorValue exact_factor(const BirthDeathRates& rates, const DiscreteMeasure& pi, TestClass cls,
                         FactorOrder order, const Weight& u, int n);

/// Which instantaneous-probability statistic s(t) is integrated.
enum class IntegrandKind { SupDiag, SupDiagMinusNeighbors, AbsDiagDiff };

/// int_0^infty e^{-sigma t} s(t) dt for the modified process with the given
/// conservative generator. Adaptive Gauss-Legendre panels on [t_min, T]; the
/// head and tail are over-estimated by s_max * t_min and s_max e^{-sigma T}/sigma,
/// each kept below tol/4, so the result never under-estimates by more than the
/// quadrature tolerance. i_min selects the sup range (0 for N, 1 for N*).
double bound_integral(double sigma, const TruncatedOperator& conservative_gen, IntegrandKind kind,
                      const Weight& u, double tol, int i_min);

struct NamedBound {
  std::string name;
  double value = 0.0;
  bool applicable = true;
};

std::vector<NamedBound> poisson_bounds(double lambda);
std::vector<NamedBound> negative_binomial_bounds(double r, double p);
std::vector<NamedBound> geometric_bounds(double a, double b);

/// K(r) = sqrt(r) Gamma(r-1/2)/Gamma(r), defined for r > 1/2.
double k_fun(double r);

struct LemmaReport {
  std::string lemma;
  double max_ratio = 0.0;  // left side / stated right side, over the grid
  bool ok = false;
  bool stronger_holds = false;  // the 1/sqrt(2 lambda t) variant (mm1 only)
};

LemmaReport pointwise_poisson_diff(const std::vector<double>& lambdas);
LemmaReport pointwise_mminfty(double lambda, const std::vector<double>& ts, int n);
LemmaReport pointwise_gwi(double r, double p, const std::vector<double>& ts, int n);
LemmaReport pointwise_mm1(double lambda, const std::vector<double>& ts, int n);

}  // namespace bds
