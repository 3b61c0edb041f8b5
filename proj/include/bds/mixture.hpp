#pragma once

#include "bds/measures.hpp"
#include "bds/stein.hpp"

namespace bds {

/// Law of the random rate Lambda in a mixed I_phi target.
struct MixingLaw {
  enum class Kind { Gamma, Discrete, Point };
  Kind kind = Kind::Point;
  double gamma_shape = 0.0;
  double gamma_rate = 0.0;
  std::vector<double> support;  // Discrete
  std::vector<double> probs;
  double atom = 0.0;  // Point

  static MixingLaw gamma(double shape, double rate);
  static MixingLaw discrete(std::vector<double> support, std::vector<double> probs);
  static MixingLaw point(double lambda);

  double mean() const;
  double variance() const;

  /// Nodes/weights representing E[h(Lambda)] ~= sum w_i h(x_i): exact for
  /// Point/Discrete, generalized Gauss-Laguerre for Gamma. Nodes carrying
  /// weight below 1e-16 are dropped (their contribution to any bounded
  /// integrand is below that mass).
  std::vector<std::pair<double, double>> quadrature(int nodes) const;
};

/// pmf of the mixture W: Lambda ~ mixing, W | Lambda ~ I_phi(Lambda). Gamma
/// mixing doubles the node count until the TV change drops below 1e-10 and
/// throws with the trace if 1024 nodes are not enough. Dropped quadrature mass
/// is added to the tail.
DiscreteMeasure mixed_measure(const std::function<double(int)>& phi, const MixingLaw& mixing,
                              int n, int quad_nodes = 64);

/// |lambda - lambda'| * sup_f ||g_f / u|| * E[u(X'+1)] with X' ~ I_phi(lambda')
/// and the Stein factor taken for the target I_phi(lambda). With symmetrize the
/// two roles are swapped and the minimum returned.
double closeness_bound(const std::function<double(int)>& phi, double lambda, double lambda_prime,
                       TestClass cls, const Weight& u, int n, bool symmetrize = false);

/// Unbiased two-factor bound on d_F(L(W), I_phi(lambda)), lambda = E[Lambda]:
/// sup_f ||d_u g_f|| * sup_{r in Lip(d_fw(u))} ||g_r / v|| * E[(lambda-Lambda)^2 E[v(W+1)|Lambda]].
double mixture_bound(const std::function<double(int)>& phi, const MixingLaw& mixing, TestClass cls,
                     const Weight& u, const Weight& v, int n, int quad_nodes = 64);

/// One-factor corollary E|lambda - Lambda| * sup_f ||g_f / u|| * E[u(W+1)|Lambda],
/// reported alongside for the biased-vs-unbiased comparison.
double biased_mixture_bound(const std::function<double(int)>& phi, const MixingLaw& mixing,
                            TestClass cls, const Weight& u, int n, int quad_nodes = 64);

/// Mixed-geometric bound with q = rho^{-1/2}:
/// ((1+rho^{-1/2})/(1-sqrt(rho))^3) * E[(rho-R)^2/(1-R/sqrt(rho))].
/// Requires R < sqrt(rho) almost surely (support inspection / gamma truncation).
double geometric_mixture_bound(double rho, const MixingLaw& mixing_r, TestClass cls,
                               int quad_nodes = 64);

/// Monotone-coupling distance E[d_u(G,G')] = |rho-rho'| / ((1-q rho)(1-q rho'))
/// between geometrics, u(x) = q^x.
double geometric_coupling_distance(double rho, double rho_prime, double q);

struct BoundRow {
  std::string target;
  std::string mixing;
  std::string cls;
  std::string bound_name;
  double bound = 0.0;
  double exact_distance = 0.0;
};

std::string bounds_table_to_csv(const std::vector<BoundRow>& rows);

}  // namespace bds
