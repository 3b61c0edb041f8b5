#pragma once

#include "bds/bdp.hpp"

namespace bds {

/// Indices {0..N-kInteriorMargin} count as interior when reporting infima of
/// potentials; the top window is excluded because truncation distorts it.
inline constexpr int kInteriorMargin = 10;

/// First-order system intertwining the weighted forward gradient:
/// d_u P_t f = P_{u,t}^{V_u} d_u f.
struct ForwardSystem {
  BirthDeathRates rates_u;
  Potential potential_u;
  double sigma_u = 0.0;  // min of V_u over the interior window
  int argmin = 0;
};

/// First-order system for the weighted backward gradient. Its death rate
/// vanishes at 1, so the process started in the positive integers never
/// reaches 0.
struct BackwardSystem {
  BirthDeathRates rates_star_u;
  Potential potential_star_u;
  double sigma = 0.0;
  int argmin = 0;
};

/// Second-order system for d*_v d_u. Not a birth-death process: from x >= 2 it
/// can also jump into {0..x-2}, with total rate nonlocal_rate(x) split
/// proportionally to v.
struct SecondOrderStarSystem {
  std::function<double(int)> birth;          // alpha_{u,*v}
  std::function<double(int)> death;          // beta_{u,*v}
  std::function<double(int)> nonlocal_rate;  // total rate of the jump below, x >= 2
  std::function<double(int, int)> nonlocal_weight;  // weight of target k given x
  std::function<double(int)> potential;             // V_{u,*v}
  double sigma = 0.0;
  int argmin = 0;

  /// Dense extended generator minus potential on {0..N} (reflecting at N).
  TruncatedOperator build_operator(int n) const;
};

/// Second-order system for d_v d_u (valid when V_u is constant); always a
/// plain birth-death process.
struct SecondOrderPlainSystem {
  BirthDeathRates rates_uv;
  Potential potential_uv;
  double sigma = 0.0;
  int argmin = 0;
};

ForwardSystem derive_forward(const BirthDeathRates& rates, const Weight& u, int n);
BackwardSystem derive_backward(const BirthDeathRates& rates, const Weight& u, int n);
/// Requires V_u non-increasing on {0..N}; throws naming the first violating
/// index otherwise.
SecondOrderStarSystem derive_second_star(const BirthDeathRates& rates, const Weight& u,
                                         const Weight& v, int n);
/// Requires V_u constant on the interior window within 1e-12; throws with the
/// maximal deviation otherwise.
SecondOrderPlainSystem derive_second_plain(const BirthDeathRates& rates, const Weight& u,
                                           const Weight& v, int n);

/// Status of the two hypothesis sets under which the second-order machinery
/// applies, evaluated for the weight pair (1, u).
struct HypothesesReport {
  bool v1_nonneg = false;
  bool v1_nonincreasing = false;
  bool v1_constant = false;
  bool h1_ok = false;  // V_1 non-increasing & non-negative, V_{1,*u} bounded below
  bool h2_ok = false;  // V_1 a non-negative constant
  double inf_v1 = 0.0;
  double inf_v1_star_u = 0.0;  // meaningful only when h1_ok
  double inf_v1_u = 0.0;       // meaningful only when h2_ok
};

HypothesesReport check_hypotheses(const BirthDeathRates& rates, const Weight& u, int n);

enum class IntertwineOrder { FirstForward, FirstBackward, SecondStar, SecondPlain };

/// Result of comparing the two sides of an intertwining identity on the
/// trusted part of the truncation. trusted_limit is the largest state index
/// where the boundary-contamination bound (via the probability of hitting the
/// truncation level by time t) stays below 1e-9 times the data scale.
struct ResidualReport {
  std::string relation;
  double residual = 0.0;
  int argmax_index = 0;
  int trusted_limit = 0;
  bool boundary_flag = false;  // trusted region smaller than half the truncation
};

ResidualReport verify_intertwining(IntertwineOrder order, const BirthDeathRates& rates,
                                   const Weight& u, const Weight& v, double t,
                                   const std::function<double(int)>& f, int n);

enum class IteratedModel { MmInfty, Gwi };

/// Residual of the k-fold iterated relation d^k P_t f = e^{-kt} P_t d^k f
/// (M/M/infinity) or its negative-binomial analogue with rates (p(r+k+x), x).
ResidualReport verify_iterated(IteratedModel model, double par1, double par2, int k, double t,
                               const std::function<double(int)>& f, int n);

struct ContractionReport {
  double lhs = 0.0;  // sup of the second gradient of P_t f over trusted states
  double rhs = 0.0;  // e^{-sigma t} times the sup of the second gradient of f
  double sigma = 0.0;
  int trusted_limit = 0;
  bool ok = false;
};

enum class SecondOrderVariant { Star, Plain };

ContractionReport verify_contraction(const BirthDeathRates& rates, const Weight& u,
                                     const Weight& v, SecondOrderVariant variant,
                                     const std::function<double(int)>& f, double t, int n);

/// Maximizes sigma(u,*v) = min(V_{u,*v}(0), V_{u,*v}(1)) for the M/M/1 queue
/// over geometric weights u(x)=r^x, v(x)=q^x on the given grids.
struct SigmaSearchResult {
  double best_sigma = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> argmax;  // (r,q) within 1e-9 of the best
};

SigmaSearchResult mm1_sigma_search(double a, double b, const std::vector<double>& r_grid,
                                   const std::vector<double>& q_grid);

}  // namespace bds
