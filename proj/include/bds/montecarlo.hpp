#pragma once

#include "bds/intertwine.hpp"
#include "bds/measures.hpp"

namespace bds {

/// Piecewise-constant trajectory: states[0] at time 0, states[k] after the
/// k-th jump, held until terminal_time.
struct PathSample {
  std::vector<double> jump_times;
  std::vector<int> states;
  double terminal_time = 0.0;

  int state_at(double t) const;
  void validate() const;
};

/// Exact event-driven simulation of a BDP. States above `cap` throw (explosion
/// guard); pass 10x the companion truncation by convention.
PathSample simulate_path(const BirthDeathRates& rates, int x0, double t_end, std::uint64_t seed,
                         int cap);

/// Same for the extended second-order process: besides +-1 steps it can jump
/// from x >= 2 to any k <= x-2 with the system's nonlocal weights.
PathSample simulate_path_star(const SecondOrderStarSystem& sys, int x0, double t_end,
                              std::uint64_t seed, int cap);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
  std::uint64_t seed = 0;
};

/// Monte Carlo of E[f(X_t) exp(-int_0^t V(X_s) ds)], the path integral taken
/// exactly on the piecewise-constant trajectory. Path i draws from the RNG
/// stream (seed, i), so the estimate is identical for any thread count.
McEstimate feynman_kac_mc(const BirthDeathRates& rates, const std::function<double(int)>& v,
                          const std::function<double(int)>& f, int x0, double t, int n_paths,
                          std::uint64_t seed, int cap, int threads = 1);

/// Joint path of (X^x, X^{x+1}, S) under the four-case coupling for u=1
/// (needs alpha non-increasing, beta non-decreasing on the visited range):
/// together-up at rate alpha(x+1), together-down at rate beta(x), and the two
/// decoupling moves at rates alpha(x)-alpha(x+1) and beta(x+1)-beta(x) which
/// absorb S at 0; afterwards the sticking coupling holds.
struct CouplingSample {
  PathSample lower;
  PathSample upper;
  double absorb_time = std::numeric_limits<double>::infinity();  // inf = S_t=1 throughout

  bool stuck_at(double t) const { return t >= absorb_time; }
};

CouplingSample coupling_simulate(const BirthDeathRates& rates, int x0, double t_end,
                                 std::uint64_t seed, int cap);

/// One-step increment law of the Galton-Watson-with-immigration coupling:
/// w(0) = 1 - e^{-qt} P(W_t=0), w(k) = e^{-qt}(P(W_t=k-1) - P(W_t=k)) with
/// W_t ~ Poisson(p(1-e^{-t})) and q = 1-p.
struct MehlerWeights {
  std::vector<double> w;
  double p = 0.0;
  double s = 0.0;  // immigration parameter of the ambient model, carried along
  double t = 0.0;

  void validate() const;
};

MehlerWeights mehler_weights_gwi(double p, double s, double t, int n);

/// TV distance between the uniformization law of the M/M/infinity process at
/// time t from x and Binomial(x, e^{-t}) * Poisson(lambda(1-e^{-t})).
double mehler_check_mminfty(double lambda, int x, double t, int n);

std::string paths_to_csv(const std::vector<PathSample>& paths);
std::string estimate_to_json(const McEstimate& e);

}  // namespace bds
