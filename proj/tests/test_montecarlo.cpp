#include <doctest.h>

#include <cmath>

#include "bds/measures.hpp"
#include "bds/montecarlo.hpp"

using namespace bds;

namespace {

double chi_square_p_value(const std::vector<int>& counts, const std::vector<double>& probs,
                          int n_samples) {
  double stat = 0.0;
  int dof = -1;
  for (size_t k = 0; k < counts.size(); ++k) {
    double expected = probs[k] * n_samples;
    if (expected < 5.0) continue;  // fold sparse cells out
    stat += (counts[k] - expected) * (counts[k] - expected) / expected;
    ++dof;
  }
  return chi_square_sf(stat, std::max(1, dof));
}

}  // namespace

TEST_CASE("path samples are deterministic and well-formed") {
  BirthDeathRates rates = BirthDeathRates::mm_infty(1.0);
  PathSample a = simulate_path(rates, 3, 2.0, 77, 1000);
  PathSample b = simulate_path(rates, 3, 2.0, 77, 1000);
  a.validate();
  CHECK(a.jump_times == b.jump_times);
  CHECK(a.states == b.states);
  CHECK(a.state_at(0.0) == 3);
  PathSample c = simulate_path(rates, 3, 2.0, 78, 1000);
  CHECK((a.jump_times != c.jump_times || a.states != c.states));
}

TEST_CASE("explosion guard trips") {
  CHECK_THROWS_AS(static_cast<void>(simulate_path(BirthDeathRates::mm_infty(50.0), 0, 50.0, 1, 5)),
                  std::runtime_error);
}

TEST_CASE("empirical law matches the Poisson instantaneous law") {
  const double lambda = 1.0, t = 2.0;
  const int n_paths = 20000;
  BirthDeathRates rates = BirthDeathRates::mm_infty(lambda);
  std::vector<int> counts(16, 0);
  for (int i = 0; i < n_paths; ++i) {
    int x = simulate_path(rates, 0, t, 5000 + i, 1000).state_at(t);
    ++counts[std::min<int>(x, 15)];
  }
  DiscreteMeasure law = poisson_measure(lambda * (1.0 - std::exp(-t)), 200);
  std::vector<double> probs(16, 0.0);
  for (int k = 0; k < 15; ++k) probs[k] = law(k);
  probs[15] = 1.0 - law.cdf()(14);
  CHECK(chi_square_p_value(counts, probs, n_paths) > 0.001);
}

TEST_CASE("feynman-kac monte carlo against matrix references") {
  const int n = 80;
  BirthDeathRates rates = BirthDeathRates::mm_infty(1.0);
  auto f = [](int x) { return static_cast<double>(std::min(x, 20)); };
  Vec fv(n + 1);
  for (int x = 0; x <= n; ++x) fv(x) = f(x);
  TruncatedOperator gen = build_generator(rates, n);

  SUBCASE("zero potential is plain monte carlo") {
    McEstimate e = feynman_kac_mc(rates, [](int) { return 0.0; }, f, 2, 1.0, 20000, 11, 800);
    double ref = semigroup_apply(gen, 1.0, fv)(2);
    CHECK(std::abs(e.estimate - ref) < 3.0 * e.std_error);
  }
  SUBCASE("constant potential factorizes") {
    McEstimate e = feynman_kac_mc(rates, [](int) { return 0.4; }, f, 2, 1.0, 20000, 12, 800);
    double ref = std::exp(-0.4) * semigroup_apply(gen, 1.0, fv)(2);
    CHECK(std::abs(e.estimate - ref) < 3.0 * e.std_error);
  }
  SUBCASE("state-dependent potential against the killed matrix semigroup") {
    auto v1 = [&rates](int x) {
      return rates.alpha(x) - rates.alpha(x + 1) + rates.beta(x + 1) - rates.beta(x);
    };
    McEstimate e = feynman_kac_mc(rates, v1, f, 2, 1.0, 20000, 13, 800);
    TruncatedOperator killed = build_schrodinger(rates, Potential::constant(1.0), n);
    double ref = semigroup_apply(killed, 1.0, fv)(2);
    CHECK(std::abs(e.estimate - ref) < 3.0 * e.std_error);
  }
  SUBCASE("thread count does not change the estimate") {
    McEstimate e1 = feynman_kac_mc(rates, [](int) { return 0.0; }, f, 2, 1.0, 8000, 14, 800, 1);
    McEstimate e4 = feynman_kac_mc(rates, [](int) { return 0.0; }, f, 2, 1.0, 8000, 14, 800, 4);
    CHECK(e1.estimate == e4.estimate);
    CHECK(e1.std_error == e4.std_error);
  }
}

TEST_CASE("four-case coupling") {
  const double t = 1.0;
  const int n_samples = 20000, x0 = 2;
  BirthDeathRates rates = BirthDeathRates::mm_infty(1.0);

  int alive = 0;
  double increment_sum = 0.0, increment_sq = 0.0;
  std::vector<int> counts(16, 0);
  for (int i = 0; i < n_samples; ++i) {
    CouplingSample cs = coupling_simulate(rates, x0, t, 9000 + i, 1000);
    // ordering invariant along a fine grid
    for (double s = 0.0; s <= t; s += 0.21) {
      int gap = cs.upper.state_at(s) - cs.lower.state_at(s);
      CHECK((gap == 0 || gap == 1));
      if (cs.stuck_at(s)) CHECK(gap == 0);
    }
    if (!cs.stuck_at(t)) ++alive;
    double inc = cs.upper.state_at(t) - cs.lower.state_at(t);
    increment_sum += inc;
    increment_sq += inc * inc;
    ++counts[std::min(cs.lower.state_at(t), 15)];
  }

  // V_1 = 1 for M/M/infinity, so P(S_t = 1) = e^{-t} exactly.
  double p_hat = static_cast<double>(alive) / n_samples;
  double p_ref = std::exp(-t);
  double se = std::sqrt(p_ref * (1.0 - p_ref) / n_samples);
  CHECK(std::abs(p_hat - p_ref) < 3.0 * se);

  // E[f(X^{x+1}) - f(X^x)] with f the identity gap equals P_{1,t}^{V_1} 1 = e^{-t}.
  double mean_inc = increment_sum / n_samples;
  double se_inc = std::sqrt((increment_sq / n_samples - mean_inc * mean_inc) / n_samples);
  CHECK(std::abs(mean_inc - p_ref) < 3.0 * se_inc);

  // the lower marginal is the plain chain: compare to the exact matrix law
  TruncatedOperator gen = build_generator(rates, 120);
  Mat m = semigroup_matrix(gen, t);
  std::vector<double> probs(16, 0.0);
  double head = 0.0;
  for (int k = 0; k < 15; ++k) {
    probs[k] = m(x0, k);
    head += m(x0, k);
  }
  probs[15] = 1.0 - head;
  CHECK(chi_square_p_value(counts, probs, n_samples) > 0.001);
}

TEST_CASE("coupling rejects non-monotone rates") {
  // alpha increasing violates the construction
  std::vector<double> a{1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, b{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK_THROWS_AS(static_cast<void>(coupling_simulate(BirthDeathRates::from_tables(a, b), 1, 5.0,
                                                      1, 100)),
                  std::runtime_error);
}

TEST_CASE("mehler weights for the galton-watson chain") {
  MehlerWeights w = mehler_weights_gwi(0.5, 2.0, 1.0, 60);
  w.validate();
  MehlerWeights at0 = mehler_weights_gwi(0.5, 2.0, 0.0, 10);
  CHECK(at0.w[0] == doctest::Approx(0.0));
  CHECK(at0.w[1] == doctest::Approx(1.0));

  // law(Y_t^x) = law(Y_t^0) * w^{*x}
  const int n = 120;
  const double p = 0.5, r = 2.0, t = 1.0;
  TruncatedOperator gen = build_generator(BirthDeathRates::gwi(r, p), n);
  Mat m = semigroup_matrix(gen, t);
  DiscreteMeasure from0 = kendall_law(r, p, t, n);
  DiscreteMeasure step;
  step.weights = Vec::Zero(n + 1);
  for (int k = 0; k <= std::min<int>(60, n); ++k) step.weights(k) = w.w[k];
  step.tail_mass = std::max(0.0, 1.0 - step.weights.sum());
  DiscreteMeasure acc = from0;
  for (int x = 1; x <= 3; ++x) {
    acc = convolve(acc, step, n);
    DiscreteMeasure fromx;
    fromx.weights = m.row(x).transpose();
    fromx.tail_mass = std::max(0.0, 1.0 - fromx.weights.sum());
    CHECK(tv_distance(acc, fromx, 1e-5) < 1e-8);
  }
}

TEST_CASE("kendall law agrees with uniformization") {
  const int n = 120;
  TruncatedOperator gen = build_generator(BirthDeathRates::gwi(2.0, 0.5), n);
  Mat m = semigroup_matrix(gen, 1.0);
  DiscreteMeasure law;
  law.weights = m.row(0).transpose();
  law.tail_mass = std::max(0.0, 1.0 - law.weights.sum());
  CHECK(tv_distance(law, kendall_law(2.0, 0.5, 1.0, n), 1e-5) < 1e-8);
}

TEST_CASE("mehler decomposition for the immigration-death chain") {
  CHECK(mehler_check_mminfty(1.0, 0, 0.7, 150) < 1e-9);
  CHECK(mehler_check_mminfty(1.0, 4, 0.7, 150) < 1e-9);
  // long horizon forgets the starting point
  TruncatedOperator gen = build_generator(BirthDeathRates::mm_infty(1.0), 150);
  Mat m = semigroup_matrix(gen, 30.0);
  DiscreteMeasure law;
  law.weights = m.row(4).transpose();
  law.tail_mass = std::max(0.0, 1.0 - law.weights.sum());
  CHECK(tv_distance(law, poisson_measure(1.0, 150)) < 1e-9);
}

TEST_CASE("star process avoids zero when the first potential is constant") {
  // With V_1 constant the extended process has no death at 1 and no nonlocal
  // jumps, so started above 0 it stays above 0.
  SecondOrderStarSystem sys =
      derive_second_star(BirthDeathRates::mm_infty(1.0), constant_weight(), constant_weight(), 80);
  CHECK(sys.death(1) == doctest::Approx(0.0));
  for (int i = 0; i < 200; ++i) {
    PathSample path = simulate_path_star(sys, 3, 4.0, 400 + i, 800);
    for (int s : path.states) CHECK(s >= 1);
  }
}

TEST_CASE("report serialization") {
  McEstimate e{1.25, 0.01, 100, 42};
  std::string js = estimate_to_json(e);
  CHECK(js.find("\"seed\": 42") != std::string::npos);
  PathSample p;
  p.terminal_time = 1.0;
  p.states = {2, 3};
  p.jump_times = {0.5};
  CHECK(paths_to_csv({p}).find("0,0.5,3") != std::string::npos);
}
