// Acceptance suite: one line per criterion, FAIL details inline.
// All tolerances are pinned here.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "bds/intertwine.hpp"
#include "bds/measures.hpp"
#include "bds/mixture.hpp"
#include "bds/montecarlo.hpp"
#include "bds/stein.hpp"

using namespace bds;

namespace {

int failures = 0;

void report(int idx, const std::string& label, bool ok, const std::string& detail) {
  std::printf("criterion %2d (%s): %s%s%s\n", idx, label.c_str(), ok ? "PASS" : "FAIL",
              detail.empty() ? "" : " — ", detail.c_str());
  if (!ok) ++failures;
}

std::function<double(int)> capped_identity() {
  return [](int x) { return static_cast<double>(std::min(x, 20)); };
}
std::function<double(int)> capped_square() {
  return [](int x) {
    double c = std::min(x, 20);
    return c * c;
  };
}
std::function<double(int)> random_bounded(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  auto table = std::make_shared<std::vector<double>>();
  return [rng, table](int x) {
    while (static_cast<int>(table->size()) <= x) table->push_back(2.0 * rng->uniform() - 1.0);
    return (*table)[x];
  };
}

BirthDeathRates random_rates(std::uint64_t seed, int n, bool force_v1_nonneg) {
  Rng rng(seed);
  std::vector<double> a(n + 4), b(n + 4);
  b[0] = 0.0;
  for (int x = 0; x < n + 4; ++x) {
    a[x] = 0.5 + rng.uniform();
    if (x >= 1) b[x] = 0.5 + rng.uniform() + 0.2 * x;
  }
  if (force_v1_nonneg) {
    // make alpha non-increasing and beta non-decreasing, so V_1 >= 0
    for (int x = 1; x < n + 4; ++x) a[x] = std::min(a[x], a[x - 1]);
    for (int x = 2; x < n + 4; ++x) b[x] = std::max(b[x], b[x - 1]);
  }
  return BirthDeathRates::from_tables(std::move(a), std::move(b));
}

void criterion_1() {
  const int n = 200;
  const double tol = 1e-7;
  struct Model {
    std::string name;
    BirthDeathRates rates;
    bool plain_ok;  // V_1 constant
  };
  std::vector<Model> models;
  for (double lam : {0.5, 1.0, 5.0})
    models.push_back({"mm_infty(" + std::to_string(lam) + ")", BirthDeathRates::mm_infty(lam), true});
  for (auto [r, p] : {std::pair{1.0, 0.3}, {2.0, 0.5}, {5.0, 0.8}})
    models.push_back({"gwi(" + std::to_string(r) + "," + std::to_string(p) + ")",
                      BirthDeathRates::gwi(r, p), true});
  for (auto [a, b] : {std::pair{1.0, 4.0}, {2.0, 3.0}})
    models.push_back({"mm1(" + std::to_string(a) + "," + std::to_string(b) + ")",
                      BirthDeathRates::mm1(a, b), false});

  std::vector<std::pair<std::string, std::function<double(int)>>> fs = {
      {"capped_identity", capped_identity()},
      {"capped_square", capped_square()},
      {"random_bounded", random_bounded(2024)}};

  double worst = 0.0;
  std::string worst_case;
  int count = 0;
  for (const auto& m : models) {
    std::vector<IntertwineOrder> orders = {IntertwineOrder::FirstForward,
                                           IntertwineOrder::FirstBackward,
                                           IntertwineOrder::SecondStar};
    if (m.plain_ok) orders.push_back(IntertwineOrder::SecondPlain);
    for (auto order : orders)
      for (double t : {0.1, 1.0, 3.0})
        for (const auto& [fname, f] : fs) {
          ResidualReport r = verify_intertwining(order, m.rates, constant_weight(),
                                                 constant_weight(), t, f, n);
          ++count;
          if (r.residual > worst) {
            worst = r.residual;
            worst_case = m.name + " order=" + std::to_string(static_cast<int>(order)) +
                         " t=" + std::to_string(t) + " f=" + fname;
          }
        }
  }
  report(1, "intertwining residuals", worst < tol,
         "max residual " + std::to_string(worst) + " over " + std::to_string(count) +
             " cases (worst: " + worst_case + ")");
}

DiscreteMeasure law_from(const TruncatedOperator& gen, int x0, double t) {
  Mat tr = gen.matrix.transpose();
  TruncatedOperator op_t = wrap_operator(std::move(tr), gen.is_conservative, gen.tail_error_rate);
  Vec delta = Vec::Zero(gen.size());
  delta(x0) = 1.0;
  DiscreteMeasure law;
  law.weights = semigroup_apply(op_t, t, delta);
  law.tail_mass = std::max(0.0, 1.0 - law.weights.sum());
  return law;
}

void criterion_2() {
  const int n = 200;
  double worst = 0.0;
  TruncatedOperator gen = build_generator(BirthDeathRates::mm_infty(1.0), n);
  for (double t : {0.5, 1.0, 2.0}) {
    DiscreteMeasure law = law_from(gen, 0, t);
    double tv = tv_distance(law, poisson_measure(1.0 - std::exp(-t), n));
    worst = std::max(worst, tv);
  }
  report(2, "instantaneous law of M/M/infinity", worst < 1e-9,
         "max TV " + std::to_string(worst));
}

void criterion_3() {
  double worst = 0.0;
  bool ok = true;
  for (auto [r, p] : {std::pair{1.0, 0.3}, {2.0, 0.5}, {5.0, 0.8}}) {
    int n = 400;
    BirthDeathRates rates = BirthDeathRates::gwi(r, p);
    double exact = exact_factor(rates, invariant_measure(rates, n), TestClass::Lipschitz,
                                FactorOrder::First, constant_weight(), n)
                       .value;
    double err = std::abs(exact - 1.0 / (1.0 - p));
    worst = std::max(worst, err);
    ok = ok && err < 1e-6;
  }
  for (double lam : {0.5, 1.0, 5.0}) {
    BirthDeathRates rates = BirthDeathRates::mm_infty(lam);
    double exact = exact_factor(rates, invariant_measure(rates, 140), TestClass::Lipschitz,
                                FactorOrder::First, constant_weight(), 140)
                       .value;
    double err = std::abs(exact - 1.0);
    worst = std::max(worst, err);
    ok = ok && err < 1e-6;
  }
  report(3, "Lipschitz first factors", ok, "max deviation " + std::to_string(worst));
}

void criterion_4() {
  // Stated constant 0.7236; its derivation (2 sqrt(q/p) K(2)/sqrt(2e(r+2))
  // times 4/(3q)) actually gives twice that, and the exact factor at
  // (2, 1/2) is 5/6 > 0.7236, so the stated form cannot hold there.
  const double d_stated = 0.7236;
  const double d_derived = 4.0 * std::sqrt(std::numbers::pi) / (3.0 * std::sqrt(std::numbers::e));
  bool ok = true;
  double min_slack = std::numeric_limits<double>::infinity();
  double min_slack_derived = std::numeric_limits<double>::infinity();
  double min_slack_barbour = std::numeric_limits<double>::infinity();
  for (auto [r, p] : {std::pair{1.0, 0.3}, {2.0, 0.5}, {5.0, 0.8}}) {
    int n = 400;
    double q = 1.0 - p;
    BirthDeathRates rates = BirthDeathRates::gwi(r, p);
    double exact = exact_factor(rates, invariant_measure(rates, n), TestClass::Lipschitz,
                                FactorOrder::Second, constant_weight(), n)
                       .value;
    double prop = std::min(1.0 / q, d_stated / std::sqrt((r + 2.0) * p * q));
    double derived = std::min(1.0 / q, d_derived / std::sqrt((r + 2.0) * p * q));
    double barbour = std::min({2.0 / q, (1.0 + p) / (q * q), 1.5 / std::sqrt(r * p * q * q * q)});
    min_slack = std::min({min_slack, prop - exact, barbour - exact});
    min_slack_derived = std::min(min_slack_derived, derived - exact);
    min_slack_barbour = std::min(min_slack_barbour, barbour - exact);
    ok = ok && exact <= prop && exact <= barbour;
  }
  report(4, "negative binomial second factor", ok && min_slack > 0.0,
         "min slack " + std::to_string(min_slack) + " against the stated constant " +
             std::to_string(d_stated) + "; with the constant the derivation yields (" +
             std::to_string(d_derived) + ") min slack " + std::to_string(min_slack_derived) +
             ", Barbour min slack " + std::to_string(min_slack_barbour));
}

void criterion_5() {
  bool ok = true;
  double min_slack = std::numeric_limits<double>::infinity();
  for (double lam : {0.5, 1.0, 2.0, 5.0, 10.0}) {
    const int n = 140;  // keeps the Poisson weights above the subnormal range
    BirthDeathRates rates = BirthDeathRates::mm_infty(lam);
    DiscreteMeasure pi = invariant_measure(rates, n);
    double b1 = exact_factor(rates, pi, TestClass::Bounded, FactorOrder::First, constant_weight(),
                             n)
                    .value;
    double l2 = exact_factor(rates, pi, TestClass::Lipschitz, FactorOrder::Second,
                             constant_weight(), n)
                    .value;
    double b1_bound = std::min(1.0, std::sqrt(2.0 / (lam * std::numbers::e)));
    double l2_bound = std::min(1.0, 8.0 / (3.0 * std::sqrt(2.0 * std::numbers::e * lam)));
    min_slack = std::min({min_slack, b1_bound - b1, l2_bound - l2});
    ok = ok && b1 <= b1_bound && l2 <= l2_bound;
  }
  report(5, "Poisson factor envelopes", ok, "min slack " + std::to_string(min_slack));
}

void criterion_6() {
  std::vector<double> rs, qs;
  for (double r = 0.25; r <= 4.0 + 1e-12; r += 0.01) rs.push_back(r);
  for (double q = 1.0; q <= 8.0 + 1e-12; q += 0.01) qs.push_back(q);
  SigmaSearchResult res = mm1_sigma_search(1.0, 4.0, rs, qs);
  double target = (std::sqrt(4.0) - std::sqrt(1.0)) * (std::sqrt(4.0) - std::sqrt(1.0));
  bool ok = std::abs(res.best_sigma - target) < 1e-6;
  report(6, "M/M/1 sigma search", ok,
         "best sigma " + std::to_string(res.best_sigma) + ", argmax count " +
             std::to_string(res.argmax.size()));
}

void criterion_7() {
  std::vector<LemmaReport> reps;
  reps.push_back(pointwise_poisson_diff({0.5, 1.0, 2.0, 5.0, 10.0, 20.0}));
  reps.push_back(pointwise_mminfty(1.0, {0.25, 0.5, 1.0, 2.0, 4.0}, 150));
  reps.push_back(pointwise_mminfty(5.0, {0.25, 0.5, 1.0, 2.0}, 150));
  for (double r : {0.75, 1.0, 2.0, 5.0})
    reps.push_back(pointwise_gwi(r, 0.5, {0.5, 1.0, 2.0}, 150));
  reps.push_back(pointwise_mm1(1.0, {0.5, 1.0, 2.0, 5.0}, 150));
  bool ok = true;
  double worst = 0.0;
  std::string worst_lemma;
  for (const auto& r : reps) {
    ok = ok && r.ok;
    if (r.max_ratio > worst) {
      worst = r.max_ratio;
      worst_lemma = r.lemma;
    }
  }
  report(7, "pointwise probability lemmas", ok,
         "max ratio " + std::to_string(worst) + " (" + worst_lemma + ")");
}

void criterion_8() {
  const int n = 150;
  const double p = 0.5, s = 2.0, t = 1.0;
  bool ok = true;
  std::string detail;
  MehlerWeights w = mehler_weights_gwi(p, s, t, n);
  double sum = 0.0, min_w = 0.0;
  for (double x : w.w) {
    sum += x;
    min_w = std::min(min_w, x);
  }
  ok = ok && min_w >= -1e-15 && std::abs(sum - 1.0) < 1e-12;

  TruncatedOperator gen = build_generator(BirthDeathRates::gwi(s, p), n);
  DiscreteMeasure from0 = kendall_law(s, p, t, n);
  DiscreteMeasure kendall_vs_unif = law_from(gen, 0, t);
  double tv0 = tv_distance(from0, kendall_vs_unif, 1e-5);
  ok = ok && tv0 < 1e-8;

  DiscreteMeasure step;
  step.weights = Vec::Zero(n + 1);
  for (int k = 0; k <= n; ++k) step.weights(k) = w.w[k];
  step.tail_mass = std::max(0.0, 1.0 - step.weights.sum());
  DiscreteMeasure acc = from0;
  double worst_tv = tv0;
  for (int x = 1; x <= 5; ++x) {
    acc = convolve(acc, step, n);
    double tv = tv_distance(acc, law_from(gen, x, t), 1e-5);
    worst_tv = std::max(worst_tv, tv);
    ok = ok && tv < 1e-8;
  }
  report(8, "Mehler formula for the immigration chain", ok,
         "max TV " + std::to_string(worst_tv) + ", min weight " + std::to_string(min_w));
}

void criterion_9() {
  // NB(r,p) here follows the mixed-Poisson convention Lambda ~ Gamma(r, p/(1-p)),
  // lambda = E[Lambda] = r(1-p)/p; the pmf carries (1-p)^x, i.e. the ambient
  // NB(r, 1-p) of the rest of the code base.
  bool ok = true;
  double min_slack = std::numeric_limits<double>::infinity();
  for (auto [r, p] : {std::pair{5.0, 0.8}, {20.0, 0.9}, {100.0, 0.98}}) {
    const int n = 400;
    double lambda = r * (1.0 - p) / p;
    DiscreteMeasure nb = negative_binomial_measure(r, 1.0 - p, n);
    DiscreteMeasure target = poisson_measure(lambda, n);
    WeightSequence one = WeightSequence::tabulate(constant_weight(), n);
    double w_exact = wasserstein_du(nb, target, one);
    double w_bound = 8.0 / (3.0 * std::sqrt(2.0 * std::numbers::e)) * std::sqrt(lambda) *
                     (1.0 - p) / p;
    double tv_exact = tv_distance(nb, target);
    double tv_bound = (1.0 - p) / p;  // Var(Lambda)/lambda
    min_slack = std::min({min_slack, w_bound - w_exact, tv_bound - tv_exact});
    ok = ok && w_exact <= w_bound && tv_exact <= tv_bound;

    // the generic machinery reproduces (or sharpens) the closed form
    MixingLaw mix = MixingLaw::gamma(r, p / (1.0 - p));
    double machine = mixture_bound([](int x) { return static_cast<double>(x); }, mix,
                                   TestClass::Lipschitz, constant_weight(), constant_weight(), 150);
    ok = ok && w_exact <= machine + 1e-12 && machine <= w_bound + 1e-9;
  }
  report(9, "negative binomial vs Poisson mixture", ok,
         "min slack " + std::to_string(min_slack));
}

void criterion_10() {
  const int n_paths = 100000;
  const double t = 1.0;
  BirthDeathRates rates = BirthDeathRates::mm_infty(1.0);
  auto f = capped_identity();
  auto v1 = [](int) { return 1.0; };  // V_1 of M/M/infinity
  McEstimate e = feynman_kac_mc(rates, v1, f, 2, t, n_paths, 20240, 1000);

  const int n = 120;
  Vec fv(n + 1);
  for (int x = 0; x <= n; ++x) fv(x) = f(x);
  TruncatedOperator killed =
      build_schrodinger(rates, Potential::constant(1.0), n);
  double ref = semigroup_apply(killed, t, fv)(2);
  bool fk_ok = std::abs(e.estimate - ref) < 3.0 * e.std_error;

  int alive = 0;
  const int n_cpl = 100000;
  for (int i = 0; i < n_cpl; ++i)
    if (!coupling_simulate(rates, 2, t, 555000 + i, 1000).stuck_at(t)) ++alive;
  double p_hat = static_cast<double>(alive) / n_cpl;
  double p_ref = std::exp(-t);  // e^{-int V_1} with the constant potential
  double se = std::sqrt(p_ref * (1.0 - p_ref) / n_cpl);
  bool cpl_ok = std::abs(p_hat - p_ref) < 3.0 * se;

  McEstimate again = feynman_kac_mc(rates, v1, f, 2, t, n_paths, 20240, 1000);
  McEstimate threaded = feynman_kac_mc(rates, v1, f, 2, t, n_paths, 20240, 1000, 4);
  bool det_ok = e.estimate == again.estimate && e.std_error == again.std_error &&
                e.estimate == threaded.estimate && e.std_error == threaded.std_error;

  report(10, "Monte Carlo cross-checks", fk_ok && cpl_ok && det_ok,
         "fk |err|/se " + std::to_string(std::abs(e.estimate - ref) / e.std_error) +
             ", coupling |err|/se " + std::to_string(std::abs(p_hat - p_ref) / se) +
             ", deterministic " + (det_ok ? "yes" : "no"));
}

void criterion_11() {
  bool ok = true;
  double min_slack = std::numeric_limits<double>::infinity();
  std::vector<std::function<double(int)>> fs = {capped_identity(), capped_square(),
                                                random_bounded(11)};
  struct Case {
    BirthDeathRates rates;
    double sigma;
  };
  for (const auto& c : {Case{BirthDeathRates::mm_infty(1.0), 2.0},
                        Case{BirthDeathRates::gwi(2.0, 0.5), 2.0 * 0.5}}) {
    for (const auto& f : fs)
      for (double t : {0.1, 1.0, 3.0}) {
        ContractionReport r = verify_contraction(c.rates, constant_weight(), constant_weight(),
                                                 SecondOrderVariant::Plain, f, t, 200);
        ok = ok && r.ok && std::abs(r.sigma - c.sigma) < 1e-12;
        min_slack = std::min(min_slack, r.rhs - r.lhs);
      }
  }
  report(11, "second-order contraction", ok && min_slack >= -1e-10,
         "min slack " + std::to_string(min_slack));
}

void criterion_12() {
  int bad_stein = 0, bad_wass = 0, bad_semi = 0, bad_balance = 0;
  for (int rep = 0; rep < 100; ++rep) {
    // Stein: explicit closed form vs the recursive oracle, V_1 >= 0 enforced
    {
      const int n = 50;
      BirthDeathRates rates = random_rates(10000 + rep, n, true);
      DiscreteMeasure pi = invariant_measure(rates, n);
      SteinHelpers h = stein_helpers(rates, pi, n);
      int j = 3 + (rep % 20);
      auto f = [j](int x) { return x == j ? 1.0 : 0.0; };
      SteinSolution sol = stein_solve_recursive(rates, pi, f, n, Normalization::AtZero);
      for (int i = 1; i <= n / 2; ++i) {
        ExplicitSteinValue ev = stein_solution_explicit(h, j, i);
        if (std::abs(ev.g - sol.g(i)) > 1e-10 * std::max(1.0, std::abs(ev.g))) {
          ++bad_stein;
          break;
        }
      }
    }
    // Wasserstein: quantile identity vs LP transport on supports <= 6
    {
      Rng rng(20000 + rep);
      int sz = 2 + static_cast<int>(rng.uniform() * 5.0);
      DiscreteMeasure mu, nu;
      mu.weights = Vec::Zero(sz);
      nu.weights = Vec::Zero(sz);
      for (int i = 0; i < sz; ++i) {
        mu.weights(i) = rng.uniform();
        nu.weights(i) = rng.uniform();
      }
      mu.weights /= mu.weights.sum();
      nu.weights /= nu.weights.sum();
      std::vector<double> uv(sz + 1);
      for (auto& x : uv) x = 0.25 + rng.uniform();
      WeightSequence u = WeightSequence::tabulate(table_weight(uv), sz);
      if (std::abs(wasserstein_du(mu, nu, u) - transport_lp(mu, nu, u)) > 1e-12) ++bad_wass;
    }
    // semigroup property on a random generator
    {
      const int n = 20;
      TruncatedOperator op = build_generator(random_rates(30000 + rep, n, false), n);
      Mat a = semigroup_matrix(op, 0.3);
      Mat b = semigroup_matrix(op, 0.45);
      Mat c = semigroup_matrix(op, 0.75);
      if ((a * b - c).cwiseAbs().maxCoeff() > 1e-10) ++bad_semi;
    }
    // detailed balance of the invariant measure
    {
      const int n = 40;
      BirthDeathRates rates = random_rates(40000 + rep, n, false);
      DiscreteMeasure pi = invariant_measure(rates, n);
      for (int x = 0; x + 1 <= n; ++x) {
        double lhs = pi(x) * rates.alpha(x), rhs = pi(x + 1) * rates.beta(x + 1);
        if (std::abs(lhs - rhs) > 1e-12 * std::max(1.0, std::abs(lhs))) {
          ++bad_balance;
          break;
        }
      }
    }
  }
  bool ok = bad_stein == 0 && bad_wass == 0 && bad_semi == 0 && bad_balance == 0;
  report(12, "oracle suites on randomized tables", ok,
         "failures stein=" + std::to_string(bad_stein) + " wasserstein=" +
             std::to_string(bad_wass) + " semigroup=" + std::to_string(bad_semi) +
             " balance=" + std::to_string(bad_balance));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
