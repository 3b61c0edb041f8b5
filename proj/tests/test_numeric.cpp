#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "bds/numeric.hpp"

using namespace bds;

TEST_CASE("gamma_p matches closed forms") {
  // P(1,x) = 1 - e^{-x}
  for (double x : {0.1, 0.5, 1.0, 3.0, 10.0})
    CHECK(gamma_p(1.0, x) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
  // P(1/2, x) = erf(sqrt(x))
  for (double x : {0.2, 1.0, 4.0})
    CHECK(gamma_p(0.5, x) == doctest::Approx(std::erf(std::sqrt(x))).epsilon(1e-12));
  // P(2,x) = 1 - (1+x)e^{-x}
  CHECK(gamma_p(2.0, 3.0) == doctest::Approx(1.0 - 4.0 * std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("chi_square_sf with two degrees of freedom is exponential") {
  for (double s : {0.5, 2.0, 7.0})
    CHECK(chi_square_sf(s, 2) == doctest::Approx(std::exp(-s / 2.0)).epsilon(1e-12));
}

TEST_CASE("pairwise_sum agrees with sequential accumulation") {
  Rng rng(11);
  std::vector<double> xs(1000);
  for (auto& x : xs) x = rng.uniform() - 0.5;
  double seq = std::accumulate(xs.begin(), xs.end(), 0.0);
  CHECK(pairwise_sum(xs) == doctest::Approx(seq).epsilon(1e-12));
}

TEST_CASE("gauss_legendre integrates polynomials exactly") {
  Vec nodes, weights;
  gauss_legendre(8, nodes, weights);
  CHECK(weights.sum() == doctest::Approx(2.0).epsilon(1e-13));
  // int_{-1}^{1} x^{14} dx = 2/15, exact for an 8-point rule
  double s = 0.0;
  for (int i = 0; i < 8; ++i) s += weights(i) * std::pow(nodes(i), 14);
  CHECK(s == doctest::Approx(2.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("gauss_laguerre_normalized is a Gamma probability rule") {
  Vec nodes, weights;
  gauss_laguerre_normalized(32, 1.5, nodes, weights);
  CHECK(weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  // Gamma(alpha+1, 1) moments: mean alpha+1, second moment (alpha+1)(alpha+2)
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < 32; ++i) {
    m1 += weights(i) * nodes(i);
    m2 += weights(i) * nodes(i) * nodes(i);
  }
  CHECK(m1 == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(m2 == doctest::Approx(2.5 * 3.5).epsilon(1e-10));
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(123, 4), b(123, 4), c(123, 5);
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    auto x = a.next_u64();
    same = same && (x == b.next_u64());
    differ = differ || (x != c.next_u64());
  }
  CHECK(same);
  CHECK(differ);
  Rng d(7);
  for (int i = 0; i < 1000; ++i) {
    double ux = d.uniform();
    CHECK(ux > 0.0);
    CHECK(ux < 1.0);
  }
}

TEST_CASE("pmf helpers normalize") {
  double s = 0.0;
  for (int x = 0; x < 200; ++x) s += poisson_pmf(3.0, x);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  s = 0.0;
  for (int x = 0; x < 400; ++x) s += negative_binomial_pmf(2.5, 0.6, x);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
  // NB mean r p/(1-p)
  double m = 0.0;
  for (int x = 0; x < 400; ++x) m += x * negative_binomial_pmf(2.5, 0.6, x);
  CHECK(m == doctest::Approx(2.5 * 0.6 / 0.4).epsilon(1e-8));
}

TEST_CASE("log_sum_exp is shift-stable") {
  Vec logs(3);
  logs << -1000.0, -1000.0, -1000.0;
  CHECK(log_sum_exp(logs) == doctest::Approx(-1000.0 + std::log(3.0)).epsilon(1e-12));
}
