#include "bds/stein.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bds {

namespace {

constexpr double kQuadRatio = 2.0;  // geometric panel growth for bound_integral
constexpr double kE = std::numbers::e;
constexpr double kPi = std::numbers::pi;

double v1_value(const BirthDeathRates& rates, int x) {
  return rates.alpha(x) - rates.alpha(x + 1) + rates.beta(x + 1) - rates.beta(x);
}

void require_v1_nonneg(const BirthDeathRates& rates, int limit) {
  for (int x = 0; x <= limit; ++x)
    if (v1_value(rates, x) < -1e-12)
      throw std::invalid_argument("exact_factor: second-order formula needs V_1 >= 0, violated at " +
                                  std::to_string(x));
}

}  // namespace

SteinHelpers stein_helpers(const BirthDeathRates& rates, const DiscreteMeasure& pi, int n) {
  if (n + 1 > pi.size()) throw std::invalid_argument("stein_helpers: measure shorter than N");
  rates.validate(n);
  SteinHelpers h;
  h.pi = pi;
  h.prefix = Vec::Zero(n + 1);
  h.suffix = Vec::Zero(n + 1);
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    acc += pi(i);
    h.prefix(i) = acc;
  }
  acc = pi.tail_mass;
  for (int i = n; i >= 0; --i) {
    acc += pi(i);
    h.suffix(i) = acc;
  }
  h.e_plus = Vec::Zero(n + 1);
  h.e_minus = Vec::Zero(n + 1);
  h.e_minus(0) = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    if (!(pi(i) > 0.0))
      throw std::invalid_argument("stein_helpers: pi must be positive on the truncation");
    h.e_plus(i) = h.prefix(i) / (rates.alpha(i) * pi(i));
    if (i >= 1) h.e_minus(i) = h.suffix(i) / (rates.beta(i) * pi(i));
  }
  return h;
}

SteinSolution stein_solve(const BirthDeathRates& rates, const DiscreteMeasure& pi,
                          const std::function<double(int)>& f, int n, Normalization norm) {
  if (n + 1 > pi.size()) throw std::invalid_argument("stein_solve: measure shorter than N");
  rates.validate(n);
  // Center f by the truncated pi-mean so the partial sums of pi*h telescope to
  // zero at the top; the centered sums can then be taken from either end.
  double mass = 0.0, mf = 0.0;
  for (int k = 0; k <= n; ++k) {
    mass += pi(k);
    mf += pi(k) * f(k);
  }
  double mean = mf / mass;
  Vec low = Vec::Zero(n + 1);   // sum_{k<=x} pi(k) (f(k)-mean)
  Vec high = Vec::Zero(n + 1);  // -sum_{k>x} pi(k) (f(k)-mean), same value analytically
  double s = 0.0;
  for (int x = 0; x <= n; ++x) {
    s += pi(x) * (f(x) - mean);
    low(x) = s;
  }
  s = 0.0;
  for (int x = n; x >= 1; --x) {
    s += pi(x) * (f(x) - mean);
    high(x - 1) = -s;
  }
  high(n) = 0.0;
  // Switch from the lower to the upper sum exactly once, at the pi-median,
  // where pi is largest; per-index switching would re-inject the float
  // residual of the total sum into the defining equation.
  int median = 0;
  double acc = 0.0;
  for (int x = 0; x <= n; ++x) {
    acc += pi(x);
    if (acc >= 0.5 * mass) {
      median = x;
      break;
    }
  }
  SteinSolution sol;
  sol.normalization = norm;
  sol.g = Vec::Zero(n + 1);
  for (int x = 0; x + 1 <= n; ++x)
    sol.g(x + 1) = (x < median ? low(x) : high(x)) / (rates.alpha(x) * pi(x));
  sol.g(0) = (norm == Normalization::AtZero) ? 0.0 : sol.g(1);
  return sol;
}

SteinSolution stein_solve_recursive(const BirthDeathRates& rates, const DiscreteMeasure& pi,
                                    const std::function<double(int)>& f, int n,
                                    Normalization norm) {
  if (n + 1 > pi.size()) throw std::invalid_argument("stein_solve_recursive: measure shorter than N");
  rates.validate(n);
  double mass = 0.0, mf = 0.0;
  for (int k = 0; k <= n; ++k) {
    mass += pi(k);
    mf += pi(k) * f(k);
  }
  double mean = mf / mass;
  SteinSolution sol;
  sol.normalization = norm;
  sol.g = Vec::Zero(n + 1);
  // alpha(x) g(x+1) - beta(x) g(x) = h(x), anchored at g(N+1)=0 and run
  // downward, the direction in which the homogeneous mode decays.
  double g_up = 0.0;  // g(x+1)
  for (int x = n; x >= 1; --x) {
    double g_here = (rates.alpha(x) * g_up - (f(x) - mean)) / rates.beta(x);
    sol.g(x) = g_here;
    g_up = g_here;
  }
  sol.g(0) = (norm == Normalization::AtZero) ? 0.0 : sol.g(1);
  return sol;
}

ExplicitSteinValue stein_solution_explicit(const SteinHelpers& h, int j, int i) {
  const int n = static_cast<int>(h.e_plus.size()) - 1;
  if (i < 1)
    throw std::invalid_argument(
        "stein_solution_explicit: the closed form holds on the positive integers only");
  if (i >= n || j < 0 || j > n)
    throw std::out_of_range("stein_solution_explicit: index outside the truncation");
  ExplicitSteinValue out;
  double pj = h.pi(j);
  out.g = pj * (i <= j ? -h.e_plus(i - 1) : h.e_minus(i));
  if (j >= i + 1)
    out.dg = pj * (h.e_plus(i - 1) - h.e_plus(i));
  else if (j == i)
    out.dg = pj * (h.e_minus(i + 1) + h.e_plus(i - 1));
  else
    out.dg = pj * (h.e_minus(i + 1) - h.e_minus(i));
  return out;
}

FactorValue exact_factor(const BirthDeathRates& rates, const DiscreteMeasure& pi, TestClass cls,
                         FactorOrder order, const Weight& u, int n) {
  const int limit = n - kInteriorMargin;
  if (limit < 5) throw std::invalid_argument("exact_factor: truncation too small");
  SteinHelpers h = stein_helpers(rates, pi, n);
  FactorValue out;
  auto record = [&](int i, double val) {
    if (val > out.value) {
      out.value = val;
      out.argmax = i;
    }
  };

  if (order == FactorOrder::First) {
    if (cls == TestClass::Bounded || cls == TestClass::Kolmogorov) {
      // Realized by the indicator of {0..i}; identical for both classes.
      for (int i = 0; i + 1 <= limit; ++i) record(i, h.e_minus(i + 1) * h.prefix(i));
    } else {
      // Sharp unbounded test function f(x) = -sum_{k=1}^x u(k-1).
      WeightSequence ws = WeightSequence::tabulate(u, n + 1);
      auto f = [&ws](int x) { return -ws.prefix(x); };
      SteinSolution sol = stein_solve(rates, pi, f, n, Normalization::AtZero);
      for (int x = 0; x + 1 <= limit; ++x) record(x, std::abs(sol.g(x + 1)) / ws.value(x));
    }
  } else {
    require_v1_nonneg(rates, limit);
    if (cls == TestClass::Bounded) {
      for (int i = 1; i <= limit; ++i) record(i, h.pi(i) * (h.e_minus(i + 1) + h.e_plus(i - 1)));
    } else if (cls == TestClass::Kolmogorov) {
      for (int i = 1; i <= limit; ++i) {
        double left = (h.e_minus(i) - h.e_minus(i + 1)) * h.prefix(i - 1);
        double right = (h.e_plus(i) - h.e_plus(i - 1)) * h.suffix(i + 1);
        record(i, std::max(left, right));
      }
    } else {
      WeightSequence ws = WeightSequence::tabulate(u, n + 1);
      for (int i = 1; i <= limit; ++i) {
        double below = 0.0, above = 0.0;
        for (int j = 0; j <= i - 1; ++j) below += h.pi(j) * ws.du(i, j);
        for (int j = i + 1; j <= n; ++j) above += h.pi(j) * ws.du(i, j);
        double val = ((h.e_plus(i) - h.e_plus(i - 1)) * above +
                      (h.e_minus(i) - h.e_minus(i + 1)) * below) /
                     ws.value(i);
        record(i, val);
      }
    }
  }
  out.near_boundary = out.argmax >= limit - 5;
  return out;
}

namespace {

double integrand_stat(const Mat& m, IntegrandKind kind, int i_min, int limit) {
  double s = 0.0;
  switch (kind) {
    case IntegrandKind::SupDiag:
      for (int i = i_min; i <= limit; ++i) s = std::max(s, m(i, i));
      break;
    case IntegrandKind::SupDiagMinusNeighbors:
      for (int i = std::max(i_min, 1); i + 1 <= limit; ++i)
        s = std::max(s, 2.0 * m(i, i) - m(i, i - 1) - m(i, i + 1));
      break;
    case IntegrandKind::AbsDiagDiff:
      for (int i = std::max(i_min, 1); i <= limit; ++i)
        s = std::max(s, std::abs(m(i, i) - m(i, i - 1)));
      break;
  }
  return s;
}

}  // namespace

double bound_integral(double sigma, const TruncatedOperator& conservative_gen, IntegrandKind kind,
                      const Weight& /*u*/, double tol, int i_min) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("bound_integral: needs sigma > 0 for the integral to converge");
  if (!(tol > 0.0)) throw std::invalid_argument("bound_integral: tolerance must be positive");
  const int size = conservative_gen.size();
  const int limit = size - 1 - kInteriorMargin;
  if (limit <= i_min + 1) throw std::invalid_argument("bound_integral: truncation too small");

  const double s_max = (kind == IntegrandKind::SupDiagMinusNeighbors) ? 2.0 : 1.0;
  if (4.0 * s_max <= sigma * tol) return s_max / sigma;  // whole integral below tol
  const double t_min = tol / (4.0 * s_max);
  const double t_end = std::log(4.0 * s_max / (sigma * tol)) / sigma;
  const double head = s_max * t_min;                    // over-estimate of [0, t_min]
  const double tail = s_max * std::exp(-sigma * t_end) / sigma;  // of [T, infinity)

  // Geometric panel edges on [t_min, T].
  std::vector<double> edges{t_min};
  while (edges.back() < t_end) edges.push_back(std::min(edges.back() * kQuadRatio, t_end));

  Vec nodes8, weights8;
  gauss_legendre(8, nodes8, weights8);
  auto evaluate = [&](int splits) {
    SemigroupPropagator prop(conservative_gen);
    double integral = 0.0;
    for (size_t p = 0; p + 1 < edges.size(); ++p) {
      double width = (edges[p + 1] - edges[p]) / splits;
      for (int s = 0; s < splits; ++s) {
        double lo = edges[p] + s * width;
        for (int q = 0; q < 8; ++q) {
          double t = lo + 0.5 * width * (nodes8[q] + 1.0);
          prop.advance(t - prop.time());
          double stat = integrand_stat(prop.value(), kind, i_min, limit);
          integral += 0.5 * width * weights8[q] * std::exp(-sigma * t) * stat;
        }
      }
    }
    return integral;
  };

  double prev = evaluate(1);
  for (int splits = 2; splits <= 8; splits *= 2) {
    double cur = evaluate(splits);
    if (std::abs(cur - prev) < tol / 10.0) return cur + head + tail;
    prev = cur;
  }
  throw std::runtime_error("bound_integral: quadrature failed to settle within tolerance (last=" +
                           std::to_string(prev) + ")");
}

double k_fun(double r) {
  if (!(r > 0.5)) throw std::invalid_argument("k_fun: defined for r > 1/2 only");
  return std::exp(0.5 * std::log(r) + std::lgamma(r - 0.5) - std::lgamma(r));
}

std::vector<NamedBound> poisson_bounds(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("poisson_bounds: lambda must be positive");
  return {
      {"bounded_first", std::min(1.0, std::sqrt(2.0 / (kE * lambda))), true},
      {"lipschitz_first", 1.0, true},
      {"lipschitz_second", std::min(1.0, 8.0 / (3.0 * std::sqrt(2.0 * kE * lambda))), true},
  };
}

std::vector<NamedBound> negative_binomial_bounds(double r, double p) {
  if (!(r > 0.0) || !(p > 0.0) || !(p < 1.0))
    throw std::invalid_argument("negative_binomial_bounds: need r > 0 and p in (0,1)");
  const double q = 1.0 - p;
  // D = 8 K(2) / (3 sqrt(2e)) = 4 sqrt(pi) / (3 sqrt(e)); the integral
  // 2 * sqrt(q/p) * K(2)/sqrt(2e(r+2)) * 4/(3q) simplifies to this constant,
  // and the exact factor at (r,p) = (2, 1/2) equals 5/6, which rules out any
  // smaller constant of the same shape.
  const double d_const = 4.0 * std::sqrt(kPi) / (3.0 * std::sqrt(kE));
  double lip2 = std::min(1.0 / q, d_const / std::sqrt((r + 2.0) * p * q));
  double barbour =
      std::min({2.0 / q, (1.0 + p) / (q * q), 1.5 / std::sqrt(r * p * q * q * q)});
  double bounded1 = std::min(1.0 / q, std::sqrt(kPi) / std::sqrt((r + 1.0) * p * q));
  return {
      {"lipschitz_first", 1.0 / q, true},
      {"lipschitz_second", lip2, true},
      {"lipschitz_second_barbour", barbour, true},
      {"bounded_first", bounded1, true},
  };
}

std::vector<NamedBound> geometric_bounds(double a, double b) {
  if (!(a > 0.0) || !(b > a))
    throw std::invalid_argument("geometric_bounds: need 0 < a < b");
  const double gap = std::sqrt(b) - std::sqrt(a);
  const double base = 1.0 / (gap * gap);
  double branch = 2.0 * std::sqrt(kPi) * gap / std::pow(a * b, 0.25) - 1.0;
  double lip2 = base * (1.0 + std::sqrt(a / b) * std::min(1.0, branch));
  return {
      {"lipschitz_first", base, true},
      {"lipschitz_second", lip2, true},
  };
}

namespace {

double diag_sup(const Mat& m, int i_min, int limit) {
  double s = 0.0;
  for (int i = i_min; i <= limit; ++i) s = std::max(s, m(i, i));
  return s;
}

}  // namespace

LemmaReport pointwise_poisson_diff(const std::vector<double>& lambdas) {
  const double c_big = std::exp(1.0 / std::sqrt(2.0)) / std::sqrt(2.0 * kPi);
  LemmaReport rep;
  rep.lemma = "poisson_diff";
  for (double lambda : lambdas) {
    int n = static_cast<int>(lambda + 12.0 * std::sqrt(lambda + 1.0) + 30.0);
    double prev = 0.0, s = 0.0;
    for (int x = 0; x <= n; ++x) {
      double px = poisson_pmf(lambda, x);
      s = std::max(s, std::abs(px - prev));
      prev = px;
    }
    double bound = std::min(1.0, c_big / lambda);
    rep.max_ratio = std::max(rep.max_ratio, s / bound);
  }
  rep.ok = rep.max_ratio <= 1.0 + 1e-10;
  return rep;
}

LemmaReport pointwise_mminfty(double lambda, const std::vector<double>& ts, int n) {
  const double c_small = 1.0 / std::sqrt(2.0 * kE);
  const double c_big = std::exp(1.0 / std::sqrt(2.0)) / std::sqrt(2.0 * kPi);
  TruncatedOperator gen = build_generator(BirthDeathRates::mm_infty(lambda), n);
  const int limit = n - kInteriorMargin;
  LemmaReport rep;
  rep.lemma = "mminfty_pointwise";
  for (double t : ts) {
    Mat m = semigroup_matrix(gen, t);
    double scale = lambda * (1.0 - std::exp(-t));
    double s1 = diag_sup(m, 0, limit);
    double b1 = std::min(1.0, c_small / std::sqrt(scale));
    double s2 = 0.0;
    for (int i = 1; i <= limit; ++i) s2 = std::max(s2, std::abs(m(i, i) - m(i, i - 1)));
    double b2 = std::min(1.0, c_big / scale);
    rep.max_ratio = std::max({rep.max_ratio, s1 / b1, s2 / b2});
  }
  rep.ok = rep.max_ratio <= 1.0 + 1e-10;
  return rep;
}

LemmaReport pointwise_gwi(double r, double p, const std::vector<double>& ts, int n) {
  if (!(r > 0.5)) throw std::invalid_argument("pointwise_gwi: the stated bound needs r > 1/2");
  TruncatedOperator gen = build_generator(BirthDeathRates::gwi(r, p), n);
  const int limit = n - kInteriorMargin;
  LemmaReport rep;
  rep.lemma = "gwi_pointwise";
  const double kr = k_fun(r);
  for (double t : ts) {
    Mat m = semigroup_matrix(gen, t);
    double s = diag_sup(m, 0, limit);
    double scale = p * (1.0 - std::exp(-(1.0 - p) * t));
    double bound =
        std::min(1.0, std::sqrt((1.0 - p) / scale) / std::sqrt(2.0 * kE) * kr / std::sqrt(r));
    rep.max_ratio = std::max(rep.max_ratio, s / bound);
  }
  rep.ok = rep.max_ratio <= 1.0 + 1e-10;
  return rep;
}

LemmaReport pointwise_mm1(double lambda, const std::vector<double>& ts, int n) {
  TruncatedOperator gen = build_generator(BirthDeathRates::mm1(lambda, lambda), n);
  const int limit = n - kInteriorMargin;
  LemmaReport rep;
  rep.lemma = "mm1_pointwise";
  rep.stronger_holds = true;
  for (double t : ts) {
    Mat m = semigroup_matrix(gen, t);
    double s = diag_sup(m, 1, limit);
    double stated = std::min(1.0, 1.0 / std::sqrt(lambda * t));
    double stronger = std::min(1.0, 1.0 / std::sqrt(2.0 * lambda * t));
    rep.max_ratio = std::max(rep.max_ratio, s / stated);
    if (s > stronger * (1.0 + 1e-9)) rep.stronger_holds = false;
  }
  rep.ok = rep.max_ratio <= 1.0 + 1e-10;
  return rep;
}

}  // namespace bds
