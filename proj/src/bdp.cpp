#include "bds/bdp.hpp"

#include <algorithm>
#include <cmath>

namespace bds {

BirthDeathRates BirthDeathRates::from_tables(std::vector<double> a, std::vector<double> b) {
  auto alpha = [a = std::move(a)](int x) {
    if (x < 0 || x >= static_cast<int>(a.size()))
      throw std::out_of_range("birth rate table evaluated outside its range");
    return a[x];
  };
  auto beta = [b = std::move(b)](int x) {
    if (x < 0 || x >= static_cast<int>(b.size()))
      throw std::out_of_range("death rate table evaluated outside its range");
    return b[x];
  };
  return {alpha, beta};
}

void BirthDeathRates::validate(int n) const {
  if (beta(0) != 0.0) throw std::invalid_argument("birth-death rates: beta(0) must be 0");
  for (int x = 0; x <= n; ++x) {
    if (!(alpha(x) > 0.0))
      throw std::invalid_argument("birth-death rates: alpha(" + std::to_string(x) +
                                  ") must be positive");
    if (x >= 1 && !(beta(x) > 0.0))
      throw std::invalid_argument("birth-death rates: beta(" + std::to_string(x) +
                                  ") must be positive");
  }
}

TruncatedOperator build_generator(const BirthDeathRates& rates, int n) {
  if (n < 2) throw std::invalid_argument("build_generator: need N >= 2");
  rates.validate(n);
  Mat m = Mat::Zero(n + 1, n + 1);
  for (int x = 0; x <= n; ++x) {
    double a = (x < n) ? rates.alpha(x) : 0.0;  // reflecting: drop birth at N
    double b = rates.beta(x);
    if (x < n) m(x, x + 1) = a;
    if (x >= 1) m(x, x - 1) = b;
    m(x, x) = -(a + b);
  }
  TruncatedOperator op;
  op.matrix = std::move(m);
  op.is_conservative = true;
  op.tail_error_rate = rates.alpha(n);
  return op;
}

TruncatedOperator build_schrodinger(const BirthDeathRates& rates, const Potential& v, int n) {
  TruncatedOperator op = build_generator(rates, n);
  bool zero_potential = true;
  for (int x = 0; x <= n; ++x) {
    double vx = v.value(x);
    if (vx != 0.0) zero_potential = false;
    op.matrix(x, x) -= vx;
  }
  op.is_conservative = zero_potential;
  return op;
}

TruncatedOperator wrap_operator(Mat m, bool conservative, double tail_error_rate) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) < -1e-12)
        throw std::invalid_argument("wrap_operator: negative off-diagonal entry");
  return {std::move(m), conservative, tail_error_rate};
}

namespace {

constexpr double kSeriesTol = 1e-13;
constexpr double kLambdaTCap = 1e6;

struct Uniformization {
  Mat kernel;     // I + B/lambda with B = op + shift*I, sub-stochastic
  double lambda;  // uniformization rate
  double shift;   // c = min killing rate; exp(t op) = e^{-ct} exp(t B)
};

Uniformization uniformize(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  // killing rate V(x) = -rowsum; shift by its minimum so rowsums become <= 0.
  double c = std::numeric_limits<double>::infinity();
  for (int x = 0; x < n; ++x) c = std::min(c, -a.row(x).sum());
  Mat b = a + c * Mat::Identity(n, n);
  double lambda = 0.0;
  for (int x = 0; x < n; ++x) lambda = std::max(lambda, -b(x, x));
  Uniformization u;
  u.shift = c;
  u.lambda = lambda;
  if (lambda > 0.0)
    u.kernel = Mat::Identity(n, n) + b / lambda;
  else
    u.kernel = Mat::Identity(n, n);
  return u;
}

// Accumulates sum_k w_k X_k with X_{k+1} = K X_k and w_k the Poisson(lambda t)
// weights, stopping once the remaining Poisson mass is below kSeriesTol.
template <typename Dense>
Dense poisson_series(const Mat& kernel, double lambda_t, const Dense& x0) {
  Dense term = x0;
  Dense acc = Dense::Zero(x0.rows(), x0.cols());
  double cum = 0.0;
  const int k_max = static_cast<int>(lambda_t + 12.0 * std::sqrt(lambda_t + 1.0) + 40.0);
  for (int k = 0; k <= k_max; ++k) {
    double lw = -lambda_t + (k > 0 ? k * std::log(lambda_t) : 0.0) - std::lgamma(k + 1.0);
    double w = std::exp(lw);
    if (w > 0.0) acc += w * term;
    cum += w;
    if (cum >= 1.0 - kSeriesTol && k >= lambda_t) break;
    if (k < k_max) term = kernel * term;
  }
  return acc;
}

}  // namespace

Vec semigroup_apply(const TruncatedOperator& op, double t, const Vec& f) {
  if (t < 0.0) throw std::invalid_argument("semigroup_apply: negative time");
  if (f.size() != op.matrix.rows())
    throw std::invalid_argument("semigroup_apply: size mismatch");
  if (t == 0.0) return f;
  Uniformization u = uniformize(op.matrix);
  double lt = u.lambda * t;
  if (lt > kLambdaTCap)
    throw std::invalid_argument("semigroup_apply: Lambda*t exceeds cap, split the time step");
  Vec r = poisson_series<Vec>(u.kernel, lt, f);
  return std::exp(-u.shift * t) * r;
}

Mat semigroup_matrix(const TruncatedOperator& op, double t) {
  if (t < 0.0) throw std::invalid_argument("semigroup_matrix: negative time");
  const int n = op.size();
  if (t == 0.0) return Mat::Identity(n, n);
  Uniformization u = uniformize(op.matrix);
  double lt = u.lambda * t;
  if (lt > kLambdaTCap)
    throw std::invalid_argument("semigroup_matrix: Lambda*t exceeds cap, split the time step");
  Mat r = poisson_series<Mat>(u.kernel, lt, Mat(Mat::Identity(n, n)));
  return std::exp(-u.shift * t) * r;
}

SemigroupPropagator::SemigroupPropagator(const TruncatedOperator& op) {
  Uniformization u = uniformize(op.matrix);
  kernel_ = std::move(u.kernel);
  lambda_ = u.lambda;
  shift_ = u.shift;
  m_ = Mat::Identity(op.size(), op.size());
}

void SemigroupPropagator::advance(double dt) {
  if (dt < 0.0) throw std::invalid_argument("SemigroupPropagator: negative step");
  if (dt == 0.0) return;
  double lt = lambda_ * dt;
  if (lt > kLambdaTCap)
    throw std::invalid_argument("SemigroupPropagator: Lambda*dt exceeds cap");
  m_ = std::exp(-shift_ * dt) * poisson_series<Mat>(kernel_, lt, m_);
  t_ += dt;
}

GridFn tabulate(const std::function<double(int)>& f, int n) {
  Vec v(n + 1);
  for (int x = 0; x <= n; ++x) v(x) = f(x);
  return GridFn(std::move(v));
}

GridFn gradient_apply(GradientKind kind, const GridFn& f, const Weight& u) {
  const int n = f.size();
  switch (kind) {
    case GradientKind::Forward:
    case GradientKind::WeightedForward: {
      Vec g = Vec::Zero(n);
      int valid = std::max(0, f.valid - 1);
      for (int x = 0; x < valid; ++x) {
        g(x) = f.v(x + 1) - f.v(x);
        if (kind == GradientKind::WeightedForward) g(x) /= u(x);
      }
      return GridFn(std::move(g), valid);
    }
    case GradientKind::Backward:
    case GradientKind::WeightedBackward: {
      Vec g = Vec::Zero(n);
      int valid = f.valid;
      for (int x = 0; x < valid; ++x) {
        g(x) = (x == 0 ? -f.v(0) : f.v(x - 1) - f.v(x));
        if (kind == GradientKind::WeightedBackward) g(x) /= u(x);
      }
      return GridFn(std::move(g), valid);
    }
  }
  throw std::logic_error("gradient_apply: unknown kind");
}

ErgodicityReport check_ergodic_nonexplosive(const BirthDeathRates& rates, int terms, double tol) {
  if (terms < 10) throw std::invalid_argument("check_ergodic_nonexplosive: need >= 10 terms");
  rates.validate(terms + 1);
  ErgodicityReport rep;

  // First series: sum prod alpha(0..x-1)/beta(1..x); log-space running product.
  double log_prod = 0.0;
  double s1 = 0.0;
  double last_increment = 0.0;
  for (int x = 1; x <= terms; ++x) {
    log_prod += std::log(rates.alpha(x - 1)) - std::log(rates.beta(x));
    last_increment = std::exp(log_prod);
    s1 += last_increment;
    rep.ergodic_partial_sums.push_back(s1);
  }
  rep.ergodic = last_increment < tol;

  // Second series: sum_x sum_{j=0}^{x} prod_{i=j+1}^{x} beta(i)/alpha(i) / alpha(j)
  // evaluated by the inner recursion c(x) = (1 + beta(x) c(x-1)) / alpha(x).
  double c = 1.0 / rates.alpha(0);
  double s2 = c;
  rep.explosion_partial_sums.push_back(s2);
  for (int x = 1; x <= terms; ++x) {
    c = (1.0 + rates.beta(x) * c) / rates.alpha(x);
    s2 += c;
    rep.explosion_partial_sums.push_back(s2);
    if (!std::isfinite(s2)) {
      s2 = std::numeric_limits<double>::max();
      break;
    }
  }
  rep.nonexplosive = s2 > 1.0 / tol;
  rep.inconclusive = !rep.ergodic || !rep.nonexplosive;
  return rep;
}

}  // namespace bds
