#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "bds/numeric.hpp"

namespace bds {

/// Birth-death rates on the non-negative integers: alpha(x) up, beta(x) down,
/// beta(0) = 0. Rates are arbitrary positive sequences; the named queueing
/// models are provided as factories.
struct BirthDeathRates {
  std::function<double(int)> alpha;
  std::function<double(int)> beta;

  static BirthDeathRates mm_infty(double lambda) {
    return {[lambda](int) { return lambda; }, [](int x) { return static_cast<double>(x); }};
  }
  /// Galton-Watson with immigration: alpha(x)=p(r+x), beta(x)=x.
  static BirthDeathRates gwi(double r, double p) {
    return {[r, p](int x) { return p * (r + x); }, [](int x) { return static_cast<double>(x); }};
  }
  static BirthDeathRates mm1(double a, double b) {
    return {[a](int) { return a; }, [b](int x) { return x >= 1 ? b : 0.0; }};
  }
  static BirthDeathRates from_tables(std::vector<double> a, std::vector<double> b);

  /// Throws unless alpha>0 on [0,N], beta(0)=0 and beta>0 on [1,N].
  void validate(int n) const;
};

/// Weight sequence u on the integers, used for weighted gradients and the
/// ground distance d_u.
using Weight = std::function<double(int)>;

inline Weight constant_weight() {
  return [](int) { return 1.0; };
}
inline Weight geometric_weight(double q) {
  return [q](int x) { return std::pow(q, x); };
}
inline Weight table_weight(std::vector<double> values) {
  return [values = std::move(values)](int x) {
    if (x < 0 || x >= static_cast<int>(values.size()))
      throw std::out_of_range("table weight evaluated outside its table");
    return values[x];
  };
}

struct Potential {
  std::function<double(int)> value;
  double lower_bound = 0.0;

  static Potential zero() { return {[](int) { return 0.0; }, 0.0}; }
  static Potential constant(double c) { return {[c](int) { return c; }, c}; }
};

/// Dense truncation of a generator (or Schroedinger operator) on {0..N} with a
/// reflecting boundary: the birth rate at N is dropped so the generator part
/// stays conservative; the suppressed outflow rate alpha(N) is recorded.
struct TruncatedOperator {
  Mat matrix;
  bool is_conservative = true;
  double tail_error_rate = 0.0;

  int size() const { return static_cast<int>(matrix.rows()); }
};

TruncatedOperator build_generator(const BirthDeathRates& rates, int n);
TruncatedOperator build_schrodinger(const BirthDeathRates& rates, const Potential& v, int n);

/// Wraps an arbitrary dense matrix with non-negative off-diagonals (used for
/// the extended second-order generator, which is not tridiagonal).
TruncatedOperator wrap_operator(Mat m, bool conservative, double tail_error_rate);

/// exp(t*op) f by uniformization. For non-conservative operators the matrix is
/// shifted by the most negative killing rate so the uniformized kernel stays
/// sub-stochastic; the shift is undone by a scalar factor e^{-ct}.
Vec semigroup_apply(const TruncatedOperator& op, double t, const Vec& f);

/// Full matrix exponential exp(t*op), same algorithm applied column-block-wise.
Mat semigroup_matrix(const TruncatedOperator& op, double t);

/// Incremental propagator: keeps M = exp(t*op) and advances t in steps.
/// Used by the Stein bound integrals to reuse checkpoints along a time grid.
class SemigroupPropagator {
 public:
  explicit SemigroupPropagator(const TruncatedOperator& op);
  void advance(double dt);
  double time() const { return t_; }
  const Mat& value() const { return m_; }

 private:
  Mat kernel_;  // I + B/Lambda, sub-stochastic
  double lambda_;
  double shift_;
  double t_ = 0.0;
  Mat m_;
};

/// A function tabulated on {0..N} where only the first `valid` entries are
/// trustworthy (forward gradients lose the top index). Reads beyond the valid
/// range throw rather than silently returning boundary-contaminated values.
struct GridFn {
  Vec v;
  int valid;

  GridFn() : valid(0) {}
  explicit GridFn(Vec values) : v(std::move(values)), valid(static_cast<int>(v.size())) {}
  GridFn(Vec values, int n_valid) : v(std::move(values)), valid(n_valid) {}

  double at(int x) const {
    if (x < 0 || x >= valid) throw std::out_of_range("GridFn: read outside valid range");
    return v(x);
  }
  int size() const { return static_cast<int>(v.size()); }
};

GridFn tabulate(const std::function<double(int)>& f, int n);

enum class GradientKind { Forward, Backward, WeightedForward, WeightedBackward };

/// Discrete gradients with the Dirichlet convention (backward gradient at 0 is
/// -f(0)). Forward gradients shrink the valid range by one.
GridFn gradient_apply(GradientKind kind, const GridFn& f, const Weight& u = constant_weight());

struct ErgodicityReport {
  bool ergodic = false;
  bool nonexplosive = false;
  bool inconclusive = false;
  std::vector<double> ergodic_partial_sums;
  std::vector<double> explosion_partial_sums;
};

/// Numerical evaluation of the two classical series: the first must converge
/// (ergodicity), the second must diverge (non-explosion). Products are kept in
/// log space.
ErgodicityReport check_ergodic_nonexplosive(const BirthDeathRates& rates, int terms, double tol);

}  // namespace bds
