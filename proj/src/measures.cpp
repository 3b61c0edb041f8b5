#include "bds/measures.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace bds {

double DiscreteMeasure::mean() const {
  double s = 0.0;
  for (int x = 0; x < size(); ++x) s += x * weights(x);
  return s;
}

double DiscreteMeasure::integrate(const std::function<double(int)>& f) const {
  double s = 0.0;
  for (int x = 0; x < size(); ++x) s += f(x) * weights(x);
  return s;
}

Vec DiscreteMeasure::cdf() const {
  Vec c(size());
  double s = 0.0;
  for (int x = 0; x < size(); ++x) {
    s += weights(x);
    c(x) = s;
  }
  return c;
}

void DiscreteMeasure::validate() const {
  if (weights.minCoeff() < -1e-14)
    throw std::invalid_argument("DiscreteMeasure: negative weight");
  if (tail_mass < -1e-14 || tail_mass > 1.0)
    throw std::invalid_argument("DiscreteMeasure: bad tail mass");
  double total = weights.sum() + tail_mass;
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteMeasure: mass " + std::to_string(total) +
                                " differs from 1 beyond tolerance");
}

WeightSequence WeightSequence::tabulate(const Weight& u, int n) {
  WeightSequence w;
  w.value.resize(n + 1);
  w.prefix.resize(n + 2);
  w.prefix(0) = 0.0;
  for (int x = 0; x <= n; ++x) {
    double ux = u(x);
    if (!(ux > 0.0)) throw std::invalid_argument("WeightSequence: weight must be positive");
    w.value(x) = ux;
    w.prefix(x + 1) = w.prefix(x) + ux;
  }
  return w;
}

namespace {

/// Fills weights(x) = exp(log_pmf(x)) and the exact complementary tail mass
/// 1 - sum, clamped at 0 against rounding.
DiscreteMeasure from_log_pmf(const std::function<double(int)>& log_pmf, int n) {
  DiscreteMeasure m;
  m.weights.resize(n + 1);
  for (int x = 0; x <= n; ++x) m.weights(x) = std::exp(log_pmf(x));
  m.tail_mass = std::max(0.0, 1.0 - m.weights.sum());
  return m;
}

}  // namespace

DiscreteMeasure poisson_measure(double lambda, int n) {
  if (lambda <= 0.0) throw std::invalid_argument("poisson_measure: lambda must be positive");
  return from_log_pmf([lambda](int x) { return log_poisson_pmf(lambda, x); }, n);
}

DiscreteMeasure negative_binomial_measure(double r, double p, int n) {
  if (r <= 0.0 || p <= 0.0 || p >= 1.0)
    throw std::invalid_argument("negative_binomial_measure: need r > 0 and p in (0,1)");
  return from_log_pmf([r, p](int x) { return log_negative_binomial_pmf(r, p, x); }, n);
}

DiscreteMeasure geometric_measure(double rho, int n) {
  if (rho <= 0.0 || rho >= 1.0)
    throw std::invalid_argument("geometric_measure: need rho in (0,1)");
  return from_log_pmf(
      [rho](int x) { return std::log1p(-rho) + x * std::log(rho); }, n);
}

DiscreteMeasure size_biased_poisson_measure(int n) {
  return from_log_pmf(
      [](int x) { return std::log(x + 1.0) - std::log(2.0) - 1.0 - std::lgamma(x + 1.0); }, n);
}

DiscreteMeasure i_phi_measure(const PhiFamily& family, int n) {
  // Detailed balance pi(x+1) phi(x+1) = lambda pi(x), run in log space.
  Vec logs(n + 1);
  logs(0) = 0.0;
  for (int x = 1; x <= n; ++x) {
    double phix = family.phi(x);
    if (!(phix > 0.0))
      throw std::invalid_argument("i_phi_measure: phi must be positive on the positive integers");
    logs(x) = logs(x - 1) + std::log(family.lambda) - std::log(phix);
  }
  double log_z = log_sum_exp(logs);
  // The truncation must actually capture the mass: insist the last ratio decays.
  double last_ratio = family.lambda / family.phi(n);
  if (last_ratio >= 1.0)
    throw std::invalid_argument(
        "i_phi_measure: lambda/phi has not dropped below 1 at the truncation; "
        "the family may not be normalizable (or N is too small)");
  DiscreteMeasure m;
  m.weights = (logs.array() - log_z).exp();
  // Geometric bound on the discarded tail, relative to the captured mass.
  m.tail_mass = m.weights(n) * last_ratio / (1.0 - last_ratio);
  m.weights /= (1.0 + m.tail_mass);
  m.tail_mass /= (1.0 + m.tail_mass);
  return m;
}

DiscreteMeasure dirac_measure(int x, int n) {
  if (x < 0 || x > n) throw std::invalid_argument("dirac_measure: point outside {0..N}");
  DiscreteMeasure m;
  m.weights = Vec::Zero(n + 1);
  m.weights(x) = 1.0;
  return m;
}

DiscreteMeasure invariant_measure(const BirthDeathRates& rates, int n) {
  rates.validate(n);
  Vec logs(n + 1);
  logs(0) = 0.0;
  for (int x = 1; x <= n; ++x)
    logs(x) = logs(x - 1) + std::log(rates.alpha(x - 1)) - std::log(rates.beta(x));
  double log_z = log_sum_exp(logs);
  double last_ratio = rates.alpha(n) / rates.beta(n + 1);
  if (last_ratio >= 1.0)
    throw std::invalid_argument(
        "invariant_measure: alpha/beta has not dropped below 1 at the truncation; "
        "enlarge N (or the chain may not be positive recurrent)");
  DiscreteMeasure m;
  m.weights = (logs.array() - log_z).exp();
  m.tail_mass = m.weights(n) * last_ratio / (1.0 - last_ratio);
  m.weights /= (1.0 + m.tail_mass);
  m.tail_mass /= (1.0 + m.tail_mass);
  return m;
}

DiscreteMeasure kendall_law(double r, double p, double t, int n) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("kendall_law: need p in (0,1)");
  if (t < 0.0) throw std::invalid_argument("kendall_law: negative time");
  double theta = 1.0 - (1.0 - p) / (1.0 - p * std::exp(-(1.0 - p) * t));
  if (theta <= 0.0) return dirac_measure(0, n);
  return negative_binomial_measure(r, theta, n);
}

DiscreteMeasure convolve(const DiscreteMeasure& a, const DiscreteMeasure& b, int n) {
  DiscreteMeasure m;
  m.weights = Vec::Zero(n + 1);
  double spill = 0.0;
  for (int x = 0; x < a.size(); ++x) {
    if (a.weights(x) == 0.0) continue;
    for (int y = 0; y < b.size(); ++y) {
      double w = a.weights(x) * b.weights(y);
      if (x + y <= n)
        m.weights(x + y) += w;
      else
        spill += w;
    }
  }
  m.tail_mass = std::min(1.0, a.tail_mass + b.tail_mass + spill);
  return m;
}

namespace {

void check_tails(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tail_tol,
                 const char* who) {
  double tails = mu.tail_mass + nu.tail_mass;
  if (tails > tail_tol)
    throw std::invalid_argument(std::string(who) + ": combined truncation tail " +
                                std::to_string(tails) +
                                " exceeds tolerance; rebuild the measures with larger N");
}

}  // namespace

double tv_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tail_tol) {
  check_tails(mu, nu, tail_tol, "tv_distance");
  int n = std::max(mu.size(), nu.size());
  double s = 0.0;
  for (int x = 0; x < n; ++x) s += std::abs(mu(x) - nu(x));
  return 0.5 * s;
}

double kolmogorov_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tail_tol) {
  check_tails(mu, nu, tail_tol, "kolmogorov_distance");
  int n = std::max(mu.size(), nu.size());
  double fm = 0.0, fn = 0.0, best = 0.0;
  for (int x = 0; x < n; ++x) {
    fm += mu(x);
    fn += nu(x);
    best = std::max(best, std::abs(fm - fn));
  }
  return best;
}

double wasserstein_du(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                      const WeightSequence& u, double tail_tol) {
  check_tails(mu, nu, tail_tol, "wasserstein_du");
  int n = std::max(mu.size(), nu.size());
  if (n > u.value.size())
    throw std::invalid_argument("wasserstein_du: weight table shorter than the supports");
  // W_{d_u}(mu,nu) = sum_x u(x) |F_mu(x) - F_nu(x)| (monotone coupling on a
  // line). The CDF gap is accumulated downward from the tails, where its terms
  // are smallest; the upward sweep would leave O(eps) noise in the gap that an
  // exponentially growing weight then amplifies.
  double gap = nu.tail_mass - mu.tail_mass;  // F_mu(x) - F_nu(x) at x = n-1
  double s = 0.0;
  for (int x = n - 1; x >= 0; --x) {
    s += u.value(x) * std::abs(gap);
    gap += nu(x) - mu(x);
  }
  return s;
}

double transport_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const WeightSequence& u) {
  // Exact transportation LP solved by a two-phase dense simplex with Bland's
  // pivoting rule (no cycling); meant for tiny supports only.
  std::vector<int> sup_mu, sup_nu;
  for (int x = 0; x < mu.size(); ++x)
    if (mu.weights(x) > 0.0) sup_mu.push_back(x);
  for (int x = 0; x < nu.size(); ++x)
    if (nu.weights(x) > 0.0) sup_nu.push_back(x);
  const int nm = static_cast<int>(sup_mu.size());
  const int nn = static_cast<int>(sup_nu.size());
  const int n_vars = nm * nn;      // x_{ij} = mass moved from sup_mu[i] to sup_nu[j]
  const int m = nm + nn;           // row-sum and column-sum constraints
  const int ncols = n_vars + m;    // plus one artificial per constraint
  const double tol = 1e-11;

  Mat t = Mat::Zero(m, ncols + 1);
  Vec cost = Vec::Zero(ncols), phase1 = Vec::Zero(ncols);
  for (int i = 0; i < nm; ++i)
    for (int j = 0; j < nn; ++j) {
      int k = i * nn + j;
      t(i, k) = 1.0;
      t(nm + j, k) = 1.0;
      cost(k) = u.du(sup_mu[i], sup_nu[j]);
    }
  for (int i = 0; i < nm; ++i) t(i, ncols) = mu.weights(sup_mu[i]);
  for (int j = 0; j < nn; ++j) t(nm + j, ncols) = nu.weights(sup_nu[j]);
  std::vector<int> basis(m);
  for (int r = 0; r < m; ++r) {
    t(r, n_vars + r) = 1.0;
    basis[r] = n_vars + r;
    phase1(n_vars + r) = 1.0;
  }

  auto pivot = [&](int row, int col) {
    t.row(row) /= t(row, col);
    for (int r = 0; r < m; ++r)
      if (r != row && t(r, col) != 0.0) t.row(r) -= t(r, col) * t.row(row);
    basis[row] = col;
  };
  auto run = [&](const Vec& c, int max_col) {
    while (true) {
      int enter = -1;
      for (int j = 0; j < max_col && enter < 0; ++j) {
        double rc = c(j);
        for (int r = 0; r < m; ++r) rc -= c(basis[r]) * t(r, j);
        if (rc < -tol) enter = j;  // Bland: smallest eligible index
      }
      if (enter < 0) return;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        if (t(r, enter) <= tol) continue;
        double ratio = t(r, ncols) / t(r, enter);
        if (ratio < best - 1e-15) {
          best = ratio;
          leave = r;
        } else if (ratio < best + 1e-15 && leave >= 0 && basis[r] < basis[leave]) {
          leave = r;  // Bland again on ties
        }
      }
      if (leave < 0) throw std::runtime_error("transport_lp: unbounded phase");
      pivot(leave, enter);
    }
  };

  run(phase1, ncols);
  double infeas = 0.0;
  for (int r = 0; r < m; ++r)
    if (basis[r] >= n_vars) infeas += t(r, ncols);
  if (infeas > 1e-9) throw std::runtime_error("transport_lp: infeasible marginals");
  run(cost, n_vars);  // artificials may stay basic at zero but cannot re-enter

  double total = 0.0;
  for (int r = 0; r < m; ++r)
    if (basis[r] < n_vars) total += cost(basis[r]) * t(r, ncols);
  return total;
}

std::string measure_to_json(const DiscreteMeasure& m) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"weights\":[";
  for (int x = 0; x < m.size(); ++x) os << (x ? "," : "") << m.weights(x);
  os << "],\"tail_mass\":" << m.tail_mass << "}";
  return os.str();
}

std::string measure_to_csv(const DiscreteMeasure& m) {
  std::ostringstream os;
  os.precision(17);
  os << "x,weight\n";
  for (int x = 0; x < m.size(); ++x) os << x << "," << m.weights(x) << "\n";
  os << "tail," << m.tail_mass << "\n";
  return os.str();
}

}  // namespace bds
