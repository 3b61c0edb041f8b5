#include "bds/mixture.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace bds {

namespace {

constexpr double kNodeDropMass = 1e-16;
constexpr double kMixTvTol = 1e-10;
constexpr int kMaxQuadNodes = 1024;

BirthDeathRates target_rates(const std::function<double(int)>& phi, double lambda) {
  return {[lambda](int) { return lambda; },
          [phi](int x) { return x >= 1 ? phi(x) : 0.0; }};
}

double expect_shifted_weight(const DiscreteMeasure& m, const Weight& w) {
  double s = 0.0;
  for (int x = 0; x < m.size(); ++x) s += m(x) * w(x + 1);
  return s;
}

double tv_raw(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  double s = 0.0;
  int n = std::max(a.size(), b.size());
  for (int x = 0; x < n; ++x) s += std::abs(a(x) - b(x));
  return 0.5 * s;
}

DiscreteMeasure mix_once(const std::function<double(int)>& phi,
                         const std::vector<std::pair<double, double>>& pairs, int n) {
  DiscreteMeasure out;
  out.weights = Vec::Zero(n + 1);
  double kept = 0.0;
  for (const auto& [lambda, w] : pairs) {
    DiscreteMeasure comp = i_phi_measure({phi, lambda}, n);
    out.weights += w * comp.weights;
    out.tail_mass += w * comp.tail_mass;
    kept += w;
  }
  out.tail_mass += std::max(0.0, 1.0 - kept);  // dropped quadrature mass
  return out;
}

}  // namespace

MixingLaw MixingLaw::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("MixingLaw::gamma: shape and rate must be positive");
  MixingLaw m;
  m.kind = Kind::Gamma;
  m.gamma_shape = shape;
  m.gamma_rate = rate;
  return m;
}

MixingLaw MixingLaw::discrete(std::vector<double> support, std::vector<double> probs) {
  if (support.empty() || support.size() != probs.size())
    throw std::invalid_argument("MixingLaw::discrete: support/probs size mismatch");
  double mass = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(mass - 1.0) > 1e-12)
    throw std::invalid_argument("MixingLaw::discrete: probabilities must sum to 1");
  for (double x : support)
    if (!(x > 0.0)) throw std::invalid_argument("MixingLaw::discrete: rates must be positive");
  MixingLaw m;
  m.kind = Kind::Discrete;
  m.support = std::move(support);
  m.probs = std::move(probs);
  return m;
}

MixingLaw MixingLaw::point(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("MixingLaw::point: rate must be positive");
  MixingLaw m;
  m.kind = Kind::Point;
  m.atom = lambda;
  return m;
}

double MixingLaw::mean() const {
  switch (kind) {
    case Kind::Gamma:
      return gamma_shape / gamma_rate;
    case Kind::Point:
      return atom;
    case Kind::Discrete: {
      double s = 0.0;
      for (size_t i = 0; i < support.size(); ++i) s += support[i] * probs[i];
      return s;
    }
  }
  throw std::logic_error("MixingLaw::mean: unknown kind");
}

double MixingLaw::variance() const {
  switch (kind) {
    case Kind::Gamma:
      return gamma_shape / (gamma_rate * gamma_rate);
    case Kind::Point:
      return 0.0;
    case Kind::Discrete: {
      double m = mean(), s = 0.0;
      for (size_t i = 0; i < support.size(); ++i)
        s += (support[i] - m) * (support[i] - m) * probs[i];
      return s;
    }
  }
  throw std::logic_error("MixingLaw::variance: unknown kind");
}

std::vector<std::pair<double, double>> MixingLaw::quadrature(int nodes) const {
  std::vector<std::pair<double, double>> out;
  switch (kind) {
    case Kind::Point:
      out.emplace_back(atom, 1.0);
      break;
    case Kind::Discrete:
      for (size_t i = 0; i < support.size(); ++i) out.emplace_back(support[i], probs[i]);
      break;
    case Kind::Gamma: {
      Vec xs, ws;
      gauss_laguerre_normalized(nodes, gamma_shape - 1.0, xs, ws);
      for (int i = 0; i < nodes; ++i)
        if (ws(i) >= kNodeDropMass) out.emplace_back(xs(i) / gamma_rate, ws(i));
      break;
    }
  }
  return out;
}

DiscreteMeasure mixed_measure(const std::function<double(int)>& phi, const MixingLaw& mixing,
                              int n, int quad_nodes) {
  if (mixing.kind != MixingLaw::Kind::Gamma)
    return mix_once(phi, mixing.quadrature(quad_nodes), n);
  DiscreteMeasure prev = mix_once(phi, mixing.quadrature(quad_nodes), n);
  std::ostringstream trace;
  for (int nodes = 2 * quad_nodes; nodes <= kMaxQuadNodes; nodes *= 2) {
    DiscreteMeasure cur = mix_once(phi, mixing.quadrature(nodes), n);
    double change = tv_raw(prev, cur);
    if (change < kMixTvTol) return cur;
    trace << " nodes=" << nodes << " tv_change=" << change;
    prev = std::move(cur);
  }
  throw std::runtime_error("mixed_measure: quadrature did not converge;" + trace.str());
}

double closeness_bound(const std::function<double(int)>& phi, double lambda, double lambda_prime,
                       TestClass cls, const Weight& u, int n, bool symmetrize) {
  if (!(lambda > 0.0) || !(lambda_prime > 0.0))
    throw std::invalid_argument("closeness_bound: rates must be positive");
  auto one_way = [&](double lam, double lam_prime) {
    BirthDeathRates rates = target_rates(phi, lam);
    DiscreteMeasure pi = i_phi_measure({phi, lam}, n);
    double factor = exact_factor(rates, pi, cls, FactorOrder::First, u, n).value;
    DiscreteMeasure pi_prime = i_phi_measure({phi, lam_prime}, n);
    return std::abs(lam - lam_prime) * factor * expect_shifted_weight(pi_prime, u);
  };
  double b = one_way(lambda, lambda_prime);
  if (symmetrize) b = std::min(b, one_way(lambda_prime, lambda));
  return b;
}

double mixture_bound(const std::function<double(int)>& phi, const MixingLaw& mixing, TestClass cls,
                     const Weight& u, const Weight& v, int n, int quad_nodes) {
  const double lambda = mixing.mean();
  BirthDeathRates rates = target_rates(phi, lambda);
  DiscreteMeasure pi = i_phi_measure({phi, lambda}, n);
  double second = exact_factor(rates, pi, cls, FactorOrder::Second, u, n).value;

  // sup over r Lipschitz for d_{fw(u)} of ||g_r / v||: sharpness function of
  // the shifted weight, measured against v.
  const int limit = n - kInteriorMargin;
  WeightSequence shifted = WeightSequence::tabulate([&u](int x) { return u(x + 1); }, n + 1);
  auto f = [&shifted](int x) { return -shifted.prefix(x); };
  SteinSolution sol = stein_solve(rates, pi, f, n, Normalization::AtZero);
  double first = 0.0;
  for (int x = 0; x + 1 <= limit; ++x) first = std::max(first, std::abs(sol.g(x + 1)) / v(x));

  double moment = 0.0;
  for (const auto& [lam_i, w_i] : mixing.quadrature(quad_nodes)) {
    double ev = expect_shifted_weight(i_phi_measure({phi, lam_i}, n), v);
    moment += w_i * (lambda - lam_i) * (lambda - lam_i) * ev;
  }
  return second * first * moment;
}

double biased_mixture_bound(const std::function<double(int)>& phi, const MixingLaw& mixing,
                            TestClass cls, const Weight& u, int n, int quad_nodes) {
  const double lambda = mixing.mean();
  BirthDeathRates rates = target_rates(phi, lambda);
  DiscreteMeasure pi = i_phi_measure({phi, lambda}, n);
  double factor = exact_factor(rates, pi, cls, FactorOrder::First, u, n).value;
  double moment = 0.0;
  for (const auto& [lam_i, w_i] : mixing.quadrature(quad_nodes)) {
    double eu = expect_shifted_weight(i_phi_measure({phi, lam_i}, n), u);
    moment += w_i * std::abs(lambda - lam_i) * eu;
  }
  return factor * moment;
}

double geometric_mixture_bound(double rho, const MixingLaw& mixing_r, TestClass cls,
                               int quad_nodes) {
  if (!(rho > 0.0) || !(rho < 1.0))
    throw std::invalid_argument("geometric_mixture_bound: rho must lie in (0,1)");
  if (cls != TestClass::Lipschitz)
    throw std::invalid_argument(
        "geometric_mixture_bound: only the Lipschitz(d_u) bound is available");
  const double sqrt_rho = std::sqrt(rho);
  double expectation = 0.0;
  for (const auto& [r, w] : mixing_r.quadrature(quad_nodes)) {
    if (!(r < sqrt_rho * (1.0 - 1e-12)))
      throw std::invalid_argument(
          "geometric_mixture_bound: mixing support must stay below sqrt(rho), found " +
          std::to_string(r));
    expectation += w * (rho - r) * (rho - r) / (1.0 - r / sqrt_rho);
  }
  double prefactor = (1.0 + 1.0 / sqrt_rho) / std::pow(1.0 - sqrt_rho, 3.0);
  return prefactor * expectation;
}

double geometric_coupling_distance(double rho, double rho_prime, double q) {
  if (!(q * rho < 1.0) || !(q * rho_prime < 1.0))
    throw std::invalid_argument("geometric_coupling_distance: needs q*rho < 1 for both rates");
  return std::abs(rho - rho_prime) / ((1.0 - q * rho) * (1.0 - q * rho_prime));
}

std::string bounds_table_to_csv(const std::vector<BoundRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "target,mixing,class,bound_name,bound,exact_distance,slack\n";
  for (const auto& r : rows)
    os << r.target << ',' << r.mixing << ',' << r.cls << ',' << r.bound_name << ',' << r.bound
       << ',' << r.exact_distance << ',' << (r.bound - r.exact_distance) << '\n';
  return os.str();
}

}  // namespace bds
