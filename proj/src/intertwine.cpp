#include "bds/intertwine.hpp"

#include <algorithm>
#include <cmath>

namespace bds {

namespace {

/// Tabulates a rate or weight on {0..len-1} once, so derived-system closures
/// stop re-evaluating (and possibly re-throwing) the user callables.
Vec tab(const std::function<double(int)>& f, int len) {
  Vec v(len);
  for (int x = 0; x < len; ++x) v(x) = f(x);
  return v;
}

std::function<double(int)> from_vec(Vec v) {
  return [v = std::move(v)](int x) {
    if (x < 0 || x >= v.size()) throw std::out_of_range("derived system: index outside table");
    return v(x);
  };
}

/// Minimum over the interior window {0..N-margin} together with its argmin.
std::pair<double, int> interior_min(const Vec& v, int n) {
  int hi = std::max(0, n - kInteriorMargin);
  double best = v(0);
  int arg = 0;
  for (int x = 1; x <= hi; ++x)
    if (v(x) < best) {
      best = v(x);
      arg = x;
    }
  return {best, arg};
}

/// V_u(x) = alpha(x) - alpha_u(x) + beta(x+1) - beta_u(x) tabulated on {0..len-1}.
Vec potential_forward(const BirthDeathRates& r, const Vec& u, int len) {
  Vec v(len);
  for (int x = 0; x < len; ++x) {
    double au = u(x + 1) / u(x) * r.alpha(x + 1);
    double bu = x >= 1 ? u(x - 1) / u(x) * r.beta(x) : 0.0;
    v(x) = r.alpha(x) - au + r.beta(x + 1) - bu;
  }
  return v;
}

}  // namespace

ForwardSystem derive_forward(const BirthDeathRates& rates, const Weight& u, int n) {
  Vec ut = tab(u, n + 3);
  if (ut.minCoeff() <= 0.0) throw std::invalid_argument("derive_forward: u must be positive");
  Vec au(n + 2), bu(n + 2);
  for (int x = 0; x <= n + 1; ++x) {
    au(x) = ut(x + 1) / ut(x) * rates.alpha(x + 1);
    bu(x) = x >= 1 ? ut(x - 1) / ut(x) * rates.beta(x) : 0.0;
  }
  Vec pot = potential_forward(rates, ut, n + 2);
  auto [sigma, arg] = interior_min(pot, n);
  ForwardSystem sys;
  sys.rates_u = {from_vec(std::move(au)), from_vec(std::move(bu))};
  sys.potential_u = {from_vec(pot), sigma};
  sys.sigma_u = sigma;
  sys.argmin = arg;
  return sys;
}

BackwardSystem derive_backward(const BirthDeathRates& rates, const Weight& u, int n) {
  Vec ut = tab(u, n + 3);
  if (ut.minCoeff() <= 0.0) throw std::invalid_argument("derive_backward: u must be positive");
  Vec au(n + 2), bu(n + 2), pot(n + 2);
  for (int x = 0; x <= n + 1; ++x) {
    au(x) = ut(x + 1) / ut(x) * rates.alpha(x);
    bu(x) = x >= 1 ? ut(x - 1) / ut(x) * rates.beta(x - 1) : 0.0;
    double alpha_back = x >= 1 ? rates.alpha(x - 1) : 0.0;  // shift-backward, 0 at 0
    pot(x) = alpha_back - au(x) + rates.beta(x) - bu(x);
  }
  auto [sigma, arg] = interior_min(pot, n);
  BackwardSystem sys;
  sys.rates_star_u = {from_vec(std::move(au)), from_vec(std::move(bu))};
  sys.potential_star_u = {from_vec(pot), sigma};
  sys.sigma = sigma;
  sys.argmin = arg;
  return sys;
}

SecondOrderStarSystem derive_second_star(const BirthDeathRates& rates, const Weight& u,
                                         const Weight& v, int n) {
  Vec ut = tab(u, n + 3), vt = tab(v, n + 3);
  if (ut.minCoeff() <= 0.0 || vt.minCoeff() <= 0.0)
    throw std::invalid_argument("derive_second_star: weights must be positive");
  Vec vu = potential_forward(rates, ut, n + 2);
  for (int x = 0; x + 1 <= n; ++x)
    if (vu(x + 1) > vu(x) + 1e-12)
      throw std::invalid_argument("derive_second_star: V_u increases at index " +
                                  std::to_string(x) + "; the construction needs V_u non-increasing");

  // Backward v-gradient of V_u; non-negative (up to rounding) by the check above.
  Vec dvs = Vec::Zero(n + 2);
  for (int x = 1; x <= n + 1; ++x) dvs(x) = std::max(0.0, (vu(x - 1) - vu(x)) / vt(x));

  Vec v_prefix(n + 3);  // v_prefix(m) = sum_{j<m} v(j)
  v_prefix(0) = 0.0;
  for (int x = 0; x <= n + 1; ++x) v_prefix(x + 1) = v_prefix(x) + vt(x);

  Vec birth(n + 2), death(n + 2), nonloc(n + 2), pot(n + 2);
  for (int x = 0; x <= n + 1; ++x) {
    birth(x) = vt(x + 1) / vt(x) * ut(x + 1) / ut(x) * rates.alpha(x + 1);
    if (x >= 2)
      death(x) = vt(x - 1) / vt(x) * ut(x - 2) / ut(x - 1) * rates.beta(x - 1) +
                 vt(x - 1) * dvs(x);
    else if (x == 1)
      death(x) = vt(0) * dvs(1);
    else
      death(x) = 0.0;
    nonloc(x) = x >= 2 ? dvs(x) * v_prefix(x - 1) : 0.0;
    if (x >= 1) {
      double death_part = x >= 2 ? vt(x - 1) / vt(x) * ut(x - 2) / ut(x - 1) * rates.beta(x - 1)
                                 : 0.0;
      pot(x) = (1.0 + ut(x) / ut(x - 1)) * rates.alpha(x) -
               (1.0 + vt(x + 1) / vt(x)) * ut(x + 1) / ut(x) * rates.alpha(x + 1) +
               rates.beta(x + 1) - death_part - v_prefix(x) * dvs(x);
    } else {
      pot(x) = rates.alpha(0) - (1.0 + vt(1) / vt(0)) * ut(1) / ut(0) * rates.alpha(1) +
               rates.beta(1);
    }
  }
  auto [sigma, arg] = interior_min(pot, n);
  SecondOrderStarSystem sys;
  sys.birth = from_vec(std::move(birth));
  sys.death = from_vec(std::move(death));
  sys.nonlocal_rate = from_vec(nonloc);
  Vec vt_copy = vt;
  Vec vp_copy = v_prefix;
  sys.nonlocal_weight = [vt_copy, vp_copy](int x, int k) {
    if (x < 2 || k < 0 || k > x - 2)
      throw std::out_of_range("nonlocal_weight: target outside {0..x-2}");
    return vt_copy(k) / vp_copy(x - 1);
  };
  sys.potential = from_vec(pot);
  sys.sigma = sigma;
  sys.argmin = arg;
  return sys;
}

TruncatedOperator SecondOrderStarSystem::build_operator(int n) const {
  Mat m = Mat::Zero(n + 1, n + 1);
  for (int x = 0; x <= n; ++x) {
    double out = 0.0;
    if (x < n) {
      double a = std::max(0.0, birth(x));
      m(x, x + 1) = a;
      out += a;
    }
    if (x >= 1) {
      double b = std::max(0.0, death(x));
      m(x, x - 1) += b;
      out += b;
    }
    if (x >= 2) {
      double total = std::max(0.0, nonlocal_rate(x));
      if (total > 0.0)
        for (int k = 0; k <= x - 2; ++k) {
          double w = total * nonlocal_weight(x, k);
          m(x, k) += w;
          out += w;
        }
    }
    m(x, x) = -out - potential(x);
  }
  TruncatedOperator op;
  op.matrix = std::move(m);
  op.is_conservative = false;
  op.tail_error_rate = birth(n);
  return op;
}

SecondOrderPlainSystem derive_second_plain(const BirthDeathRates& rates, const Weight& u,
                                           const Weight& v, int n) {
  Vec ut = tab(u, n + 4), vt = tab(v, n + 3);
  if (ut.minCoeff() <= 0.0 || vt.minCoeff() <= 0.0)
    throw std::invalid_argument("derive_second_plain: weights must be positive");
  Vec vu = potential_forward(rates, ut, n + 2);
  double dev = 0.0;
  for (int x = 0; x <= std::max(0, n - kInteriorMargin); ++x)
    dev = std::max(dev, std::abs(vu(x) - vu(0)));
  if (dev > 1e-12)
    throw std::invalid_argument(
        "derive_second_plain: V_u deviates from constant by " + std::to_string(dev) +
        "; the plain second-order construction needs V_u constant");

  Vec au(n + 2), bu(n + 2), pot(n + 2);
  for (int x = 0; x <= n + 1; ++x) {
    au(x) = vt(x + 1) / vt(x) * ut(x + 2) / ut(x + 1) * rates.alpha(x + 2);
    bu(x) = x >= 1 ? vt(x - 1) / vt(x) * ut(x - 1) / ut(x) * rates.beta(x) : 0.0;
    double last = x >= 1 ? (1.0 + vt(x - 1) / vt(x)) * ut(x - 1) / ut(x) * rates.beta(x) : 0.0;
    pot(x) = rates.alpha(x) - au(x) + (ut(x) / ut(x + 1) + 1.0) * rates.beta(x + 1) - last;
  }
  auto [sigma, arg] = interior_min(pot, n);
  SecondOrderPlainSystem sys;
  sys.rates_uv = {from_vec(std::move(au)), from_vec(std::move(bu))};
  sys.potential_uv = {from_vec(pot), sigma};
  sys.sigma = sigma;
  sys.argmin = arg;
  return sys;
}

HypothesesReport check_hypotheses(const BirthDeathRates& rates, const Weight& u, int n) {
  Vec one = Vec::Ones(n + 3);
  Vec v1 = potential_forward(rates, one, n + 1);
  HypothesesReport rep;
  rep.v1_nonneg = v1.minCoeff() >= -1e-12;
  rep.v1_nonincreasing = true;
  for (int x = 0; x + 1 <= n; ++x)
    if (v1(x + 1) > v1(x) + 1e-12) rep.v1_nonincreasing = false;
  rep.v1_constant = (v1.maxCoeff() - v1.minCoeff()) <= 1e-12;
  rep.inf_v1 = v1.minCoeff();

  Vec ut = tab(u, n + 1);
  bool u_positive = ut.minCoeff() > 0.0;
  if (rep.v1_nonincreasing && rep.v1_nonneg && u_positive) {
    auto star = derive_second_star(rates, constant_weight(), u, n);
    rep.inf_v1_star_u = star.sigma;
    rep.h1_ok = true;
  }
  if (rep.v1_constant && rep.v1_nonneg && u_positive) {
    auto plain = derive_second_plain(rates, constant_weight(), u, n);
    rep.inf_v1_u = plain.sigma;
    rep.h2_ok = true;
  }
  return rep;
}

namespace {

/// P(the process started at x up-crosses `level` by time t), computed exactly
/// on the truncation by killing at the first visit to `level`: take the
/// top-left block of the conservative generator and read off 1 - survival.
Vec hit_probability(const Mat& conservative_gen, int level, double t) {
  Mat block = conservative_gen.topLeftCorner(level, level);
  // Row `level-1` keeps its full diagonal, so the dropped birth to `level`
  // becomes a killing rate.
  TruncatedOperator op{std::move(block), false, 0.0};
  Vec survival = semigroup_apply(op, t, Vec::Ones(level));
  Vec p(level);
  for (int x = 0; x < level; ++x) p(x) = std::clamp(1.0 - survival(x), 0.0, 1.0);
  return p;
}

/// Largest prefix {0..limit} on which both hitting bounds stay below the
/// contamination threshold.
int trusted_prefix(const Vec& p_base, const Vec& p_derived, double amp, double threshold) {
  int limit = -1;
  int len = static_cast<int>(std::min(p_base.size(), p_derived.size()));
  for (int x = 0; x < len; ++x) {
    if (p_base(x) + amp * p_derived(x) > threshold) break;
    limit = x;
  }
  return limit;
}

constexpr double kContaminationThreshold = 1e-9;

GridFn second_gradient(const GridFn& g, const Weight& u, const Weight& v, bool star) {
  GridFn first = gradient_apply(GradientKind::WeightedForward, g, u);
  return gradient_apply(star ? GradientKind::WeightedBackward : GradientKind::WeightedForward,
                        first, v);
}

Mat conservative_part(const TruncatedOperator& fk, const std::function<double(int)>& pot) {
  Mat m = fk.matrix;
  for (int x = 0; x < m.rows(); ++x) m(x, x) += pot(x);
  return m;
}

}  // namespace

ResidualReport verify_intertwining(IntertwineOrder order, const BirthDeathRates& rates,
                                   const Weight& u, const Weight& v, double t,
                                   const std::function<double(int)>& f, int n) {
  GridFn ff = tabulate(f, n);
  TruncatedOperator base = build_generator(rates, n);
  GridFn ptf(semigroup_apply(base, t, ff.v));

  GridFn lhs, rhs0;
  TruncatedOperator fk;
  Mat derived_cons;
  double sigma = 0.0;
  std::string relation;
  switch (order) {
    case IntertwineOrder::FirstForward: {
      relation = "first_forward";
      auto sys = derive_forward(rates, u, n);
      lhs = gradient_apply(GradientKind::WeightedForward, ptf, u);
      rhs0 = gradient_apply(GradientKind::WeightedForward, ff, u);
      fk = build_schrodinger(sys.rates_u, sys.potential_u, n);
      derived_cons = conservative_part(fk, sys.potential_u.value);
      sigma = sys.sigma_u;
      break;
    }
    case IntertwineOrder::FirstBackward: {
      relation = "first_backward";
      auto sys = derive_backward(rates, u, n);
      lhs = gradient_apply(GradientKind::WeightedBackward, ptf, u);
      rhs0 = gradient_apply(GradientKind::WeightedBackward, ff, u);
      Mat m = Mat::Zero(n + 1, n + 1);
      for (int x = 0; x <= n; ++x) {
        double a = x < n ? sys.rates_star_u.alpha(x) : 0.0;
        double b = x >= 1 ? sys.rates_star_u.beta(x) : 0.0;
        if (x < n) m(x, x + 1) = a;
        if (x >= 1) m(x, x - 1) = b;
        m(x, x) = -(a + b) - sys.potential_star_u.value(x);
      }
      fk = TruncatedOperator{m, false, sys.rates_star_u.alpha(n)};
      derived_cons = conservative_part(fk, sys.potential_star_u.value);
      sigma = sys.sigma;
      break;
    }
    case IntertwineOrder::SecondStar: {
      relation = "second_star";
      auto sys = derive_second_star(rates, u, v, n);
      lhs = second_gradient(ptf, u, v, true);
      rhs0 = second_gradient(ff, u, v, true);
      fk = sys.build_operator(n);
      derived_cons = conservative_part(fk, sys.potential);
      sigma = sys.sigma;
      break;
    }
    case IntertwineOrder::SecondPlain: {
      relation = "second_plain";
      auto sys = derive_second_plain(rates, u, v, n);
      lhs = second_gradient(ptf, u, v, false);
      rhs0 = second_gradient(ff, u, v, false);
      fk = build_schrodinger(sys.rates_uv, sys.potential_uv, n);
      derived_cons = conservative_part(fk, sys.potential_uv.value);
      sigma = sys.sigma;
      break;
    }
  }

  Vec rhs = semigroup_apply(fk, t, rhs0.v);

  // Trusted region: states from which neither side can feel the truncation.
  const int level = n - 2;
  Vec p_base = hit_probability(base.matrix, level, t);
  Vec p_derived = hit_probability(derived_cons, level, t);
  double amp = std::exp(std::max(0.0, -sigma) * t);
  int trusted = trusted_prefix(p_base, p_derived, amp, kContaminationThreshold);

  ResidualReport rep;
  rep.relation = relation;
  rep.trusted_limit = trusted;
  rep.boundary_flag = trusted < n / 2;
  int hi = std::min({trusted, lhs.valid - 1, rhs0.valid - 1, n - kInteriorMargin});
  for (int x = 0; x <= hi; ++x) {
    double d = std::abs(lhs.v(x) - rhs(x));
    if (d > rep.residual) {
      rep.residual = d;
      rep.argmax_index = x;
    }
  }
  return rep;
}

ResidualReport verify_iterated(IteratedModel model, double par1, double par2, int k, double t,
                               const std::function<double(int)>& f, int n) {
  if (k < 0 || k > 5) throw std::invalid_argument("verify_iterated: order k must be in {0..5}");
  BirthDeathRates rates = model == IteratedModel::MmInfty ? BirthDeathRates::mm_infty(par1)
                                                          : BirthDeathRates::gwi(par1, par2);
  GridFn ff = tabulate(f, n);
  TruncatedOperator base = build_generator(rates, n);
  GridFn lhs(semigroup_apply(base, t, ff.v));
  GridFn rhs0 = ff;
  for (int i = 0; i < k; ++i) {
    lhs = gradient_apply(GradientKind::Forward, lhs);
    rhs0 = gradient_apply(GradientKind::Forward, rhs0);
  }

  BirthDeathRates shifted = model == IteratedModel::MmInfty
                                ? rates
                                : BirthDeathRates::gwi(par1 + k, par2);
  double decay = model == IteratedModel::MmInfty ? static_cast<double>(k) : (1.0 - par2) * k;
  TruncatedOperator derived = build_generator(shifted, n);
  Vec rhs = std::exp(-decay * t) * semigroup_apply(derived, t, rhs0.v);

  const int level = n - k - 1;
  Vec p_base = hit_probability(base.matrix, level, t);
  Vec p_derived = hit_probability(derived.matrix, level, t);
  int trusted = trusted_prefix(p_base, p_derived, 1.0, kContaminationThreshold);

  ResidualReport rep;
  rep.relation = "iterated_k" + std::to_string(k);
  rep.trusted_limit = trusted;
  rep.boundary_flag = trusted < n / 2;
  int hi = std::min({trusted, lhs.valid - 1, rhs0.valid - 1, n - kInteriorMargin});
  for (int x = 0; x <= hi; ++x) {
    double d = std::abs(lhs.v(x) - rhs(x));
    if (d > rep.residual) {
      rep.residual = d;
      rep.argmax_index = x;
    }
  }
  return rep;
}

ContractionReport verify_contraction(const BirthDeathRates& rates, const Weight& u,
                                     const Weight& v, SecondOrderVariant variant,
                                     const std::function<double(int)>& f, double t, int n) {
  GridFn ff = tabulate(f, n);
  TruncatedOperator base = build_generator(rates, n);
  GridFn ptf(semigroup_apply(base, t, ff.v));
  bool star = variant == SecondOrderVariant::Star;
  GridFn d2_ptf = second_gradient(ptf, u, v, star);
  GridFn d2_f = second_gradient(ff, u, v, star);

  ContractionReport rep;
  rep.sigma = star ? derive_second_star(rates, u, v, n).sigma
                   : derive_second_plain(rates, u, v, n).sigma;

  const int level = n - 2;
  Vec p_base = hit_probability(base.matrix, level, t);
  int trusted = trusted_prefix(p_base, p_base, 0.0, kContaminationThreshold);
  rep.trusted_limit = trusted;
  int hi = std::min({trusted, d2_ptf.valid - 1, d2_f.valid - 1, n - kInteriorMargin});
  double lhs = 0.0, base_sup = 0.0;
  for (int x = 0; x <= hi; ++x) {
    lhs = std::max(lhs, std::abs(d2_ptf.v(x)));
    base_sup = std::max(base_sup, std::abs(d2_f.v(x)));
  }
  rep.lhs = lhs;
  rep.rhs = std::exp(-rep.sigma * t) * base_sup;
  rep.ok = rep.lhs <= rep.rhs + 1e-10 * (1.0 + rep.rhs);
  return rep;
}

SigmaSearchResult mm1_sigma_search(double a, double b, const std::vector<double>& r_grid,
                                   const std::vector<double>& q_grid) {
  if (!(0.0 < a && a < b)) throw std::invalid_argument("mm1_sigma_search: need 0 < alpha < beta");
  SigmaSearchResult result;
  for (double r : r_grid)
    for (double q : q_grid) {
      double v0 = a - (1.0 + q) * r * a + b;
      double v1 = (1.0 - q * r) * a + (1.0 - 1.0 / (q * r)) * b;
      double sigma = std::min(v0, v1);
      if (sigma > result.best_sigma + 1e-9) {
        result.best_sigma = sigma;
        result.argmax.clear();
        result.argmax.emplace_back(r, q);
      } else if (sigma > result.best_sigma - 1e-9) {
        result.best_sigma = std::max(result.best_sigma, sigma);
        result.argmax.emplace_back(r, q);
      }
    }
  return result;
}

}  // namespace bds
