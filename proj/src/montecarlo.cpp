#include "bds/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace bds {

int PathSample::state_at(double t) const {
  if (t < 0.0 || t > terminal_time) throw std::out_of_range("PathSample: time outside [0,T]");
  // index of the last jump at or before t
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<size_t>(it - jump_times.begin())];
}

void PathSample::validate() const {
  if (states.size() != jump_times.size() + 1)
    throw std::logic_error("PathSample: states/jump_times size mismatch");
  double prev = 0.0;
  for (size_t k = 0; k < jump_times.size(); ++k) {
    if (!(jump_times[k] > prev) || jump_times[k] > terminal_time)
      throw std::logic_error("PathSample: jump times must increase within [0,T]");
    prev = jump_times[k];
    int step = states[k + 1] - states[k];
    if (step != 1 && step != -1 && !(step <= -2 && states[k + 1] >= 0))
      throw std::logic_error("PathSample: invalid step");
  }
}

namespace {

void guard_state(int x, int cap) {
  if (x > cap)
    throw std::runtime_error("simulation: state exceeded the explosion guard cap " +
                             std::to_string(cap));
}

}  // namespace

PathSample simulate_path(const BirthDeathRates& rates, int x0, double t_end, std::uint64_t seed,
                         int cap) {
  if (!(t_end > 0.0)) throw std::invalid_argument("simulate_path: needs T > 0");
  if (x0 < 0) throw std::invalid_argument("simulate_path: needs x0 >= 0");
  Rng rng(seed);
  PathSample path;
  path.terminal_time = t_end;
  path.states.push_back(x0);
  int x = x0;
  double t = 0.0;
  while (true) {
    guard_state(x, cap);
    double a = rates.alpha(x), b = rates.beta(x);
    double total = a + b;
    if (!(total > 0.0)) break;  // absorbing state
    t += rng.exponential(total);
    if (t >= t_end) break;
    x += (rng.uniform() * total < a) ? 1 : -1;
    path.jump_times.push_back(t);
    path.states.push_back(x);
  }
  return path;
}

PathSample simulate_path_star(const SecondOrderStarSystem& sys, int x0, double t_end,
                              std::uint64_t seed, int cap) {
  if (!(t_end > 0.0)) throw std::invalid_argument("simulate_path_star: needs T > 0");
  if (x0 < 0) throw std::invalid_argument("simulate_path_star: needs x0 >= 0");
  Rng rng(seed);
  PathSample path;
  path.terminal_time = t_end;
  path.states.push_back(x0);
  int x = x0;
  double t = 0.0;
  while (true) {
    guard_state(x, cap);
    double a = std::max(0.0, sys.birth(x));
    double b = std::max(0.0, sys.death(x));
    double nl = (x >= 2) ? std::max(0.0, sys.nonlocal_rate(x)) : 0.0;
    double total = a + b + nl;
    if (!(total > 0.0)) break;
    t += rng.exponential(total);
    if (t >= t_end) break;
    double pick = rng.uniform() * total;
    if (pick < a) {
      x += 1;
    } else if (pick < a + b) {
      x -= 1;
    } else {
      // downward jump to k <= x-2 with the system's weights
      double target = rng.uniform();
      double acc = 0.0;
      int k = 0;
      for (; k <= x - 2; ++k) {
        acc += sys.nonlocal_weight(x, k);
        if (target < acc) break;
      }
      x = std::min(k, x - 2);
    }
    path.jump_times.push_back(t);
    path.states.push_back(x);
  }
  return path;
}

McEstimate feynman_kac_mc(const BirthDeathRates& rates, const std::function<double(int)>& v,
                          const std::function<double(int)>& f, int x0, double t, int n_paths,
                          std::uint64_t seed, int cap, int threads) {
  if (n_paths < 2) throw std::invalid_argument("feynman_kac_mc: needs at least 2 paths");
  if (threads < 1) threads = 1;
  std::vector<double> values(n_paths);

  auto run_path = [&](int i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    int x = x0;
    double now = 0.0;
    double integral = 0.0;
    while (true) {
      guard_state(x, cap);
      double a = rates.alpha(x), b = rates.beta(x);
      double total = a + b;
      double hold = (total > 0.0) ? rng.exponential(total) : (t - now);
      double upto = std::min(now + hold, t);
      integral += v(x) * (upto - now);
      now = upto;
      if (now >= t || !(total > 0.0)) break;
      x += (rng.uniform() * total < a) ? 1 : -1;
    }
    values[i] = f(x) * std::exp(-integral);
  };

  if (threads == 1) {
    for (int i = 0; i < n_paths; ++i) run_path(i);
  } else {
    std::vector<std::thread> pool;
    int chunk = (n_paths + threads - 1) / threads;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (int i = w * chunk; i < std::min((w + 1) * chunk, n_paths); ++i) run_path(i);
      });
    for (auto& th : pool) th.join();
  }

  double mean = pairwise_sum(values) / n_paths;
  std::vector<double> sq(n_paths);
  for (int i = 0; i < n_paths; ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  double var = pairwise_sum(sq) / (n_paths - 1.0);
  McEstimate e;
  e.estimate = mean;
  e.std_error = std::sqrt(var / n_paths);
  e.n_paths = n_paths;
  e.seed = seed;
  return e;
}

CouplingSample coupling_simulate(const BirthDeathRates& rates, int x0, double t_end,
                                 std::uint64_t seed, int cap) {
  if (!(t_end > 0.0)) throw std::invalid_argument("coupling_simulate: needs T > 0");
  if (x0 < 0) throw std::invalid_argument("coupling_simulate: needs x0 >= 0");
  Rng rng(seed);
  CouplingSample cs;
  cs.lower.terminal_time = cs.upper.terminal_time = t_end;
  cs.lower.states.push_back(x0);
  cs.upper.states.push_back(x0 + 1);
  int low = x0;
  double t = 0.0;
  bool stuck = false;

  auto step_lower = [&](int nx) {
    cs.lower.jump_times.push_back(t);
    cs.lower.states.push_back(nx);
  };
  auto step_upper = [&](int nx) {
    cs.upper.jump_times.push_back(t);
    cs.upper.states.push_back(nx);
  };

  while (!stuck) {
    guard_state(low + 1, cap);
    double together_up = rates.alpha(low + 1);
    double together_down = rates.beta(low);
    double split_up = rates.alpha(low) - rates.alpha(low + 1);
    double split_down = rates.beta(low + 1) - rates.beta(low);
    if (split_up < -1e-12)
      throw std::runtime_error("coupling_simulate: alpha increases at state " +
                               std::to_string(low));
    if (split_down < -1e-12)
      throw std::runtime_error("coupling_simulate: beta decreases at state " + std::to_string(low));
    split_up = std::max(0.0, split_up);
    split_down = std::max(0.0, split_down);
    double total = together_up + together_down + split_up + split_down;
    if (!(total > 0.0)) break;
    t += rng.exponential(total);
    if (t >= t_end) break;
    double pick = rng.uniform() * total;
    if (pick < together_up) {
      ++low;
      step_lower(low);
      step_upper(low + 1);
    } else if (pick < together_up + together_down) {
      --low;
      step_lower(low);
      step_upper(low + 1);
    } else if (pick < together_up + together_down + split_up) {
      ++low;  // lower catches up; both now at `low`
      step_lower(low);
      cs.absorb_time = t;
      stuck = true;
    } else {
      step_upper(low);  // upper drops down onto the lower path
      cs.absorb_time = t;
      stuck = true;
    }
  }

  // Sticking phase: one BDP(alpha,beta) path shared by both coordinates.
  if (stuck) {
    int x = low;
    while (true) {
      guard_state(x, cap);
      double a = rates.alpha(x), b = rates.beta(x);
      double total = a + b;
      if (!(total > 0.0)) break;
      t += rng.exponential(total);
      if (t >= t_end) break;
      x += (rng.uniform() * total < a) ? 1 : -1;
      step_lower(x);
      step_upper(x);
    }
  }
  return cs;
}

void MehlerWeights::validate() const {
  double sum = 0.0;
  for (double x : w) {
    if (x < -1e-15) throw std::logic_error("MehlerWeights: negative weight");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::logic_error("MehlerWeights: weights sum to " + std::to_string(sum));
}

MehlerWeights mehler_weights_gwi(double p, double s, double t, int n) {
  if (!(p > 0.0) || !(p < 1.0) || t < 0.0)
    throw std::invalid_argument("mehler_weights_gwi: needs p in (0,1) and t >= 0");
  MehlerWeights mw;
  mw.p = p;
  mw.s = s;
  mw.t = t;
  const double q = 1.0 - p;
  const double damp = std::exp(-q * t);
  // W_t follows the single-ancestor (Kendall) geometric law with parameter
  // theta_t; its pointwise probabilities are (1-theta) theta^k.
  const double theta = 1.0 - q / (1.0 - p * damp);
  auto w_pmf = [theta](int k) { return (1.0 - theta) * std::pow(theta, k); };
  mw.w.resize(n + 1);
  mw.w[0] = 1.0 - damp * w_pmf(0);
  for (int k = 1; k <= n; ++k) mw.w[k] = damp * (w_pmf(k - 1) - w_pmf(k));
  return mw;
}

double mehler_check_mminfty(double lambda, int x, double t, int n) {
  if (x > n / 2) throw std::invalid_argument("mehler_check_mminfty: x too large for truncation");
  TruncatedOperator gen = build_generator(BirthDeathRates::mm_infty(lambda), n);
  Mat m = semigroup_matrix(gen, t);
  DiscreteMeasure law;
  law.weights = m.row(x).transpose();
  law.tail_mass = std::max(0.0, 1.0 - law.weights.sum());

  const double keep = std::exp(-t);
  DiscreteMeasure binom;
  binom.weights = Vec::Zero(n + 1);
  for (int k = 0; k <= x; ++k)
    binom.weights(k) = std::exp(std::lgamma(x + 1.0) - std::lgamma(k + 1.0) -
                                std::lgamma(x - k + 1.0) + k * std::log(keep) +
                                (x - k) * std::log1p(-keep));
  DiscreteMeasure pois = poisson_measure(lambda * (1.0 - keep), n);
  DiscreteMeasure mehler = convolve(binom, pois, n);
  return tv_distance(law, mehler, 1e-5);
}

std::string paths_to_csv(const std::vector<PathSample>& paths) {
  std::ostringstream os;
  os.precision(17);
  os << "path_id,time,state\n";
  for (size_t id = 0; id < paths.size(); ++id) {
    const auto& p = paths[id];
    os << id << ",0," << p.states[0] << '\n';
    for (size_t k = 0; k < p.jump_times.size(); ++k)
      os << id << ',' << p.jump_times[k] << ',' << p.states[k + 1] << '\n';
  }
  return os.str();
}

std::string estimate_to_json(const McEstimate& e) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"estimate\": " << e.estimate << ", \"std_error\": " << e.std_error
     << ", \"n_paths\": " << e.n_paths << ", \"seed\": " << e.seed << "}";
  return os.str();
}

}  // namespace bds
