// Batch front end: reproducible experiments over the intertwining /
// Stein-factor / mixture / simulation machinery, driven by a JSON config.
//
// Exit codes: 0 success, 1 bound or residual violation, 2 config error,
// 3 hypothesis failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "bds/intertwine.hpp"
#include "bds/measures.hpp"
#include "bds/mixture.hpp"
#include "bds/montecarlo.hpp"
#include "bds/stein.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitHypothesis = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HypothesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  std::string format = "json";
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing config field: " + key);
  try {
    return j.at(key).get<T>();
  } catch (const std::exception& e) {
    throw ConfigError("bad config field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const std::string& key, T def) {
  return j.contains(key) ? field<T>(j, key) : def;
}

bds::BirthDeathRates parse_model(const json& j) {
  auto name = field<std::string>(j, "name");
  if (name == "mm_infty") return bds::BirthDeathRates::mm_infty(field<double>(j, "lambda"));
  if (name == "gwi") return bds::BirthDeathRates::gwi(field<double>(j, "r"), field<double>(j, "p"));
  if (name == "mm1") return bds::BirthDeathRates::mm1(field<double>(j, "a"), field<double>(j, "b"));
  if (name == "tables")
    return bds::BirthDeathRates::from_tables(field<std::vector<double>>(j, "alpha"),
                                             field<std::vector<double>>(j, "beta"));
  throw ConfigError("unknown model: " + name);
}

bds::Weight parse_weight(const json& j) {
  auto name = field<std::string>(j, "name");
  if (name == "constant") return bds::constant_weight();
  if (name == "geometric") return bds::geometric_weight(field<double>(j, "q"));
  if (name == "table") return bds::table_weight(field<std::vector<double>>(j, "values"));
  throw ConfigError("unknown weight: " + name);
}

std::function<double(int)> parse_function(const json& j, std::uint64_t seed) {
  auto name = field<std::string>(j, "name");
  if (name == "capped_identity") {
    int cap = field_or<int>(j, "cap", 20);
    return [cap](int x) { return static_cast<double>(std::min(x, cap)); };
  }
  if (name == "capped_square") {
    int cap = field_or<int>(j, "cap", 20);
    return [cap](int x) {
      double c = std::min(x, cap);
      return c * c;
    };
  }
  if (name == "random_bounded") {
    auto rng = std::make_shared<bds::Rng>(field_or<std::uint64_t>(j, "seed", seed), 7);
    auto table = std::make_shared<std::vector<double>>();
    return [rng, table](int x) {
      while (static_cast<int>(table->size()) <= x)
        table->push_back(2.0 * rng->uniform() - 1.0);
      return (*table)[x];
    };
  }
  throw ConfigError("unknown test function: " + name);
}

bds::DiscreteMeasure parse_measure(const json& j, int n) {
  auto name = field<std::string>(j, "name");
  if (name == "poisson") return bds::poisson_measure(field<double>(j, "lambda"), n);
  if (name == "negative_binomial")
    return bds::negative_binomial_measure(field<double>(j, "r"), field<double>(j, "p"), n);
  if (name == "geometric") return bds::geometric_measure(field<double>(j, "rho"), n);
  if (name == "kendall")
    return bds::kendall_law(field<double>(j, "r"), field<double>(j, "p"), field<double>(j, "t"), n);
  if (name == "dirac") return bds::dirac_measure(field<int>(j, "x"), n);
  if (name == "invariant") return bds::invariant_measure(parse_model(j.at("model")), n);
  throw ConfigError("unknown measure: " + name);
}

bds::MixingLaw parse_mixing(const json& j) {
  auto kind = field<std::string>(j, "kind");
  if (kind == "gamma")
    return bds::MixingLaw::gamma(field<double>(j, "shape"), field<double>(j, "rate"));
  if (kind == "discrete")
    return bds::MixingLaw::discrete(field<std::vector<double>>(j, "support"),
                                    field<std::vector<double>>(j, "probs"));
  if (kind == "point") return bds::MixingLaw::point(field<double>(j, "lambda"));
  throw ConfigError("unknown mixing kind: " + kind);
}

bds::TestClass parse_class(const std::string& s) {
  if (s == "bounded") return bds::TestClass::Bounded;
  if (s == "lipschitz") return bds::TestClass::Lipschitz;
  if (s == "kolmogorov") return bds::TestClass::Kolmogorov;
  throw ConfigError("unknown test class: " + s);
}

void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

void emit(const Options& opt, const std::string& stem, const json& report,
          const std::string& csv = "") {
  fs::create_directories(opt.out_dir);
  if (opt.format == "csv" && !csv.empty()) {
    atomic_write(fs::path(opt.out_dir) / (stem + ".csv"), csv);
    std::cout << csv;
  } else {
    std::string text = report.dump(2) + "\n";
    atomic_write(fs::path(opt.out_dir) / (stem + ".json"), text);
    std::cout << text;
  }
}

std::vector<bds::NamedBound> closed_forms_for(const json& model) {
  auto name = field<std::string>(model, "name");
  if (name == "mm_infty") return bds::poisson_bounds(field<double>(model, "lambda"));
  if (name == "gwi")
    return bds::negative_binomial_bounds(field<double>(model, "r"), field<double>(model, "p"));
  if (name == "mm1") return bds::geometric_bounds(field<double>(model, "a"), field<double>(model, "b"));
  return {};
}

int cmd_verify(const Options& opt, const json& cfg) {
  bds::BirthDeathRates rates = parse_model(cfg.at("model"));
  bds::Weight u = cfg.contains("u") ? parse_weight(cfg.at("u")) : bds::constant_weight();
  bds::Weight v = cfg.contains("v") ? parse_weight(cfg.at("v")) : bds::constant_weight();
  int n = field<int>(cfg, "truncation");
  double tol = field_or<double>(cfg, "tolerance", 1e-7);
  auto times = field<std::vector<double>>(cfg, "times");

  bds::HypothesesReport hyp = bds::check_hypotheses(rates, u, n);
  std::vector<std::pair<std::string, bds::IntertwineOrder>> orders;
  auto add_order = [&](const std::string& s) {
    if (s == "first_forward") {
      orders.emplace_back(s, bds::IntertwineOrder::FirstForward);
    } else if (s == "first_backward") {
      orders.emplace_back(s, bds::IntertwineOrder::FirstBackward);
    } else if (s == "second_star") {
      if (!hyp.v1_nonincreasing)
        throw HypothesisError("second_star requested but V_1 is not non-increasing");
      orders.emplace_back(s, bds::IntertwineOrder::SecondStar);
    } else if (s == "second_plain") {
      if (!hyp.v1_constant)
        throw HypothesisError("second_plain requested but V_1 is not constant");
      orders.emplace_back(s, bds::IntertwineOrder::SecondPlain);
    } else {
      throw ConfigError("unknown order: " + s);
    }
  };
  if (!cfg.contains("orders") || cfg.at("orders") == "auto") {
    add_order("first_forward");
    add_order("first_backward");
    if (hyp.v1_nonincreasing) add_order("second_star");
    if (hyp.v1_constant) add_order("second_plain");
  } else {
    for (const auto& s : field<std::vector<std::string>>(cfg, "orders")) add_order(s);
  }

  json funcs = cfg.contains("functions")
                   ? cfg.at("functions")
                   : json::array({{{"name", "capped_identity"}}, {{"name", "capped_square"}},
                                  {{"name", "random_bounded"}}});

  json rows = json::array();
  bool all_ok = true;
  for (const auto& [oname, order] : orders)
    for (double t : times)
      for (const auto& fj : funcs) {
        auto f = parse_function(fj, opt.seed);
        bds::ResidualReport r = bds::verify_intertwining(order, rates, u, v, t, f, n);
        bool ok = r.residual < tol;
        all_ok = all_ok && ok;
        rows.push_back({{"order", oname},
                        {"t", t},
                        {"f", fj.at("name")},
                        {"residual", r.residual},
                        {"trusted_limit", r.trusted_limit},
                        {"boundary_flag", r.boundary_flag},
                        {"ok", ok}});
      }
  json report = {{"command", "verify"},
                 {"hypotheses",
                  {{"v1_nonneg", hyp.v1_nonneg},
                   {"v1_nonincreasing", hyp.v1_nonincreasing},
                   {"v1_constant", hyp.v1_constant}}},
                 {"tolerance", tol},
                 {"rows", rows},
                 {"all_ok", all_ok}};
  std::ostringstream csv;
  csv.precision(17);
  csv << "order,t,f,residual,trusted_limit,ok\n";
  for (const auto& r : rows)
    csv << r.at("order").get<std::string>() << ',' << r.at("t").get<double>() << ','
        << r.at("f").get<std::string>() << ',' << r.at("residual").get<double>() << ','
        << r.at("trusted_limit").get<int>() << ',' << r.at("ok").get<bool>() << '\n';
  emit(opt, "verify_report", report, csv.str());
  return all_ok ? kExitOk : kExitViolation;
}

int cmd_factors(const Options& opt, const json& cfg, bool bounds_only) {
  json rows = json::array();
  std::vector<bds::BoundRow> csv_rows;
  bool ok = true;
  for (const auto& model_cfg : cfg.at("models")) {
    auto model_name = field<std::string>(model_cfg, "name");
    auto closed = closed_forms_for(model_cfg);
    json closed_json = json::array();
    for (const auto& b : closed)
      closed_json.push_back({{"name", b.name}, {"value", b.value}, {"applicable", b.applicable}});
    json entry = {{"model", model_name}, {"closed_form_bounds", closed_json}};
    if (!bounds_only) {
      bds::BirthDeathRates rates = parse_model(model_cfg);
      int n = field<int>(cfg, "truncation");
      bds::Weight u = cfg.contains("u") ? parse_weight(cfg.at("u")) : bds::constant_weight();
      bds::DiscreteMeasure pi = bds::invariant_measure(rates, n);
      json frows = json::array();
      for (const auto& cls_s : field<std::vector<std::string>>(cfg, "classes"))
        for (const auto& ord_s : field<std::vector<std::string>>(cfg, "orders")) {
          bds::FactorOrder ord =
              (ord_s == "first") ? bds::FactorOrder::First : bds::FactorOrder::Second;
          bds::FactorValue fv;
          try {
            fv = bds::exact_factor(rates, pi, parse_class(cls_s), ord, u, n);
          } catch (const std::invalid_argument& e) {
            throw HypothesisError(e.what());
          }
          // attach the matching closed-form bound, if one exists
          std::string key = cls_s + "_" + ord_s;
          double bound = std::numeric_limits<double>::quiet_NaN();
          for (const auto& b : closed)
            if (b.name == key) {
              bound = b.value;
              break;
            }
          bool row_ok = !(fv.value > bound + 1e-12) || std::isnan(bound);
          ok = ok && row_ok;
          frows.push_back({{"class", cls_s},
                           {"order", ord_s},
                           {"exact", fv.value},
                           {"argmax", fv.argmax},
                           {"near_boundary", fv.near_boundary},
                           {"bound", bound},
                           {"ok", row_ok}});
          csv_rows.push_back({model_name, "", cls_s, key, bound, fv.value});
        }
      entry["factors"] = frows;
    }
    rows.push_back(entry);
  }
  json report = {{"command", bounds_only ? "bounds" : "factors"}, {"models", rows}, {"all_ok", ok}};
  emit(opt, bounds_only ? "bounds_report" : "factors_report", report,
       bds::bounds_table_to_csv(csv_rows));
  return ok ? kExitOk : kExitViolation;
}

int cmd_mixture(const Options& opt, const json& cfg) {
  auto phi = [](int x) { return static_cast<double>(x); };
  bds::MixingLaw mixing = parse_mixing(cfg.at("mixing"));
  int n = field<int>(cfg, "truncation");
  bds::Weight u = cfg.contains("u") ? parse_weight(cfg.at("u")) : bds::constant_weight();
  bds::Weight v = cfg.contains("v") ? parse_weight(cfg.at("v")) : bds::constant_weight();
  double lambda = mixing.mean();
  bds::DiscreteMeasure mixed = bds::mixed_measure(phi, mixing, n);
  bds::DiscreteMeasure target = bds::poisson_measure(lambda, n);

  json rows = json::array();
  std::vector<bds::BoundRow> csv_rows;
  bool ok = true;
  for (const auto& cls_s : field<std::vector<std::string>>(cfg, "classes")) {
    bds::TestClass cls = parse_class(cls_s);
    double unbiased = bds::mixture_bound(phi, mixing, cls, u, v, n);
    double biased = bds::biased_mixture_bound(phi, mixing, cls, u, n);
    double exact = (cls == bds::TestClass::Bounded)
                       ? bds::tv_distance(mixed, target, 1e-5)
                   : (cls == bds::TestClass::Kolmogorov)
                       ? bds::kolmogorov_distance(mixed, target, 1e-5)
                       : bds::wasserstein_du(mixed, target, bds::WeightSequence::tabulate(u, n),
                                             1e-5);
    bool row_ok = exact <= unbiased + 1e-12 && exact <= biased + 1e-12;
    ok = ok && row_ok;
    rows.push_back({{"class", cls_s},
                    {"unbiased_bound", unbiased},
                    {"biased_bound", biased},
                    {"exact_distance", exact},
                    {"ok", row_ok}});
    csv_rows.push_back({"mixed_poisson", "config", cls_s, "unbiased", unbiased, exact});
    csv_rows.push_back({"mixed_poisson", "config", cls_s, "biased", biased, exact});
  }
  json report = {{"command", "mixture"},
                 {"lambda", lambda},
                 {"variance", mixing.variance()},
                 {"rows", rows},
                 {"all_ok", ok}};
  emit(opt, "mixture_report", report, bds::bounds_table_to_csv(csv_rows));
  return ok ? kExitOk : kExitViolation;
}

int cmd_distance(const Options& opt, const json& cfg) {
  int n = field<int>(cfg, "truncation");
  bds::DiscreteMeasure mu = parse_measure(cfg.at("mu"), n);
  bds::DiscreteMeasure nu = parse_measure(cfg.at("nu"), n);
  bds::Weight u = cfg.contains("u") ? parse_weight(cfg.at("u")) : bds::constant_weight();
  double tail_tol = field_or<double>(cfg, "tail_tol", 1e-6);
  json report = {{"command", "distance"},
                 {"tv", bds::tv_distance(mu, nu, tail_tol)},
                 {"kolmogorov", bds::kolmogorov_distance(mu, nu, tail_tol)},
                 {"wasserstein", bds::wasserstein_du(mu, nu, bds::WeightSequence::tabulate(u, n),
                                                     tail_tol)}};
  std::ostringstream csv;
  csv.precision(17);
  csv << "metric,value\ntv," << report["tv"].get<double>() << "\nkolmogorov,"
      << report["kolmogorov"].get<double>() << "\nwasserstein,"
      << report["wasserstein"].get<double>() << "\n";
  emit(opt, "distance_report", report, csv.str());
  return kExitOk;
}

int cmd_simulate(const Options& opt, const json& cfg) {
  bds::BirthDeathRates rates = parse_model(cfg.at("model"));
  int n = field<int>(cfg, "truncation");
  int cap = field_or<int>(cfg, "cap", 10 * n);
  int x0 = field_or<int>(cfg, "x0", 0);
  double t = field<double>(cfg, "t");
  int n_paths = field<int>(cfg, "n_paths");
  std::uint64_t seed = opt.seed_set ? opt.seed : field_or<std::uint64_t>(cfg, "seed", 1);

  std::function<double(int)> pot;
  auto pname = field_or<std::string>(cfg.contains("potential") ? cfg.at("potential") : json::object(),
                                     "name", "zero");
  if (pname == "zero") {
    pot = [](int) { return 0.0; };
  } else if (pname == "constant") {
    double c = field<double>(cfg.at("potential"), "c");
    pot = [c](int) { return c; };
  } else if (pname == "v1") {
    pot = [rates](int x) {
      return rates.alpha(x) - rates.alpha(x + 1) + rates.beta(x + 1) - rates.beta(x);
    };
  } else {
    throw ConfigError("unknown potential: " + pname);
  }
  auto f = parse_function(cfg.contains("f") ? cfg.at("f") : json{{"name", "capped_identity"}},
                          seed);
  bds::McEstimate e = bds::feynman_kac_mc(rates, pot, f, x0, t, n_paths, seed, cap, opt.threads);

  int dump = field_or<int>(cfg, "dump_paths", 0);
  if (dump > 0) {
    std::vector<bds::PathSample> paths;
    for (int i = 0; i < dump; ++i) paths.push_back(bds::simulate_path(rates, x0, t, seed + i, cap));
    fs::create_directories(opt.out_dir);
    atomic_write(fs::path(opt.out_dir) / "paths.csv", bds::paths_to_csv(paths));
  }
  json report = {{"command", "simulate"}, {"estimate", e.estimate},
                 {"std_error", e.std_error}, {"n_paths", e.n_paths},
                 {"seed", e.seed},          {"threads", opt.threads}};
  std::ostringstream csv;
  csv.precision(17);
  csv << "estimate,std_error,n_paths,seed\n"
      << e.estimate << ',' << e.std_error << ',' << e.n_paths << ',' << e.seed << '\n';
  emit(opt, "simulate_report", report, csv.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical toolkit for birth-death intertwinings and Stein factors"};
  app.require_subcommand(1);
  Options opt;

  std::vector<std::pair<std::string, std::function<int(const Options&, const json&)>>> cmds = {
      {"verify", [](const Options& o, const json& c) { return cmd_verify(o, c); }},
      {"factors", [](const Options& o, const json& c) { return cmd_factors(o, c, false); }},
      {"bounds", [](const Options& o, const json& c) { return cmd_factors(o, c, true); }},
      {"mixture", [](const Options& o, const json& c) { return cmd_mixture(o, c); }},
      {"distance", [](const Options& o, const json& c) { return cmd_distance(o, c); }},
      {"simulate", [](const Options& o, const json& c) { return cmd_simulate(o, c); }},
  };
  std::string chosen;
  for (auto& [name, fn] : cmds) {
    auto* sub = app.add_subcommand(name);
    sub->callback([&chosen, name = name] { chosen = name; });
    sub->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "RNG seed override")
        ->each([&opt](const std::string&) { opt.seed_set = true; });
    sub->add_option("--threads", opt.threads, "worker threads");
    sub->add_option("--format", opt.format, "output format")
        ->check(CLI::IsMember({"json", "csv"}));
  }

  CLI11_PARSE(app, argc, argv);
  try {
    json cfg = load_config(opt.config_path);
    for (auto& [name, fn] : cmds)
      if (name == chosen) return fn(opt, cfg);
    return kExitConfig;
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis failure: " << e.what() << "\n";
    return kExitHypothesis;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitViolation;
  }
}
