// Command-line front end: walk, hitting, optimize, sweep.
//
// Exit codes: 0 success, 1 invalid input, 2 theory violation, 3 I/O error.

#include <algorithm>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adastoch/commands.hpp"

namespace {

using namespace adastoch;
using namespace adastoch::cli;
using json = nlohmann::json;

enum ExitCode { kOk = 0, kInvalid = 1, kTheory = 2, kIo = 3 };

int classify(const std::exception& e) {
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    return classify(inner);
  }
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const TheoryViolation*>(&e) || dynamic_cast<const CouplingInfeasible*>(&e) ||
      dynamic_cast<const AssumptionViolation*>(&e))
    return kTheory;
  return kInvalid;
}

std::string json_scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw InvalidParameter("config: value of '" + key + "' must be a scalar or an array of scalars");
}

// Applies `section` (the subcommand's object, or the top-level scalars) to
// options not given on the command line. Unknown keys are errors.
void apply_config(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidParameter("config " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw InvalidParameter("config " + path + ": top level must be an object");

  json section = json::object();
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) continue;
    section[key] = value;
  }
  if (doc.contains(sub.get_name())) {
    const auto& own = doc.at(sub.get_name());
    if (!own.is_object()) throw InvalidParameter("config: section '" + sub.get_name() + "' must be an object");
    for (const auto& [key, value] : own.items()) section[key] = value;
  }

  for (const auto& [key, value] : section.items()) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      opt = sub.get_option_no_throw("--" + dashed);
    }
    if (!opt || key == "config") throw InvalidParameter("config: unknown option '" + key + "' for " + sub.get_name());
    if (opt->count() > 0) continue;  // command line wins
    std::vector<std::string> values;
    if (value.is_array()) {
      for (const auto& item : value) values.push_back(json_scalar(item, key));
    } else {
      values.push_back(json_scalar(value, key));
    }
    opt->add_result(values);
    opt->run_callback();
  }
}

const std::map<std::string, ProblemKind> kProblemKinds{{"quadratic", ProblemKind::quadratic},
                                                       {"logistic", ProblemKind::logistic_synthetic}};
const std::map<std::string, NoiseDistribution> kNoiseKinds{{"gaussian", NoiseDistribution::gaussian},
                                                           {"bernoulli", NoiseDistribution::bernoulli_corruption}};
const std::map<std::string, MethodKind> kMethods{{"sass", MethodKind::sass}, {"storm", MethodKind::storm}};
const std::map<std::string, OracleKind> kOracleKinds{{"matched", OracleKind::matched},
                                                     {"single", OracleKind::single_sample}};
const std::map<std::string, Optimality> kMeasures{{"nonconvex", Optimality::nonconvex},
                                                  {"strongly_convex", Optimality::strongly_convex}};
const std::map<std::string, GammaPolicy> kGammaPolicies{{"fixed", GammaPolicy::fixed},
                                                        {"corollary", GammaPolicy::corollary}};

struct OptionalValue {
  double value = 0.0;
  CLI::Option* option = nullptr;
  std::optional<double> get() const { return option && option->count() ? std::optional(value) : std::nullopt; }
};

template <class T>
std::vector<std::string> keys(const std::map<std::string, T>& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

// Enumerations travel as strings and are mapped once parsing is complete.
struct RunFlags {
  OptionalValue alpha0, alpha_max, r;
  std::string method = "storm", problem = "quadratic", noise = "gaussian", oracle = "matched", measure = "nonconvex";
};

void add_run_options(CLI::App& app, RunOptions& o, RunFlags& flags) {
  auto& p = o.problem;
  auto& q = o.oracle;
  app.add_option("--method", flags.method, "sass | storm")->check(CLI::IsMember(keys(kMethods)));
  app.add_option("--problem", flags.problem, "quadratic | logistic")->check(CLI::IsMember(keys(kProblemKinds)));
  app.add_option("--dim", p.dim, "problem dimension")->check(CLI::PositiveNumber);
  app.add_option("--conditioning", p.conditioning, "condition number (>= 1)");
  app.add_option("--x0-scale", p.x0_scale, "starting point x0 = scale * ones");
  app.add_option("--problem-seed", p.seed, "seed of the generated problem instance");
  app.add_option("--noise", flags.noise, "gaussian | bernoulli")->check(CLI::IsMember(keys(kNoiseKinds)));
  app.add_option("--sigma-f", p.sigma_f, "value noise standard deviation");
  app.add_option("--sigma-g", p.sigma_g, "uniform gradient noise bound (trust region)");
  app.add_option("--mc", p.M_c, "constant gradient noise term (step search)");
  app.add_option("--mv", p.M_v, "relative gradient noise term (step search)");
  app.add_option("--corruption-prob", p.corruption_prob, "per-sample corruption probability");
  app.add_option("--corruption-shift", p.corruption_shift, "per-sample corruption magnitude");
  app.add_option("--oracle", flags.oracle, "matched | single")->check(CLI::IsMember(keys(kOracleKinds)));
  app.add_option("--kappa-ef", q.kappa_ef, "value accuracy constant (trust region)");
  app.add_option("--kappa-eg", q.kappa_eg, "gradient accuracy constant (trust region)");
  app.add_option("--delta0", q.delta0, "value oracle failure probability (trust region)");
  app.add_option("--delta1", q.delta1, "gradient oracle failure probability (trust region)");
  app.add_option("--batch-constant", q.C, "multiplier C of the step-search batch sizes");
  app.add_option("--kappa", q.kappa, "gradient accuracy constant (step search)");
  app.add_option("--tau", q.tau, "gradient accuracy cap (step search)");
  app.add_option("--corrupt-value", q.corrupt_value, "oracle-level value corruption probability");
  app.add_option("--corrupt-gradient", q.corrupt_gradient, "oracle-level gradient corruption probability");
  app.add_option("--corrupt-shift", q.corrupt_shift, "oracle-level value corruption magnitude");
  app.add_option("--theta", o.theta, "sufficient-reduction ratio");
  app.add_option("--gamma", o.gamma, "step-size contraction factor");
  flags.alpha0.option = app.add_option("--alpha0", flags.alpha0.value, "initial step size (default alpha_max)");
  flags.alpha_max.option =
      app.add_option("--alpha-max", flags.alpha_max.value, "step-size cap (default: storm scale*eps, sass 1)");
  app.add_option("--alpha-scale", o.alpha_scale, "storm default alpha_max = scale * eps");
  flags.r.option = app.add_option("--r", flags.r.value, "noise compensation (default: 0 storm, recommended sass)");
  app.add_option("--theta2", o.theta2, "trust-region gradient-vs-radius threshold");
  app.add_option("--max-iterations", o.max_iterations, "iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--measure", flags.measure, "nonconvex | strongly_convex")->check(CLI::IsMember(keys(kMeasures)));
}

void finish_run_options(RunOptions& o, const RunFlags& f) {
  o.method = kMethods.at(f.method);
  o.problem.kind = kProblemKinds.at(f.problem);
  o.problem.noise = kNoiseKinds.at(f.noise);
  o.oracle.kind = kOracleKinds.at(f.oracle);
  o.measure = kMeasures.at(f.measure);
  o.alpha0 = f.alpha0.get();
  o.alpha_max = f.alpha_max.get();
  o.r = f.r.get();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive stochastic optimization: walks, hitting probabilities, runs and complexity sweeps"};
  app.require_subcommand(1);
  app.allow_extras(false);

  std::string config_path;
  std::string out_path;
  auto common = [&](CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--config", config_path, "JSON file with option values (flags win)");
    sub->add_option("--out", out_path, "output CSV path (default: $ADASTOCH_OUTPUT_DIR/<command>.csv)");
    sub->add_option("--seed", seed, "master seed");
  };

  WalkOptions walk;
  auto* walk_cmd = app.add_subcommand("walk", "simulate the one-sided walk and the induced step-size floor");
  common(walk_cmd, walk.seed);
  walk_cmd->add_option("--p", walk.p, "success probability p in (1/2, 1]");
  walk_cmd->add_option("--gammas", walk.gammas, "contraction factors")->delimiter(',');
  walk_cmd->add_option("--alpha-bar", walk.alpha_bar, "step-size threshold");
  walk_cmd->add_option("--omega", walk.omega, "probability exponent omega");
  walk_cmd->add_option("--n", walk.n, "horizon");
  walk_cmd->add_option("--reps", walk.reps, "replications");

  HittingOptions hitting;
  auto* hit_cmd = app.add_subcommand("hitting", "exact, bounded and simulated hitting probabilities");
  common(hit_cmd, hitting.seed);
  hit_cmd->add_option("--p", hitting.p, "success probability p in (1/2, 1]");
  hit_cmd->add_option("--l-max", hitting.l_max, "largest level");
  hit_cmd->add_option("--n", hitting.n, "horizon");
  hit_cmd->add_option("--reps", hitting.reps, "replications");

  OptimizeOptions optimize;
  auto* opt_cmd = app.add_subcommand("optimize", "run one adaptive optimization and record its trace");
  common(opt_cmd, optimize.seed);
  RunFlags opt_flags;
  add_run_options(*opt_cmd, optimize.run, opt_flags);
  opt_cmd->add_option("--epsilon", optimize.epsilon, "stopping tolerance");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo total oracle complexity over a tolerance grid");
  common(sweep_cmd, sweep.seed);
  RunFlags sweep_flags;
  add_run_options(*sweep_cmd, sweep.run, sweep_flags);
  sweep_cmd->add_option("--epsilons", sweep.epsilons, "tolerances")->delimiter(',');
  sweep_cmd->add_option("--reps", sweep.reps, "replications per tolerance");
  std::string gamma_policy = "fixed";
  sweep_cmd->add_option("--gamma-policy", gamma_policy, "fixed | corollary")->check(CLI::IsMember(keys(kGammaPolicies)));
  sweep_cmd->add_option("--beta", sweep.beta, "step-size fraction for the corollary policy");
  sweep_cmd->add_option("--omega", sweep.omega, "probability exponent omega");
  sweep_cmd->add_option("--zeta", sweep.zeta, "trust region: alpha_bar = eps / zeta");
  sweep_cmd->add_option("--c1", sweep.C1, "trust region: E[T] <= C1 / eps^2 calibration");
  sweep_cmd->add_option("--c2", sweep.C2, "trust region: horizon multiplier (> 1)");
  sweep_cmd->add_option("--horizon-c", sweep.horizon_C, "step search: horizon constant");
  sweep_cmd->add_option("--sass-p", sweep.sass_p, "step search: success probability used in the bounds");
  OptionalValue sweep_abar;
  sweep_abar.option = sweep_cmd->add_option("--sass-alpha-bar", sweep_abar.value, "step search: alpha_bar for the bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config(*sub, config_path);
    std::ostringstream main_csv, extra_csv;
    const std::string name = sub->get_name();
    const auto path = resolve_output(out_path, name + ".csv");
    std::string extra_suffix;

    if (sub == walk_cmd) {
      run_walk(walk, main_csv, extra_csv);
      extra_suffix = "summary";
    } else if (sub == hit_cmd) {
      run_hitting(hitting, main_csv);
    } else if (sub == opt_cmd) {
      finish_run_options(optimize.run, opt_flags);
      run_optimize(optimize, main_csv, extra_csv);
      extra_suffix = "summary";
    } else {
      finish_run_options(sweep.run, sweep_flags);
      sweep.sass_alpha_bar = sweep_abar.get();
      sweep.gamma_policy = kGammaPolicies.at(gamma_policy);
      run_sweep(sweep, main_csv, extra_csv);
      extra_suffix = "bounds";
    }
    write_file(path, main_csv.str());
    if (!extra_suffix.empty()) write_file(sibling_path(path, extra_suffix), extra_csv.str());
    std::cout << path.string() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return classify(e);
  }
}
