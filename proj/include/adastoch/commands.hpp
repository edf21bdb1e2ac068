#pragma once

// Experiment drivers behind the command-line tool. Each command validates its
// options, computes, and writes CSV to caller-provided streams, so tests can
// run commands in-process.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "adastoch/complexity.hpp"
#include "adastoch/csv.hpp"
#include "adastoch/error.hpp"
#include "adastoch/framework.hpp"
#include "adastoch/methods.hpp"
#include "adastoch/oracles.hpp"
#include "adastoch/parallel.hpp"
#include "adastoch/problems.hpp"
#include "adastoch/random.hpp"
#include "adastoch/stats.hpp"
#include "adastoch/walk.hpp"

namespace adastoch::cli {

inline constexpr const char* kOutputDirVariable = "ADASTOCH_OUTPUT_DIR";

// Explicit paths are used verbatim; otherwise `fallback` is placed in
// $ADASTOCH_OUTPUT_DIR (or the working directory).
inline std::filesystem::path resolve_output(const std::string& explicit_path, const std::string& fallback) {
  if (!explicit_path.empty()) return explicit_path;
  const char* dir = std::getenv(kOutputDirVariable);
  return dir && *dir ? std::filesystem::path(dir) / fallback : std::filesystem::path(fallback);
}

// `out.csv` -> `out_<suffix>.csv`
inline std::filesystem::path sibling_path(const std::filesystem::path& path, const std::string& suffix) {
  auto out = path;
  out.replace_filename(path.stem().string() + "_" + suffix + path.extension().string());
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file << contents;
  file.flush();
  if (!file) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------- walk

struct WalkOptions {
  double p = 0.8;
  std::vector<double> gammas{0.5, 0.6, 0.7, 0.8, 0.9};
  double alpha_bar = 1.0;
  double omega = 1.0;
  std::size_t n = 100;
  std::size_t reps = 10000;
  std::uint64_t seed = 1;
};

struct WalkGammaSummary {
  double gamma = 0.0;
  double alpha_star = 0.0;
  std::size_t dips = 0;
  double dip_fraction = 0.0;
  Interval ci;
  double failure_bound = 0.0;
};

// Per gamma and mode (path: first replication, mean: average over replications,
// min: worst replication), the running minimum of alpha_bar * gamma^{Z_j} and
// alpha*(n). The summary counts replications whose step size ever drops below
// alpha*(n). A count whose 99% interval lies entirely above the failure bound
// raises TheoryViolation.
inline std::vector<WalkGammaSummary> run_walk(const WalkOptions& o, std::ostream& table, std::ostream& summary) {
  detail::require(!o.gammas.empty(), "walk: at least one gamma is required");
  detail::require(o.n >= 2, "walk: n must be >= 2");
  detail::require(o.reps >= 1, "walk: reps must be positive");
  for (double g : o.gammas) WalkParams{o.p, g, o.alpha_bar, o.omega}.validate();

  std::vector<std::int64_t> maxima(o.reps * (o.n + 1));
  parallel_for(o.reps, [&](std::size_t i) {
    Rng rng = make_stream(o.seed, i);
    const WalkPath path = simulate_walk(o.p, o.n, rng);
    std::int64_t top = 0;
    for (std::size_t k = 0; k <= o.n; ++k) {
      top = std::max(top, path.states[k]);
      maxima[i * (o.n + 1) + k] = top;
    }
  });

  std::vector<WalkGammaSummary> out;
  table << "gamma,mode,k,alpha_walk_min_so_far,alpha_star\n";
  for (double g : o.gammas) {
    const WalkParams params{o.p, g, o.alpha_bar, o.omega};
    const StepSizeBound bound = stepsize_lower_bound(params, o.n);
    const std::string gs = csv::real(g);
    const std::string as = csv::real(bound.alpha_star);
    auto alpha_at = [&](std::int64_t level) { return o.alpha_bar * std::pow(g, static_cast<double>(level)); };

    for (std::size_t k = 0; k <= o.n; ++k)
      table << gs << ",path," << k << ',' << csv::real(alpha_at(maxima[k])) << ',' << as << '\n';
    for (std::size_t k = 0; k <= o.n; ++k) {
      double sum = 0.0;
      for (std::size_t i = 0; i < o.reps; ++i) sum += alpha_at(maxima[i * (o.n + 1) + k]);
      table << gs << ",mean," << k << ',' << csv::real(sum / static_cast<double>(o.reps)) << ',' << as << '\n';
    }
    for (std::size_t k = 0; k <= o.n; ++k) {
      std::int64_t worst = 0;
      for (std::size_t i = 0; i < o.reps; ++i) worst = std::max(worst, maxima[i * (o.n + 1) + k]);
      table << gs << ",min," << k << ',' << csv::real(alpha_at(worst)) << ',' << as << '\n';
    }

    WalkGammaSummary s;
    s.gamma = g;
    s.alpha_star = bound.alpha_star;
    for (std::size_t i = 0; i < o.reps; ++i) s.dips += alpha_at(maxima[i * (o.n + 1) + o.n]) < bound.alpha_star;
    s.dip_fraction = static_cast<double>(s.dips) / static_cast<double>(o.reps);
    s.ci = wilson_interval(s.dips, o.reps);
    s.failure_bound = 1.0 - bound.success_prob;
    out.push_back(s);
  }

  summary << "gamma,n,reps,alpha_star,dips,dip_fraction,dip_ci_lower,dip_ci_upper,failure_bound\n";
  for (const auto& s : out) {
    summary << csv::real(s.gamma) << ',' << o.n << ',' << o.reps << ',' << csv::real(s.alpha_star) << ',' << s.dips
            << ',' << csv::real(s.dip_fraction) << ',' << csv::real(s.ci.lower) << ',' << csv::real(s.ci.upper) << ','
            << csv::real(s.failure_bound) << '\n';
  }
  for (const auto& s : out) {
    if (s.ci.lower > s.failure_bound) {
      throw TheoryViolation("walk: gamma=" + csv::real(s.gamma) + " dip fraction " + csv::real(s.dip_fraction) +
                            " exceeds the bound " + csv::real(s.failure_bound));
    }
  }
  return out;
}

// ---------------------------------------------------------------- hitting

struct HittingOptions {
  double p = 0.8;
  std::size_t l_max = 20;
  std::size_t n = 100;
  std::size_t reps = 100000;
  std::uint64_t seed = 1;
};

struct HittingRow {
  std::size_t l = 0;
  double exact = 0.0;
  double bound = 0.0;
  double mc_estimate = 0.0;
  double mc_ci_halfwidth = 0.0;
};

// Rows l = 0..l_max. exact <= bound is checked for every row before anything is written.
inline std::vector<HittingRow> run_hitting(const HittingOptions& o, std::ostream& table) {
  detail::require(o.p > 0.5 && o.p <= 1.0, "hitting: p must lie in (1/2, 1]");
  detail::require(o.n >= 1, "hitting: n must be positive");
  detail::require(o.reps >= 1, "hitting: reps must be positive");

  std::vector<std::int64_t> maxima(o.reps);
  parallel_for(o.reps, [&](std::size_t i) {
    Rng rng = make_stream(o.seed, i);
    std::int64_t z = 0, top = 0;
    for (std::size_t k = 0; k < o.n; ++k) {
      z = walk_step(z, o.p, rng);
      top = std::max(top, z);
    }
    maxima[i] = top;
  });

  std::vector<HittingRow> rows;
  for (std::size_t l = 0; l <= o.l_max; ++l) {
    HittingRow row;
    row.l = l;
    row.exact = hitting_prob_exact(o.p, l, o.n);
    row.bound = hitting_prob_bound(o.p, l, o.n);
    const auto hits = static_cast<std::size_t>(
        std::count_if(maxima.begin(), maxima.end(), [&](std::int64_t m) { return m >= static_cast<std::int64_t>(l); }));
    row.mc_estimate = static_cast<double>(hits) / static_cast<double>(o.reps);
    row.mc_ci_halfwidth = wilson_interval(hits, o.reps).half_width();
    if (row.exact > row.bound) {
      throw TheoryViolation("hitting: exact probability exceeds the bound at p=" + csv::real(o.p) +
                            " l=" + std::to_string(l) + " n=" + std::to_string(o.n));
    }
    rows.push_back(row);
  }
  table << "l,exact,bound,mc_estimate,mc_ci_halfwidth\n";
  for (const auto& r : rows) {
    table << r.l << ',' << csv::real(r.exact) << ',' << csv::real(r.bound) << ',' << csv::real(r.mc_estimate) << ','
          << csv::real(r.mc_ci_halfwidth) << '\n';
  }
  return rows;
}

// ---------------------------------------------------------------- optimize

enum class MethodKind { sass, storm };
enum class OracleKind { matched, single_sample };

inline std::string_view to_string(MethodKind m) { return m == MethodKind::sass ? "sass" : "storm"; }

struct ProblemOptions {
  ProblemKind kind = ProblemKind::quadratic;
  std::size_t dim = 10;
  double conditioning = 1.0;
  double x0_scale = 1.0;
  std::uint64_t seed = 1;
  NoiseDistribution noise = NoiseDistribution::gaussian;
  double sigma_f = 1.0;
  double sigma_g = 1.0;  // uniform gradient noise, used by the trust-region method
  double M_c = 1.0;      // relative gradient noise, used by step search
  double M_v = 1.0;
  double corruption_prob = 0.1;
  double corruption_shift = 1.0;
};

struct OracleOptions {
  OracleKind kind = OracleKind::matched;
  // trust-region (Chebyshev) sizing
  double kappa_ef = 1.0;
  double kappa_eg = 1.0;
  double delta0 = 0.05;
  double delta1 = 0.05;
  // step-search sizing
  double C = 16.0;
  double kappa = 1.0;
  double tau = 10.0;
  double sass_delta1 = 0.1;
  // oracle-level corruption (both 0 disables it)
  double corrupt_value = 0.0;
  double corrupt_gradient = 0.0;
  double corrupt_shift = 1e6;
};

struct RunOptions {
  MethodKind method = MethodKind::storm;
  ProblemOptions problem;
  OracleOptions oracle;
  double theta = 0.1;
  double gamma = 0.8;
  std::optional<double> alpha0;     // default: alpha_max (storm: alpha_scale * eps)
  std::optional<double> alpha_max;  // default: storm alpha_scale * eps, sass 1
  double alpha_scale = 1.0;
  std::optional<double> r;  // default: 0 for storm, recommended value for sass
  double theta2 = 1.0;
  std::size_t max_iterations = kDefaultMaxIterations;
  Optimality measure = Optimality::nonconvex;
};

struct OptimizeOptions {
  RunOptions run;
  double epsilon = 0.1;
  std::uint64_t seed = 1;
};

inline NoiseSpec build_noise(const ProblemOptions& o, MethodKind method) {
  if (o.noise == NoiseDistribution::bernoulli_corruption) return NoiseSpec::bernoulli(o.corruption_prob, o.corruption_shift);
  if (method == MethodKind::storm) return NoiseSpec::gaussian_uniform(o.sigma_f, o.sigma_g);
  return NoiseSpec::gaussian_relative(o.sigma_f, o.M_c, o.M_v);
}

inline Problem build_problem(const ProblemOptions& o, MethodKind method) {
  Problem p = make_problem(o.kind, o.dim, o.conditioning, build_noise(o, method), o.seed);
  return p.with_x0(Vector::Constant(static_cast<Eigen::Index>(o.dim), o.x0_scale));
}

inline StormOracleSpec storm_spec(const OracleOptions& o, const NoiseSpec& noise) {
  StormOracleSpec s{o.kappa_ef, o.delta0, o.kappa_eg, o.delta1, noise.sigma_f, noise.sigma_g};
  s.validate();
  return s;
}

inline SassOracleSpec sass_spec(const OracleOptions& o) {
  SassOracleSpec s;
  s.kappa = o.kappa;
  s.tau = o.tau;
  s.delta1 = o.sass_delta1;
  s.validate();
  return s;
}

struct Experiment {
  Problem problem;
  Method method;
  OracleSuite oracles;
  AlgoConfig config;
  StoppingRule rule;
};

inline Experiment build_experiment(const RunOptions& o, double epsilon, std::uint64_t seed) {
  detail::require(epsilon > 0.0, "epsilon must be positive");
  Problem problem = build_problem(o.problem, o.method);
  const NoiseSpec& noise = problem.noise();
  const OracleContract contract =
      o.method == MethodKind::storm ? OracleContract::trust_region_first_order : OracleContract::step_search;

  std::optional<OracleSuite> suite;
  double default_r = 0.0;
  if (o.oracle.kind == OracleKind::single_sample) {
    suite = OracleSuite::single_sample(contract);
    if (o.method == MethodKind::sass) default_r = sass_spec(o.oracle).with_value_noise(noise.sigma_f, 1).recommended_r();
  } else if (o.method == MethodKind::storm) {
    suite = OracleSuite::storm(storm_spec(o.oracle, noise));
  } else {
    const SassOracleSpec spec = sass_spec(o.oracle);
    suite = OracleSuite::sass(epsilon, spec, noise, o.measure, o.oracle.C);
    default_r = spec.with_value_noise(noise.sigma_f, suite->value_cost().batch(1.0)).recommended_r();
  }
  if (o.oracle.corrupt_value > 0.0 || o.oracle.corrupt_gradient > 0.0) {
    suite = suite->with_corruption({o.oracle.corrupt_value, o.oracle.corrupt_gradient, o.oracle.corrupt_shift, 1.0});
  }

  AlgoConfig c;
  c.theta = o.theta;
  c.gamma = o.gamma;
  c.alpha_max = o.alpha_max.value_or(o.method == MethodKind::storm ? o.alpha_scale * epsilon : 1.0);
  c.alpha0 = o.alpha0.value_or(c.alpha_max);
  c.r = o.r.value_or(default_r);
  c.theta2 = o.theta2;
  c.max_iterations = o.max_iterations;
  c.seed = seed;
  c.validate();

  Method method = o.method == MethodKind::storm ? Method{Storm{}} : Method{Sass{}};
  return {std::move(problem), method, std::move(*suite), c, {epsilon, o.measure}};
}

struct OptimizeResult {
  RunTrace trace;
  TocRecord toc;
};

inline OptimizeResult run_optimize(const OptimizeOptions& o, std::ostream& trace_csv, std::ostream& summary) {
  const Experiment e = build_experiment(o.run, o.epsilon, o.seed);
  OptimizeResult out{run_adaptive(e.problem, e.method, e.oracles, e.config, e.rule), {}};
  out.toc = accumulate_toc(out.trace);
  write_trace_csv(trace_csv, out.trace);

  std::istringstream descriptor(e.problem.descriptor());
  for (std::string line; std::getline(descriptor, line);) summary << "# " << line << '\n';
  summary << "# method=" << method_name(e.method) << '\n'
          << "# epsilon=" << csv::real(o.epsilon) << '\n'
          << "# theta=" << csv::real(e.config.theta) << '\n'
          << "# gamma=" << csv::real(e.config.gamma) << '\n'
          << "# alpha0=" << csv::real(e.config.alpha0) << '\n'
          << "# alpha_max=" << csv::real(e.config.alpha_max) << '\n'
          << "# r=" << csv::real(e.config.r) << '\n'
          << "# theta2=" << csv::real(e.config.theta2) << '\n'
          << "# seed=" << o.seed << '\n';
  summary << "T_eps,toc0,toc1,toc\n"
          << csv::optional_integer(out.trace.stopping_iteration) << ',' << out.toc.toc0 << ',' << out.toc.toc1 << ','
          << out.toc.toc << '\n';
  return out;
}

// ---------------------------------------------------------------- sweep

enum class GammaPolicy { fixed, corollary };

struct SweepOptions {
  RunOptions run;
  std::vector<double> epsilons{0.2, 0.1, 0.05};
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  GammaPolicy gamma_policy = GammaPolicy::fixed;
  double beta = 0.25;
  double omega = 1.0;
  // Trust region: alpha_bar = eps / zeta, horizon n = C2 * C1 / eps^2 with P(T > n) <= 1 / C2.
  double zeta = 10.0;
  double C1 = 1.0;
  double C2 = 10.0;
  // Step search: n = horizon_C / eps^2 or horizon_C log(1/eps), plus burn-in;
  // p and alpha_bar (default (1 - theta) / L) feed the bounds only.
  double horizon_C = 10.0;
  double sass_p = 0.9;
  std::optional<double> sass_alpha_bar;
};

struct SweepRow {
  double epsilon = 0.0;
  std::size_t n = 0;
  double gamma = 0.0;
  double mean_T = 0.0;
  double mean_toc0 = 0.0;
  double mean_toc1 = 0.0;
  ComplexityReport report;
  TocSummary mc;
};

inline std::vector<SweepRow> run_sweep(const SweepOptions& o, std::ostream& table, std::ostream& bounds) {
  detail::require(!o.epsilons.empty(), "sweep: at least one epsilon is required");
  detail::require(o.reps >= 1, "sweep: reps must be positive");
  std::vector<SweepRow> rows;
  for (std::size_t e = 0; e < o.epsilons.size(); ++e) {
    const double eps = o.epsilons[e];
    RunOptions run = o.run;
    SweepRow row;
    row.epsilon = eps;
    Experiment probe = build_experiment(run, eps, 0);

    double p = 0.0, alpha_bar = 0.0, prob_T = 0.0;
    if (run.method == MethodKind::storm) {
      const auto spec = storm_spec(run.oracle, probe.problem.noise());
      p = spec.success_probability();
      alpha_bar = eps / o.zeta;
      row.n = markov_horizon(eps, o.C1, o.C2);
      prob_T = 1.0 / o.C2;
    } else {
      p = o.sass_p;
      alpha_bar = o.sass_alpha_bar.value_or((1.0 - run.theta) / probe.problem.smoothness());
      row.n = sass_horizon(eps, o.horizon_C, probe.config.alpha0, alpha_bar, run.gamma, run.measure);
    }
    row.gamma = o.gamma_policy == GammaPolicy::corollary ? gamma_threshold(p, row.n, o.omega, o.beta) : run.gamma;
    run.gamma = row.gamma;
    run.max_iterations = std::max(run.max_iterations, row.n);
    const Experiment ex = build_experiment(run, eps, 0);
    const std::uint64_t master = stream_seed(o.seed, e);

    auto report_for = [&](double prob) {
      if (run.method == MethodKind::storm) {
        return storm_complexity_report(storm_spec(run.oracle, ex.problem.noise()), eps, o.zeta, row.n, row.gamma,
                                       o.omega, prob);
      }
      return sass_complexity_report(sass_spec(run.oracle), ex.problem.noise(), eps, row.n, row.gamma, o.omega,
                                    run.measure, p, alpha_bar, prob, run.oracle.C);
    };

    if (run.method == MethodKind::storm) {
      row.report = report_for(prob_T);
      row.mc = std::visit(
          [&](const auto& m) {
            return monte_carlo_toc(ex.problem, m, ex.oracles, ex.config, ex.rule, o.reps, master,
                                   row.report.high_probability.value);
          },
          ex.method);
    } else {
      // P(T > n) is estimated from the same replications.
      TocSummary first = std::visit(
          [&](const auto& m) { return monte_carlo_toc(ex.problem, m, ex.oracles, ex.config, ex.rule, o.reps, master); },
          ex.method);
      std::size_t late = 0;
      for (const auto& r : first.records) late += (!r.stopped || r.iterations_used > row.n) ? 1 : 0;
      row.report = report_for(static_cast<double>(late) / static_cast<double>(o.reps));
      first.exceed_count = 0;
      for (const auto& r : first.records)
        first.exceed_count += (!r.stopped || static_cast<double>(r.toc) > row.report.high_probability.value) ? 1 : 0;
      first.exceed_frac = static_cast<double>(first.exceed_count) / static_cast<double>(o.reps);
      first.exceed_ci = wilson_interval(first.exceed_count, o.reps);
      row.mc = std::move(first);
    }
    row.mean_T = row.mc.mean_T;
    row.mean_toc0 = row.mc.mean_toc0;
    row.mean_toc1 = row.mc.mean_toc1;
    rows.push_back(std::move(row));
  }

  table << "epsilon,mean_T,mean_toc0,mean_toc1,bound_expected,bound_highprob,exceed_frac\n";
  write_bound_header(bounds);
  for (const auto& r : rows) {
    table << csv::real(r.epsilon) << ',' << csv::real(r.mean_T) << ',' << csv::real(r.mean_toc0) << ','
          << csv::real(r.mean_toc1) << ',' << csv::real(r.report.expected.value) << ','
          << csv::real(r.report.high_probability.value) << ',' << csv::real(r.mc.exceed_frac) << '\n';
    write_bound_row(bounds, r.epsilon, r.report, r.mc);
  }
  for (const auto& r : rows) {
    if (r.mc.exceed_ci && r.mc.exceed_ci->lower > r.report.high_probability.failure_prob) {
      throw TheoryViolation("sweep: eps=" + csv::real(r.epsilon) + " exceedance " + csv::real(r.mc.exceed_frac) +
                            " above failure probability " + csv::real(r.report.high_probability.failure_prob));
    }
  }
  return rows;
}

}  // namespace adastoch::cli
