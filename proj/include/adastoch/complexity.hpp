#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adastoch/csv.hpp"
#include "adastoch/error.hpp"
#include "adastoch/framework.hpp"
#include "adastoch/oracles.hpp"
#include "adastoch/parallel.hpp"
#include "adastoch/stats.hpp"
#include "adastoch/walk.hpp"

namespace adastoch {

// Samples drawn up to min(T, horizon). toc == toc0 + toc1.
struct TocRecord {
  std::int64_t toc0 = 0;
  std::int64_t toc1 = 0;
  std::int64_t toc = 0;
  std::size_t iterations_used = 0;
  bool stopped = false;
};

inline TocRecord accumulate_toc(const RunTrace& trace,
                                std::size_t horizon = std::numeric_limits<std::size_t>::max()) {
  detail::require(!trace.records.empty(), "accumulate_toc: empty trace");
  TocRecord out;
  for (const auto& r : trace.records) {
    if (r.k >= horizon) break;
    out.toc0 += r.cost0;
    out.toc1 += r.cost1;
  }
  out.toc = out.toc0 + out.toc1;
  out.iterations_used = std::min(trace.iterations(), horizon);
  out.stopped = trace.stopping_iteration.has_value();
  return out;
}

enum class BoundKind { expected, high_probability };

inline std::string_view to_string(BoundKind k) { return k == BoundKind::expected ? "expected" : "high_probability"; }

// A bound value is reported both directly and as its logarithm; the direct
// value is +inf when it exceeds double range.
struct BoundReport {
  BoundKind kind = BoundKind::expected;
  double value = 0.0;
  double log_value = -std::numeric_limits<double>::infinity();
  double failure_prob = 0.0;
  std::vector<std::pair<std::string, double>> inputs;

  double input(std::string_view key) const {
    for (const auto& [k, v] : inputs) {
      if (k == key) return v;
    }
    throw InvalidParameter("BoundReport: no input named " + std::string(key));
  }
};

namespace detail {

inline std::vector<std::pair<std::string, double>> walk_inputs(const WalkParams& params, std::size_t n) {
  return {{"p", params.p},
          {"gamma", params.gamma},
          {"alpha_bar", params.alpha_bar},
          {"omega", params.omega},
          {"n", static_cast<double>(n)},
          {"c", params.c()}};
}

}  // namespace detail

// n sum_{l=1}^{n} min{1, n rho^l + c (2q)^l} oc(alpha_bar gamma^l) + n oc(alpha_bar),
// accumulated in log space. Requires oc non-increasing in alpha on the grid used.
inline BoundReport expected_toc_bound(const CostModel& cost, const WalkParams& params, std::size_t n) {
  params.validate();
  detail::require(n >= 1, "expected_toc_bound: n must be positive");
  if (!cost.monotone) throw AssumptionViolation("expected_toc_bound: cost model " + cost.name + " is not monotone");
  const double ninf = -std::numeric_limits<double>::infinity();
  const double q = params.q();
  const double log_n = std::log(static_cast<double>(n));
  const double log_rho = q > 0.0 ? std::log(q) - std::log(params.p) : ninf;
  const double log_2q = q > 0.0 ? std::log(2.0 * q) : ninf;
  const double log_c = detail::safe_log(params.c());
  const double log_abar = std::log(params.alpha_bar);
  const double log_gamma = std::log(params.gamma);

  double previous = cost.log_evaluate(log_abar);
  double total = previous;  // the n oc(alpha_bar) term, before the common factor n
  for (std::size_t l = 1; l <= n; ++l) {
    const double L = static_cast<double>(l);
    const double log_cost = cost.log_evaluate(log_abar + L * log_gamma);
    if (log_cost < previous - 1e-12 * std::max(1.0, std::abs(previous))) {
      throw AssumptionViolation("expected_toc_bound: oc decreases as alpha shrinks at level " + std::to_string(l));
    }
    previous = log_cost;
    const double log_weight = std::min(0.0, detail::log_add(log_n + L * log_rho, log_c + L * log_2q));
    total = detail::log_add(total, log_weight + log_cost);
  }
  BoundReport out;
  out.kind = BoundKind::expected;
  out.log_value = log_n + total;
  out.value = std::exp(out.log_value);
  out.failure_prob = 0.0;
  out.inputs = detail::walk_inputs(params, n);
  return out;
}

// n oc(alpha*(n)), failing with probability at most P(T > n) + n^-omega + c n^-(1+omega).
inline BoundReport highprob_toc_bound(const CostModel& cost, const WalkParams& params, std::size_t n,
                                      double prob_T_exceeds_n) {
  detail::require(prob_T_exceeds_n >= 0.0 && prob_T_exceeds_n <= 1.0,
                  "highprob_toc_bound: P(T > n) must lie in [0,1]");
  const StepSizeBound floor = stepsize_lower_bound(params, n);
  BoundReport out;
  out.kind = BoundKind::high_probability;
  out.log_value = std::log(static_cast<double>(n)) + cost.log_evaluate(floor.log_alpha_star);
  out.value = std::exp(out.log_value);
  out.failure_prob = std::min(1.0, prob_T_exceeds_n + (1.0 - floor.success_prob));
  out.inputs = detail::walk_inputs(params, n);
  out.inputs.emplace_back("alpha_star", floor.alpha_star);
  out.inputs.emplace_back("prob_T_exceeds_n", prob_T_exceeds_n);
  return out;
}

// n oc(beta alpha_bar), valid when gamma is at least the threshold for beta.
inline BoundReport highprob_toc_bound_beta(const CostModel& cost, const WalkParams& params, std::size_t n,
                                           double prob_T_exceeds_n, double beta) {
  const double threshold = gamma_threshold(params.p, n, params.omega, beta);
  if (params.gamma < threshold) {
    throw InvalidParameter("highprob_toc_bound_beta: gamma " + csv::real(params.gamma) + " below threshold " +
                           csv::real(threshold));
  }
  BoundReport out = highprob_toc_bound(cost, params, n, prob_T_exceeds_n);
  out.log_value = std::log(static_cast<double>(n)) + cost.log_evaluate(std::log(beta * params.alpha_bar));
  out.value = std::exp(out.log_value);
  out.inputs.emplace_back("beta", beta);
  return out;
}

// Bounds plus the growth exponents of the zeroth/first-order parts.
struct ComplexityReport {
  BoundReport expected;
  BoundReport high_probability;
  std::optional<BoundReport> high_probability_beta;
  double p = 0.0;
  double alpha_bar = 0.0;
  double exponent_toc0 = 0.0;
  double exponent_toc1 = 0.0;
};

// Markov horizon n = C2 * C1 / eps^2, with P(T > n) <= 1 / C2 whenever E[T] <= C1 / eps^2.
inline std::size_t markov_horizon(double epsilon, double C1, double C2) {
  detail::require(epsilon > 0.0 && C1 > 0.0 && C2 > 1.0, "markov_horizon: need eps > 0, C1 > 0, C2 > 1");
  return static_cast<std::size_t>(std::ceil(C2 * C1 / (epsilon * epsilon)));
}

// Step-search horizon: C / eps^2 (nonconvex) or C log(1/eps) (strongly convex),
// plus log_{1/gamma}(alpha0 / alpha_bar) when alpha0 > alpha_bar.
inline std::size_t sass_horizon(double epsilon, double C, double alpha0, double alpha_bar, double gamma,
                                Optimality which) {
  detail::require(epsilon > 0.0 && C > 0.0 && alpha0 > 0.0 && alpha_bar > 0.0, "sass_horizon: invalid input");
  detail::require(gamma > 0.0 && gamma < 1.0, "sass_horizon: gamma must lie in (0,1)");
  const double main = which == Optimality::nonconvex ? C / (epsilon * epsilon) : C * std::log(1.0 / epsilon);
  const double burn_in = std::max(0.0, std::log(alpha0 / alpha_bar) / std::log(1.0 / gamma));
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(main + burn_in)));
}

// First-order trust region with Chebyshev minibatches: p = 1 - delta0 - delta1,
// alpha_bar = eps / zeta, per-iteration cost 2 oc0 + oc1.
inline ComplexityReport storm_complexity_report(const StormOracleSpec& spec, double epsilon, double zeta,
                                                std::size_t n, double gamma, double omega, double prob_T_exceeds_n,
                                                std::optional<double> beta = std::nullopt) {
  spec.validate();
  detail::require(epsilon > 0.0 && zeta > 0.0, "storm_complexity_report: epsilon and zeta must be positive");
  ComplexityReport out;
  out.p = spec.success_probability();
  out.alpha_bar = epsilon / zeta;
  const WalkParams params{out.p, gamma, out.alpha_bar, omega};
  const auto cost = OracleSuite::storm(spec).per_iteration_cost();
  out.expected = expected_toc_bound(cost, params, n);
  out.high_probability = highprob_toc_bound(cost, params, n, prob_T_exceeds_n);
  if (beta) out.high_probability_beta = highprob_toc_bound_beta(cost, params, n, prob_T_exceeds_n, *beta);
  const double log_ratio = std::log((1.0 - out.p) / out.p);
  out.exponent_toc0 = 4.0 * std::log(gamma) / log_ratio;
  out.exponent_toc1 = 2.0 * std::log(gamma) / log_ratio;
  for (auto* r : {&out.expected, &out.high_probability}) {
    r->inputs.emplace_back("epsilon", epsilon);
    r->inputs.emplace_back("zeta", zeta);
  }
  return out;
}

// Step search with minibatch costs C * (...). p and alpha_bar come from the
// method's own analysis and are supplied by the caller.
inline ComplexityReport sass_complexity_report(const SassOracleSpec& spec, const NoiseSpec& noise, double epsilon,
                                               std::size_t n, double gamma, double omega, Optimality which,
                                               double p, double alpha_bar, double prob_T_exceeds_n, double C = 1.0,
                                               std::optional<double> beta = std::nullopt) {
  ComplexityReport out;
  out.p = p;
  out.alpha_bar = alpha_bar;
  const WalkParams params{p, gamma, alpha_bar, omega};
  const auto cost = OracleSuite::sass(epsilon, spec, noise, which, C).per_iteration_cost();
  out.expected = expected_toc_bound(cost, params, n);
  out.high_probability = highprob_toc_bound(cost, params, n, prob_T_exceeds_n);
  if (beta) out.high_probability_beta = highprob_toc_bound_beta(cost, params, n, prob_T_exceeds_n, *beta);
  // oc0 does not depend on alpha; oc1 grows like alpha^-2 through its M_v part.
  out.exponent_toc0 = 0.0;
  out.exponent_toc1 = p < 1.0 ? 2.0 * std::log(gamma) / std::log((1.0 - p) / p) : 0.0;
  for (auto* r : {&out.expected, &out.high_probability}) {
    r->inputs.emplace_back("epsilon", epsilon);
    r->inputs.emplace_back("C", C);
  }
  return out;
}

struct TocSummary {
  std::vector<TocRecord> records;
  double mean_T = 0.0;
  double mean_toc0 = 0.0;
  double mean_toc1 = 0.0;
  double mean_toc = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  std::size_t stopped = 0;
  std::size_t exceed_count = 0;  // unstopped runs count as exceeding
  double exceed_frac = 0.0;
  std::optional<Interval> exceed_ci;
};

// Replication i runs with seed stream_seed(master_seed, i); results are
// aggregated in index order, so the summary does not depend on scheduling.
template <class M>
TocSummary monte_carlo_toc(const Problem& problem, const M& method, const OracleSuite& oracles, AlgoConfig config,
                           const StoppingRule& rule, std::size_t replications, std::uint64_t master_seed,
                           std::optional<double> bound = std::nullopt, std::size_t max_workers = 0) {
  detail::require(replications >= 1, "monte_carlo_toc: replications must be positive");
  config.validate();
  TocSummary out;
  out.records.resize(replications);
  parallel_for(
      replications,
      [&](std::size_t i) {
        AlgoConfig c = config;
        c.seed = stream_seed(master_seed, i);
        out.records[i] = accumulate_toc(run_adaptive(problem, method, oracles, c, rule));
      },
      max_workers);

  std::vector<double> totals;
  totals.reserve(replications);
  for (const auto& r : out.records) {
    out.mean_T += static_cast<double>(r.iterations_used);
    out.mean_toc0 += static_cast<double>(r.toc0);
    out.mean_toc1 += static_cast<double>(r.toc1);
    totals.push_back(static_cast<double>(r.toc));
    out.stopped += r.stopped ? 1 : 0;
    if (bound && (!r.stopped || static_cast<double>(r.toc) > *bound)) ++out.exceed_count;
  }
  const double reps = static_cast<double>(replications);
  out.mean_T /= reps;
  out.mean_toc0 /= reps;
  out.mean_toc1 /= reps;
  out.mean_toc = mean(totals);
  out.p50 = quantile(totals, 0.5);
  out.p95 = quantile(totals, 0.95);
  if (bound) {
    out.exceed_frac = static_cast<double>(out.exceed_count) / reps;
    out.exceed_ci = wilson_interval(out.exceed_count, replications);
  }
  return out;
}

inline void write_bound_header(std::ostream& out) {
  out << "epsilon,n,gamma,bound_expected,bound_highprob,failure_prob,mc_mean,mc_p50,mc_p95,exceed_frac\n";
}

inline void write_bound_row(std::ostream& out, double epsilon, const ComplexityReport& report,
                            const TocSummary& mc) {
  out << csv::real(epsilon) << ',' << static_cast<std::size_t>(report.expected.input("n")) << ','
      << csv::real(report.expected.input("gamma")) << ',' << csv::real(report.expected.value) << ','
      << csv::real(report.high_probability.value) << ',' << csv::real(report.high_probability.failure_prob) << ','
      << csv::real(mc.mean_toc) << ',' << csv::real(mc.p50) << ',' << csv::real(mc.p95) << ','
      << csv::real(mc.exceed_frac) << '\n';
}

}  // namespace adastoch
