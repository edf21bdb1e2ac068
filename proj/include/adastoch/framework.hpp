#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "adastoch/csv.hpp"
#include "adastoch/error.hpp"
#include "adastoch/methods.hpp"
#include "adastoch/oracles.hpp"
#include "adastoch/problems.hpp"
#include "adastoch/random.hpp"

namespace adastoch {

inline constexpr std::size_t kDefaultMaxIterations = 1'000'000;

struct AlgoConfig {
  double theta = 0.1;
  double gamma = 0.5;
  double alpha_max = 1.0;  // may be +inf for step search
  double alpha0 = 1.0;
  double r = 0.0;
  double theta2 = 1.0;
  std::size_t max_iterations = kDefaultMaxIterations;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(theta > 0.0 && theta < 1.0, "AlgoConfig: theta must lie in (0,1)");
    detail::require(gamma > 0.0 && gamma < 1.0, "AlgoConfig: gamma must lie in (0,1)");
    detail::require(alpha0 > 0.0 && std::isfinite(alpha0), "AlgoConfig: alpha0 must be positive and finite");
    detail::require(alpha0 <= alpha_max, "AlgoConfig: alpha0 must not exceed alpha_max");
    detail::require(r >= 0.0 && std::isfinite(r), "AlgoConfig: r must be finite and nonnegative");
    detail::require(theta2 >= 0.0, "AlgoConfig: theta2 must be nonnegative");
    detail::require(max_iterations >= 1, "AlgoConfig: max_iterations must be positive");
  }

  AcceptanceParams acceptance() const { return {theta, r, theta2}; }
};

// min(alpha_max, alpha / gamma) on success, gamma * alpha on failure.
inline double update_step_size(double alpha, bool success, double gamma, double alpha_max) {
  detail::require(alpha > 0.0, "update_step_size: alpha must be positive");
  detail::require(gamma > 0.0 && gamma < 1.0, "update_step_size: gamma must lie in (0,1)");
  return success ? std::min(alpha_max, alpha / gamma) : gamma * alpha;
}

// alpha = anchor * gamma^exponent. The anchor is alpha0 until the first cap,
// then alpha_max; the integer exponent makes the update law checkable exactly.
struct StepSize {
  double anchor = 1.0;
  std::int64_t exponent = 0;

  double value(double gamma) const { return anchor * std::pow(gamma, static_cast<double>(exponent)); }

  void advance(bool success, double gamma, double alpha_max) {
    if (!success) {
      ++exponent;
    } else if (anchor * std::pow(gamma, static_cast<double>(exponent - 1)) >= alpha_max) {
      anchor = alpha_max;
      exponent = 0;
    } else {
      --exponent;
    }
  }
};

struct IterationRecord {
  std::size_t k = 0;
  double alpha = 0.0;
  bool success = false;
  std::int64_t cost0 = 0;
  std::int64_t cost1 = 0;
  double true_grad_norm = 0.0;
  double true_gap = std::numeric_limits<double>::quiet_NaN();  // NaN when inf phi is unknown
  std::int64_t exponent = 0;
  double anchor = 0.0;
};

struct StoppingRule {
  double epsilon = 1e-3;
  Optimality measure = Optimality::nonconvex;
};

// Records k = 0..K-1 are executed iterations; the last record is the state at
// the stopping index (or at max_iterations) and carries no cost.
struct RunTrace {
  std::vector<IterationRecord> records;
  std::optional<std::size_t> stopping_iteration;
  AlgoConfig config;
  double epsilon = 0.0;
  Optimality measure = Optimality::nonconvex;

  std::int64_t total_cost0() const {
    std::int64_t s = 0;
    for (const auto& r : records) s += r.cost0;
    return s;
  }
  std::int64_t total_cost1() const {
    std::int64_t s = 0;
    for (const auto& r : records) s += r.cost1;
    return s;
  }
  // Number of iterations executed (records minus the terminal state).
  std::size_t iterations() const { return records.empty() ? 0 : records.size() - 1; }
};

inline void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "k,alpha,success,cost0,cost1,true_grad_norm,true_gap\n";
  for (const auto& r : trace.records) {
    out << r.k << ',' << csv::real(r.alpha) << ',' << (r.success ? 1 : 0) << ',' << r.cost0 << ',' << r.cost1 << ','
        << csv::real(r.true_grad_norm) << ',' << csv::real(r.true_gap) << '\n';
  }
}

// First index whose ground-truth optimality measure is at most epsilon.
inline std::optional<std::size_t> stopping_time(std::span<const IterationRecord> records, double epsilon,
                                                Optimality measure) {
  detail::require(epsilon > 0.0, "stopping_time: epsilon must be positive");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (measure == Optimality::nonconvex) {
      if (records[i].true_grad_norm <= epsilon) return records[i].k;
    } else {
      if (std::isnan(records[i].true_gap)) throw MissingGroundTruth("stopping_time: optimality gap needs inf phi");
      if (records[i].true_gap <= epsilon) return records[i].k;
    }
  }
  return std::nullopt;
}

inline std::optional<std::size_t> stopping_time(const RunTrace& trace, double epsilon, Optimality measure) {
  return stopping_time(std::span<const IterationRecord>(trace.records), epsilon, measure);
}

namespace detail {

inline void require_finite_oracle(double x, std::size_t k, const char* what) {
  if (!std::isfinite(x)) throw NumericError("iteration " + std::to_string(k) + ": non-finite " + what);
}

}  // namespace detail

// Adaptive loop: gradient estimate, trial step, two value estimates, accept
// test, step-size update. Every oracle call uses fresh samples. The optimiser
// never reads the ground-truth fields; they only drive the stopping index.
template <class M>
RunTrace run_adaptive(const Problem& problem, const M& method, const OracleSuite& oracles, const AlgoConfig& config,
                      const StoppingRule& rule) {
  config.validate();
  detail::require(rule.epsilon > 0.0, "run_adaptive: epsilon must be positive");
  if (method.contract() != oracles.contract()) {
    throw ConfigurationError("method " + std::string(method.name()) + " needs " +
                             std::string(to_string(method.contract())) + " oracles, got " +
                             std::string(to_string(oracles.contract())));
  }
  const auto inf_phi = problem.known_min_value();
  if (rule.measure == Optimality::strongly_convex && !inf_phi) {
    throw MissingGroundTruth("run_adaptive: the optimality-gap rule needs a known minimum value");
  }

  RunTrace trace;
  trace.config = config;
  trace.epsilon = rule.epsilon;
  trace.measure = rule.measure;

  Rng rng = make_stream(config.seed, 0);
  Vector x = problem.x0();
  StepSize alpha{config.alpha0, 0};
  const AcceptanceParams acceptance = config.acceptance();

  for (std::size_t k = 0;; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.alpha = alpha.value(config.gamma);
    rec.exponent = alpha.exponent;
    rec.anchor = alpha.anchor;
    rec.true_grad_norm = problem.gradient(x).norm();
    rec.true_gap = inf_phi ? problem.value(x) - *inf_phi : std::numeric_limits<double>::quiet_NaN();

    const bool done = rule.measure == Optimality::nonconvex ? rec.true_grad_norm <= rule.epsilon
                                                            : rec.true_gap <= rule.epsilon;
    if (done || k == config.max_iterations) {
      if (done) trace.stopping_iteration = k;
      trace.records.push_back(rec);
      return trace;
    }

    const auto g = oracles.gradient(problem, x, rec.alpha, rng);
    for (Eigen::Index i = 0; i < g.value.size(); ++i) detail::require_finite_oracle(g.value[i], k, "gradient estimate");
    const StepProposal proposal = method.propose(g.value, rec.alpha);
    const Vector xplus = x + proposal.step;
    const auto f = oracles.value_pair(problem, x, xplus, rec.alpha, rng);
    detail::require_finite_oracle(f.f0, k, "value estimate at x");
    detail::require_finite_oracle(f.fplus, k, "value estimate at x + s");

    rec.success = method.accept(f.f0, f.fplus, proposal, rec.alpha, acceptance);
    rec.cost0 = f.cost;
    rec.cost1 = g.cost;
    trace.records.push_back(rec);

    if (rec.success) x = xplus;
    alpha.advance(rec.success, config.gamma, config.alpha_max);
  }
}

inline RunTrace run_adaptive(const Problem& problem, const Method& method, const OracleSuite& oracles,
                             const AlgoConfig& config, const StoppingRule& rule) {
  return std::visit([&](const auto& m) { return run_adaptive(problem, m, oracles, config, rule); }, method);
}

// Fraction of successful iterations among those with k < T and alpha_k <= alpha_bar.
// p_hat is empty when no iteration qualifies.
struct SuccessEstimate {
  std::optional<double> p_hat;
  std::size_t successes = 0;
  std::size_t count = 0;
};

inline SuccessEstimate empirical_success_probability(std::span<const RunTrace> traces, double alpha_bar) {
  detail::require(alpha_bar > 0.0, "empirical_success_probability: alpha_bar must be positive");
  const double limit = alpha_bar * (1.0 + 1e-12);
  SuccessEstimate out;
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.iterations(); ++i) {
      const auto& r = t.records[i];
      if (r.alpha > limit) continue;
      ++out.count;
      out.successes += r.success ? 1 : 0;
    }
  }
  if (out.count > 0) out.p_hat = static_cast<double>(out.successes) / static_cast<double>(out.count);
  return out;
}

}  // namespace adastoch
