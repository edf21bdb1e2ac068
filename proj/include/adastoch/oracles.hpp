#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "adastoch/csv.hpp"
#include "adastoch/error.hpp"
#include "adastoch/problems.hpp"
#include "adastoch/random.hpp"
#include "adastoch/stats.hpp"

namespace adastoch {

// Which accuracy/reliability contracts an oracle suite is sized for.
enum class OracleContract { step_search, trust_region_first_order };

inline std::string_view to_string(OracleContract c) {
  return c == OracleContract::step_search ? "step_search" : "trust_region_first_order";
}

// Parameters of the step-search zeroth/first-order oracle contracts.
// Cost formulas assume tau >= kappa * alpha_bar.
struct SassOracleSpec {
  double eps_f = 0.0;
  double lambda = std::numeric_limits<double>::infinity();  // subexponential tail rate
  double eps_g = 0.0;
  double kappa = 1.0;
  double tau = 10.0;
  double delta1 = 0.1;

  void validate() const {
    detail::require(eps_f >= 0.0 && eps_g >= 0.0, "SassOracleSpec: eps_f and eps_g must be nonnegative");
    detail::require(lambda > 0.0, "SassOracleSpec: lambda must be positive");
    detail::require(kappa > 0.0 && tau > 0.0, "SassOracleSpec: kappa and tau must be positive");
    detail::require(delta1 >= 0.0 && delta1 < 1.0, "SassOracleSpec: delta1 must lie in [0,1)");
  }

  // Noise-compensation constant 2 eps_f + (2 / lambda) log 4.
  double recommended_r() const {
    return 2.0 * eps_f + (std::isinf(lambda) ? 0.0 : 2.0 / lambda * std::log(4.0));
  }

  // For Gaussian value noise averaged over `batch` samples the error is
  // N(0, s^2) with s = sigma_f / sqrt(batch); P(|err| >= s + t) <= exp(-t / s),
  // so eps_f = s and lambda = 1 / s.
  SassOracleSpec with_value_noise(double sigma_f, std::int64_t batch) const {
    detail::require(batch >= 1, "with_value_noise: batch must be >= 1");
    SassOracleSpec out = *this;
    const double s = sigma_f / std::sqrt(static_cast<double>(batch));
    out.eps_f = s;
    out.lambda = s > 0.0 ? 1.0 / s : std::numeric_limits<double>::infinity();
    return out;
  }
};

// Parameters of the first-order trust-region oracle contracts (zeroth: kappa_ef
// alpha^2 accuracy w.p. 1 - delta0; first: kappa_eg alpha w.p. 1 - delta1).
struct StormOracleSpec {
  double kappa_ef = 1.0;
  double delta0 = 0.05;
  double kappa_eg = 1.0;
  double delta1 = 0.05;
  double sigma_f = 1.0;
  double sigma_g = 1.0;

  void validate() const {
    detail::require(kappa_ef > 0.0 && kappa_eg > 0.0, "StormOracleSpec: kappa_ef and kappa_eg must be positive");
    detail::require(delta0 > 0.0 && delta1 > 0.0, "StormOracleSpec: delta0 and delta1 must be positive");
    detail::require(delta0 + delta1 < 0.5, "StormOracleSpec: delta0 + delta1 must be < 1/2");
    detail::require(sigma_f >= 0.0 && sigma_g >= 0.0, "StormOracleSpec: sigma_f and sigma_g must be nonnegative");
  }

  double success_probability() const { return 1.0 - delta0 - delta1; }
};

namespace detail {

// Ceiling that ignores floating-point fuzz just above an integer
// (1 / (0.1 * 0.0625) evaluates to 160.00000000000003).
inline double ceil_count(double x) {
  if (!(x < 0x1.0p53)) return x;
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, r)) return std::max(1.0, r);
  return std::max(1.0, std::ceil(x));
}

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

}  // namespace detail

// Per-call oracle cost oc(alpha): a minibatch size, ceiled and floored at one.
// `evaluate` works in the linear domain and may return +inf; `log_evaluate`
// takes log(alpha) and stays finite for step sizes far below double range,
// which the complexity sums need (alpha_bar * gamma^l for l up to n).
struct CostModel {
  std::function<double(double)> evaluate;
  std::function<double(double)> log_evaluate;
  bool monotone = true;
  std::string name;

  // Integer batch for an actual oracle call.
  std::int64_t batch(double alpha) const {
    const double b = evaluate(alpha);
    if (!(b <= 0x1.0p53)) throw NumericError("batch size " + csv::real(b) + " exceeds the representable range");
    return static_cast<std::int64_t>(b);
  }

  // Model whose log-cost formula is log_formula(log alpha), before ceiling.
  static CostModel from_log_formula(std::function<double(double)> log_formula, std::string name,
                                    bool monotone = true) {
    CostModel m;
    m.name = std::move(name);
    m.monotone = monotone;
    m.evaluate = [f = log_formula](double alpha) {
      detail::require(alpha > 0.0, "cost model: alpha must be positive");
      return detail::ceil_count(std::exp(f(std::log(alpha))));
    };
    m.log_evaluate = [f = std::move(log_formula)](double log_alpha) {
      const double raw = f(log_alpha);
      if (raw > 700.0) return raw;
      return std::log(detail::ceil_count(std::exp(raw)));
    };
    return m;
  }

  static CostModel constant(double cost) {
    detail::require(cost >= 0.0 && std::isfinite(cost), "constant cost must be finite and nonnegative");
    const double l = detail::safe_log(cost);
    return from_log_formula([l](double) { return l; }, "constant");
  }

  // sum_i weight_i * model_i, each already ceiled.
  static CostModel combine(std::span<const std::pair<double, CostModel>> parts, std::string name) {
    CostModel m;
    m.name = std::move(name);
    std::vector<std::pair<double, CostModel>> owned(parts.begin(), parts.end());
    for (const auto& [w, part] : owned) {
      detail::require(w >= 0.0, "combine: weights must be nonnegative");
      m.monotone = m.monotone && part.monotone;
    }
    m.evaluate = [owned](double alpha) {
      double total = 0.0;
      for (const auto& [w, part] : owned) total += w * part.evaluate(alpha);
      return total;
    };
    m.log_evaluate = [owned](double log_alpha) {
      double total = -std::numeric_limits<double>::infinity();
      for (const auto& [w, part] : owned) total = detail::log_add(total, detail::safe_log(w) + part.log_evaluate(log_alpha));
      return total;
    };
    return m;
  }
};

struct BatchSizes {
  std::int64_t oc0 = 1;
  std::int64_t oc1 = 1;
};

// Chebyshev-sized minibatch costs: sigma_f^2 / (delta0 kappa_ef^2 alpha^4) and
// sigma_g^2 / (delta1 kappa_eg^2 alpha^2).
inline CostModel storm_value_cost(const StormOracleSpec& spec) {
  spec.validate();
  const double base = 2.0 * detail::safe_log(spec.sigma_f) - std::log(spec.delta0) - 2.0 * std::log(spec.kappa_ef);
  return CostModel::from_log_formula([base](double la) { return base - 4.0 * la; }, "storm_oc0");
}

inline CostModel storm_gradient_cost(const StormOracleSpec& spec) {
  spec.validate();
  const double base = 2.0 * detail::safe_log(spec.sigma_g) - std::log(spec.delta1) - 2.0 * std::log(spec.kappa_eg);
  return CostModel::from_log_formula([base](double la) { return base - 2.0 * la; }, "storm_oc1");
}

inline BatchSizes storm_batch_sizes(double alpha, const StormOracleSpec& spec) {
  detail::require(alpha > 0.0, "storm_batch_sizes: alpha must be positive");
  return {storm_value_cost(spec).batch(alpha), storm_gradient_cost(spec).batch(alpha)};
}

// Step-search minibatch costs with explicit multiplier C on the hidden constants.
// Zeroth order: C sigma_f^2 / eps^4 (nonconvex) or C sigma_f^2 / eps^2 (strongly convex),
// independent of alpha. First order: C (M_c / eps^2 + M_v / min(tau, kappa alpha)^2),
// with eps^2 replaced by eps in the strongly convex case.
inline CostModel sass_value_cost(double epsilon, const NoiseSpec& noise, Optimality which, double C = 1.0) {
  detail::require(epsilon > 0.0, "sass cost: epsilon must be positive");
  detail::require(C > 0.0, "sass cost: C must be positive");
  const double power = which == Optimality::nonconvex ? 4.0 : 2.0;
  const double l = std::log(C) + 2.0 * detail::safe_log(noise.sigma_f) - power * std::log(epsilon);
  return CostModel::from_log_formula([l](double) { return l; }, "sass_oc0");
}

inline CostModel sass_gradient_cost(double epsilon, const SassOracleSpec& spec, const NoiseSpec& noise,
                                    Optimality which, double C = 1.0) {
  detail::require(epsilon > 0.0, "sass cost: epsilon must be positive");
  detail::require(C > 0.0, "sass cost: C must be positive");
  spec.validate();
  const double power = which == Optimality::nonconvex ? 2.0 : 1.0;
  const double constant_part = detail::safe_log(noise.M_c) - power * std::log(epsilon);
  const double log_mv = detail::safe_log(noise.M_v);
  const double log_tau = std::log(spec.tau);
  const double log_kappa = std::log(spec.kappa);
  const double log_c = std::log(C);
  return CostModel::from_log_formula(
      [=](double la) {
        const double radius = std::min(log_tau, log_kappa + la);
        return log_c + detail::log_add(constant_part, log_mv - 2.0 * radius);
      },
      "sass_oc1");
}

inline BatchSizes sass_batch_sizes(double alpha, double epsilon, const SassOracleSpec& spec, const NoiseSpec& noise,
                                   Optimality which, double C = 1.0) {
  detail::require(alpha > 0.0, "sass_batch_sizes: alpha must be positive");
  detail::require(epsilon > 0.0, "sass_batch_sizes: epsilon must be positive");
  return {sass_value_cost(epsilon, noise, which, C).batch(alpha),
          sass_gradient_cost(epsilon, spec, noise, which, C).batch(alpha)};
}

// Batches at or below this size are averaged sample by sample; larger ones are
// drawn from the exact law of the sample mean (see Problem::sample_mean_loss).
inline constexpr std::int64_t kExplicitBatchLimit = 256;

// Arithmetic mean of `batch` values produced by draw().
template <class Draw>
auto minibatch_mean(std::int64_t batch, Draw&& draw) {
  detail::require(batch >= 1, "minibatch: batch must be >= 1");
  // Running mean: identical draws reproduce their value exactly.
  auto m = draw();
  for (std::int64_t i = 1; i < batch; ++i) {
    const decltype(m) d = draw() - m;
    m += d / static_cast<double>(i + 1);
  }
  return m;
}

inline double minibatch_value(const Problem& problem, const Vector& x, std::int64_t batch, Rng& rng) {
  detail::require(batch >= 1, "minibatch_value: batch must be >= 1");
  if (batch > kExplicitBatchLimit) return problem.sample_mean_loss(x, batch, rng);
  return minibatch_mean(batch, [&] { return problem.sample_loss(x, rng); });
}

inline Vector minibatch_grad(const Problem& problem, const Vector& x, std::int64_t batch, Rng& rng) {
  detail::require(batch >= 1, "minibatch_grad: batch must be >= 1");
  if (batch > kExplicitBatchLimit) return problem.sample_mean_grad(x, batch, rng);
  return minibatch_mean(batch, [&]() -> Vector { return problem.sample_grad(x, rng); });
}

// Oracle-level Bernoulli corruption used to realise failure probabilities
// exactly. With probability delta0 the value pair (f0, f+) is pushed apart by
// value_shift in the direction that rejects the step; with probability delta1
// the gradient estimate is replaced by -gradient_shift * grad phi(x).
struct Corruption {
  double delta0 = 0.0;
  double delta1 = 0.0;
  double value_shift = 1e6;
  double gradient_shift = 1.0;

  void validate() const {
    detail::require(delta0 >= 0.0 && delta0 <= 1.0 && delta1 >= 0.0 && delta1 <= 1.0,
                    "Corruption: probabilities must lie in [0,1]");
    detail::require(value_shift >= 0.0 && gradient_shift > 0.0, "Corruption: shifts must be positive");
  }

  // Probability that neither oracle is corrupted in one iteration.
  double clean_probability() const { return (1.0 - delta0) * (1.0 - delta1); }
};

struct ValueEstimate {
  double value = 0.0;
  std::int64_t cost = 0;
};

struct ValuePairEstimate {
  double f0 = 0.0;
  double fplus = 0.0;
  std::int64_t cost = 0;
};

struct GradientEstimate {
  Vector value;
  std::int64_t cost = 0;
};

// Zeroth- and first-order minibatch oracles with alpha-dependent batch sizes.
class OracleSuite {
 public:
  OracleSuite(OracleContract contract, CostModel value_cost, CostModel gradient_cost,
              std::optional<Corruption> corruption = std::nullopt)
      : contract_(contract),
        value_cost_(std::move(value_cost)),
        gradient_cost_(std::move(gradient_cost)),
        corruption_(corruption) {
    if (corruption_) corruption_->validate();
  }

  // Batch size one for both oracles: exact on zero-noise problems.
  static OracleSuite single_sample(OracleContract contract) {
    return {contract, CostModel::constant(1.0), CostModel::constant(1.0)};
  }

  static OracleSuite storm(const StormOracleSpec& spec) {
    return {OracleContract::trust_region_first_order, storm_value_cost(spec), storm_gradient_cost(spec)};
  }

  static OracleSuite sass(double epsilon, const SassOracleSpec& spec, const NoiseSpec& noise, Optimality which,
                          double C = 1.0) {
    return {OracleContract::step_search, sass_value_cost(epsilon, noise, which, C),
            sass_gradient_cost(epsilon, spec, noise, which, C)};
  }

  OracleSuite with_corruption(const Corruption& c) const {
    OracleSuite s = *this;
    c.validate();
    s.corruption_ = c;
    return s;
  }

  OracleContract contract() const { return contract_; }
  const CostModel& value_cost() const { return value_cost_; }
  const CostModel& gradient_cost() const { return gradient_cost_; }
  const std::optional<Corruption>& corruption() const { return corruption_; }

  // Realised samples per iteration: two value estimates and one gradient.
  CostModel per_iteration_cost() const {
    const std::pair<double, CostModel> parts[] = {{2.0, value_cost_}, {1.0, gradient_cost_}};
    return CostModel::combine(parts, "per_iteration");
  }

  ValueEstimate value(const Problem& problem, const Vector& x, double alpha, Rng& rng) const {
    const auto b = value_cost_.batch(alpha);
    double f = minibatch_value(problem, x, b, rng);
    if (corruption_ && bernoulli(rng, corruption_->delta0)) f += corruption_->value_shift;
    return {f, b};
  }

  ValuePairEstimate value_pair(const Problem& problem, const Vector& x, const Vector& xplus, double alpha,
                               Rng& rng) const {
    const auto b = value_cost_.batch(alpha);
    ValuePairEstimate out{minibatch_value(problem, x, b, rng), minibatch_value(problem, xplus, b, rng), 2 * b};
    if (corruption_ && bernoulli(rng, corruption_->delta0)) {
      out.f0 -= corruption_->value_shift;
      out.fplus += corruption_->value_shift;
    }
    return out;
  }

  GradientEstimate gradient(const Problem& problem, const Vector& x, double alpha, Rng& rng) const {
    const auto b = gradient_cost_.batch(alpha);
    Vector g = minibatch_grad(problem, x, b, rng);
    if (corruption_ && bernoulli(rng, corruption_->delta1)) g = -corruption_->gradient_shift * problem.gradient(x);
    return {std::move(g), b};
  }

 private:
  OracleContract contract_;
  CostModel value_cost_;
  CostModel gradient_cost_;
  std::optional<Corruption> corruption_;
};

// Accuracy inequality of one oracle contract, checked against ground truth.
struct AccuracyCheck {
  enum class Kind { tr_value, tr_gradient, ss_value, ss_gradient };
  Kind kind = Kind::tr_gradient;
  double kappa = 1.0;
  double eps = 0.0;
  double tau = std::numeric_limits<double>::infinity();
  double t = 0.0;

  // |f - phi| <= kappa_ef alpha^2
  static AccuracyCheck trust_region_value(double kappa_ef) { return {Kind::tr_value, kappa_ef}; }
  // |g - grad phi| <= eps_g + kappa_eg alpha
  static AccuracyCheck trust_region_gradient(double kappa_eg, double eps_g = 0.0) {
    return {Kind::tr_gradient, kappa_eg, eps_g};
  }
  // |phi - f| < eps_f + t
  static AccuracyCheck step_search_value(double eps_f, double t) {
    AccuracyCheck c{Kind::ss_value};
    c.eps = eps_f;
    c.t = t;
    return c;
  }
  // |g - grad phi| <= max(eps_g, min(tau, kappa alpha) |g|)
  static AccuracyCheck step_search_gradient(double eps_g, double kappa, double tau) {
    return {Kind::ss_gradient, kappa, eps_g, tau};
  }

  bool is_value_check() const { return kind == Kind::tr_value || kind == Kind::ss_value; }

  bool value_violated(double estimate, double truth, double alpha) const {
    const double err = std::abs(estimate - truth);
    if (kind == Kind::tr_value) return !(err <= kappa * alpha * alpha);
    return !(err < eps + t);
  }

  bool gradient_violated(const Vector& estimate, const Vector& truth, double alpha) const {
    const double err = (estimate - truth).norm();
    if (kind == Kind::tr_gradient) return !(err <= eps + kappa * alpha);
    return !(err <= std::max(eps, std::min(tau, kappa * alpha) * estimate.norm()));
  }
};

struct FailureRate {
  double rate = 0.0;
  std::size_t failures = 0;
  std::size_t trials = 0;
  Interval ci;
};

// Fraction of independent oracle calls at (x, alpha) violating `check`.
// Trial i draws from stream (master_seed, i).
inline FailureRate empirical_oracle_failure_rate(const OracleSuite& suite, const AccuracyCheck& check,
                                                 const Problem& problem, const Vector& x, double alpha,
                                                 std::size_t trials, std::uint64_t master_seed) {
  detail::require(trials >= 1, "empirical_oracle_failure_rate: trials must be >= 1");
  detail::require(alpha > 0.0, "empirical_oracle_failure_rate: alpha must be positive");
  const double phi = problem.value(x);
  const Vector grad = problem.gradient(x);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng = make_stream(master_seed, i);
    const bool bad = check.is_value_check()
                         ? check.value_violated(suite.value(problem, x, alpha, rng).value, phi, alpha)
                         : check.gradient_violated(suite.gradient(problem, x, alpha, rng).value, grad, alpha);
    failures += bad ? 1 : 0;
  }
  return {static_cast<double>(failures) / static_cast<double>(trials), failures, trials,
          wilson_interval(failures, trials)};
}

// CSV `alpha,oc0,oc1` over a log-spaced grid of step sizes.
inline void write_cost_table(std::ostream& out, const CostModel& value_cost, const CostModel& gradient_cost,
                             double alpha_min, double alpha_max, std::size_t points) {
  detail::require(alpha_min > 0.0 && alpha_max >= alpha_min, "write_cost_table: invalid alpha range");
  detail::require(points >= 2, "write_cost_table: need at least two points");
  out << "alpha,oc0,oc1\n";
  const double la = std::log(alpha_min);
  const double lb = std::log(alpha_max);
  for (std::size_t i = 0; i < points; ++i) {
    const double alpha = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(points - 1));
    out << csv::real(alpha) << ',' << csv::real(value_cost.evaluate(alpha)) << ','
        << csv::real(gradient_cost.evaluate(alpha)) << '\n';
  }
}

}  // namespace adastoch
