#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adastoch/error.hpp"
#include "adastoch/framework.hpp"
#include "adastoch/random.hpp"

namespace adastoch {

// One-sided walk parameters. p = 1 is admitted as the noiseless limit.
struct WalkParams {
  double p = 0.8;
  double gamma = 0.5;
  double alpha_bar = 1.0;
  double omega = 1.0;

  void validate() const {
    detail::require(p > 0.5 && p <= 1.0, "WalkParams: p must lie in (1/2, 1]");
    detail::require(gamma > 0.0 && gamma < 1.0, "WalkParams: gamma must lie in (0,1)");
    detail::require(alpha_bar > 0.0 && std::isfinite(alpha_bar), "WalkParams: alpha_bar must be positive");
    detail::require(omega > 0.0, "WalkParams: omega must be positive");
  }

  double q() const { return 1.0 - p; }
  double c() const { return walk_constant(p); }

  // 2 sqrt(pq) / (1 - 2 sqrt(pq))^2
  static double walk_constant(double p) {
    detail::require(p > 0.5 && p <= 1.0, "walk constant: p must lie in (1/2, 1]");
    const double s = 2.0 * std::sqrt(p * (1.0 - p));
    return s / ((1.0 - s) * (1.0 - s));
  }
};

// Z_0 = 0, |Z_{k+1} - Z_k| <= 1, Z_k >= 0.
struct WalkPath {
  std::vector<std::int64_t> states;
};

// Down (or hold at zero) with probability p, up otherwise.
inline std::int64_t walk_step(std::int64_t z, double p, Rng& rng) {
  return bernoulli(rng, p) ? std::max<std::int64_t>(z - 1, 0) : z + 1;
}

inline WalkPath simulate_walk(double p, std::size_t n, Rng& rng) {
  detail::require(p >= 0.0 && p <= 1.0, "simulate_walk: p must lie in [0,1]");
  detail::require(n >= 1, "simulate_walk: n must be positive");
  WalkPath path;
  path.states.resize(n + 1);
  path.states[0] = 0;
  for (std::size_t k = 0; k < n; ++k) path.states[k + 1] = walk_step(path.states[k], p, rng);
  return path;
}

inline WalkPath simulate_walk(const WalkParams& params, std::size_t n, Rng& rng) {
  params.validate();
  return simulate_walk(params.p, n, rng);
}

// Highest level visited in Z_0..Z_n.
inline std::int64_t walk_maximum(const WalkPath& path) {
  return path.states.empty() ? 0 : *std::max_element(path.states.begin(), path.states.end());
}

// Integer exponents Y_k with alpha_k = alpha_bar * gamma^{Y_k}. alpha_bar must
// sit on the lattice anchor * gamma^j of every record.
inline std::vector<std::int64_t> exponent_path(const RunTrace& trace, double alpha_bar) {
  detail::require(alpha_bar > 0.0, "exponent_path: alpha_bar must be positive");
  const double log_gamma = std::log(trace.config.gamma);
  std::vector<std::int64_t> y;
  y.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    const double shift = std::log(r.anchor / alpha_bar) / log_gamma;
    const double rounded = std::round(shift);
    if (std::abs(shift - rounded) > 1e-6) {
      throw InvalidParameter("exponent_path: alpha_bar is not of the form anchor * gamma^j");
    }
    y.push_back(r.exponent + static_cast<std::int64_t>(rounded));
  }
  return y;
}

struct CoupledPaths {
  std::vector<std::int64_t> y;
  std::vector<std::int64_t> z;
};

// Builds Z dominating Y pathwise while keeping the one-sided walk law.
//   y_trace: Y_0..Y_K from an algorithm run; success_probs[k]: probability that
//   iteration k succeeds given the past (needed where Y_k >= 0, k < T).
//   stop_index: T, after which Y continues as a walk with downward probability p.
// A step where Y does not increase (success, possibly capped) is the down event.
inline CoupledPaths couple_with_trace(std::span<const std::int64_t> y_trace, std::span<const double> success_probs,
                                      std::optional<std::size_t> stop_index, double p, std::size_t n, Rng& rng) {
  detail::require(p > 0.5 && p <= 1.0, "couple_with_trace: p must lie in (1/2, 1]");
  detail::require(n >= 1, "couple_with_trace: n must be positive");
  detail::require(!y_trace.empty(), "couple_with_trace: empty exponent path");
  const std::size_t T = stop_index.value_or(std::numeric_limits<std::size_t>::max());
  if (stop_index) {
    detail::require(y_trace.size() > *stop_index, "couple_with_trace: trace shorter than its stopping index");
  } else {
    detail::require(y_trace.size() >= n + 1, "couple_with_trace: unstopped trace shorter than the horizon");
  }

  CoupledPaths out;
  out.y.resize(n + 1);
  out.z.resize(n + 1);
  out.y[0] = y_trace[0];
  out.z[0] = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t yk = out.y[k];
    std::int64_t& zn = out.z[k + 1];
    const std::int64_t zk = out.z[k];
    if (k < T) {
      const std::int64_t dy = y_trace[k + 1] - y_trace[k];
      detail::require(dy >= -1 && dy <= 1, "couple_with_trace: exponent path jumps by more than one");
      out.y[k + 1] = y_trace[k + 1];
      if (yk <= -1) {
        zn = walk_step(zk, p, rng);
        continue;
      }
      detail::require(k < success_probs.size(), "couple_with_trace: missing success probability");
      const double pk = success_probs[k];
      if (!(pk >= p)) {
        throw CouplingInfeasible("iteration " + std::to_string(k) + ": success probability " + std::to_string(pk) +
                                 " below p = " + std::to_string(p) + " while alpha <= alpha_bar");
      }
      if (dy > 0 || bernoulli(rng, 1.0 - p / pk)) {
        zn = zk + 1;
      } else {
        zn = std::max<std::int64_t>(zk - 1, 0);
      }
    } else {
      const bool down = bernoulli(rng, p);
      out.y[k + 1] = down ? yk - 1 : yk + 1;
      zn = down ? std::max<std::int64_t>(zk - 1, 0) : zk + 1;
    }
  }
  return out;
}

// P^m_{0,l} for the walk on {0..l} that holds at l with probability q, by the
// spectral closed form. Powers of q/p, 2q and the eigenvalues are taken in log space.
inline double feller_transition_prob(double p, std::size_t l, std::size_t m) {
  detail::require(p > 0.5 && p <= 1.0, "feller_transition_prob: p must lie in (1/2, 1]");
  detail::require(l >= 1, "feller_transition_prob: l must be >= 1");
  if (m < l) return 0.0;
  const double q = 1.0 - p;
  if (q == 0.0) return 0.0;
  const double log_rho = std::log(q) - std::log(p);
  const double L = static_cast<double>(l);
  const double stationary =
      std::exp(std::log1p(-std::exp(log_rho)) - std::log1p(-std::exp((L + 1.0) * log_rho)) + L * log_rho);
  const double s = 2.0 * std::sqrt(p * q);
  const double pi = std::numbers::pi;
  double sum = 0.0;
  for (std::size_t r = 1; r <= l; ++r) {
    const double angle = pi * static_cast<double>(r) / (L + 1.0);
    const double eig = s * std::cos(angle);
    double power;
    if (m == 0) {
      power = 1.0;
    } else if (eig == 0.0) {
      power = 0.0;
    } else {
      power = std::exp(static_cast<double>(m) * std::log(std::abs(eig)));
      if (eig < 0.0 && (m % 2 == 1)) power = -power;
    }
    sum += std::sin(angle) * std::sin(angle * L) * power / (1.0 - eig);
  }
  const double prefactor = std::exp(std::log(2.0 * q / (L + 1.0)) + 0.5 * (L - 1.0) * log_rho);
  return stationary - prefactor * sum;
}

// P(walk visits level l within n steps), by propagating the distribution on
// {0..l} with l absorbing.
inline double hitting_prob_exact(double p, std::size_t l, std::size_t n) {
  detail::require(p >= 0.0 && p <= 1.0, "hitting_prob_exact: p must lie in [0,1]");
  detail::require(n >= 1, "hitting_prob_exact: n must be positive");
  if (l == 0) return 1.0;
  if (l > n) return 0.0;
  const double q = 1.0 - p;
  std::vector<double> cur(l + 1, 0.0), next(l + 1, 0.0);
  cur[0] = 1.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    next[l] = cur[l];
    next[0] += p * cur[0];
    for (std::size_t i = 0; i < l; ++i) {
      next[i + 1] += q * cur[i];
      if (i >= 1) next[i - 1] += p * cur[i];
    }
    cur.swap(next);
  }
  return cur[l];
}

// sum_{m=l}^{n} P^m_{0,l}: the union bound the closed-form estimate is derived from.
inline double hitting_prob_union_sum(double p, std::size_t l, std::size_t n) {
  detail::require(l >= 1, "hitting_prob_union_sum: l must be >= 1");
  double total = 0.0;
  for (std::size_t m = l; m <= n; ++m) total += feller_transition_prob(p, l, m);
  return total;
}

// (n-l+1)^+ (1-rho)/(1-rho^{l+1}) rho^l + c (2q)^l with rho = q/p. May exceed one.
// At l = 0 the formula gives n + 1 + c, a valid (trivial) bound.
inline double hitting_prob_bound(double p, std::size_t l, std::size_t n) {
  detail::require(p > 0.5 && p <= 1.0, "hitting_prob_bound: p must lie in (1/2, 1]");
  detail::require(n >= 1, "hitting_prob_bound: n must be positive");
  const double q = 1.0 - p;
  if (q == 0.0) return l == 0 ? static_cast<double>(n + 1) : 0.0;
  const double L = static_cast<double>(l);
  const double log_rho = std::log(q) - std::log(p);
  const double count = n + 1 >= l ? static_cast<double>(n + 1 - l) : 0.0;
  const double first =
      count * std::exp(std::log1p(-std::exp(log_rho)) - std::log1p(-std::exp((L + 1.0) * log_rho)) + L * log_rho);
  const double second = WalkParams::walk_constant(p) * std::exp(L * std::log(2.0 * q));
  return first + second;
}

struct StepSizeBound {
  double alpha_star = 0.0;
  double log_alpha_star = 0.0;
  double exponent = 0.0;  // (1 + omega) log_{1/2q}(1/gamma)
  double success_prob = 0.0;
  std::size_t level = 0;
};

// With probability >= success_prob, either T < n or alpha_k >= alpha_star for
// all k <= n; level = ceil((1 + omega) log_{1/2q} n) is never reached by Z.
inline StepSizeBound stepsize_lower_bound(const WalkParams& params, std::size_t n) {
  detail::require(params.p > 0.5, "stepsize_lower_bound: p must exceed 1/2");
  params.validate();
  detail::require(n >= 2, "stepsize_lower_bound: n must be >= 2");
  const double q = params.q();
  const double log_n = std::log(static_cast<double>(n));
  // log(1/2q) is +inf at q = 0, giving exponent 0 and level 0 (clamped to 1).
  const double log_inv_2q = q > 0.0 ? -std::log(2.0 * q) : std::numeric_limits<double>::infinity();
  StepSizeBound out;
  out.exponent = (1.0 + params.omega) * -std::log(params.gamma) / log_inv_2q;
  out.log_alpha_star = std::log(params.alpha_bar) + std::log(params.gamma) - out.exponent * log_n;
  out.alpha_star = std::exp(out.log_alpha_star);
  const double failure = std::exp(-params.omega * log_n) + params.c() * std::exp(-(1.0 + params.omega) * log_n);
  out.success_prob = std::clamp(1.0 - failure, 0.0, 1.0);
  const double a = (1.0 + params.omega) * log_n / log_inv_2q;
  out.level = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(a - 1e-12)));
  return out;
}

// Smallest gamma (at least 1/2) for which alpha_star(n) >= beta * alpha_bar.
inline double gamma_threshold(double p, std::size_t n, double omega, double beta) {
  detail::require(p > 0.5 && p <= 1.0, "gamma_threshold: p must lie in (1/2, 1]");
  detail::require(n >= 2, "gamma_threshold: n must be >= 2");
  detail::require(omega > 0.0, "gamma_threshold: omega must be positive");
  detail::require(beta > 0.0 && beta < 0.5, "gamma_threshold: beta must lie in (0, 1/2)");
  const double q = 1.0 - p;
  if (q == 0.0) return 0.5;
  const double log_inv_2q = -std::log(2.0 * q);
  const double power = std::log(2.0 * beta) / ((1.0 + omega) * std::log(static_cast<double>(n)));
  return std::max(0.5, std::exp(power * log_inv_2q));
}

// alpha_bar * gamma^{max_{j<=k} Z_j}: the smallest step size the walk allows up to k.
inline std::vector<double> min_step_so_far(const WalkPath& path, const WalkParams& params) {
  std::vector<double> out(path.states.size());
  std::int64_t top = 0;
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    top = std::max(top, path.states[k]);
    out[k] = params.alpha_bar * std::pow(params.gamma, static_cast<double>(top));
  }
  return out;
}

}  // namespace adastoch
