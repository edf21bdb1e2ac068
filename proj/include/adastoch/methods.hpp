#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include <Eigen/Cholesky>

#include "adastoch/error.hpp"
#include "adastoch/oracles.hpp"
#include "adastoch/problems.hpp"

namespace adastoch {

// Trial step s(alpha) with the model decrease m(x) - m(x + s) >= 0.
// `directional` caches g^T s for the step-search test.
struct StepProposal {
  Vector step;
  double model_reduction = 0.0;
  double grad_estimate_norm = 0.0;
  double directional = 0.0;
};

namespace detail {
inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw NumericError(std::string(what) + " is not finite");
}
}  // namespace detail

// s = -alpha H^{-1} g; model m(x+s) = phi + g^T s + s^T H s / (2 alpha),
// so the reduction is (alpha / 2) g^T H^{-1} g.
inline StepProposal sass_step(const Vector& g, const Matrix& H, double alpha) {
  detail::require(alpha > 0.0, "sass_step: alpha must be positive");
  detail::require(H.rows() == g.size() && H.cols() == g.size(), "sass_step: H and g dimensions differ");
  const Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) throw NumericError("sass_step: H is not positive definite");
  const Vector hinv_g = llt.solve(g);
  StepProposal out;
  out.step = -alpha * hinv_g;
  out.directional = g.dot(out.step);
  out.model_reduction = 0.5 * alpha * g.dot(hinv_g);
  out.grad_estimate_norm = g.norm();
  return out;
}

inline StepProposal sass_step(const Vector& g, double alpha) {
  detail::require(alpha > 0.0, "sass_step: alpha must be positive");
  StepProposal out;
  out.step = -alpha * g;
  out.directional = g.dot(out.step);
  out.model_reduction = 0.5 * alpha * g.squaredNorm();
  out.grad_estimate_norm = g.norm();
  return out;
}

// Sufficient reduction f0 - f+ >= -theta g^T s - r, accepting on equality.
inline bool sass_accept(double f0, double fplus, double g_dot_s, double theta, double r) {
  detail::require_finite(f0, "sass_accept: f0");
  detail::require_finite(fplus, "sass_accept: fplus");
  detail::require_finite(g_dot_s, "sass_accept: g^T s");
  return f0 - fplus >= -theta * g_dot_s - r;
}

inline bool sass_accept(double f0, double fplus, const Vector& g, const Vector& step, double theta, double r) {
  return sass_accept(f0, fplus, g.dot(step), theta, r);
}

// Exact minimiser of the linear model over the ball |s| <= alpha.
inline StepProposal storm_step(const Vector& g, double alpha) {
  detail::require(alpha > 0.0, "storm_step: alpha must be positive");
  StepProposal out;
  const double norm = g.norm();
  out.grad_estimate_norm = norm;
  if (norm == 0.0) {
    out.step = Vector::Zero(g.size());
    return out;
  }
  out.step = (-alpha / norm) * g;
  out.model_reduction = alpha * norm;
  out.directional = -out.model_reduction;
  return out;
}

// Ratio test plus |g| >= theta2 alpha; a zero model reduction always rejects.
inline bool storm_accept(double f0, double fplus, double model_reduction, double theta, double grad_norm,
                         double theta2, double alpha, double r) {
  if (!(model_reduction > 0.0)) return false;
  return (f0 - fplus + r) / model_reduction >= theta && grad_norm >= theta2 * alpha;
}

// Parameters of the acceptance tests shared by both methods.
struct AcceptanceParams {
  double theta = 0.1;
  double r = 0.0;
  double theta2 = 1.0;
};

// Step search with a fixed positive-definite scaling H (identity when empty).
struct Sass {
  std::optional<Matrix> H;

  static constexpr std::string_view name() { return "sass"; }
  static constexpr OracleContract contract() { return OracleContract::step_search; }

  StepProposal propose(const Vector& g, double alpha) const { return H ? sass_step(g, *H, alpha) : sass_step(g, alpha); }

  bool accept(double f0, double fplus, const StepProposal& s, double /*alpha*/, const AcceptanceParams& a) const {
    return sass_accept(f0, fplus, s.directional, a.theta, a.r);
  }
};

// First-order trust region with the linear model (H = 0).
struct Storm {
  static constexpr std::string_view name() { return "storm"; }
  static constexpr OracleContract contract() { return OracleContract::trust_region_first_order; }

  StepProposal propose(const Vector& g, double alpha) const { return storm_step(g, alpha); }

  bool accept(double f0, double fplus, const StepProposal& s, double alpha, const AcceptanceParams& a) const {
    return storm_accept(f0, fplus, s.model_reduction, a.theta, s.grad_estimate_norm, a.theta2, alpha, a.r);
  }
};

using Method = std::variant<Sass, Storm>;

inline std::string_view method_name(const Method& m) {
  return std::visit([](const auto& x) { return x.name(); }, m);
}

}  // namespace adastoch
