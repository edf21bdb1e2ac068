#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "adastoch/csv.hpp"
#include "adastoch/error.hpp"
#include "adastoch/random.hpp"

namespace adastoch {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ProblemKind { quadratic, logistic_synthetic };

// Which optimality measure defines the stopping time: gradient norm (nonconvex)
// or optimality gap (strongly convex).
enum class Optimality { nonconvex, strongly_convex };
enum class NoiseDistribution { gaussian, bernoulli_corruption };

inline std::string_view to_string(ProblemKind kind) {
  return kind == ProblemKind::quadratic ? "quadratic" : "logistic_synthetic";
}

inline std::string_view to_string(Optimality o) {
  return o == Optimality::nonconvex ? "nonconvex" : "strongly_convex";
}

inline std::string_view to_string(NoiseDistribution d) {
  return d == NoiseDistribution::gaussian ? "gaussian" : "bernoulli_corruption";
}

// Noise attached to per-sample losses l(x,d) and gradients.
//
// gaussian: l(x,d) = phi(x) + sigma_f * N(0,1) and
//   grad l(x,d) = grad phi(x) + N(0, (M_c + M_v |grad phi(x)|^2) / dim * I),
//   so E|grad l - grad phi|^2 = M_c + M_v |grad phi|^2 holds with equality.
//   sigma_g is the declared uniform gradient bound used by trust-region sizing;
//   it must dominate the (M_c, M_v) law wherever it is used.
// bernoulli_corruption: each sample is exact with probability 1 - corruption_prob,
//   otherwise the value is shifted up by corruption_shift and the gradient is
//   replaced by -corruption_shift * grad phi(x) (an ascent direction).
struct NoiseSpec {
  double sigma_f = 0.0;
  double M_c = 0.0;
  double M_v = 0.0;
  double sigma_g = 0.0;
  NoiseDistribution distribution = NoiseDistribution::gaussian;
  double corruption_prob = 0.0;
  double corruption_shift = 1.0;

  static NoiseSpec none() { return {}; }

  // Uniformly bounded gradient noise: M_c = sigma_g^2, M_v = 0.
  static NoiseSpec gaussian_uniform(double sigma_f, double sigma_g) {
    NoiseSpec n;
    n.sigma_f = sigma_f;
    n.M_c = sigma_g * sigma_g;
    n.sigma_g = sigma_g;
    return n;
  }

  static NoiseSpec gaussian_relative(double sigma_f, double M_c, double M_v) {
    NoiseSpec n;
    n.sigma_f = sigma_f;
    n.M_c = M_c;
    n.M_v = M_v;
    n.sigma_g = M_v == 0.0 ? std::sqrt(M_c) : std::numeric_limits<double>::infinity();
    return n;
  }

  static NoiseSpec bernoulli(double corruption_prob, double corruption_shift = 1.0) {
    NoiseSpec n;
    n.distribution = NoiseDistribution::bernoulli_corruption;
    n.corruption_prob = corruption_prob;
    n.corruption_shift = corruption_shift;
    return n;
  }

  bool is_exact() const {
    return distribution == NoiseDistribution::gaussian ? (sigma_f == 0.0 && M_c == 0.0 && M_v == 0.0)
                                                       : corruption_prob == 0.0;
  }

  void validate() const {
    detail::require(sigma_f >= 0.0 && M_c >= 0.0 && M_v >= 0.0 && sigma_g >= 0.0,
                    "NoiseSpec: noise scales must be nonnegative");
    detail::require(corruption_prob >= 0.0 && corruption_prob <= 1.0,
                    "NoiseSpec: corruption_prob must lie in [0,1]");
    detail::require(corruption_shift >= 0.0 && std::isfinite(corruption_shift),
                    "NoiseSpec: corruption_shift must be finite and nonnegative");
  }
};

// Smooth objective phi with exact ground truth and a stochastic sampling model.
// Immutable after construction; sampling takes a caller-owned Rng.
class Problem {
 public:
  static Problem quadratic(const Vector& diagonal, NoiseSpec noise) {
    detail::require(diagonal.size() > 0, "quadratic: empty spectrum");
    detail::require((diagonal.array() > 0.0).all(), "quadratic: spectrum must be positive");
    noise.validate();
    Problem p;
    p.kind_ = ProblemKind::quadratic;
    p.noise_ = noise;
    p.diagonal_ = diagonal;
    p.smoothness_ = diagonal.maxCoeff();
    p.strong_convexity_ = diagonal.minCoeff();
    p.conditioning_ = p.smoothness_ / p.strong_convexity_;
    p.known_min_ = 0.0;
    p.x0_ = Vector::Ones(diagonal.size());
    return p;
  }

  std::size_t dim() const { return static_cast<std::size_t>(x0_.size()); }
  ProblemKind kind() const { return kind_; }
  const NoiseSpec& noise() const { return noise_; }
  std::optional<double> known_min_value() const { return known_min_; }
  double smoothness() const { return smoothness_; }
  double strong_convexity() const { return strong_convexity_; }
  double conditioning() const { return conditioning_; }
  std::uint64_t seed() const { return seed_; }
  const Vector& x0() const { return x0_; }

  Problem with_x0(Vector x0) const {
    detail::require(static_cast<std::size_t>(x0.size()) == dim(), "with_x0: dimension mismatch");
    Problem p = *this;
    p.x0_ = std::move(x0);
    return p;
  }

  Problem with_noise(NoiseSpec noise) const {
    noise.validate();
    Problem p = *this;
    p.noise_ = noise;
    return p;
  }

  double value(const Vector& x) const {
    if (kind_ == ProblemKind::quadratic) return 0.5 * x.dot(diagonal_.cwiseProduct(x));
    const Vector margins = labels_.cwiseProduct(data_ * x);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) loss += softplus(-margins[i]);
    return loss / static_cast<double>(margins.size()) + 0.5 * regularization_ * x.squaredNorm();
  }

  Vector gradient(const Vector& x) const {
    if (kind_ == ProblemKind::quadratic) return diagonal_.cwiseProduct(x);
    const Vector margins = labels_.cwiseProduct(data_ * x);
    Vector weights(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) weights[i] = -labels_[i] * sigmoid(-margins[i]);
    return data_.transpose() * weights / static_cast<double>(margins.size()) + regularization_ * x;
  }

  // One draw of l(x, d).
  double sample_loss(const Vector& x, Rng& rng) const {
    check_finite(x);
    const double phi = value(x);
    if (noise_.distribution == NoiseDistribution::bernoulli_corruption) {
      return bernoulli(rng, noise_.corruption_prob) ? phi + noise_.corruption_shift : phi;
    }
    if (noise_.sigma_f == 0.0) return phi;
    return phi + noise_.sigma_f * standard_normal(rng);
  }

  // One draw of grad_x l(x, d).
  Vector sample_grad(const Vector& x, Rng& rng) const {
    check_finite(x);
    Vector g = gradient(x);
    if (noise_.distribution == NoiseDistribution::bernoulli_corruption) {
      if (bernoulli(rng, noise_.corruption_prob)) g *= -noise_.corruption_shift;
      return g;
    }
    const double scale = gradient_noise_scale(g);
    if (scale == 0.0) return g;
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += scale * standard_normal(rng);
    return g;
  }

  // Draws the mean of `batch` i.i.d. samples directly from its exact law
  // (normal with variance / batch, or a binomial count of corrupted samples).
  // O(1) in `batch`; distributionally identical to averaging sample_loss draws.
  double sample_mean_loss(const Vector& x, std::int64_t batch, Rng& rng) const {
    check_finite(x);
    detail::require(batch >= 1, "sample_mean_loss: batch must be >= 1");
    const double phi = value(x);
    if (noise_.distribution == NoiseDistribution::bernoulli_corruption) {
      const auto corrupted = corrupted_count(batch, rng);
      return phi + noise_.corruption_shift * static_cast<double>(corrupted) / static_cast<double>(batch);
    }
    if (noise_.sigma_f == 0.0) return phi;
    return phi + noise_.sigma_f / std::sqrt(static_cast<double>(batch)) * standard_normal(rng);
  }

  Vector sample_mean_grad(const Vector& x, std::int64_t batch, Rng& rng) const {
    check_finite(x);
    detail::require(batch >= 1, "sample_mean_grad: batch must be >= 1");
    Vector g = gradient(x);
    if (noise_.distribution == NoiseDistribution::bernoulli_corruption) {
      const auto corrupted = static_cast<double>(corrupted_count(batch, rng));
      const double b = static_cast<double>(batch);
      g *= (b - corrupted - noise_.corruption_shift * corrupted) / b;
      return g;
    }
    const double scale = gradient_noise_scale(g) / std::sqrt(static_cast<double>(batch));
    if (scale == 0.0) return g;
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += scale * standard_normal(rng);
    return g;
  }

  // key=value block, one entry per line.
  std::string descriptor() const {
    std::ostringstream os;
    os << "kind=" << to_string(kind_) << '\n'
       << "dim=" << dim() << '\n'
       << "conditioning=" << csv::real(conditioning_) << '\n'
       << "smoothness=" << csv::real(smoothness_) << '\n'
       << "known_min_value=" << (known_min_ ? csv::real(*known_min_) : std::string("unknown")) << '\n'
       << "seed=" << seed_ << '\n'
       << "noise=" << to_string(noise_.distribution) << '\n'
       << "sigma_f=" << csv::real(noise_.sigma_f) << '\n'
       << "M_c=" << csv::real(noise_.M_c) << '\n'
       << "M_v=" << csv::real(noise_.M_v) << '\n'
       << "sigma_g=" << csv::real(noise_.sigma_g) << '\n'
       << "corruption_prob=" << csv::real(noise_.corruption_prob) << '\n'
       << "corruption_shift=" << csv::real(noise_.corruption_shift) << '\n';
    return os.str();
  }

 private:
  friend Problem make_problem(ProblemKind, std::size_t, double, const NoiseSpec&, std::uint64_t);

  static double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
  static double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  static double standard_normal(Rng& rng) { return std::normal_distribution<double>{}(rng); }

  static void check_finite(const Vector& x) {
    if (!x.allFinite()) throw NumericError("problem sampled at a non-finite point");
  }

  double gradient_noise_scale(const Vector& true_grad) const {
    const double variance = noise_.M_c + noise_.M_v * true_grad.squaredNorm();
    return std::sqrt(variance / static_cast<double>(dim()));
  }

  std::int64_t corrupted_count(std::int64_t batch, Rng& rng) const {
    if (noise_.corruption_prob == 0.0) return 0;
    return std::binomial_distribution<std::int64_t>(batch, noise_.corruption_prob)(rng);
  }

  ProblemKind kind_ = ProblemKind::quadratic;
  NoiseSpec noise_;
  std::optional<double> known_min_;
  double smoothness_ = 1.0;
  double strong_convexity_ = 1.0;
  double conditioning_ = 1.0;
  std::uint64_t seed_ = 0;
  Vector x0_;
  Vector diagonal_;          // quadratic
  Matrix data_;              // logistic: one sample per row
  Vector labels_;            // logistic: +-1
  double regularization_ = 0.0;
};

// quadratic: phi(x) = x^T D x / 2 with D diagonal, log-spaced on [1, conditioning].
// logistic_synthetic: l2-regularised logistic loss (weight 1/conditioning) over a
//   seeded Gaussian design; the minimum value is not known in closed form.
// Both draw samples through the NoiseSpec model.
inline Problem make_problem(ProblemKind kind, std::size_t dim, double conditioning, const NoiseSpec& noise,
                            std::uint64_t seed) {
  detail::require(dim >= 1, "make_problem: dim must be >= 1");
  detail::require(conditioning >= 1.0 && std::isfinite(conditioning), "make_problem: conditioning must be >= 1");
  noise.validate();

  if (kind == ProblemKind::quadratic) {
    Vector diagonal(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double t = dim == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(dim - 1);
      diagonal[static_cast<Eigen::Index>(i)] = std::pow(conditioning, t);
    }
    Problem p = Problem::quadratic(diagonal, noise);
    p.seed_ = seed;
    return p;
  }

  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal;
  const std::size_t samples = std::max<std::size_t>(100, 20 * dim);
  Problem p;
  p.kind_ = ProblemKind::logistic_synthetic;
  p.noise_ = noise;
  p.seed_ = seed;
  p.data_.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(dim));
  p.labels_.resize(static_cast<Eigen::Index>(samples));
  Vector truth(dim);
  for (auto& w : truth) w = normal(rng);
  for (Eigen::Index i = 0; i < p.data_.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.data_.cols(); ++j) p.data_(i, j) = normal(rng);
    const double score = p.data_.row(i).dot(truth) + 0.5 * normal(rng);
    p.labels_[i] = score > 0.0 ? 1.0 : -1.0;
  }
  p.regularization_ = 1.0 / conditioning;
  const Matrix gram = p.data_.transpose() * p.data_;
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  p.smoothness_ = top / (4.0 * static_cast<double>(samples)) + p.regularization_;
  p.strong_convexity_ = p.regularization_;
  p.conditioning_ = p.smoothness_ / p.strong_convexity_;
  p.x0_ = Vector::Ones(static_cast<Eigen::Index>(dim));
  return p;
}

inline double sample_loss(const Problem& problem, const Vector& x, Rng& rng) { return problem.sample_loss(x, rng); }
inline Vector sample_grad(const Problem& problem, const Vector& x, Rng& rng) { return problem.sample_grad(x, rng); }

}  // namespace adastoch
