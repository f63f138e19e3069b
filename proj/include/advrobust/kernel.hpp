#pragma once

/// \file
/// Kernel similarity functions, kernel classifiers, input-space attacks and
/// the adversarial kernel perceptron.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "advrobust/errors.hpp"
#include "advrobust/geometry.hpp"
#include "advrobust/random.hpp"

namespace advrobust {

struct LinearKernel {};

/// (<x1, x2> + offset)^degree
struct PolynomialKernel {
  int degree = 2;
  double offset = 0.0;
};

/// exp(-||x1 - x2||^2 / (2 bandwidth^2))
struct RbfKernel {
  double bandwidth = 1.0;
};

using KernelSpec = std::variant<LinearKernel, PolynomialKernel, RbfKernel>;

/// Throws InvalidArgument on a non-positive bandwidth, degree < 1 or a
/// negative offset.
void validate_kernel(const KernelSpec& spec);

std::string kernel_name(const KernelSpec& spec);

/// Decision value at x is sum_i alpha_i y_i K(z_i, x); label +1 iff >= 0.
struct KernelClassifier {
  KernelSpec kernel = LinearKernel{};
  std::vector<Vector> support;
  std::vector<int> labels;
  std::vector<double> alpha;

  std::size_t size() const { return support.size(); }
  int predict(std::span<const double> x) const;
};

double kernel_eval(const KernelSpec& spec, std::span<const double> x1,
                   std::span<const double> x2);

/// Gradient of K(z, x) with respect to x.
void kernel_grad_x(const KernelSpec& spec, std::span<const double> z,
                   std::span<const double> x, double scale,
                   std::span<double> out);

double kernel_decision_value(const KernelClassifier& f,
                             std::span<const double> x);

/// Gradient of the decision value with respect to x (zero for empty support).
Vector kernel_decision_gradient(const KernelClassifier& f,
                                std::span<const double> x);

/// sum_i alpha_i y_i z_i; the explicit weight vector of a linear-kernel
/// classifier.
Vector linear_kernel_weight(const KernelClassifier& f, std::size_t d);

struct AttackOptions {
  int steps = 100;
  int restarts = 5;          // random starts in addition to the centre
  double step_fraction = 0.1;  // initial step = step_fraction * r
  std::uint64_t seed = 0x5eedULL;
};

/// Approximate argmin over ||z - x||_p <= r of y * decision_value(z).
///
/// Linear kernels use the closed-form dual-norm attack for any p > 1. Other
/// kernels use projected descent from the centre and `restarts` random points
/// of the ball, for p in {2, inf} only; the best iterate wins, ties going to
/// the earlier restart. Throws UnsupportedNorm otherwise.
Vector kernel_attack(const KernelClassifier& f, const LabeledPoint& pt,
                     double r, const NormSpec& norm,
                     const AttackOptions& opts = {});

/// Single pass; every point is attacked against the current classifier and
/// (z, y) joins the support with coefficient 1 when y * value(z) <= 0.
KernelClassifier adversarial_kernel_perceptron(const Dataset& S,
                                               const KernelSpec& kernel,
                                               double r, const NormSpec& norm,
                                               const AttackOptions& opts = {});

/// Fraction of points whose attacked copy satisfies y * value(z) <= 0.
double kernel_empirical_robust_loss(const KernelClassifier& f,
                                    const Dataset& data, double r,
                                    const NormSpec& norm,
                                    const AttackOptions& opts = {});

double kernel_empirical_standard_loss(const KernelClassifier& f,
                                      const Dataset& data);

// ---------------------------------------------------------------------------
// Implementation

inline void validate_kernel(const KernelSpec& spec) {
  if (const auto* p = std::get_if<PolynomialKernel>(&spec)) {
    if (p->degree < 1) throw InvalidArgument("polynomial degree must be >= 1");
    if (!(p->offset >= 0.0)) {
      throw InvalidArgument("polynomial offset must be >= 0");
    }
  } else if (const auto* g = std::get_if<RbfKernel>(&spec)) {
    if (!(g->bandwidth > 0.0)) {
      throw InvalidArgument("rbf bandwidth must be positive");
    }
  }
}

inline std::string kernel_name(const KernelSpec& spec) {
  struct Namer {
    std::string operator()(const LinearKernel&) const { return "linear"; }
    std::string operator()(const PolynomialKernel& k) const {
      return "poly" + std::to_string(k.degree);
    }
    std::string operator()(const RbfKernel&) const { return "rbf"; }
  };
  return std::visit(Namer{}, spec);
}

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x1,
                          std::span<const double> x2) {
  if (x1.size() != x2.size()) {
    throw DimensionMismatch("kernel arguments differ in dimension");
  }
  if (std::holds_alternative<LinearKernel>(spec)) return dot(x1, x2);
  if (const auto* p = std::get_if<PolynomialKernel>(&spec)) {
    return std::pow(dot(x1, x2) + p->offset, p->degree);
  }
  const auto& g = std::get<RbfKernel>(spec);
  double s = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double diff = x1[i] - x2[i];
    s += diff * diff;
  }
  return std::exp(-s / (2.0 * g.bandwidth * g.bandwidth));
}

inline void kernel_grad_x(const KernelSpec& spec, std::span<const double> z,
                          std::span<const double> x, double scale,
                          std::span<double> out) {
  if (std::holds_alternative<LinearKernel>(spec)) {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] += scale * z[j];
    return;
  }
  if (const auto* p = std::get_if<PolynomialKernel>(&spec)) {
    const double c =
        p->degree * std::pow(dot(z, x) + p->offset, p->degree - 1);
    for (std::size_t j = 0; j < x.size(); ++j) out[j] += scale * c * z[j];
    return;
  }
  const auto& g = std::get<RbfKernel>(spec);
  const double k = kernel_eval(spec, z, x);
  const double inv = 1.0 / (g.bandwidth * g.bandwidth);
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] += scale * k * (z[j] - x[j]) * inv;
  }
}

inline double kernel_decision_value(const KernelClassifier& f,
                                    std::span<const double> x) {
  double v = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    v += f.alpha[i] * f.labels[i] * kernel_eval(f.kernel, f.support[i], x);
  }
  return v;
}

inline int KernelClassifier::predict(std::span<const double> x) const {
  return kernel_decision_value(*this, x) >= 0.0 ? 1 : -1;
}

inline Vector kernel_decision_gradient(const KernelClassifier& f,
                                       std::span<const double> x) {
  Vector g(x.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    kernel_grad_x(f.kernel, f.support[i], x, f.alpha[i] * f.labels[i], g);
  }
  return g;
}

inline Vector linear_kernel_weight(const KernelClassifier& f, std::size_t d) {
  Vector w(d, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      w[j] += f.alpha[i] * f.labels[i] * f.support[i][j];
    }
  }
  return w;
}

namespace detail {

// Closed-form projection of z onto B_p(center, r) for p in {2, inf}.
inline void project_ball(std::span<double> z, std::span<const double> center,
                         double r, const NormSpec& norm) {
  if (norm.p_is_inf()) {
    for (std::size_t j = 0; j < z.size(); ++j) {
      z[j] = std::clamp(z[j], center[j] - r, center[j] + r);
    }
    return;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double diff = z[j] - center[j];
    s += diff * diff;
  }
  const double len = std::sqrt(s);
  if (len <= r) return;
  const double shrink = r / len;
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = center[j] + (z[j] - center[j]) * shrink;
  }
}

inline Vector random_ball_point(std::span<const double> center, double r,
                                const NormSpec& norm, Rng& rng) {
  const std::size_t d = center.size();
  Vector z(center.begin(), center.end());
  if (norm.p_is_inf()) {
    for (std::size_t j = 0; j < d; ++j) z[j] += uniform(rng, -r, r);
    return z;
  }
  Vector g(d);
  double s = 0.0;
  for (auto& v : g) {
    v = standard_normal(rng);
    s += v * v;
  }
  const double radius =
      r * std::pow(uniform01(rng), 1.0 / static_cast<double>(d));
  const double scale = s > 0.0 ? radius / std::sqrt(s) : 0.0;
  for (std::size_t j = 0; j < d; ++j) z[j] += g[j] * scale;
  return z;
}

// Descent on y * value; the step grows by half after an improving step (up
// to r) and halves after a failed one, so the iterate sequence is monotone.
inline Vector descend(const KernelClassifier& f, int y, Vector z,
                      std::span<const double> center, double r,
                      const NormSpec& norm, const AttackOptions& opts,
                      double& best_value) {
  const std::size_t d = z.size();
  double value = y * kernel_decision_value(f, z);
  double step = opts.step_fraction * r;
  Vector trial(d);
  for (int it = 0; it < opts.steps && step > 0.0; ++it) {
    Vector g = kernel_decision_gradient(f, z);
    for (auto& v : g) v *= y;
    // Plain gradient direction for both balls: sign steps stall on ridges
    // where one partial derivative changes sign.
    const double gn = norm.p_is_inf() ? lp_norm(g, kInf) : lp_norm(g, 2.0);
    if (gn == 0.0) break;
    for (std::size_t j = 0; j < d; ++j) trial[j] = z[j] - step * g[j] / gn;
    project_ball(trial, center, r, norm);
    const double tv = y * kernel_decision_value(f, trial);
    if (tv < value) {
      z = trial;
      value = tv;
      step = std::min(1.5 * step, r);
    } else {
      step *= 0.5;
    }
  }
  best_value = value;
  return z;
}

}  // namespace detail

inline Vector kernel_attack(const KernelClassifier& f, const LabeledPoint& pt,
                            double r, const NormSpec& norm,
                            const AttackOptions& opts) {
  const std::size_t d = pt.x.size();
  if (std::holds_alternative<LinearKernel>(f.kernel)) {
    const Vector w = linear_kernel_weight(f, d);
    Vector z = pt.x;
    if (r == 0.0 || is_zero(w)) return z;
    const Vector delta = worst_case_perturbation(w, pt.y, r, norm);
    for (std::size_t j = 0; j < d; ++j) z[j] += delta[j];
    return z;
  }
  if (!norm.p_is_inf() && norm.p() != 2.0) {
    throw UnsupportedNorm("nonlinear kernel attacks support p in {2, inf}, got p = " +
                          norm.p_string());
  }
  if (r == 0.0 || f.size() == 0) return pt.x;

  Rng rng(opts.seed);
  double best = 0.0;
  Vector best_z = detail::descend(f, pt.y, pt.x, pt.x, r, norm, opts, best);
  for (int s = 0; s < opts.restarts; ++s) {
    Vector start = detail::random_ball_point(pt.x, r, norm, rng);
    double v = 0.0;
    Vector z = detail::descend(f, pt.y, std::move(start), pt.x, r, norm, opts, v);
    if (v < best) {
      best = v;
      best_z = std::move(z);
    }
  }
  return best_z;
}

inline KernelClassifier adversarial_kernel_perceptron(
    const Dataset& S, const KernelSpec& kernel, double r, const NormSpec& norm,
    const AttackOptions& opts) {
  if (S.empty()) throw EmptyDataset("training set is empty");
  S.validate();
  validate_kernel(kernel);
  KernelClassifier f;
  f.kernel = kernel;
  for (const auto& pt : S.points) {
    Vector z = kernel_attack(f, pt, r, norm, opts);
    if (pt.y * kernel_decision_value(f, z) <= 0.0) {
      f.support.push_back(std::move(z));
      f.labels.push_back(pt.y);
      f.alpha.push_back(1.0);
    }
  }
  return f;
}

inline double kernel_empirical_robust_loss(const KernelClassifier& f,
                                           const Dataset& data, double r,
                                           const NormSpec& norm,
                                           const AttackOptions& opts) {
  if (data.empty()) throw EmptyDataset("robust loss of an empty dataset");
  std::size_t bad = 0;
  for (const auto& pt : data.points) {
    const Vector z = kernel_attack(f, pt, r, norm, opts);
    if (pt.y * kernel_decision_value(f, z) <= 0.0) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(data.size());
}

inline double kernel_empirical_standard_loss(const KernelClassifier& f,
                                             const Dataset& data) {
  if (data.empty()) throw EmptyDataset("standard loss of an empty dataset");
  std::size_t bad = 0;
  for (const auto& pt : data.points) {
    if (f.predict(pt.x) != pt.y) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(data.size());
}

}  // namespace advrobust
