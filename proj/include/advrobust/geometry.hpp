#pragma once

/// \file
/// lp norms, dual norms, closed-form worst-case perturbations against linear
/// classifiers, and empirical standard / robust loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "advrobust/errors.hpp"

namespace advrobust {

using Vector = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// An lp robustness metric (p in (1, inf]) together with its dual exponent q.
///
/// p = inf and q = 1 are carried as explicit flags so that no formula ever
/// raises to an infinite or astronomically large power.
class NormSpec {
 public:
  /// Throws InvalidNorm unless p > 1 (p may be +inf).
  static NormSpec from_p(double p);

  double p() const { return p_; }
  double q() const { return q_; }
  bool p_is_inf() const { return std::isinf(p_); }
  bool q_is_one() const { return p_is_inf(); }

  /// "inf" for p = inf, shortest round-trip decimal otherwise.
  std::string p_string() const;

 private:
  NormSpec(double p, double q) : p_(p), q_(q) {}
  double p_;
  double q_;
};

struct LabeledPoint {
  Vector x;
  int y = 1;  // +1 or -1
};

/// Ordered labelled sample; every point has dimension d.
struct Dataset {
  std::size_t d = 0;
  std::vector<LabeledPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Appends after checking the dimension and label.
  void add(Vector x, int y);

  /// Re-checks every invariant; throws DimensionMismatch / InvalidArgument.
  void validate() const;
};

/// f_{w,b}: +1 iff <w, x> >= b.
struct LinearClassifier {
  Vector w;
  double b = 0.0;

  int predict(std::span<const double> x) const;
};

// ---------------------------------------------------------------------------

double dual_exponent(double p);

/// Standard lp norm for p in [1, inf].
double lp_norm(std::span<const double> x, double p);

inline double dual_norm(std::span<const double> w, const NormSpec& norm) {
  return norm.q_is_one() ? lp_norm(w, 1.0) : lp_norm(w, norm.q());
}

double dot(std::span<const double> a, std::span<const double> b);

bool is_zero(std::span<const double> w);

/// argmin over ||delta||_p <= r of y <w, delta>. Attains -r ||w||_q.
/// Independent of the attacked point; the attack on x is x + delta.
Vector worst_case_perturbation(std::span<const double> w, int y, double r,
                               const NormSpec& norm);

/// y (<w, x> - b) - r ||w||_q. The point is astute iff this is > 0.
double robust_margin_value(const LinearClassifier& f, const LabeledPoint& pt,
                           double r, const NormSpec& norm);

/// Fraction of points with robust margin value <= 0.
double empirical_robust_loss(const LinearClassifier& f, const Dataset& data,
                             double r, const NormSpec& norm);

/// Fraction of points where f's decision disagrees with the label.
double empirical_standard_loss(const LinearClassifier& f, const Dataset& data);

// ---------------------------------------------------------------------------
// Implementation

inline NormSpec NormSpec::from_p(double p) {
  return NormSpec(p, dual_exponent(p));
}

inline std::string NormSpec::p_string() const {
  if (p_is_inf()) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", p_);
  return buf;
}

inline void Dataset::add(Vector x, int y) {
  if (points.empty() && d == 0) d = x.size();
  if (x.size() != d || d == 0) {
    throw DimensionMismatch("point of dimension " + std::to_string(x.size()) +
                            " added to dataset of dimension " +
                            std::to_string(d));
  }
  if (y != 1 && y != -1) throw InvalidArgument("labels must be +1 or -1");
  points.push_back({std::move(x), y});
}

inline void Dataset::validate() const {
  for (const auto& pt : points) {
    if (pt.x.size() != d) {
      throw DimensionMismatch("dataset point has dimension " +
                              std::to_string(pt.x.size()) + ", expected " +
                              std::to_string(d));
    }
    if (pt.y != 1 && pt.y != -1) {
      throw InvalidArgument("labels must be +1 or -1");
    }
  }
}

inline int LinearClassifier::predict(std::span<const double> x) const {
  return dot(w, x) >= b ? 1 : -1;
}

inline double dual_exponent(double p) {
  if (std::isnan(p) || !(p > 1.0)) {
    throw InvalidNorm("lp exponent must satisfy p > 1, got " +
                      std::to_string(p));
  }
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

inline double lp_norm(std::span<const double> x, double p) {
  if (std::isnan(p) || p < 1.0) throw InvalidNorm("lp_norm requires p >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
  }
  if (p == 1.0) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
  }
  if (p == 2.0) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
  }
  // Scale by the max entry so large p does not overflow.
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v) / m, p);
  return m * std::pow(s, 1.0 / p);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("dot product of vectors of dimension " +
                            std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline bool is_zero(std::span<const double> w) {
  return std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; });
}

inline Vector worst_case_perturbation(std::span<const double> w, int y,
                                      double r, const NormSpec& norm) {
  if (is_zero(w)) {
    throw ZeroWeight("worst-case perturbation is undefined for w = 0");
  }
  const double sy = y >= 0 ? 1.0 : -1.0;
  Vector delta(w.size(), 0.0);
  if (norm.q_is_one()) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] > 0.0) delta[i] = -sy * r;
      else if (w[i] < 0.0) delta[i] = sy * r;
    }
    return delta;
  }
  const double q = norm.q();
  const double wq = lp_norm(w, q);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double mag = std::pow(std::abs(w[i]) / wq, q - 1.0);
    delta[i] = -sy * r * (w[i] > 0.0 ? 1.0 : -1.0) * mag;
  }
  return delta;
}

namespace detail {

// Same quantity as robust_margin_value but defined for w = 0 (the constant
// classifier), where it reduces to -y b.
inline double margin_value(const LinearClassifier& f, const LabeledPoint& pt,
                           double r, double wq) {
  return pt.y * (dot(f.w, pt.x) - f.b) - r * wq;
}

}  // namespace detail

inline double robust_margin_value(const LinearClassifier& f,
                                  const LabeledPoint& pt, double r,
                                  const NormSpec& norm) {
  if (is_zero(f.w)) {
    throw ZeroWeight("robust margin is undefined for w = 0");
  }
  return detail::margin_value(f, pt, r, dual_norm(f.w, norm));
}

inline double empirical_robust_loss(const LinearClassifier& f,
                                    const Dataset& data, double r,
                                    const NormSpec& norm) {
  if (data.empty()) throw EmptyDataset("robust loss of an empty dataset");
  const double wq = dual_norm(f.w, norm);
  std::size_t bad = 0;
  for (const auto& pt : data.points) {
    if (detail::margin_value(f, pt, r, wq) <= 0.0) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(data.size());
}

inline double empirical_standard_loss(const LinearClassifier& f,
                                      const Dataset& data) {
  if (data.empty()) throw EmptyDataset("standard loss of an empty dataset");
  std::size_t bad = 0;
  for (const auto& pt : data.points) {
    if (f.predict(pt.x) != pt.y) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(data.size());
}

}  // namespace advrobust
