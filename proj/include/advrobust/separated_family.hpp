#pragma once

/// \file
/// The lower-bound distribution family.
///
/// Geometry: v_i = R e_i and u = (R / sqrt(d)) * (1, ..., 1), so every support
/// point is v_i + t u for a segment index i and a parameter t in [0, 1]. A
/// parameter vector a in [1/2 - Delta, 1/2 + Delta]^d places the negative
/// segment [v_i, v_i + (a_i - lambda_a) u) and the positive segment
/// (v_i + (a_i + lambda_a) u, v_i + u] on each axis, with
/// lambda_a = (r / R) f_q(a). The prior draws t in [0, Delta/3]^{d/3} and
/// couples coordinates (k, k + d/3, k + 2d/3) through the monotone maps g1, g2
/// so that lambda_a is the same constant Lambda for every draw.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "advrobust/errors.hpp"
#include "advrobust/geometry.hpp"
#include "advrobust/random.hpp"

namespace advrobust {

struct FamilyParams {
  std::size_t d = 0;  // multiple of 3
  double r = 0.0;
  NormSpec norm = NormSpec::from_p(2.0);
  double R = 0.0;       // 9 r d^{1/q} / (2 sqrt d)
  double delta = 0.0;   // cube half-width
  double lambda = 0.0;  // common value of lambda_a under the prior

  std::size_t block() const { return d / 3; }
  double t_max() const { return delta / 3.0; }
};

struct DaDistribution {
  FamilyParams params;
  Vector a;
  double lambda_a = 0.0;
  std::optional<Vector> t;  // present for prior draws
};

/// Canonical coordinates of a support point: v_segment + t u.
struct SegmentCoord {
  std::size_t segment = 0;
  double t = 0.0;
  int y = 1;
};

/// A sample together with its canonical coordinates.
struct FamilySample {
  Dataset data;
  std::vector<SegmentCoord> coords;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = true;

  double length() const { return std::max(0.0, hi - lo); }
  bool contains(double x) const {
    return (lo_closed ? x >= lo : x > lo) && (hi_closed ? x <= hi : x < hi);
  }
};

struct PosteriorIntervals {
  std::vector<Interval> intervals;  // one per k in [0, d/3)
  std::vector<double> lengths;
  double total_length = 0.0;
  double bound_value = 0.0;  // total_length / (80 d)
};

// --- constants and helper functions ----------------------------------------

/// Largest |coordinate| of the scale constant R = 9 r d^{1/q} / (2 sqrt d).
double family_scale(std::size_t d, double r, const NormSpec& norm);

/// f_l(a) = (sum_i |1/sqrt(d) + mean(a) - a_i|^l)^{1/l}; l = inf gives the max.
double f_l(std::span<const double> a, double l);

/// Analytic gradient of f_l for finite l >= 1.
Vector f_l_gradient(std::span<const double> a, double l);

struct DeltaSearchOptions {
  std::size_t random_samples = 10'000;
  std::size_t max_corner_bits = 12;
  double safety = 2.0;
  std::uint64_t seed = 0xde17aULL;
};

/// Delta in (0, 1/(4 sqrt d)] such that ||grad f_l||_2 <= 1/(safety d^2 sqrt d)
/// for l in {2, q} at the cube corners and random cube samples.
/// Starts at 1/(4 sqrt d) and halves; throws ConstructionFailure below 1e-12.
double find_delta(std::size_t d, const NormSpec& norm,
                  const DeltaSearchOptions& opts = {});

/// True when the gradient check of find_delta passes for this Delta.
bool delta_passes_gradient_check(std::size_t d, const NormSpec& norm,
                                 double delta,
                                 const DeltaSearchOptions& opts = {});

/// Builds R, Delta (searched) and Lambda. d must be a positive multiple of 3.
FamilyParams make_family_params(std::size_t d, double r, const NormSpec& norm,
                                const DeltaSearchOptions& opts = {});

/// Same with a given Delta (replay from a record).
FamilyParams make_family_params_with_delta(std::size_t d, double r,
                                           const NormSpec& norm, double delta);

/// F(x, y, z) = ((1/sqrt d - x)^q + (1/sqrt d - 2 Delta/3 + y)^q
///               + (1/sqrt d + 2 Delta/3 + z)^q)^{1/q}.
double F(double x, double y, double z, const FamilyParams& params);

/// (g1(t), g2(t)) with g1 + g2 = t and F(t, g1, g2) = F(0, 0, 0).
std::pair<double, double> g1_g2(double t, const FamilyParams& params);

/// Smallest t in [0, Delta/3] with g_k(t) >= value, k in {1, 2}; the caller
/// handles values outside [g_k(0), g_k(Delta/3)].
double g_inverse(int k, double value, const FamilyParams& params);

/// Lambda = (r / R) (d/3)^{1/q} F(0, 0, 0).
double lambda_constant(const FamilyParams& params);

// --- distributions ---------------------------------------------------------

/// a(t) from the prior's coupling.
Vector a_from_t(std::span<const double> t, const FamilyParams& params);

/// Wraps an explicit parameter vector; throws InvalidArgument when a support
/// segment would be empty (a_i <= lambda_a or a_i + lambda_a >= 1).
DaDistribution make_da(const FamilyParams& params, Vector a);

DaDistribution sample_pi(Rng& rng, const FamilyParams& params);

/// w^a with w_i = 1/R - d a_i / (R sqrt d + d R mean(a)); classifier f_{w^a, 1}.
Vector optimal_weight(std::span<const double> a, const FamilyParams& params);

LinearClassifier optimal_classifier(std::span<const double> a,
                                    const FamilyParams& params);

/// Ambient coordinates of v_segment + t u.
Vector segment_point(std::size_t segment, double t, const FamilyParams& params);

FamilySample sample_da(const DaDistribution& dist, std::size_t n, Rng& rng);

/// Recovers canonical coordinates; throws MalformedSample for a point farther
/// than tol (relative to R) from every segment [v_i, v_i + u].
SegmentCoord to_segment_coord(const LabeledPoint& pt,
                              const FamilyParams& params, double tol = 1e-9);

/// Exact robust loss of f_{w^b, 1} against D_a.
double exact_robust_loss_wb(std::span<const double> b,
                            const DaDistribution& dist);

/// Robust and standard loss of an arbitrary linear classifier against D_a by
/// Monte Carlo over `samples` draws. Works in canonical coordinates:
/// <w, v_i + t u> = R w_i + t (R / sqrt d) sum(w).
struct MonteCarloLoss {
  double robust = 0.0;
  double standard = 0.0;
  std::size_t samples = 0;
};
MonteCarloLoss monte_carlo_loss(const LinearClassifier& f,
                                const DaDistribution& dist,
                                std::size_t samples, Rng& rng);

/// Posterior product-of-intervals over t given a sample.
PosteriorIntervals posterior_intervals(std::span<const SegmentCoord> coords,
                                       const FamilyParams& params);
PosteriorIntervals posterior_intervals(const Dataset& S,
                                       const FamilyParams& params);

/// True when every point lies in the support of D_{a(t)}.
bool sample_in_support(std::span<const SegmentCoord> coords,
                       std::span<const double> t, const FamilyParams& params);

/// sqrt(3) f_2(a) / lambda_a: support diameter R sqrt 3 over the margin lower
/// bound R lambda_a / f_2(a).
double aspect_ratio_da(const DaDistribution& dist);

// --- plain-text record -----------------------------------------------------

struct FamilyRecord {
  DaDistribution dist;
  std::uint64_t seed = 0;
};

void write_family_record(std::ostream& os, const FamilyRecord& rec);
FamilyRecord read_family_record(std::istream& is);

// ---------------------------------------------------------------------------
// Implementation

inline double family_scale(std::size_t d, double r, const NormSpec& norm) {
  const double dd = static_cast<double>(d);
  const double d_pow = norm.q_is_one() ? dd : std::pow(dd, 1.0 / norm.q());
  return 9.0 * r * d_pow / (2.0 * std::sqrt(dd));
}

inline double f_l(std::span<const double> a, double l) {
  const std::size_t d = a.size();
  if (d == 0) return 0.0;
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(d);
  const double base = 1.0 / std::sqrt(static_cast<double>(d)) + mean;
  Vector c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = base - a[i];
  return lp_norm(c, l);
}

inline Vector f_l_gradient(std::span<const double> a, double l) {
  const std::size_t d = a.size();
  const double dd = static_cast<double>(d);
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= dd;
  const double base = 1.0 / std::sqrt(dd) + mean;
  Vector c(d), s(d);
  double sum_s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    c[i] = base - a[i];
    const double sg = c[i] > 0.0 ? 1.0 : (c[i] < 0.0 ? -1.0 : 0.0);
    s[i] = sg * std::pow(std::abs(c[i]), l - 1.0);
    sum_s += s[i];
  }
  const double f = lp_norm(c, l);
  const double pre = std::pow(f, 1.0 - l);
  // d f / d a_j = f^{1-l} (mean_i s_i - s_j), with s_i = sign(c_i)|c_i|^{l-1}.
  Vector g(d);
  for (std::size_t j = 0; j < d; ++j) g[j] = pre * (sum_s / dd - s[j]);
  return g;
}

namespace detail {

inline void check_family_dimension(std::size_t d) {
  if (d == 0 || d % 3 != 0) {
    throw InvalidArgument("family dimension must be a positive multiple of 3, got " +
                          std::to_string(d));
  }
}

inline double grad_norm_max(std::span<const double> a,
                            std::span<const double> ls) {
  double m = 0.0;
  for (double l : ls) m = std::max(m, lp_norm(f_l_gradient(a, l), 2.0));
  return m;
}

}  // namespace detail

inline bool delta_passes_gradient_check(std::size_t d, const NormSpec& norm,
                                        double delta,
                                        const DeltaSearchOptions& opts) {
  const double dd = static_cast<double>(d);
  const double limit = 1.0 / (opts.safety * dd * dd * std::sqrt(dd));
  const double q = norm.q_is_one() ? 1.0 : norm.q();
  const double ls[2] = {2.0, q};
  Vector a(d);

  // Corners; with more than max_corner_bits coordinates the bit pattern is
  // repeated cyclically.
  const std::size_t bits = std::min(d, opts.max_corner_bits);
  const std::uint64_t corners = std::uint64_t{1} << bits;
  for (std::uint64_t mask = 0; mask < corners; ++mask) {
    for (std::size_t i = 0; i < d; ++i) {
      a[i] = 0.5 + (((mask >> (i % bits)) & 1U) ? delta : -delta);
    }
    if (detail::grad_norm_max(a, ls) > limit) return false;
  }
  Rng rng(opts.seed);
  for (std::size_t s = 0; s < opts.random_samples; ++s) {
    for (auto& v : a) v = uniform(rng, 0.5 - delta, 0.5 + delta);
    if (detail::grad_norm_max(a, ls) > limit) return false;
  }
  return true;
}

inline double find_delta(std::size_t d, const NormSpec& norm,
                         const DeltaSearchOptions& opts) {
  detail::check_family_dimension(d);
  double delta = 1.0 / (4.0 * std::sqrt(static_cast<double>(d)));
  while (delta >= 1e-12) {
    if (delta_passes_gradient_check(d, norm, delta, opts)) return delta;
    delta *= 0.5;
  }
  throw ConstructionFailure("Delta search underflowed below 1e-12 for d = " +
                            std::to_string(d));
}

inline double F(double x, double y, double z, const FamilyParams& params) {
  const double s = 1.0 / std::sqrt(static_cast<double>(params.d));
  const double c = 2.0 * params.delta / 3.0;
  const double t1 = s - x, t2 = s - c + y, t3 = s + c + z;
  if (params.norm.q_is_one()) return t1 + t2 + t3;
  const double q = params.norm.q();
  return std::pow(std::pow(t1, q) + std::pow(t2, q) + std::pow(t3, q), 1.0 / q);
}

inline double lambda_constant(const FamilyParams& params) {
  const double m = static_cast<double>(params.block());
  const double m_pow =
      params.norm.q_is_one() ? m : std::pow(m, 1.0 / params.norm.q());
  return (params.r / params.R) * m_pow * F(0.0, 0.0, 0.0, params);
}

inline FamilyParams make_family_params_with_delta(std::size_t d, double r,
                                                  const NormSpec& norm,
                                                  double delta) {
  detail::check_family_dimension(d);
  if (!(r > 0.0)) throw InvalidArgument("robustness radius must be positive");
  if (!(delta > 0.0) || !(delta < 1.0 / (2.0 * std::sqrt(static_cast<double>(d))))) {
    throw InvalidArgument("Delta must lie in (0, 1/(2 sqrt d))");
  }
  FamilyParams p;
  p.d = d;
  p.r = r;
  p.norm = norm;
  p.R = family_scale(d, r, norm);
  p.delta = delta;
  p.lambda = lambda_constant(p);
  return p;
}

inline FamilyParams make_family_params(std::size_t d, double r,
                                       const NormSpec& norm,
                                       const DeltaSearchOptions& opts) {
  detail::check_family_dimension(d);
  return make_family_params_with_delta(d, r, norm, find_delta(d, norm, opts));
}

namespace detail {

// Phi(x) = (1/sqrt d - x)^q; F(x, y, z)^q = Phi(x) + Phi(2D/3 - y) + Phi(-2D/3 - z).
inline double phi(double x, const FamilyParams& p) {
  const double s = 1.0 / std::sqrt(static_cast<double>(p.d));
  return std::pow(s - x, p.norm.q());
}

// Bisection on a strictly increasing function until the bracket collapses to
// adjacent doubles, capped at 200 iterations.
template <typename Fn>
double bisect_increasing(Fn&& fn, double lo, double hi, double target) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (fn(mid) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline std::pair<double, double> g1_g2(double t, const FamilyParams& params) {
  const double tmax = params.t_max();
  if (!(t >= 0.0) || t > tmax * (1.0 + 1e-12)) {
    throw InvalidArgument("g1/g2 argument outside [0, Delta/3]");
  }
  t = std::min(t, tmax);
  if (t == 0.0) return {0.0, 0.0};
  if (params.norm.q_is_one()) return {0.5 * t, 0.5 * t};

  using detail::phi;
  const double c = 2.0 * params.delta / 3.0;
  const double target = phi(-c, params) + phi(0.0, params) + phi(c, params);
  // Theta(delta) = Phi(-c - delta) + Phi(t) + Phi(c - (t - delta)) is
  // strictly increasing on [0, t] with Theta(0) < target < Theta(t).
  auto theta = [&](double dl) {
    return phi(-c - dl, params) + phi(t, params) + phi(c - (t - dl), params);
  };
  if (!(theta(0.0) <= target && theta(t) >= target)) {
    throw ConstructionFailure("g1/g2 bisection bracket does not contain the root");
  }
  const double dl = detail::bisect_increasing(theta, 0.0, t, target);
  // g1 = gamma = t - delta, g2 = delta.
  return {t - dl, dl};
}

inline double g_inverse(int k, double value, const FamilyParams& params) {
  if (k != 1 && k != 2) throw InvalidArgument("g_inverse index must be 1 or 2");
  auto g = [&](double t) {
    const auto [g1, g2] = g1_g2(t, params);
    return k == 1 ? g1 : g2;
  };
  return detail::bisect_increasing(g, 0.0, params.t_max(), value);
}

inline Vector a_from_t(std::span<const double> t, const FamilyParams& params) {
  const std::size_t m = params.block();
  if (t.size() != m) throw DimensionMismatch("t must have d/3 entries");
  const double c = 2.0 * params.delta / 3.0;
  Vector a(params.d);
  for (std::size_t i = 0; i < m; ++i) {
    const auto [g1, g2] = g1_g2(t[i], params);
    a[i] = 0.5 + t[i];
    a[i + m] = 0.5 + c - g1;
    a[i + 2 * m] = 0.5 - c - g2;
  }
  return a;
}

inline DaDistribution make_da(const FamilyParams& params, Vector a) {
  if (a.size() != params.d) throw DimensionMismatch("a must have d entries");
  DaDistribution dist;
  dist.params = params;
  dist.lambda_a = (params.r / params.R) *
                  f_l(a, params.norm.q_is_one() ? 1.0 : params.norm.q());
  for (double v : a) {
    if (!(v > dist.lambda_a) || !(v + dist.lambda_a < 1.0)) {
      throw InvalidArgument("parameter vector leaves an empty support segment");
    }
  }
  dist.a = std::move(a);
  return dist;
}

inline DaDistribution sample_pi(Rng& rng, const FamilyParams& params) {
  detail::check_family_dimension(params.d);
  Vector t(params.block());
  for (auto& v : t) v = uniform(rng, 0.0, params.t_max());
  DaDistribution dist = make_da(params, a_from_t(t, params));
  dist.t = std::move(t);
  return dist;
}

inline Vector optimal_weight(std::span<const double> a,
                             const FamilyParams& params) {
  const std::size_t d = a.size();
  const double dd = static_cast<double>(d);
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= dd;
  const double denom = params.R * std::sqrt(dd) + dd * params.R * mean;
  Vector w(d);
  for (std::size_t i = 0; i < d; ++i) w[i] = 1.0 / params.R - dd * a[i] / denom;
  return w;
}

inline LinearClassifier optimal_classifier(std::span<const double> a,
                                           const FamilyParams& params) {
  return {optimal_weight(a, params), 1.0};
}

inline Vector segment_point(std::size_t segment, double t,
                            const FamilyParams& params) {
  const double step = t * params.R / std::sqrt(static_cast<double>(params.d));
  Vector x(params.d, step);
  x[segment] += params.R;
  return x;
}

namespace detail {

// Segment weights in canonical order: negatives 0..d-1, positives d..2d-1.
inline std::vector<double> segment_cdf(const DaDistribution& dist) {
  const std::size_t d = dist.params.d;
  std::vector<double> cdf(2 * d);
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    acc += dist.a[i] - dist.lambda_a;
    cdf[i] = acc;
  }
  for (std::size_t i = 0; i < d; ++i) {
    acc += 1.0 - dist.a[i] - dist.lambda_a;
    cdf[d + i] = acc;
  }
  return cdf;
}

inline SegmentCoord draw_coord(const DaDistribution& dist,
                               const std::vector<double>& cdf, Rng& rng) {
  const std::size_t d = dist.params.d;
  const double u = uniform01(rng) * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  auto idx = static_cast<std::size_t>(it - cdf.begin());
  if (idx >= cdf.size()) idx = cdf.size() - 1;
  const double v = uniform01(rng);  // [0, 1)
  SegmentCoord c;
  if (idx < d) {
    c.segment = idx;
    c.y = -1;
    c.t = v * (dist.a[idx] - dist.lambda_a);  // [0, a - lambda)
  } else {
    c.segment = idx - d;
    c.y = 1;
    c.t = 1.0 - v * (1.0 - dist.a[c.segment] - dist.lambda_a);  // (a + lambda, 1]
  }
  return c;
}

}  // namespace detail

inline FamilySample sample_da(const DaDistribution& dist, std::size_t n,
                              Rng& rng) {
  const auto cdf = detail::segment_cdf(dist);
  FamilySample out;
  out.data.d = dist.params.d;
  out.data.points.reserve(n);
  out.coords.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const SegmentCoord c = detail::draw_coord(dist, cdf, rng);
    out.data.points.push_back({segment_point(c.segment, c.t, dist.params), c.y});
    out.coords.push_back(c);
  }
  return out;
}

inline SegmentCoord to_segment_coord(const LabeledPoint& pt,
                                     const FamilyParams& params, double tol) {
  const std::size_t d = params.d;
  if (pt.x.size() != d) throw DimensionMismatch("point dimension differs from d");
  const std::size_t seg = static_cast<std::size_t>(
      std::max_element(pt.x.begin(), pt.x.end()) - pt.x.begin());
  double others = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (j != seg) others += pt.x[j];
  }
  const double sqd = std::sqrt(static_cast<double>(d));
  // With d = 1 there are no other coordinates; read t off the segment axis.
  const double step = d > 1 ? others / static_cast<double>(d - 1)
                            : pt.x[seg] - params.R;
  const double t = step * sqd / params.R;
  const Vector back = segment_point(seg, std::clamp(t, 0.0, 1.0), params);
  double err = 0.0;
  for (std::size_t j = 0; j < d; ++j) err = std::max(err, std::abs(back[j] - pt.x[j]));
  if (err > tol * params.R) {
    throw MalformedSample("point is not on any family segment (distance " +
                          std::to_string(err) + ")");
  }
  return {seg, std::clamp(t, 0.0, 1.0), pt.y};
}

inline double exact_robust_loss_wb(std::span<const double> b,
                                   const DaDistribution& dist) {
  const auto& p = dist.params;
  if (b.size() != p.d) throw DimensionMismatch("b must have d entries");
  const double lambda_b =
      (p.r / p.R) * f_l(b, p.norm.q_is_one() ? 1.0 : p.norm.q());
  const double la = dist.lambda_a;
  double bad = 0.0;
  for (std::size_t i = 0; i < p.d; ++i) {
    const double ai = dist.a[i];
    // Negative segment [0, a_i - la): lost where t >= b_i - lambda_b.
    const double neg_hi = ai - la;
    const double neg_cut = std::clamp(b[i] - lambda_b, 0.0, neg_hi);
    bad += neg_hi - neg_cut;
    // Positive segment (a_i + la, 1]: lost where t < b_i + lambda_b.
    const double pos_lo = ai + la;
    const double pos_cut = std::clamp(b[i] + lambda_b, pos_lo, 1.0);
    bad += pos_cut - pos_lo;
  }
  return bad / (static_cast<double>(p.d) * (1.0 - 2.0 * la));
}

inline MonteCarloLoss monte_carlo_loss(const LinearClassifier& f,
                                       const DaDistribution& dist,
                                       std::size_t samples, Rng& rng) {
  const auto& p = dist.params;
  if (f.w.size() != p.d) throw DimensionMismatch("classifier dimension differs from d");
  const auto cdf = detail::segment_cdf(dist);
  double wsum = 0.0;
  for (double v : f.w) wsum += v;
  const double slope = wsum * p.R / std::sqrt(static_cast<double>(p.d));
  const double wq = dual_norm(f.w, p.norm);
  std::size_t rob = 0, std_bad = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const SegmentCoord c = detail::draw_coord(dist, cdf, rng);
    const double score = p.R * f.w[c.segment] + c.t * slope;
    if (c.y * (score - f.b) - p.r * wq <= 0.0) ++rob;
    if ((score >= f.b ? 1 : -1) != c.y) ++std_bad;
  }
  MonteCarloLoss out;
  out.samples = samples;
  if (samples > 0) {
    out.robust = static_cast<double>(rob) / static_cast<double>(samples);
    out.standard = static_cast<double>(std_bad) / static_cast<double>(samples);
  }
  return out;
}

namespace detail {

// Preimage of the open interval (lo, hi) under t -> offset - g_k(t) on
// [0, tmax], where g_k is increasing (so the map is decreasing).
inline Interval preimage_decreasing(int k, double offset, double lo, double hi,
                                    const FamilyParams& p) {
  // offset - g(t) in (lo, hi)  <=>  g(t) in (offset - hi, offset - lo).
  const double glo = offset - hi;
  const double ghi = offset - lo;
  const double tmax = p.t_max();
  const auto gk = [&](double t) {
    const auto [g1, g2] = g1_g2(t, p);
    return k == 1 ? g1 : g2;
  };
  const double g_at_max = gk(tmax);
  Interval iv;
  if (glo < 0.0) {
    iv.lo = 0.0;
    iv.lo_closed = true;
  } else if (glo >= g_at_max) {
    return {tmax, tmax, false, false};
  } else {
    iv.lo = g_inverse(k, glo, p);
    iv.lo_closed = false;
  }
  if (ghi > g_at_max) {
    iv.hi = tmax;
    iv.hi_closed = true;
  } else if (ghi <= 0.0) {
    return {0.0, 0.0, false, false};
  } else {
    iv.hi = g_inverse(k, ghi, p);
    iv.hi_closed = false;
  }
  return iv;
}

inline Interval intersect(const Interval& a, const Interval& b) {
  Interval out;
  if (a.lo > b.lo) {
    out.lo = a.lo;
    out.lo_closed = a.lo_closed;
  } else if (b.lo > a.lo) {
    out.lo = b.lo;
    out.lo_closed = b.lo_closed;
  } else {
    out.lo = a.lo;
    out.lo_closed = a.lo_closed && b.lo_closed;
  }
  if (a.hi < b.hi) {
    out.hi = a.hi;
    out.hi_closed = a.hi_closed;
  } else if (b.hi < a.hi) {
    out.hi = b.hi;
    out.hi_closed = b.hi_closed;
  } else {
    out.hi = a.hi;
    out.hi_closed = a.hi_closed && b.hi_closed;
  }
  return out;
}

}  // namespace detail

inline PosteriorIntervals posterior_intervals(
    std::span<const SegmentCoord> coords, const FamilyParams& params) {
  const std::size_t d = params.d;
  const std::size_t m = params.block();
  // Farthest negative from v_i and farthest positive from v_i + u.
  std::vector<double> neg_far(d, 0.0), pos_far(d, 1.0);
  for (const auto& c : coords) {
    if (c.segment >= d) throw MalformedSample("segment index out of range");
    if (c.y < 0) neg_far[c.segment] = std::max(neg_far[c.segment], c.t);
    else pos_far[c.segment] = std::min(pos_far[c.segment], c.t);
  }
  const double L = params.lambda;
  const double c2 = 2.0 * params.delta / 3.0;
  const double tmax = params.t_max();

  PosteriorIntervals out;
  out.intervals.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    // a_i must lie in J_i = (neg_far + Lambda, pos_far - Lambda).
    auto j_lo = [&](std::size_t i) { return neg_far[i] + L; };
    auto j_hi = [&](std::size_t i) { return pos_far[i] - L; };

    Interval iv{0.0, tmax, true, true};
    // a_k = 1/2 + t.
    iv = detail::intersect(iv, Interval{j_lo(k) - 0.5, j_hi(k) - 0.5, false, false});
    // a_{k+m} = 1/2 + 2 Delta/3 - g1(t).
    iv = detail::intersect(
        iv, detail::preimage_decreasing(1, 0.5 + c2, j_lo(k + m), j_hi(k + m), params));
    // a_{k+2m} = 1/2 - 2 Delta/3 - g2(t).
    iv = detail::intersect(
        iv, detail::preimage_decreasing(2, 0.5 - c2, j_lo(k + 2 * m),
                                        j_hi(k + 2 * m), params));
    if (iv.hi < iv.lo) iv.hi = iv.lo;
    out.intervals.push_back(iv);
    out.lengths.push_back(iv.length());
    out.total_length += iv.length();
  }
  out.bound_value = out.total_length / (80.0 * static_cast<double>(d));
  return out;
}

inline PosteriorIntervals posterior_intervals(const Dataset& S,
                                              const FamilyParams& params) {
  if (!S.empty() && S.d != params.d) {
    throw DimensionMismatch("sample dimension differs from the family's d");
  }
  std::vector<SegmentCoord> coords;
  coords.reserve(S.size());
  for (const auto& pt : S.points) coords.push_back(to_segment_coord(pt, params));
  return posterior_intervals(coords, params);
}

inline bool sample_in_support(std::span<const SegmentCoord> coords,
                              std::span<const double> t,
                              const FamilyParams& params) {
  const Vector a = a_from_t(t, params);
  const double la =
      (params.r / params.R) * f_l(a, params.norm.q_is_one() ? 1.0 : params.norm.q());
  for (const auto& c : coords) {
    const double ai = a[c.segment];
    if (c.y < 0 && !(c.t < ai - la)) return false;
    if (c.y > 0 && !(c.t > ai + la)) return false;
  }
  return true;
}

inline double aspect_ratio_da(const DaDistribution& dist) {
  return std::sqrt(3.0) * f_l(dist.a, 2.0) / dist.lambda_a;
}

inline void write_family_record(std::ostream& os, const FamilyRecord& rec) {
  const auto& p = rec.dist.params;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto vec = [&](const Vector& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += num(v[i]);
    }
    return s;
  };
  os << "d=" << p.d << '\n'
     << "p=" << p.norm.p_string() << '\n'
     << "r=" << num(p.r) << '\n'
     << "Delta=" << num(p.delta) << '\n'
     << "Lambda=" << num(p.lambda) << '\n'
     << "seed=" << rec.seed << '\n'
     << "a=" << vec(rec.dist.a) << '\n';
  if (rec.dist.t) os << "t=" << vec(*rec.dist.t) << '\n';
}

namespace detail {

inline double parse_double(const std::string& s) {
  if (s == "inf" || s == "+inf" || s == "Inf" || s == "INF") return kInf;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("not a number: '" + s + "'");
  }
  if (used != s.size()) throw InvalidArgument("not a number: '" + s + "'");
  return v;
}

inline Vector parse_vector(const std::string& s) {
  Vector out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_double(item));
  }
  return out;
}

}  // namespace detail

inline FamilyRecord read_family_record(std::istream& is) {
  std::string line;
  std::optional<std::size_t> d;
  std::optional<double> p, r, delta, lambda;
  std::optional<Vector> a, t;
  std::uint64_t seed = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("bad record line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "d") d = static_cast<std::size_t>(std::stoull(val));
    else if (key == "p") p = detail::parse_double(val);
    else if (key == "r") r = detail::parse_double(val);
    else if (key == "Delta") delta = detail::parse_double(val);
    else if (key == "Lambda") lambda = detail::parse_double(val);
    else if (key == "seed") seed = std::stoull(val);
    else if (key == "a") a = detail::parse_vector(val);
    else if (key == "t") t = detail::parse_vector(val);
    else throw InvalidArgument("unknown record key: " + key);
  }
  if (!d || !p || !r || !delta || !a) {
    throw InvalidArgument("family record needs d, p, r, Delta and a");
  }
  FamilyRecord rec;
  rec.seed = seed;
  const FamilyParams params =
      make_family_params_with_delta(*d, *r, NormSpec::from_p(*p), *delta);
  if (lambda && std::abs(*lambda - params.lambda) > 1e-12) {
    throw InvalidArgument("recorded Lambda does not match the recomputed value");
  }
  rec.dist = make_da(params, std::move(*a));
  if (t) rec.dist.t = std::move(*t);
  return rec;
}

}  // namespace advrobust
