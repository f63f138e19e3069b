#pragma once

/// \file
/// Adversarial perceptron trainers: through-origin single pass, the
/// random-cutoff variant used for the expected-loss bound, and the lifted
/// variant that handles an offset.

#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "advrobust/errors.hpp"
#include "advrobust/geometry.hpp"
#include "advrobust/random.hpp"

namespace advrobust {

struct TrainReport {
  LinearClassifier classifier;
  std::size_t mistakes = 0;  // number of weight updates
  std::size_t cutoff_k = 0;  // points consumed per pass
  std::size_t epochs = 1;    // passes made over the first cutoff_k points
  bool lifted = false;
};

/// x|R: a d-vector with one appended coordinate.
struct LiftedVector {
  Vector base;
  double last = 0.0;

  double dot(const LiftedVector& o) const {
    return advrobust::dot(base, o.base) + last * o.last;
  }
  double norm2() const { return std::sqrt(dot(*this)); }
};

/// Optional record of every update vector, in order.
using UpdateLog = std::vector<Vector>;

/// One pass in the given order. Each point is attacked against the current w
/// (no perturbation while w = 0) and triggers w += y z when <w, y z> <= 0.
TrainReport adversarial_perceptron(const Dataset& S, double r,
                                   const NormSpec& norm,
                                   UpdateLog* log = nullptr);

/// Draws k uniformly from {0, ..., n} and trains on the first k points.
TrainReport modified_adversarial_perceptron(const Dataset& S, double r,
                                            const NormSpec& norm, Rng& rng,
                                            UpdateLog* log = nullptr);

/// Lifted trainer: centres at x_1, appends R_S = diam_2(S), permutes, draws
/// k from {1, ..., n}, and runs the attack on the first d coordinates only.
/// Non-separable input shows up as mistakes == cutoff_k, never an exception.
TrainReport general_adversarial_perceptron(const Dataset& S, double r,
                                           const NormSpec& norm, Rng& rng,
                                           UpdateLog* log = nullptr);

/// Repeats full passes of adversarial_perceptron until one pass makes no
/// update or max_epochs is reached.
TrainReport adversarial_perceptron_until_stable(const Dataset& S, double r,
                                                const NormSpec& norm,
                                                std::size_t max_epochs,
                                                UpdateLog* log = nullptr);

/// Same idea for the lifted trainer: one random permutation, k = n, repeated
/// passes until stable.
TrainReport general_adversarial_perceptron_until_stable(
    const Dataset& S, double r, const NormSpec& norm, Rng& rng,
    std::size_t max_epochs, UpdateLog* log = nullptr);

/// Largest pairwise l2 distance.
double l2_diameter(const Dataset& S);

// ---------------------------------------------------------------------------
// Implementation

namespace detail {

inline void check_training_set(const Dataset& S) {
  if (S.empty()) throw EmptyDataset("training set is empty");
  S.validate();
}

// Returns the number of updates made during this pass.
inline std::size_t origin_pass(const Dataset& S, std::size_t k, double r,
                               const NormSpec& norm, Vector& w,
                               UpdateLog* log) {
  std::size_t updates = 0;
  Vector z(S.d);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& pt = S.points[i];
    z = pt.x;
    if (!is_zero(w)) {
      const Vector delta = worst_case_perturbation(w, pt.y, r, norm);
      for (std::size_t j = 0; j < S.d; ++j) z[j] += delta[j];
    }
    if (pt.y * dot(w, z) <= 0.0) {
      for (std::size_t j = 0; j < S.d; ++j) w[j] += pt.y * z[j];
      ++updates;
      if (log) {
        Vector u(S.d);
        for (std::size_t j = 0; j < S.d; ++j) u[j] = pt.y * z[j];
        log->push_back(std::move(u));
      }
    }
  }
  return updates;
}

struct LiftedProblem {
  std::vector<LiftedVector> points;  // x'_i | R_S, in permuted order
  std::vector<int> labels;
  Vector anchor;  // x_1 of the original order
  double lift = 0.0;  // R_S
};

inline LiftedProblem lift(const Dataset& S, std::span<const std::size_t> order) {
  LiftedProblem lp;
  lp.anchor = S.points.front().x;
  lp.lift = l2_diameter(S);
  lp.points.reserve(order.size());
  lp.labels.reserve(order.size());
  for (std::size_t idx : order) {
    const auto& pt = S.points[idx];
    LiftedVector v{Vector(S.d), lp.lift};
    for (std::size_t j = 0; j < S.d; ++j) v.base[j] = pt.x[j] - lp.anchor[j];
    lp.points.push_back(std::move(v));
    lp.labels.push_back(pt.y);
  }
  return lp;
}

inline std::size_t lifted_pass(const LiftedProblem& lp, std::size_t k, double r,
                               const NormSpec& norm, LiftedVector& w,
                               UpdateLog* log) {
  std::size_t updates = 0;
  const std::size_t d = w.base.size();
  for (std::size_t t = 0; t < k; ++t) {
    const auto& x = lp.points[t];
    const int y = lp.labels[t];
    const double wq = dual_norm(w.base, norm);
    if (y * w.dot(x) <= r * wq) {
      // z' = argmin_{||z||_p <= r} <w, z|0>; zero while the first d
      // coordinates of w vanish.
      Vector zp(d, 0.0);
      if (!is_zero(w.base)) zp = worst_case_perturbation(w.base, 1, r, norm);
      LiftedVector step{Vector(d), y * x.last};
      for (std::size_t j = 0; j < d; ++j) step.base[j] = y * x.base[j] + zp[j];
      for (std::size_t j = 0; j < d; ++j) w.base[j] += step.base[j];
      w.last += step.last;
      ++updates;
      if (log) {
        Vector u = step.base;
        u.push_back(step.last);
        log->push_back(std::move(u));
      }
    }
  }
  return updates;
}

// f_{w*, <w*, x_1> - b R_S}
inline LinearClassifier unlift(const LiftedProblem& lp, const LiftedVector& w) {
  return {w.base, dot(w.base, lp.anchor) - w.last * lp.lift};
}

inline std::vector<std::size_t> random_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with our own bounded draws so the permutation is fixed by
  // the seed alone.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, i - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace detail

inline double l2_diameter(const Dataset& S) {
  double best = 0.0;
  for (std::size_t i = 0; i < S.size(); ++i) {
    for (std::size_t j = i + 1; j < S.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < S.d; ++c) {
        const double diff = S.points[i].x[c] - S.points[j].x[c];
        s += diff * diff;
      }
      best = std::max(best, s);
    }
  }
  return std::sqrt(best);
}

inline TrainReport adversarial_perceptron(const Dataset& S, double r,
                                          const NormSpec& norm,
                                          UpdateLog* log) {
  detail::check_training_set(S);
  TrainReport rep;
  rep.classifier.w.assign(S.d, 0.0);
  rep.cutoff_k = S.size();
  rep.mistakes = detail::origin_pass(S, S.size(), r, norm, rep.classifier.w, log);
  return rep;
}

inline TrainReport modified_adversarial_perceptron(const Dataset& S, double r,
                                                   const NormSpec& norm,
                                                   Rng& rng, UpdateLog* log) {
  detail::check_training_set(S);
  const auto k = static_cast<std::size_t>(uniform_int(rng, 0, S.size()));
  TrainReport rep;
  rep.classifier.w.assign(S.d, 0.0);
  rep.cutoff_k = k;
  rep.mistakes = detail::origin_pass(S, k, r, norm, rep.classifier.w, log);
  return rep;
}

inline TrainReport general_adversarial_perceptron(const Dataset& S, double r,
                                                  const NormSpec& norm,
                                                  Rng& rng, UpdateLog* log) {
  detail::check_training_set(S);
  const auto order = detail::random_order(S.size(), rng);
  const auto lp = detail::lift(S, order);
  const auto k = static_cast<std::size_t>(uniform_int(rng, 1, S.size()));
  LiftedVector w{Vector(S.d, 0.0), 0.0};
  TrainReport rep;
  rep.lifted = true;
  rep.cutoff_k = k;
  rep.mistakes = detail::lifted_pass(lp, k, r, norm, w, log);
  rep.classifier = detail::unlift(lp, w);
  return rep;
}

inline TrainReport adversarial_perceptron_until_stable(const Dataset& S,
                                                       double r,
                                                       const NormSpec& norm,
                                                       std::size_t max_epochs,
                                                       UpdateLog* log) {
  detail::check_training_set(S);
  TrainReport rep;
  rep.classifier.w.assign(S.d, 0.0);
  rep.cutoff_k = S.size();
  rep.epochs = 0;
  while (rep.epochs < max_epochs) {
    ++rep.epochs;
    const std::size_t u =
        detail::origin_pass(S, S.size(), r, norm, rep.classifier.w, log);
    rep.mistakes += u;
    if (u == 0) break;
  }
  return rep;
}

inline TrainReport general_adversarial_perceptron_until_stable(
    const Dataset& S, double r, const NormSpec& norm, Rng& rng,
    std::size_t max_epochs, UpdateLog* log) {
  detail::check_training_set(S);
  const auto order = detail::random_order(S.size(), rng);
  const auto lp = detail::lift(S, order);
  LiftedVector w{Vector(S.d, 0.0), 0.0};
  TrainReport rep;
  rep.lifted = true;
  rep.cutoff_k = S.size();
  rep.epochs = 0;
  while (rep.epochs < max_epochs) {
    ++rep.epochs;
    const std::size_t u = detail::lifted_pass(lp, S.size(), r, norm, w, log);
    rep.mistakes += u;
    if (u == 0) break;
  }
  rep.classifier = detail::unlift(lp, w);
  return rep;
}

}  // namespace advrobust
