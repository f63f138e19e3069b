#pragma once

/// \file
/// Hard-margin SVM baseline.
///
/// Pairwise coordinate ascent on the hard-margin dual
///   max  sum(alpha) - 1/2 ||sum alpha_i y_i x_i||^2,  alpha >= 0,
///        sum alpha_i y_i = 0,
/// with maximal-violating-pair / second-order working-set selection. Every
/// iteration also computes the geometric margin of the current w (with the
/// best offset for that w) and the upper bound 1/sqrt(2 D(alpha)) on the
/// optimal margin given by weak duality; the solve stops once the achieved
/// margin is within the requested relative tolerance of that bound.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "advrobust/errors.hpp"
#include "advrobust/geometry.hpp"

namespace advrobust {

struct SvmSolution {
  LinearClassifier classifier;
  double achieved_margin = 0.0;  // l2 geometric margin on the training set
  double margin_upper_bound = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct SvmOptions {
  double tolerance = 1e-6;
  std::size_t max_iterations = 1'000'000;
  std::size_t max_cached_gram = 4096;  // full Gram matrix up to this n
};

SvmSolution hard_margin_svm(const Dataset& S, const SvmOptions& opts = {});

inline SvmSolution hard_margin_svm(const Dataset& S, double tolerance) {
  SvmOptions o;
  o.tolerance = tolerance;
  return hard_margin_svm(S, o);
}

// ---------------------------------------------------------------------------
// Implementation

namespace detail {

class GramSource {
 public:
  GramSource(const Dataset& S, bool cache) : S_(S), n_(S.size()) {
    if (cache) {
      full_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i; j < n_; ++j) {
          const double v = dot(S.points[i].x, S.points[j].x);
          full_[i * n_ + j] = v;
          full_[j * n_ + i] = v;
        }
      }
    }
  }

  double at(std::size_t i, std::size_t j) const {
    return full_.empty() ? dot(S_.points[i].x, S_.points[j].x)
                         : full_[i * n_ + j];
  }

  void column(std::size_t j, std::vector<double>& out) const {
    out.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = at(i, j);
  }

 private:
  const Dataset& S_;
  std::size_t n_;
  std::vector<double> full_;
};

}  // namespace detail

inline SvmSolution hard_margin_svm(const Dataset& S, const SvmOptions& opts) {
  if (S.empty()) throw EmptyDataset("hard-margin SVM on an empty dataset");
  S.validate();
  if (!(opts.tolerance > 0.0)) {
    throw InvalidArgument("SVM tolerance must be positive");
  }
  const std::size_t n = S.size();
  const std::size_t d = S.d;
  SvmSolution sol;

  std::size_t npos = 0;
  for (const auto& pt : S.points) npos += pt.y > 0 ? 1 : 0;
  if (npos == 0 || npos == n) {
    // One class only: the constant classifier is exact and the margin is
    // unbounded.
    sol.classifier.w.assign(d, 0.0);
    sol.classifier.b = npos == n ? 0.0 : 1.0;
    sol.achieved_margin = kInf;
    sol.margin_upper_bound = kInf;
    sol.converged = true;
    return sol;
  }

  const detail::GramSource gram(S, n <= opts.max_cached_gram);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // Q alpha - 1
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = S.points[i].y;
  Vector w(d, 0.0);
  double alpha_sum = 0.0;
  std::vector<double> col_i, col_j;

  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    sol.iterations = iter;
    // <w, x_t> = y_t (G_t + 1).
    double min_pos = kInf, max_neg = -kInf;
    for (std::size_t t = 0; t < n; ++t) {
      const double s = y[t] * (grad[t] + 1.0);
      if (y[t] > 0) min_pos = std::min(min_pos, s);
      else max_neg = std::max(max_neg, s);
    }
    const double wn2 = dot(w, w);
    const double dual = alpha_sum - 0.5 * wn2;
    if (wn2 > 0.0 && dual > 0.0 && min_pos > max_neg) {
      const double wn = std::sqrt(wn2);
      const double achieved = (min_pos - max_neg) / (2.0 * wn);
      const double upper = 1.0 / std::sqrt(2.0 * dual);
      if (achieved >= (1.0 - opts.tolerance) * upper) {
        sol.classifier.w = w;
        sol.classifier.b = 0.5 * (min_pos + max_neg);
        sol.achieved_margin = achieved;
        sol.margin_upper_bound = upper;
        sol.converged = true;
        return sol;
      }
    }

    // Working set: i maximises -y G over I_up, j by second-order gain over
    // I_low.
    std::size_t i = n;
    double gmax = -kInf;
    for (std::size_t t = 0; t < n; ++t) {
      const bool up = y[t] > 0 || alpha[t] > 0.0;
      if (up && -y[t] * grad[t] > gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    if (i == n) break;
    gram.column(i, col_i);
    std::size_t j = n;
    double best_gain = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const bool low = y[t] < 0 || alpha[t] > 0.0;
      if (!low) continue;
      const double b = gmax + y[t] * grad[t];
      if (b <= 0.0) continue;
      double a = col_i[i] + gram.at(t, t) - 2.0 * col_i[t];
      if (a <= 1e-12) a = 1e-12;
      const double gain = b * b / a;
      if (gain > best_gain) {
        best_gain = gain;
        j = t;
      }
    }
    if (j == n) break;  // no violating pair left but the gap did not close

    const double a = col_i[i] + gram.at(j, j) - 2.0 * col_i[j];
    if (a <= 1e-14) {
      // Coincident points with opposite labels: not separable.
      break;
    }
    double tau = (gmax + y[j] * grad[j]) / a;
    if (y[i] < 0) tau = std::min(tau, alpha[i]);
    if (y[j] > 0) tau = std::min(tau, alpha[j]);
    if (tau <= 0.0) break;

    alpha[i] += y[i] * tau;
    alpha[j] -= y[j] * tau;
    alpha_sum += y[i] * tau - y[j] * tau;
    gram.column(j, col_j);
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * tau * (col_i[t] - col_j[t]);
    }
    for (std::size_t c = 0; c < d; ++c) {
      w[c] += tau * (S.points[i].x[c] - S.points[j].x[c]);
    }
  }

  // Not converged: report the current iterate.
  double min_pos = kInf, max_neg = -kInf;
  for (std::size_t t = 0; t < n; ++t) {
    const double s = dot(w, S.points[t].x);
    if (y[t] > 0) min_pos = std::min(min_pos, s);
    else max_neg = std::max(max_neg, s);
  }
  sol.classifier.w = w;
  sol.classifier.b = 0.5 * (min_pos + max_neg);
  const double wn = std::sqrt(dot(w, w));
  sol.achieved_margin =
      wn > 0.0 ? std::max(0.0, (min_pos - max_neg) / (2.0 * wn)) : 0.0;
  sol.converged = false;
  return sol;
}

}  // namespace advrobust
