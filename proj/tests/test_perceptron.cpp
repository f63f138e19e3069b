#include <cmath>

#include <gtest/gtest.h>

#include "advrobust/harness.hpp"
#include "advrobust/perceptron.hpp"

using namespace advrobust;

namespace {

double max_l2(const UpdateLog& log) {
  double m = 0.0;
  for (const auto& v : log) m = std::max(m, lp_norm(v, 2.0));
  return m;
}

Vector sum_of(const UpdateLog& log, std::size_t d) {
  Vector w(d, 0.0);
  for (const auto& v : log) {
    for (std::size_t j = 0; j < d; ++j) w[j] += v[j];
  }
  return w;
}

Dataset translated(const Dataset& S, const Vector& c) {
  Dataset out;
  out.d = S.d;
  for (const auto& pt : S.points) {
    Vector x = pt.x;
    for (std::size_t j = 0; j < S.d; ++j) x[j] += c[j];
    out.points.push_back({x, pt.y});
  }
  return out;
}

}  // namespace

TEST(AdversarialPerceptron, HandTracedTwoSteps) {
  Dataset S;
  S.add({0, 2}, 1);
  S.add({0, 2}, 1);
  UpdateLog log;
  const auto rep = adversarial_perceptron(S, 1.0, NormSpec::from_p(2), &log);
  EXPECT_EQ(rep.mistakes, 1u);
  EXPECT_EQ(rep.classifier.w, (Vector{0, 2}));
  EXPECT_EQ(rep.classifier.b, 0.0);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0], (Vector{0, 2}));
}

TEST(AdversarialPerceptron, FirstPointAlwaysUpdates) {
  Dataset S;
  S.add({5, -1, 2}, -1);
  const auto rep = adversarial_perceptron(S, 0.3, NormSpec::from_p(kInf));
  EXPECT_EQ(rep.mistakes, 1u);
  EXPECT_EQ(rep.classifier.w, (Vector{-5, 1, -2}));
}

TEST(AdversarialPerceptron, RejectsEmptyAndRaggedInput) {
  EXPECT_THROW(adversarial_perceptron(Dataset{}, 1.0, NormSpec::from_p(2)), EmptyDataset);
  Dataset bad;
  bad.d = 2;
  bad.points.push_back({{1, 2, 3}, 1});
  EXPECT_THROW(adversarial_perceptron(bad, 1.0, NormSpec::from_p(2)), DimensionMismatch);
}

TEST(AdversarialPerceptron, WeightIsSumOfLoggedUpdates) {
  Rng rng(21);
  for (double p : {1.5, 2.0, kInf}) {
    SlabDistribution slab{6, 0.3, NormSpec::from_p(p), 0.5, 1.0, 2.0};
    for (int trial = 0; trial < 20; ++trial) {
      const Dataset S = slab.sample(300, rng);
      UpdateLog log;
      const auto rep = adversarial_perceptron(S, slab.r, slab.norm, &log);
      EXPECT_EQ(log.size(), rep.mistakes);
      const Vector w = sum_of(log, S.d);
      for (std::size_t j = 0; j < S.d; ++j) {
        EXPECT_NEAR(w[j], rep.classifier.w[j], 1e-12 * (1.0 + std::abs(w[j])));
      }
    }
  }
}

TEST(AdversarialPerceptron, MistakeBoundOnSlabData) {
  Rng rng(22);
  for (double p : {1.5, 2.0, 3.0, kInf}) {
    for (double gamma : {0.2, 0.5, 1.0}) {
      SlabDistribution slab{8, 0.4, NormSpec::from_p(p), gamma, 1.0, 1.5};
      for (int trial = 0; trial < 25; ++trial) {
        const Dataset S = slab.sample(400, rng);
        UpdateLog log;
        const auto rep = adversarial_perceptron_until_stable(S, slab.r, slab.norm, 1000, &log);
        const double R = max_l2(log);
        EXPECT_LE(R, slab.radius_bound() * (1.0 + 1e-12));
        EXPECT_LE(static_cast<double>(rep.mistakes), std::ceil(R * R / (gamma * gamma)))
            << "p=" << p << " gamma=" << gamma;
        EXPECT_LE(static_cast<double>(rep.mistakes), slab.mistake_bound());
      }
    }
  }
}

TEST(AdversarialPerceptron, UntilStableReachesZeroTrainingRobustLoss) {
  Rng rng(23);
  SlabDistribution slab{5, 0.5, NormSpec::from_p(2), 0.5, 1.0, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset S = slab.sample(200, rng);
    const auto rep = adversarial_perceptron_until_stable(
        S, slab.r, slab.norm, static_cast<std::size_t>(slab.mistake_bound()) + 1);
    EXPECT_EQ(empirical_robust_loss(rep.classifier, S, slab.r, slab.norm), 0.0);
  }
}

TEST(AdversarialPerceptron, DeterministicForFixedInput) {
  Rng rng(24);
  SlabDistribution slab{4, 0.2, NormSpec::from_p(3), 0.3, 1.0, 1.0};
  const Dataset S = slab.sample(100, rng);
  const auto a = adversarial_perceptron(S, 0.2, slab.norm);
  const auto b = adversarial_perceptron(S, 0.2, slab.norm);
  EXPECT_EQ(a.classifier.w, b.classifier.w);
  EXPECT_EQ(a.mistakes, b.mistakes);
}

TEST(ModifiedPerceptron, CutoffCoversZeroThroughN) {
  Dataset S;
  for (int i = 0; i < 4; ++i) S.add({1.0 + i, 1.0}, 1);
  Rng rng(25);
  std::vector<int> seen(S.size() + 1, 0);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto rep = modified_adversarial_perceptron(S, 0.1, NormSpec::from_p(2), rng);
    ASSERT_LE(rep.cutoff_k, S.size());
    ASSERT_LE(rep.mistakes, rep.cutoff_k);
    seen[rep.cutoff_k]++;
    if (rep.cutoff_k == 0) {
      EXPECT_EQ(rep.mistakes, 0u);
      EXPECT_TRUE(is_zero(rep.classifier.w));
    }
  }
  // Each of the five values has probability 1/5; allow 5 sigma.
  for (int c : seen) EXPECT_NEAR(c, 1000, 5 * std::sqrt(5000 * 0.2 * 0.8));
}

TEST(ModifiedPerceptron, MatchesFullPassOnTheSamePrefix) {
  Rng data_rng(26);
  SlabDistribution slab{6, 0.3, NormSpec::from_p(2), 0.4, 1.0, 1.0};
  const Dataset S = slab.sample(60, data_rng);
  Rng rng(27);
  bool saw_full = false;
  for (int trial = 0; trial < 300; ++trial) {
    const auto rep = modified_adversarial_perceptron(S, slab.r, slab.norm, rng);
    Dataset prefix;
    prefix.d = S.d;
    prefix.points.assign(S.points.begin(), S.points.begin() + rep.cutoff_k);
    if (rep.cutoff_k == 0) continue;
    const auto ref = adversarial_perceptron(prefix, slab.r, slab.norm);
    EXPECT_EQ(ref.classifier.w, rep.classifier.w);
    EXPECT_EQ(ref.mistakes, rep.mistakes);
    saw_full = saw_full || rep.cutoff_k == S.size();
  }
  EXPECT_TRUE(saw_full);
}

TEST(ModifiedPerceptron, ExpectedRobustLossBound) {
  // Smaller replica of the acceptance check: 300 seeds, n = 100.
  SlabDistribution slab{10, 0.5, NormSpec::from_p(2), 1.0, 1.0, 1.0};
  const std::size_t n = 100;
  double total = 0.0;
  const int trials = 300;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(derive_seed(28, {static_cast<std::uint64_t>(trial)}));
    const Dataset S = slab.sample(n, rng);
    const Dataset test = slab.sample(5000, rng);
    const auto rep = modified_adversarial_perceptron(S, slab.r, slab.norm, rng);
    total += empirical_robust_loss(rep.classifier, test, slab.r, slab.norm);
  }
  const double bound = slab.mistake_bound() / static_cast<double>(n + 1);
  EXPECT_LE(total / trials, 1.5 * bound);
}

TEST(GeneralPerceptron, RandomCutoffStartsAtOne) {
  Dataset S;
  S.add({1, 0}, 1);
  S.add({-1, 0}, -1);
  S.add({2, 0}, 1);
  Rng rng(29);
  std::vector<int> seen(4, 0);
  for (int t = 0; t < 3000; ++t) {
    const auto rep = general_adversarial_perceptron(S, 0.1, NormSpec::from_p(2), rng);
    EXPECT_TRUE(rep.lifted);
    ASSERT_GE(rep.cutoff_k, 1u);
    ASSERT_LE(rep.cutoff_k, 3u);
    ASSERT_LE(rep.mistakes, rep.cutoff_k);
    seen[rep.cutoff_k]++;
  }
  EXPECT_EQ(seen[0], 0);
  for (int k = 1; k <= 3; ++k) EXPECT_NEAR(seen[k], 1000, 5 * std::sqrt(3000 * (1.0 / 3) * (2.0 / 3)));
}

TEST(GeneralPerceptron, ConflictingIdenticalPointsReportEveryStepAsMistake) {
  Dataset S;
  for (int i = 0; i < 6; ++i) S.add({1, 1}, i % 2 ? 1 : -1);
  Rng rng(30);
  for (int t = 0; t < 20; ++t) {
    const auto rep = general_adversarial_perceptron(S, 0.2, NormSpec::from_p(2), rng);
    EXPECT_EQ(rep.mistakes, rep.cutoff_k);
  }
}

TEST(GeneralPerceptron, WeightIsSumOfLoggedUpdates) {
  Rng rng(31);
  SlabDistribution slab{4, 0.3, NormSpec::from_p(kInf), 0.4, 1.0, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset S = slab.sample(150, rng);
    UpdateLog log;
    const auto order_seed = rng();
    Rng a(order_seed);
    const auto rep = general_adversarial_perceptron(S, slab.r, slab.norm, a, &log);
    ASSERT_EQ(log.size(), rep.mistakes);
    const Vector lifted = sum_of(log, S.d + 1);
    Rng b(order_seed);
    const auto order = detail::random_order(S.size(), b);
    const auto lp = detail::lift(S, order);
    const LiftedVector w{Vector(lifted.begin(), lifted.end() - 1), lifted.back()};
    const LinearClassifier f = detail::unlift(lp, w);
    for (std::size_t j = 0; j < S.d; ++j) EXPECT_NEAR(f.w[j], rep.classifier.w[j], 1e-10);
    EXPECT_NEAR(f.b, rep.classifier.b, 1e-9);
  }
}

TEST(GeneralPerceptron, LiftedSeparatorMarginAndNormBounds) {
  Rng rng(32);
  for (double p : {2.0, 3.0, kInf}) {
    SlabDistribution slab{5, 0.3, NormSpec::from_p(p), 0.5, 1.0, 1.0};
    for (int trial = 0; trial < 20; ++trial) {
      Dataset S = slab.sample(80, rng);
      // Shift the whole problem so the known separator has an offset.
      S = translated(S, {2.0, -1.0, 0.5, 0.0, 3.0});
      const Vector c{2.0, -1.0, 0.5, 0.0, 3.0};
      const Vector w{1, 0, 0, 0, 0};  // unit separator, offset <w, c>
      const auto order = detail::random_order(S.size(), rng);
      const auto lp = detail::lift(S, order);
      const double b = dot(w, c) - dot(w, lp.anchor);  // offset after centring
      const double R = lp.lift;
      const double scale = std::sqrt(1.0 + b * b / (R * R));
      Vector u_base = w;
      for (auto& v : u_base) v /= scale;
      const double u_last = -b / R / scale;
      const double uq = dual_norm(u_base, slab.norm);
      for (std::size_t i = 0; i < lp.points.size(); ++i) {
        const auto& x = lp.points[i];
        const int y = lp.labels[i];
        const double worst = y * (dot(u_base, x.base) + u_last * x.last) - slab.r * uq;
        EXPECT_GE(worst, slab.gamma / std::sqrt(2.0) - 1e-12);
        EXPECT_LE(x.norm2(), std::sqrt(2.0) * R * (1.0 + 1e-12));
      }
    }
  }
}

TEST(GeneralPerceptron, AgreesWithOriginTrainerOnCenteredData) {
  // Both trainers, run until stable on the same permutation, classify every
  // training point correctly, so their decisions coincide there.
  Rng rng(33);
  for (double p : {2.0, kInf}) {
    SlabDistribution slab{4, 0.3, NormSpec::from_p(p), 0.5, 1.0, 1.0};
    for (int trial = 0; trial < 20; ++trial) {
      const Dataset S = slab.sample(120, rng);
      const auto seed = rng();
      Rng a(seed);
      const auto gen = general_adversarial_perceptron_until_stable(S, slab.r, slab.norm, a, 10'000);
      Rng b(seed);
      const auto order = detail::random_order(S.size(), b);
      Dataset permuted;
      permuted.d = S.d;
      for (auto idx : order) permuted.points.push_back(S.points[idx]);
      const auto org = adversarial_perceptron_until_stable(permuted, slab.r, slab.norm, 10'000);
      for (const auto& pt : S.points) {
        EXPECT_EQ(gen.classifier.predict(pt.x), org.classifier.predict(pt.x));
        EXPECT_EQ(gen.classifier.predict(pt.x), pt.y);
      }
    }
  }
}

TEST(GeneralPerceptron, TranslationEquivariance) {
  Rng rng(34);
  SlabDistribution slab{3, 0.25, NormSpec::from_p(2), 0.5, 1.0, 1.0};
  const Vector c{4.0, -3.0, 1.5};
  for (int trial = 0; trial < 30; ++trial) {
    const Dataset S = slab.sample(100, rng);
    const Dataset T = translated(S, c);
    const auto seed = rng();
    Rng a(seed), b(seed);
    const auto fs = general_adversarial_perceptron(S, slab.r, slab.norm, a);
    const auto ft = general_adversarial_perceptron(T, slab.r, slab.norm, b);
    EXPECT_EQ(fs.cutoff_k, ft.cutoff_k);
    EXPECT_EQ(fs.mistakes, ft.mistakes);
    Rng probe(seed ^ 1);
    for (int s = 0; s < 500; ++s) {
      Vector x{uniform(probe, -3, 3), uniform(probe, -2, 2), uniform(probe, -2, 2)};
      Vector xt = x;
      for (std::size_t j = 0; j < 3; ++j) xt[j] += c[j];
      const double margin = dot(fs.classifier.w, x) - fs.classifier.b;
      if (std::abs(margin) < 1e-8) continue;
      EXPECT_EQ(fs.classifier.predict(x), ft.classifier.predict(xt));
    }
  }
}

TEST(GeneralPerceptron, ConvergesToZeroRobustLossIn2D) {
  Rng rng(35);
  SlabDistribution slab{2, 0.3, NormSpec::from_p(2), 0.4, 1.0, 1.0};
  for (int trial = 0; trial < 20; ++trial) {
    Dataset S = translated(slab.sample(60, rng), {1.5, -2.5});
    const auto rep = general_adversarial_perceptron_until_stable(S, slab.r, slab.norm, rng, 10'000);
    EXPECT_EQ(empirical_robust_loss(rep.classifier, S, slab.r, slab.norm), 0.0);
  }
}

TEST(GeneralPerceptron, DeterministicForFixedSeed) {
  Rng data(36);
  SlabDistribution slab{4, 0.3, NormSpec::from_p(2), 0.5, 1.0, 1.0};
  const Dataset S = slab.sample(80, data);
  Rng a(99), b(99);
  const auto x = general_adversarial_perceptron(S, slab.r, slab.norm, a);
  const auto y = general_adversarial_perceptron(S, slab.r, slab.norm, b);
  EXPECT_EQ(x.classifier.w, y.classifier.w);
  EXPECT_EQ(x.classifier.b, y.classifier.b);
  EXPECT_EQ(x.mistakes, y.mistakes);
  EXPECT_EQ(x.cutoff_k, y.cutoff_k);
}

TEST(L2Diameter, SmallSets) {
  Dataset S;
  S.add({0, 0}, 1);
  EXPECT_EQ(l2_diameter(S), 0.0);
  S.add({3, 4}, -1);
  S.add({1, 1}, 1);
  EXPECT_DOUBLE_EQ(l2_diameter(S), 5.0);
}
