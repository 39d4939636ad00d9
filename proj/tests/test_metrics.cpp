// Copyright 2026 The Tardis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tardis/metrics.hpp"
#include "test_util.hpp"

namespace tardis {
namespace {

using testing::error_code_of;

struct Scored {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Random scores drawn from a small grid so ties are common.
Scored random_scored(std::mt19937_64& rng, std::size_t n, int levels) {
  Scored s;
  std::uniform_int_distribution<int> level(0, levels - 1);
  for (std::size_t i = 0; i < n; ++i) {
    s.labels.push_back(static_cast<int>(rng() % 2));
    s.scores.push_back(level(rng) / static_cast<double>(levels) + 0.05 * s.labels.back());
  }
  s.labels[0] = 0;
  s.labels[1] = 1;
  return s;
}

TEST(Auroc, PerfectSeparation) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> l{0, 0, 1, 1};
  EXPECT_EQ(auroc(s, l), 1.0);
}

TEST(Auroc, FullTie) {
  const std::vector<double> s{0.5, 0.5};
  const std::vector<int> l{0, 1};
  EXPECT_EQ(auroc(s, l), 0.5);
}

TEST(Auroc, MatchesPairwiseOracleExactly) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_scored(rng, 50, 1 + trial % 12);
    EXPECT_EQ(auroc(s.scores, s.labels), oracle::auroc_pairwise(s.scores, s.labels));
  }
}

TEST(Auroc, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_scored(rng, 60, 9);
    std::vector<double> t(s.scores.size());
    std::transform(s.scores.begin(), s.scores.end(), t.begin(), [](double v) { return std::exp(3.0 * v) - 7.0; });
    EXPECT_EQ(auroc(s.scores, s.labels), auroc(t, s.labels));
  }
}

TEST(Auroc, NegationComplementsAndLabelFlipSymmetry) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(40);
    std::vector<int> l(40);
    for (std::size_t i = 0; i < 40; ++i) {
      s[i] = normal(rng);
      l[i] = static_cast<int>(rng() % 2);
    }
    l[0] = 0;
    l[1] = 1;
    std::vector<double> neg(40);
    std::vector<int> flip(40);
    for (std::size_t i = 0; i < 40; ++i) {
      neg[i] = -s[i];
      flip[i] = 1 - l[i];
    }
    EXPECT_NEAR(auroc(s, l) + auroc(neg, l), 1.0, 1e-15);
    EXPECT_NEAR(auroc(s, l), auroc(neg, flip), 1e-15);
  }
}

TEST(Auroc, Errors) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> one_class{1, 1};
  EXPECT_EQ(error_code_of([&] { auroc(s, one_class); }), Errc::single_class);
  const std::vector<int> short_labels{1};
  EXPECT_EQ(error_code_of([&] { auroc(s, short_labels); }), Errc::length_mismatch);
}

TEST(Fpr95, WorkedExample) {
  const std::vector<double> s{0.9, 0.8, 0.1, 0.85};
  const std::vector<int> l{1, 1, 0, 0};
  const auto r = fpr_at_tpr_detail(s, l, 0.95);
  EXPECT_EQ(r.threshold, 0.8);
  EXPECT_EQ(r.fpr, 0.5);
}

TEST(Fpr95, PerfectSeparationAndPointMass) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> l{0, 0, 1, 1};
  EXPECT_EQ(fpr_at_tpr(s, l), 0.0);
  const std::vector<double> mass(6, 0.3);
  const std::vector<int> l2{0, 1, 0, 1, 0, 1};
  EXPECT_EQ(fpr_at_tpr(mass, l2), 1.0);
}

TEST(Fpr95, MatchesThresholdSweep) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_scored(rng, 20 + trial % 60, 1 + trial % 15);
    for (double target : {0.95, 0.5, 1.0, 0.8}) {
      EXPECT_EQ(fpr_at_tpr(s.scores, s.labels, target), oracle::fpr_sweep(s.scores, s.labels, target));
    }
  }
}

TEST(Fpr95, NonIncreasingAsTargetDrops) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_scored(rng, 70, 10);
    double prev = 1.0;
    for (double target = 1.0; target > 0.0; target -= 0.05) {
      const double f = fpr_at_tpr(s.scores, s.labels, target);
      EXPECT_LE(f, prev);
      prev = f;
    }
  }
}

TEST(Fpr95, InvalidTarget) {
  const std::vector<double> s{0.1, 0.9};
  const std::vector<int> l{0, 1};
  EXPECT_EQ(error_code_of([&] { fpr_at_tpr(s, l, 0.0); }), Errc::invalid_config);
  EXPECT_EQ(error_code_of([&] { fpr_at_tpr(s, l, 1.5); }), Errc::invalid_config);
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy(std::vector<int>{0, 1}, std::vector<int>{0, 1}), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{0, 0}, std::vector<int>{1, 1}), 0.0);
  EXPECT_EQ(error_code_of([] { accuracy(std::vector<int>{0}, std::vector<int>{0, 1}); }), Errc::length_mismatch);
}

TEST(Accuracy, MatchesCount) {
  std::mt19937_64 rng(6);
  std::vector<int> a(100);
  std::vector<int> b(100);
  int hits = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    a[i] = static_cast<int>(rng() % 2);
    b[i] = static_cast<int>(rng() % 2);
    hits += a[i] == b[i];
  }
  EXPECT_EQ(accuracy(a, b), hits / 100.0);
}

TEST(Skewness, Examples) {
  EXPECT_EQ(skewness(std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_GT(skewness(std::vector<double>{0, 0, 0, 1}), 0.0);
  EXPECT_EQ(error_code_of([] { skewness(std::vector<double>{1, 2}); }), Errc::degenerate_distribution);
  EXPECT_EQ(error_code_of([] { skewness(std::vector<double>{4, 4, 4}); }), Errc::degenerate_distribution);
}

TEST(Skewness, MatchesMomentFormula) {
  std::mt19937_64 rng(7);
  std::gamma_distribution<double> gamma(2.0, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(50);
    for (auto& x : v) x = gamma(rng);
    EXPECT_NEAR(skewness(v), oracle::skewness_raw_moments(v), 1e-10);
  }
}

TEST(Welch, IdenticalSamples) {
  const std::vector<double> a{0.9, 0.92, 0.91};
  const auto r = welch_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.significant);
}

TEST(Welch, DisjointSupports) {
  const std::vector<double> a{0, 0, 0, 0};
  const std::vector<double> b{10, 10, 10, 10.1};
  const auto r = welch_t_test(a, b);
  EXPECT_TRUE(r.significant);
  EXPECT_LT(r.p_value, 1e-4);
  EXPECT_LT(r.t, 0.0);
}

TEST(Welch, ZeroVarianceBothSides) {
  const std::vector<double> a{1, 1};
  const std::vector<double> b{2, 2};
  EXPECT_TRUE(welch_t_test(a, b).significant);
  EXPECT_EQ(welch_t_test(a, b).p_value, 0.0);
  EXPECT_EQ(welch_t_test(a, a).p_value, 1.0);
}

TEST(Welch, MatchesQuadratureOracle) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t na = 2 + rng() % 12;
    const std::size_t nb = 2 + rng() % 12;
    const double shift = normal(rng);
    std::vector<double> a(na);
    std::vector<double> b(nb);
    for (auto& v : a) v = normal(rng);
    for (auto& v : b) v = shift + 2.0 * normal(rng);
    const auto r = welch_t_test(a, b);
    // Independent recomputation of t and df.
    auto stats = [](const std::vector<double>& s) {
      double m = 0.0;
      for (double v : s) m += v;
      m /= static_cast<double>(s.size());
      double q = 0.0;
      for (double v : s) q += (v - m) * (v - m);
      return std::pair{m, q / static_cast<double>(s.size() - 1) / static_cast<double>(s.size())};
    };
    const auto [ma, qa] = stats(a);
    const auto [mb, qb] = stats(b);
    const double t = (ma - mb) / std::sqrt(qa + qb);
    const double df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    EXPECT_NEAR(r.t, t, 1e-12 * std::max(1.0, std::abs(t)));
    EXPECT_NEAR(r.df, df, 1e-9 * df);
    EXPECT_NEAR(r.p_value, oracle::t_two_sided_p(t, df), 1e-6);
    EXPECT_EQ(r.significant, r.p_value < 0.05);
  }
}

TEST(Welch, SymmetricUpToSign) {
  const std::vector<double> a{0.91, 0.93, 0.95, 0.9};
  const std::vector<double> b{0.8, 0.85, 0.83};
  const auto ab = welch_t_test(a, b);
  const auto ba = welch_t_test(b, a);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p_value, ba.p_value);
  EXPECT_DOUBLE_EQ(ab.df, ba.df);
}

TEST(Welch, TooFewRuns) {
  const std::vector<double> a{1.0};
  const std::vector<double> b{1.0, 2.0};
  EXPECT_EQ(error_code_of([&] { welch_t_test(a, b); }), Errc::too_few_runs);
}

TEST(StageRatio, Examples) {
  std::vector<int> stage(100, 0);
  std::fill_n(stage.begin(), 17, 1);
  const auto r = stage_ood_ratio({{"clustering", stage}, {"validation", std::vector<int>(5, 0)}});
  EXPECT_DOUBLE_EQ(r.at("clustering"), 0.17);
  EXPECT_EQ(r.at("validation"), 0.0);
  EXPECT_EQ(error_code_of([] { stage_ood_ratio({{"empty", {}}}); }), Errc::empty_stage);
}

TEST(Report, RunsSummaryRecomputesFromEntries) {
  EvalReport agg;
  for (double a : {0.9, 0.8, 0.7}) {
    EvalReport r;
    r.auroc = a;
    r.fpr95 = 1 - a;
    agg.runs.push_back(r);
  }
  const auto j = to_json(agg);
  EXPECT_NEAR(j["summary"]["auroc"]["mean"].get<double>(), 0.8, 1e-12);
  EXPECT_NEAR(j["summary"]["auroc"]["std"].get<double>(), 0.1, 1e-12);
  EXPECT_EQ(j["runs"].size(), 3u);
}

TEST(Report, EvaluateFillsEveryField) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> t{0, 0, 1, 1};
  const std::vector<int> p{0, 0, 0, 1};
  const auto r = evaluate(s, t, p);
  EXPECT_EQ(r.auroc, 0.75);
  EXPECT_EQ(r.accuracy, 0.75);
  EXPECT_EQ(r.n_id, 2u);
  EXPECT_EQ(r.n_ood, 2u);
  EXPECT_TRUE(r.skewness.has_value());
  EXPECT_GE(r.fpr95, 0.0);
  EXPECT_LE(r.fpr95, 1.0);
}

}  // namespace
}  // namespace tardis
