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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tardis/baselines.hpp"
#include "test_util.hpp"

namespace tardis {
namespace {

using testing::error_code_of;
using testing::random_matrix;

TEST(Msp, Examples) {
  EXPECT_EQ(msp_score(std::vector<float>{0, 0}), 0.5);
  EXPECT_NEAR(msp_score(std::vector<float>{1000, 0}), 0.0, 1e-9);
  EXPECT_NEAR(msp_score(std::vector<float>{2, 0}), 1.0 - std::exp(2.0) / (std::exp(2.0) + 1.0), 1e-15);
  EXPECT_NEAR(msp_score(std::vector<float>{2, 0}), 0.11920292202211755, 1e-15);
  EXPECT_EQ(error_code_of([] { msp_score(std::vector<float>{1}); }), Errc::too_few_logits);
  EXPECT_EQ(error_code_of([] { msp_score(std::vector<float>{1, NAN}); }), Errc::non_finite_value);
}

TEST(Msp, MatchesNaiveSoftmax) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> normal(0.0f, 3.0f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> l(2 + rng() % 8);
    for (auto& v : l) v = normal(rng);
    double denom = 0.0;
    double mx = 0.0;
    for (float v : l) {
      denom += std::exp(static_cast<double>(v));
      mx = std::max(mx, std::exp(static_cast<double>(v)));
    }
    EXPECT_NEAR(msp_score(l), 1.0 - mx / denom, 1e-12);
  }
}

TEST(Energy, Examples) {
  EXPECT_NEAR(energy_score(std::vector<float>{0, 0}), -std::log(2.0), 1e-15);
  EXPECT_EQ(energy_score(std::vector<float>{3.5f}), -3.5);
  EXPECT_EQ(error_code_of([] { energy_score(std::vector<float>{0, 0}, 0.0); }), Errc::invalid_temperature);
  EXPECT_EQ(error_code_of([] { energy_score(std::vector<float>{0, 0}, -1.0); }), Errc::invalid_temperature);
}

TEST(Energy, MatchesNaiveFormula) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-5.0f, 5.0f);
  std::uniform_real_distribution<double> temp(0.2, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> l(1 + rng() % 6);
    for (auto& v : l) v = u(rng);
    const double t = temp(rng);
    double s = 0.0;
    for (float v : l) s += std::exp(v / t);
    EXPECT_NEAR(energy_score(l, t), -t * std::log(s), 1e-9);
  }
}

TEST(Energy, ColdLimitIsNegativeMax) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> normal(0.0f, 2.0f);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> l(2 + rng() % 5);
    for (auto& v : l) v = normal(rng);
    const float mx = *std::max_element(l.begin(), l.end());
    EXPECT_NEAR(energy_score(l, 1e-6), -static_cast<double>(mx), 1e-4);
  }
}

TEST(Baselines, ShiftInvariance) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> normal(0.0f, 2.0f);
  std::uniform_real_distribution<float> shift(-50.0f, 50.0f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> l(2 + rng() % 6);
    for (auto& v : l) v = std::round(normal(rng) * 64.0f) / 64.0f;  // exact under the shift
    const float c = std::round(shift(rng));
    auto s = l;
    for (auto& v : s) v += c;
    EXPECT_NEAR(msp_score(l), msp_score(s), 1e-6);
    // Energy moves by exactly -c under a shift; the centred score is invariant.
    EXPECT_NEAR(energy_score(l) - energy_score(s) - c, 0.0, 1e-6);
  }
}

TEST(Mahalanobis, IdentityCovarianceMonteCarlo) {
  std::mt19937_64 rng(5);
  const auto x = random_matrix(10000, 3, rng);
  const auto m = mahalanobis_fit(x);
  ASSERT_EQ(m.classes.size(), 1u);
  const Eigen::MatrixXd cov = m.cholesky_lower * m.cholesky_lower.transpose();
  EXPECT_LT((cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_EQ(m.applied_jitter, 0.0);
}

TEST(Mahalanobis, EuclideanReduction) {
  MahalanobisModel m;
  m.classes = {"all"};
  m.class_means = Eigen::MatrixXd::Zero(1, 2);
  m.cholesky_lower = Eigen::MatrixXd::Identity(2, 2);
  m.shared_covariance_inverse = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_DOUBLE_EQ(mahalanobis_score(m, std::vector<float>{3, 4}), 5.0);
  EXPECT_EQ(error_code_of([&] { mahalanobis_score(m, std::vector<float>{3}); }), Errc::dimension_mismatch);
}

TEST(Mahalanobis, DuplicatePointsAreRegularised) {
  const FeatureMatrix x(2, 2, {1, 2, 1, 2});
  const auto m = mahalanobis_fit(x);
  EXPECT_GT(m.applied_jitter, 0.0);
  EXPECT_EQ(mahalanobis_score(m, std::vector<float>{1, 2}), 0.0);
}

TEST(Mahalanobis, ClassMeanScoresZero) {
  std::mt19937_64 rng(6);
  const auto x = random_matrix(40, 3, rng);
  std::vector<std::string> labels(40);
  for (std::size_t i = 0; i < 40; ++i) labels[i] = i % 2 ? "a" : "b";
  const auto m = mahalanobis_fit(x, labels);
  EXPECT_EQ(m.classes, (std::vector<std::string>{"a", "b"}));
  std::vector<float> mean(3);
  for (std::size_t j = 0; j < 3; ++j) mean[j] = static_cast<float>(m.class_means(0, static_cast<Eigen::Index>(j)));
  EXPECT_NEAR(mahalanobis_score(m, mean), 0.0, 1e-6);
}

TEST(Mahalanobis, MatchesNaiveQuadraticForm) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_matrix(60, 4, rng);
    std::vector<std::string> labels(60);
    for (std::size_t i = 0; i < 60; ++i) labels[i] = i < 25 ? "p" : "q";
    const auto m = mahalanobis_fit(x, labels);
    // Pooled covariance recomputed directly.
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
    Eigen::VectorXd mp = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd mq = Eigen::VectorXd::Zero(4);
    for (std::size_t i = 0; i < 60; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) (i < 25 ? mp : mq)[j] += x(i, static_cast<std::size_t>(j));
    }
    mp /= 25.0;
    mq /= 35.0;
    for (std::size_t i = 0; i < 60; ++i) {
      Eigen::VectorXd d(4);
      for (Eigen::Index j = 0; j < 4; ++j) d[j] = x(i, static_cast<std::size_t>(j)) - (i < 25 ? mp : mq)[j];
      cov += d * d.transpose();
    }
    cov /= 60.0;
    const auto probes = random_matrix(10, 4, rng, 2.0f);
    for (std::size_t i = 0; i < 10; ++i) {
      Eigen::VectorXd z(4);
      for (Eigen::Index j = 0; j < 4; ++j) z[j] = probes(i, static_cast<std::size_t>(j));
      const double expect = std::min(oracle::mahalanobis_naive(z, mp, cov), oracle::mahalanobis_naive(z, mq, cov));
      EXPECT_NEAR(mahalanobis_score(m, probes.row(i)), expect, 1e-9);
    }
  }
}

TEST(Mahalanobis, AffineInvariance) {
  // Integer data and integer transforms keep every value exact in binary32,
  // so only the double-precision arithmetic of the fit is under test.
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> small(-8, 8);
  std::uniform_int_distribution<int> unit(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = static_cast<Eigen::Index>(2 + rng() % 3);
    const auto du = static_cast<std::size_t>(d);
    FeatureMatrix x(50, du);
    for (auto& v : x.values()) v = static_cast<float>(small(rng));
    Eigen::MatrixXd a;
    do {
      a = 2.0 * Eigen::MatrixXd::Identity(d, d);
      for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) a(i, j) += unit(rng);
      }
    } while (std::abs(a.determinant()) < 0.5);
    Eigen::VectorXd b(d);
    for (auto& v : b) v = small(rng);
    auto apply = [&](std::span<const float> row) {
      Eigen::VectorXd v(d);
      for (Eigen::Index j = 0; j < d; ++j) v[j] = row[static_cast<std::size_t>(j)];
      const Eigen::VectorXd w = a * v + b;
      std::vector<float> out(du);
      for (Eigen::Index j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] = static_cast<float>(w[j]);
      return out;
    };
    FeatureMatrix xt(0, du);
    for (std::size_t i = 0; i < 50; ++i) xt.append_row(apply(x.row(i)));
    const auto m1 = mahalanobis_fit(x);
    const auto m2 = mahalanobis_fit(xt);
    ASSERT_EQ(m1.applied_jitter, 0.0);
    ASSERT_EQ(m2.applied_jitter, 0.0);
    for (std::size_t i = 0; i < 10; ++i) {
      std::vector<float> z(du);
      for (auto& v : z) v = static_cast<float>(small(rng));
      EXPECT_NEAR(mahalanobis_score(m1, z), mahalanobis_score(m2, apply(z)), 1e-6);
    }
  }
}

TEST(Mahalanobis, Errors) {
  const FeatureMatrix x(3, 2, {1, 2, 3, 4, 5, 7});
  const std::vector<std::string> labels{"a", "a", "b"};
  EXPECT_EQ(error_code_of([&] { mahalanobis_fit(x, labels); }), Errc::too_few_samples_per_class);
  const std::vector<std::string> short_labels{"a"};
  EXPECT_EQ(error_code_of([&] { mahalanobis_fit(x, short_labels); }), Errc::length_mismatch);
  EXPECT_EQ(error_code_of([] { mahalanobis_fit(FeatureMatrix(0, 2)); }), Errc::too_few_samples_per_class);
}

TEST(Suite, AvailabilityWithoutLogits) {
  std::mt19937_64 rng(9);
  SuiteInput in;
  in.eval_features = random_matrix(40, 2, rng);
  in.eval_truth.resize(40);
  for (std::size_t i = 0; i < 40; ++i) in.eval_truth[i] = i % 2;
  in.fit_features = random_matrix(30, 2, rng);
  auto g = zero_model(2);
  g.weights = {1.0, 0.0};
  ClusterModel cm;
  cm.dim = 2;
  cm.centroids = {0, 0, 1, 1};
  cm.cluster_sizes = {10, 10};
  cm.id_fraction = {1.0, 0.2};
  cm.surrogate_label = {SurrogateLabel::id, SurrogateLabel::id};
  const auto table = run_baseline_suite(in, g, cm);
  ASSERT_EQ(table.size(), 5u);
  std::vector<std::string> available;
  for (const auto& r : table) {
    if (r.report) available.emplace_back(method_name(r.method));
    else EXPECT_EQ(r.unavailable, "MissingLogits");
  }
  EXPECT_EQ(available, (std::vector<std::string>{"tardis", "cluster-only", "mahalanobis"}));
  const auto j = to_json(table);
  EXPECT_TRUE(j["msp"].contains("unavailable"));
  EXPECT_TRUE(j["tardis"].contains("auroc"));
}

TEST(Suite, LogitsEnableScoreMethods) {
  std::mt19937_64 rng(10);
  SuiteInput in;
  in.eval_features = random_matrix(20, 2, rng);
  in.eval_truth.resize(20);
  for (std::size_t i = 0; i < 20; ++i) in.eval_truth[i] = i < 10 ? 0 : 1;
  in.eval_logits = LogitTable{random_matrix(20, 3, rng), std::vector<bool>(20, true)};
  in.fit_features = random_matrix(30, 2, rng);
  ClusterModel cm;
  cm.dim = 2;
  cm.centroids = {0, 0};
  cm.cluster_sizes = {1};
  cm.id_fraction = {0.5};
  cm.surrogate_label = {SurrogateLabel::id};
  const auto table = run_baseline_suite(in, zero_model(2), cm);
  for (const auto& r : table) EXPECT_TRUE(r.report.has_value()) << method_name(r.method);
  in.eval_logits->present[3] = false;
  const auto partial = run_baseline_suite(in, zero_model(2), cm);
  EXPECT_FALSE(partial[2].report.has_value());
  EXPECT_FALSE(partial[3].report.has_value());
}

}  // namespace
}  // namespace tardis
