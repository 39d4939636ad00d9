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

#pragma once

// Detection metrics. OOD is the positive class (label 1) and a higher score
// means "more OOD" throughout.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "tardis/errors.hpp"

namespace tardis {

namespace detail {

inline void check_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(Errc::length_mismatch, std::to_string(scores.size()) + " scores for " +
                                           std::to_string(labels.size()) + " labels");
  }
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error(Errc::invalid_config, "labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  if (pos == 0 || pos == labels.size()) throw Error(Errc::single_class, "both classes must be present");
}

}  // namespace detail

/// Mann-Whitney AUROC with midranks for ties.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_scores(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are doubled so that midranks stay integral: 2*rank = first + last.
  double rank_sum2 = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double mid2 = static_cast<double>(i + 1 + j + 1);
    for (std::size_t r = i; r <= j; ++r) {
      if (labels[idx[r]] == 1) {
        rank_sum2 += mid2;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  // U = R_pos - np (np + 1) / 2, all doubled.
  const double u2 = rank_sum2 - np * (np + 1.0);
  return u2 / (2.0 * np * nn);
}

struct FprAtTpr {
  double fpr = 0.0;
  double threshold = 0.0;
};

/// Picks the largest threshold t with TPR(score >= t) >= tpr_target and
/// reports the ID fraction scoring >= t.
inline FprAtTpr fpr_at_tpr_detail(std::span<const double> scores, std::span<const int> labels,
                                  double tpr_target = 0.95) {
  detail::check_scores(scores, labels);
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) throw Error(Errc::invalid_config, "tpr_target must be in (0, 1]");
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());

  const double n_pos = static_cast<double>(pos.size());
  double threshold = pos.back();
  for (std::size_t i = 0; i < pos.size();) {
    std::size_t j = i;
    while (j + 1 < pos.size() && pos[j + 1] == pos[i]) ++j;
    if (static_cast<double>(j + 1) / n_pos >= tpr_target) {
      threshold = pos[i];
      break;
    }
    i = j + 1;
  }
  const auto above = static_cast<std::size_t>(
      std::partition_point(neg.begin(), neg.end(), [&](double v) { return v >= threshold; }) - neg.begin());
  return {static_cast<double>(above) / static_cast<double>(neg.size()), threshold};
}

inline double fpr_at_tpr(std::span<const double> scores, std::span<const int> labels, double tpr_target = 0.95) {
  return fpr_at_tpr_detail(scores, labels, tpr_target).fpr;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(Errc::length_mismatch, std::to_string(predicted.size()) + " predictions for " +
                                           std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw Error(Errc::length_mismatch, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Biased sample skewness g1 = m3 / m2^(3/2).
inline double skewness(std::span<const double> scores) {
  const std::size_t n = scores.size();
  if (n < 3) throw Error(Errc::degenerate_distribution, "skewness needs at least 3 values");
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(n);
  double m2 = 0.0;
  double m3 = 0.0;
  for (double s : scores) {
    const double d = s - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (!(m2 > 0.0)) throw Error(Errc::degenerate_distribution, "zero variance");
  return m3 / std::pow(m2, 1.5);
}

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool significant = false;  // p < 0.05
};

/// Two-sided Welch t-test. When both samples have zero variance the test is
/// degenerate: equal means give t = 0, p = 1; unequal means give p = 0.
inline WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(Errc::too_few_runs, "each sample needs at least 2 values");
  auto moments = [](std::span<const double> s) {
    double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(s.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;

  WelchResult r;
  if (se2 == 0.0) {
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p_value = 0.0;
    r.significant = true;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  if (r.t == 0.0) {
    r.p_value = 1.0;
  } else {
    const boost::math::students_t dist(r.df);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.significant = r.p_value < 0.05;
  return r;
}

/// Share of label-1 rows for each named stage.
inline std::map<std::string, double> stage_ood_ratio(const std::map<std::string, std::vector<int>>& stages) {
  std::map<std::string, double> out;
  for (const auto& [name, labels] : stages) {
    if (labels.empty()) throw Error(Errc::empty_stage, "stage '" + name + "' has no rows");
    std::size_t ood = 0;
    for (int l : labels) ood += l == 1 ? 1 : 0;
    out[name] = static_cast<double>(ood) / static_cast<double>(labels.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and sample (n - 1) standard deviation; std is 0 for a single value.
inline MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

struct EvalReport {
  double auroc = 0.0;
  double fpr95 = 0.0;
  double accuracy = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  std::optional<double> skewness;
  std::map<std::string, double> stage_ood_ratios;
  /// "truth" or "surrogate": which labels the metrics were computed against.
  std::string labels = "truth";
  std::vector<EvalReport> runs;
};

/// Scores one detector. `predicted` may be empty when the method has no
/// natural decision rule; accuracy is then left at 0.
inline EvalReport evaluate(std::span<const double> scores, std::span<const int> truth,
                           std::span<const int> predicted = {}) {
  EvalReport r;
  r.auroc = auroc(scores, truth);
  r.fpr95 = fpr_at_tpr(scores, truth, 0.95);
  if (!predicted.empty()) r.accuracy = accuracy(predicted, truth);
  for (int l : truth) (l == 1 ? r.n_ood : r.n_id)++;
  try {
    r.skewness = skewness(scores);
  } catch (const Error&) {
    r.skewness.reset();
  }
  return r;
}

struct RunSummary {
  MeanStd auroc;
  MeanStd fpr95;
  MeanStd accuracy;
};

inline RunSummary summarize(std::span<const EvalReport> runs) {
  std::vector<double> a;
  std::vector<double> f;
  std::vector<double> c;
  for (const auto& r : runs) {
    a.push_back(r.auroc);
    f.push_back(r.fpr95);
    c.push_back(r.accuracy);
  }
  return {mean_std(a), mean_std(f), mean_std(c)};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"auroc", r.auroc}, {"fpr95", r.fpr95},         {"accuracy", r.accuracy},
                   {"n_id", r.n_id},   {"n_ood", r.n_ood},         {"labels", r.labels},
                   {"skewness", r.skewness ? nlohmann::json(*r.skewness) : nlohmann::json(nullptr)}};
  if (!r.stage_ood_ratios.empty()) j["stage_ood_ratios"] = r.stage_ood_ratios;
  if (!r.runs.empty()) {
    auto runs = nlohmann::json::array();
    for (const auto& run : r.runs) runs.push_back(to_json(run));
    j["runs"] = std::move(runs);
    const auto s = summarize(r.runs);
    j["summary"] = {{"auroc", {{"mean", s.auroc.mean}, {"std", s.auroc.std}}},
                    {"fpr95", {{"mean", s.fpr95.mean}, {"std", s.fpr95.std}}},
                    {"accuracy", {{"mean", s.accuracy.mean}, {"std", s.accuracy.std}}}};
  }
  return j;
}

inline nlohmann::json to_json(const WelchResult& w) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(v > 0 ? "inf" : "-inf"); };
  return {{"t", num(w.t)}, {"df", w.df}, {"p_value", w.p_value}, {"significant_at_0.05", w.significant}};
}

}  // namespace tardis
