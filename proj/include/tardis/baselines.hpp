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

// Post-hoc score baselines over stored logits and features. Every score is
// oriented so that higher means more likely OOD.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "tardis/classifier.hpp"
#include "tardis/clustering.hpp"
#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"
#include "tardis/metrics.hpp"

namespace tardis {

namespace detail {

inline void check_logits(std::span<const float> logits, std::size_t min_count) {
  if (logits.size() < min_count) {
    throw Error(Errc::too_few_logits, "need at least " + std::to_string(min_count) + " logits");
  }
  for (float v : logits) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite_value, "non-finite logit");
  }
}

inline double logsumexp(std::span<const float> v, double scale) {
  double mx = -std::numeric_limits<double>::infinity();
  for (float x : v) mx = std::max(mx, x / scale);
  double s = 0.0;
  for (float x : v) s += std::exp(x / scale - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// 1 - max softmax probability.
inline double msp_score(std::span<const float> logits) {
  detail::check_logits(logits, 2);
  double mx = -std::numeric_limits<double>::infinity();
  for (float x : logits) mx = std::max<double>(mx, x);
  double denom = 0.0;
  for (float x : logits) denom += std::exp(x - mx);
  return 1.0 - 1.0 / denom;
}

/// Negative free energy, -T logsumexp(logits / T).
inline double energy_score(std::span<const float> logits, double temperature = 1.0) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::invalid_temperature, "temperature must be positive");
  }
  detail::check_logits(logits, 1);
  return -temperature * detail::logsumexp(logits, temperature);
}

struct MahalanobisModel {
  std::vector<std::string> classes;
  Eigen::MatrixXd class_means;                // n_classes x F
  Eigen::MatrixXd shared_covariance_inverse;  // F x F
  Eigen::MatrixXd cholesky_lower;             // L with L L^T = covariance (+ jitter)
  double epsilon = 1e-6;
  /// Diagonal jitter that was actually added (0 when the plain covariance
  /// factorised).
  double applied_jitter = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(class_means.cols()); }
};

/// Class means with one covariance pooled over classes. Without labels all
/// rows form a single class. The covariance is factorised as is; if it is not
/// positive definite, epsilon (then 10x, up to 1e6x) is added to the diagonal.
inline MahalanobisModel mahalanobis_fit(const FeatureMatrix& features,
                                        std::optional<std::span<const std::string>> class_labels = std::nullopt,
                                        double epsilon = 1e-6) {
  const std::size_t n = features.n_rows();
  const std::size_t dim = features.n_cols();
  if (dim == 0) throw Error(Errc::invalid_config, "features must have at least one column");
  if (class_labels && class_labels->size() != n) {
    throw Error(Errc::length_mismatch, "class labels differ in length from features");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[class_labels ? (*class_labels)[i] : std::string("all")].push_back(i);
  if (groups.empty()) throw Error(Errc::too_few_samples_per_class, "no samples");

  const auto d = static_cast<Eigen::Index>(dim);
  MahalanobisModel model;
  model.epsilon = epsilon;
  model.class_means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups.size()), d);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index ci = 0;
  for (const auto& [name, rows] : groups) {
    if (rows.size() < 2) throw Error(Errc::too_few_samples_per_class, "class '" + name + "' has < 2 samples");
    model.classes.push_back(name);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::size_t i : rows) {
      for (Eigen::Index j = 0; j < d; ++j) mean[j] += features(i, static_cast<std::size_t>(j));
    }
    mean /= static_cast<double>(rows.size());
    model.class_means.row(ci++) = mean.transpose();
    Eigen::VectorXd dev(d);
    for (std::size_t i : rows) {
      for (Eigen::Index j = 0; j < d; ++j) dev[j] = features(i, static_cast<std::size_t>(j)) - mean[j];
      cov.noalias() += dev * dev.transpose();
    }
  }
  cov /= static_cast<double>(n);

  auto factorise = [&](double jitter) -> bool {
    Eigen::MatrixXd m = cov;
    m.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::MatrixXd l = llt.matrixL();
    if (!(l.diagonal().minCoeff() > 0.0)) return false;
    model.cholesky_lower = l;
    model.shared_covariance_inverse = llt.solve(Eigen::MatrixXd::Identity(d, d));
    model.applied_jitter = jitter;
    return true;
  };
  if (factorise(0.0)) return model;
  for (double jitter = epsilon; jitter <= epsilon * 1e6; jitter *= 10.0) {
    if (factorise(jitter)) return model;
  }
  throw Error(Errc::singular_covariance, "covariance not positive definite after regularisation");
}

/// Smallest Mahalanobis distance to any class mean.
inline double mahalanobis_score(const MahalanobisModel& model, std::span<const float> z) {
  if (z.size() != model.dim()) {
    throw Error(Errc::dimension_mismatch,
                "vector of length " + std::to_string(z.size()) + " for model dim " + std::to_string(model.dim()));
  }
  const auto d = static_cast<Eigen::Index>(model.dim());
  Eigen::VectorXd zv(d);
  for (Eigen::Index j = 0; j < d; ++j) zv[j] = z[static_cast<std::size_t>(j)];
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < model.class_means.rows(); ++c) {
    const Eigen::VectorXd diff = zv - model.class_means.row(c).transpose();
    const Eigen::VectorXd w = model.cholesky_lower.triangularView<Eigen::Lower>().solve(diff);
    best = std::min(best, w.norm());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Suite

enum class BaselineMethod { tardis, cluster_only, msp, energy, mahalanobis };

inline std::string_view method_name(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::tardis: return "tardis";
    case BaselineMethod::cluster_only: return "cluster-only";
    case BaselineMethod::msp: return "msp";
    case BaselineMethod::energy: return "energy";
    case BaselineMethod::mahalanobis: return "mahalanobis";
  }
  return "?";
}

struct SuiteInput {
  FeatureMatrix eval_features;
  std::vector<int> eval_truth;
  std::optional<LogitTable> eval_logits;
  /// Known-ID training rows for the Mahalanobis fit.
  FeatureMatrix fit_features;
  std::optional<std::vector<std::string>> fit_class_labels;
};

struct MethodResult {
  BaselineMethod method = BaselineMethod::tardis;
  std::optional<EvalReport> report;
  std::string unavailable;  // reason when `report` is empty
};

/// Score-only methods have no native decision rule; their accuracy is taken
/// at the operating point of the FPR95 threshold.
inline EvalReport evaluate_scores_at_tpr95(std::span<const double> scores, std::span<const int> truth) {
  const auto op = fpr_at_tpr_detail(scores, truth, 0.95);
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= op.threshold ? 1 : 0;
  return evaluate(scores, truth, pred);
}

/// Scores the evaluation rows with every available method.
inline std::vector<MethodResult> run_baseline_suite(const SuiteInput& in, const ClassifierModel& g,
                                                    const ClusterModel& clusters, double energy_temperature = 1.0) {
  const std::size_t n = in.eval_features.n_rows();
  std::vector<MethodResult> out;

  {
    std::vector<double> s(n);
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = predict_proba(g, in.eval_features.row(i));
      pred[i] = s[i] >= g.threshold ? 1 : 0;
    }
    out.push_back({BaselineMethod::tardis, evaluate(s, in.eval_truth, pred), {}});
  }
  {
    std::vector<double> s(n);
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cs = nearest_cluster_score(clusters, in.eval_features.row(i));
      s[i] = cs.ood_score;
      pred[i] = static_cast<int>(clusters.surrogate_label[cs.cluster]);
    }
    out.push_back({BaselineMethod::cluster_only, evaluate(s, in.eval_truth, pred), {}});
  }
  for (auto method : {BaselineMethod::msp, BaselineMethod::energy}) {
    if (!in.eval_logits || !in.eval_logits->complete()) {
      out.push_back({method, std::nullopt, std::string(errc_name(Errc::missing_logits))});
      continue;
    }
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = in.eval_logits->values.row(i);
      s[i] = method == BaselineMethod::msp ? msp_score(l) : energy_score(l, energy_temperature);
    }
    out.push_back({method, evaluate_scores_at_tpr95(s, in.eval_truth), {}});
  }
  try {
    std::optional<std::span<const std::string>> labels;
    if (in.fit_class_labels) labels = std::span<const std::string>(*in.fit_class_labels);
    const auto maha = mahalanobis_fit(in.fit_features, labels);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = mahalanobis_score(maha, in.eval_features.row(i));
    out.push_back({BaselineMethod::mahalanobis, evaluate_scores_at_tpr95(s, in.eval_truth), {}});
  } catch (const Error& e) {
    out.push_back({BaselineMethod::mahalanobis, std::nullopt, e.what()});
  }
  return out;
}

inline nlohmann::json to_json(const std::vector<MethodResult>& table) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& r : table) {
    j[std::string(method_name(r.method))] =
        r.report ? to_json(*r.report) : nlohmann::json{{"unavailable", r.unavailable}};
  }
  return j;
}

}  // namespace tardis
