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

// Binary logistic-regression distribution classifier.
//
// Features are z-scored with training statistics; the model minimises
//
//     J(w, b) = mean_i [softplus(m_i) - y_i m_i] + (lambda / 2) |w|^2,
//     m_i = w . x_i + b
//
// by full-batch gradient descent with an Armijo backtracking line search.
// The bias is not regularised.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"

namespace tardis {

enum class TrainedOn { surrogate, oracle };

inline std::string_view trained_on_name(TrainedOn t) { return t == TrainedOn::oracle ? "oracle" : "surrogate"; }

struct ClassifierModel {
  std::vector<double> weights;  // in standardized feature space
  double bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  TrainedOn trained_on = TrainedOn::surrogate;
  double threshold = 0.5;

  std::size_t dim() const { return weights.size(); }
};

struct TrainConfig {
  std::size_t max_iter = 500;
  double learning_rate = 0.1;
  /// Defaults to 1 / n_samples when unset.
  std::optional<double> l2_lambda;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ClassifierModel model;
  /// Objective after initialisation and after every accepted step.
  std::vector<double> loss_history;
  std::size_t iterations = 0;
};

inline double sigmoid(double m) {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

inline double softplus(double m) { return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

/// Regularised mean cross-entropy over a fixed design matrix. Parameters are
/// packed as [w_0 .. w_{F-1}, b].
class LogisticObjective {
 public:
  LogisticObjective(std::vector<double> x, std::vector<int> y, std::size_t dim, double l2_lambda)
      : x_(std::move(x)), y_(std::move(y)), dim_(dim), lambda_(l2_lambda) {}

  std::size_t n() const { return y_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t n_params() const { return dim_ + 1; }
  double lambda() const { return lambda_; }
  std::span<const double> row(std::size_t i) const { return {x_.data() + i * dim_, dim_}; }
  int label(std::size_t i) const { return y_[i]; }

  double margin(std::span<const double> theta, std::size_t i) const {
    const auto r = row(i);
    double m = theta[dim_];
    for (std::size_t j = 0; j < dim_; ++j) m += theta[j] * r[j];
    return m;
  }

  double value(std::span<const double> theta) const {
    double loss = 0.0;
    for (std::size_t i = 0; i < n(); ++i) {
      const double m = margin(theta, i);
      loss += softplus(m) - y_[i] * m;
    }
    loss /= static_cast<double>(n());
    double reg = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) reg += theta[j] * theta[j];
    return loss + 0.5 * lambda_ * reg;
  }

  std::vector<double> gradient(std::span<const double> theta) const {
    std::vector<double> g(n_params(), 0.0);
    for (std::size_t i = 0; i < n(); ++i) {
      const double resid = sigmoid(margin(theta, i)) - y_[i];
      const auto r = row(i);
      for (std::size_t j = 0; j < dim_; ++j) g[j] += resid * r[j];
      g[dim_] += resid;
    }
    const double inv_n = 1.0 / static_cast<double>(n());
    for (auto& v : g) v *= inv_n;
    for (std::size_t j = 0; j < dim_; ++j) g[j] += lambda_ * theta[j];
    return g;
  }

 private:
  std::vector<double> x_;
  std::vector<int> y_;
  std::size_t dim_;
  double lambda_;
};

/// Largest relative disagreement between the analytic gradient and central
/// differences with step h. The denominator is floored at 1e-6 so that
/// components that are zero analytically compare absolutely.
inline double gradient_check(const LogisticObjective& obj, std::span<const double> theta, double h = 1e-5) {
  const auto analytic = obj.gradient(theta);
  std::vector<double> probe(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const double saved = probe[p];
    probe[p] = saved + h;
    const double up = obj.value(probe);
    probe[p] = saved - h;
    const double down = obj.value(probe);
    probe[p] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[p]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[p] - numeric) / denom);
  }
  return worst;
}

namespace detail {

inline void check_labels(const FeatureMatrix& x, std::span<const int> labels) {
  if (labels.size() != x.n_rows()) {
    throw Error(Errc::dimension_mismatch, std::to_string(labels.size()) + " labels for " +
                                              std::to_string(x.n_rows()) + " rows");
  }
  bool has0 = false;
  bool has1 = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error(Errc::invalid_config, "labels must be 0 or 1");
    has0 = has0 || l == 0;
    has1 = has1 || l == 1;
  }
  if (!has0 || !has1) throw Error(Errc::single_class_training_set, "training labels contain a single class");
}

/// Row order independent of input order: lexicographic on (features, label).
inline std::vector<std::size_t> canonical_order(const FeatureMatrix& x, std::span<const int> labels) {
  std::vector<std::size_t> idx(x.n_rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = x.row(a);
    const auto rb = x.row(b);
    for (std::size_t j = 0; j < ra.size(); ++j) {
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    }
    return labels[a] < labels[b];
  });
  return idx;
}

}  // namespace detail

/// Standardization statistics and the standardized design matrix.
inline LogisticObjective make_objective(const FeatureMatrix& x, std::span<const int> labels, double l2_lambda,
                                        std::vector<double>* mean_out = nullptr,
                                        std::vector<double>* std_out = nullptr) {
  const std::size_t n = x.n_rows();
  const std::size_t dim = x.n_cols();
  const auto order = detail::canonical_order(x, labels);
  std::vector<double> mean(dim, 0.0);
  std::vector<double> sd(dim, 0.0);
  for (std::size_t i : order) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += x(i, j);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i : order) {
    for (std::size_t j = 0; j < dim; ++j) sd[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
  }
  for (auto& s : sd) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0.0)) s = 1.0;
  }
  std::vector<double> design(n * dim);
  std::vector<int> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    for (std::size_t j = 0; j < dim; ++j) design[r * dim + j] = (x(i, j) - mean[j]) / sd[j];
    y[r] = labels[i];
  }
  if (mean_out) *mean_out = mean;
  if (std_out) *std_out = sd;
  return LogisticObjective(std::move(design), std::move(y), dim, l2_lambda);
}

inline TrainResult train(const FeatureMatrix& x, std::span<const int> labels, const TrainConfig& cfg,
                         TrainedOn trained_on = TrainedOn::surrogate) {
  detail::check_labels(x, labels);
  if (cfg.max_iter == 0 || !(cfg.learning_rate > 0.0) || !(cfg.tol > 0.0) ||
      (cfg.l2_lambda && !(*cfg.l2_lambda > 0.0))) {
    throw Error(Errc::invalid_config, "training parameters must be positive");
  }
  const double lambda = cfg.l2_lambda.value_or(1.0 / static_cast<double>(x.n_rows()));

  TrainResult result;
  auto& model = result.model;
  const LogisticObjective obj = make_objective(x, labels, lambda, &model.feature_mean, &model.feature_std);
  const std::size_t np = obj.n_params();

  std::vector<double> theta(np, 0.0);
  double loss = obj.value(theta);
  std::vector<double> grad = obj.gradient(theta);
  result.loss_history.push_back(loss);

  // The first trial step is the learning rate; later trial steps use the
  // Barzilai-Borwein estimate from the previous accepted move.
  double step = cfg.learning_rate;
  std::vector<double> cand(np);
  for (std::size_t iter = 0; iter < cfg.max_iter; ++iter) {
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (gnorm2 == 0.0) break;

    double t = step;
    double cand_loss = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t p = 0; p < np; ++p) cand[p] = theta[p] - t * grad[p];
      cand_loss = obj.value(cand);
      if (cand_loss <= loss - 1e-4 * t * gnorm2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    auto cand_grad = obj.gradient(cand);
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
      const double s = cand[p] - theta[p];
      ss += s * s;
      sy += s * (cand_grad[p] - grad[p]);
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-8, 1e8) : cfg.learning_rate;

    const double prev = loss;
    theta.swap(cand);
    grad.swap(cand_grad);
    loss = cand_loss;
    result.loss_history.push_back(loss);
    result.iterations = iter + 1;
    if (std::abs(prev - loss) <= cfg.tol * std::max(std::abs(prev), 1e-12)) break;
  }

  model.weights.assign(theta.begin(), theta.end() - 1);
  model.bias = theta.back();
  model.trained_on = trained_on;
  return result;
}

inline double logit(const ClassifierModel& model, std::span<const float> z) {
  if (z.size() != model.dim()) {
    throw Error(Errc::dimension_mismatch,
                "vector of length " + std::to_string(z.size()) + " for model dim " + std::to_string(model.dim()));
  }
  double m = model.bias;
  for (std::size_t j = 0; j < z.size(); ++j) {
    m += model.weights[j] * ((z[j] - model.feature_mean[j]) / model.feature_std[j]);
  }
  return m;
}

inline double predict_proba(const ClassifierModel& model, std::span<const float> z) {
  return sigmoid(logit(model, z));
}

inline int predict_label(const ClassifierModel& model, std::span<const float> z) {
  return predict_proba(model, z) >= model.threshold ? 1 : 0;
}

inline std::vector<double> predict_proba(const ClassifierModel& model, const FeatureMatrix& x) {
  std::vector<double> out(x.n_rows());
  for (std::size_t i = 0; i < x.n_rows(); ++i) out[i] = predict_proba(model, x.row(i));
  return out;
}

/// Model with zero weights and identity standardization.
inline ClassifierModel zero_model(std::size_t dim) {
  ClassifierModel m;
  m.weights.assign(dim, 0.0);
  m.feature_mean.assign(dim, 0.0);
  m.feature_std.assign(dim, 1.0);
  return m;
}

inline nlohmann::json to_json(const ClassifierModel& m) {
  return {{"weights", m.weights},
          {"bias", m.bias},
          {"feature_mean", m.feature_mean},
          {"feature_std", m.feature_std},
          {"trained_on", std::string(trained_on_name(m.trained_on))},
          {"threshold", m.threshold}};
}

inline ClassifierModel classifier_from_json(const nlohmann::json& j) {
  try {
    ClassifierModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_std = j.at("feature_std").get<std::vector<double>>();
    m.trained_on = j.value("trained_on", std::string("surrogate")) == "oracle" ? TrainedOn::oracle
                                                                               : TrainedOn::surrogate;
    m.threshold = j.value("threshold", 0.5);
    if (m.feature_mean.size() != m.dim() || m.feature_std.size() != m.dim()) {
      throw Error(Errc::invalid_config, "classifier arrays disagree on dimension");
    }
    for (double s : m.feature_std) {
      if (!(s > 0.0)) throw Error(Errc::invalid_config, "feature_std entries must be positive");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, std::string("classifier model: ") + e.what());
  }
}

}  // namespace tardis
