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

// Surrogate ID/OOD labelling by clustering the joint ID + WILD feature space.
//
// k-means (k-means++ seeding, Lloyd iterations) groups the pooled features;
// every cluster whose share of known-ID rows reaches the threshold T is
// labelled ID and all its rows inherit that label, otherwise OOD. The pair
// (k, T) is chosen by minimising
//
//     H(S) + P_mis-ID - P_corr-ID
//
// where H(S) is the mean binary entropy of the per-cluster {ID, WILD}
// composition and the two proportions are taken over known-ID rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"

namespace tardis {

struct ClusterConfig {
  std::size_t k = 2;
  double t = 0.1;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  double tol = 1e-4;
  /// Independent k-means++ restarts (seeds seed, seed+1, ...); the lowest
  /// final inertia wins.
  std::size_t n_init = 10;
};

inline void validate(const ClusterConfig& cfg, std::size_t n_rows) {
  if (cfg.k < 2) throw Error(Errc::invalid_config, "k must be >= 2");
  if (!(cfg.t > 0.0 && cfg.t < 1.0)) throw Error(Errc::invalid_config, "T must lie in (0, 1)");
  if (cfg.max_iter == 0 || cfg.n_init == 0 || !(cfg.tol >= 0.0)) {
    throw Error(Errc::invalid_config, "max_iter, n_init must be positive and tol non-negative");
  }
  if (n_rows < cfg.k) {
    throw Error(Errc::too_few_samples, std::to_string(n_rows) + " rows for k = " + std::to_string(cfg.k));
  }
}

/// k = ceil(0.3 M), T = 0.1.
inline ClusterConfig default_config(std::size_t m) {
  if (m < 7) throw Error(Errc::too_few_samples, "default k needs M >= 7, got " + std::to_string(m));
  ClusterConfig cfg;
  cfg.k = (3 * m + 9) / 10;
  cfg.t = 0.1;
  cfg.seed = 0;
  return cfg;
}

/// ceil(ratio * m), guarded against representation error in `ratio`.
inline std::size_t k_from_ratio(double ratio, std::size_t m) {
  const double raw = ratio * static_cast<double>(m);
  const double rounded = std::round(raw);
  return static_cast<std::size_t>(std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw));
}

enum class SurrogateLabel : std::uint8_t { id = 0, ood = 1 };

struct ClusterModel {
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim, row-major
  std::vector<std::size_t> cluster_sizes;
  std::vector<double> id_fraction;  // empty until labels are assigned
  std::vector<SurrogateLabel> surrogate_label;
  double inertia = 0.0;
  double t = 0.1;

  std::size_t k() const { return cluster_sizes.size(); }
  std::span<const double> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }
  bool labelled() const { return !id_fraction.empty(); }
};

struct KMeansFit {
  ClusterModel model;
  std::vector<std::size_t> assignments;
  /// Inertia after every assignment step, first to last.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
};

namespace detail {

inline double sq_dist(std::span<const float> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = static_cast<double>(x[j]) - c[j];
    s += d * d;
  }
  return s;
}

/// Nearest centroid by squared distance; ties resolve to the lowest index.
inline std::pair<std::size_t, double> nearest(std::span<const float> x, const std::vector<double>& centroids,
                                              std::size_t k, std::size_t dim) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = sq_dist(x, {centroids.data() + c * dim, dim});
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

inline std::vector<double> kmeanspp_init(const FeatureMatrix& x, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = x.n_rows();
  const std::size_t dim = x.n_cols();
  std::vector<double> centroids(k * dim);
  auto set_center = [&](std::size_t c, std::size_t row) {
    const auto r = x.row(row);
    for (std::size_t j = 0; j < dim; ++j) centroids[c * dim + j] = r[j];
  };
  set_center(0, uniform_index(rng, n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(x.row(i), {centroids.data(), dim});
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    set_center(c, pick);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(x.row(i), {centroids.data() + c * dim, dim}));
    }
  }
  return centroids;
}

/// Root of the mean per-feature variance; the unit for centroid movement.
inline double data_scale(const FeatureMatrix& x) {
  const std::size_t n = x.n_rows();
  const std::size_t dim = x.n_cols();
  double total = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
    total += ss / static_cast<double>(n);
  }
  const double s = std::sqrt(total / static_cast<double>(std::max<std::size_t>(dim, 1)));
  return s > 0.0 ? s : 1.0;
}

inline KMeansFit lloyd(const FeatureMatrix& x, const ClusterConfig& cfg, std::uint64_t seed, double scale) {
  const std::size_t n = x.n_rows();
  const std::size_t dim = x.n_cols();
  const std::size_t k = cfg.k;
  std::mt19937_64 rng(seed);

  KMeansFit fit;
  std::vector<double> centroids = kmeanspp_init(x, k, rng);
  std::vector<std::size_t> assign(n, 0);
  std::vector<double> dist(n, 0.0);

  auto assign_step = [&]() {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [c, d] = nearest(x.row(i), centroids, k, dim);
      changed = changed || c != assign[i];
      assign[i] = c;
      dist[i] = d;
      inertia += d;
    }
    fit.inertia_history.push_back(inertia);
    return changed;
  };

  assign_step();
  std::vector<double> next(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < cfg.max_iter; ++iter) {
    fit.iterations = iter + 1;
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = x.row(i);
      double* dst = next.data() + assign[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) dst[j] += r[j];
      ++counts[assign[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < dim; ++j) next[c * dim + j] /= static_cast<double>(counts[c]);
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      // Empty cluster: restart it at the point farthest from its own centroid.
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double d = sq_dist(x.row(i), {next.data() + assign[i] * dim, dim});
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      taken[far] = true;
      const auto r = x.row(far);
      for (std::size_t j = 0; j < dim; ++j) next[c * dim + j] = r[j];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = next[c * dim + j] - centroids[c * dim + j];
        s += d * d;
      }
      max_shift = std::max(max_shift, std::sqrt(s));
    }
    centroids.swap(next);
    const bool changed = assign_step();
    if (!changed || max_shift / scale < cfg.tol) break;
  }

  fit.assignments = std::move(assign);
  auto& m = fit.model;
  m.dim = dim;
  m.centroids = std::move(centroids);
  m.cluster_sizes.assign(k, 0);
  for (std::size_t c : fit.assignments) ++m.cluster_sizes[c];
  m.inertia = fit.inertia_history.back();
  m.t = cfg.t;
  return fit;
}

}  // namespace detail

/// k-means with k-means++ seeding. Labels are left unassigned.
inline KMeansFit kmeans_fit(const FeatureMatrix& x, const ClusterConfig& cfg) {
  validate(cfg, x.n_rows());
  const double scale = detail::data_scale(x);
  std::optional<KMeansFit> best;
  for (std::size_t run = 0; run < cfg.n_init; ++run) {
    KMeansFit fit = detail::lloyd(x, cfg, cfg.seed + run, scale);
    if (!best || fit.model.inertia < best->model.inertia) best = std::move(fit);
  }
  return std::move(*best);
}

/// Fills id_fraction and surrogate_label on `model` and returns the per-row
/// label (0 = ID, 1 = OOD). With `pin_known_id`, rows of ID origin keep label 0
/// regardless of their cluster.
inline std::vector<int> assign_surrogate_labels(ClusterModel& model, std::span<const std::size_t> assignments,
                                                std::span<const Origin> origin, double t,
                                                bool pin_known_id = false) {
  if (assignments.size() != origin.size()) {
    throw Error(Errc::length_mismatch, "assignments and origin flags differ in length");
  }
  const std::size_t k = model.k();
  std::vector<std::size_t> sizes(k, 0);
  std::vector<std::size_t> id_count(k, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] >= k) throw Error(Errc::invalid_config, "assignment out of range");
    ++sizes[assignments[i]];
    if (origin[i] == Origin::id) ++id_count[assignments[i]];
  }
  model.cluster_sizes = sizes;
  model.t = t;
  model.id_fraction.assign(k, 0.0);
  model.surrogate_label.assign(k, SurrogateLabel::ood);
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) model.id_fraction[c] = static_cast<double>(id_count[c]) / static_cast<double>(sizes[c]);
    if (model.id_fraction[c] >= t) model.surrogate_label[c] = SurrogateLabel::id;
  }
  std::vector<int> labels(assignments.size());
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    labels[i] = static_cast<int>(model.surrogate_label[assignments[i]]);
    if (pin_known_id && origin[i] == Origin::id) labels[i] = 0;
  }
  return labels;
}

enum class EntropyWeighting { size_weighted, unweighted };

struct ObjectiveBreakdown {
  double entropy_h = 0.0;
  double p_mis_id = 0.0;
  double p_corr_id = 0.0;
  double total = 0.0;
};

/// Composite objective for one clustering and threshold.
inline ObjectiveBreakdown composite_objective(std::size_t k, std::span<const std::size_t> assignments,
                                              std::span<const Origin> origin, double t,
                                              EntropyWeighting weighting = EntropyWeighting::size_weighted) {
  if (assignments.size() != origin.size()) {
    throw Error(Errc::length_mismatch, "assignments and origin flags differ in length");
  }
  std::vector<std::size_t> sizes(k, 0);
  std::vector<std::size_t> id_count(k, 0);
  std::size_t total_id = 0;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] >= k) throw Error(Errc::invalid_config, "assignment out of range");
    ++sizes[assignments[i]];
    if (origin[i] == Origin::id) {
      ++id_count[assignments[i]];
      ++total_id;
    }
  }
  if (total_id == 0) throw Error(Errc::no_id_samples, "objective needs at least one ID row");

  auto entropy = [](double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
  };

  ObjectiveBreakdown out;
  double weight_sum = 0.0;
  std::size_t id_in_id_clusters = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] == 0) continue;
    const double frac = static_cast<double>(id_count[c]) / static_cast<double>(sizes[c]);
    const double w = weighting == EntropyWeighting::size_weighted ? static_cast<double>(sizes[c]) : 1.0;
    out.entropy_h += w * entropy(frac);
    weight_sum += w;
    if (frac >= t) id_in_id_clusters += id_count[c];
  }
  out.entropy_h /= weight_sum;
  out.p_corr_id = static_cast<double>(id_in_id_clusters) / static_cast<double>(total_id);
  out.p_mis_id = static_cast<double>(total_id - id_in_id_clusters) / static_cast<double>(total_id);
  out.total = out.entropy_h + out.p_mis_id - out.p_corr_id;
  return out;
}

inline ObjectiveBreakdown composite_objective(const ClusterModel& model, std::span<const std::size_t> assignments,
                                              std::span<const Origin> origin, double t,
                                              EntropyWeighting weighting = EntropyWeighting::size_weighted) {
  return composite_objective(model.k(), assignments, origin, t, weighting);
}

// ---------------------------------------------------------------------------
// (k, T) search

struct SearchBounds {
  std::size_t k_min = 2;
  std::size_t k_max = 2;
  double t_min = 0.01;
  double t_max = 0.2;
};

/// k in [2, ceil(0.3 M)], T in [0.01, 0.2].
inline SearchBounds default_bounds(std::size_t m) {
  SearchBounds b;
  b.k_max = std::max<std::size_t>(2, (3 * m + 9) / 10);
  return b;
}

enum class SearchStrategy { random, grid };

struct Trial {
  std::size_t index = 0;
  std::size_t k = 0;
  double t = 0.0;
  std::optional<ObjectiveBreakdown> objective;
  std::string error;  // non-empty when the trial failed
};

struct SearchResult {
  ClusterConfig best;
  ObjectiveBreakdown best_objective;
  std::vector<Trial> trials;
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

}  // namespace detail

/// Samples (k, T) pairs, scores each clustering with the composite objective
/// and returns the minimiser. Every trial clusters with `base.seed`, so trials
/// sharing k share one clustering. Failed trials are logged and skipped.
inline SearchResult search_kt(const FeatureMatrix& x, std::span<const Origin> origin, SearchBounds bounds,
                              std::size_t n_trials, SearchStrategy strategy, std::uint64_t seed,
                              ClusterConfig base = {},
                              EntropyWeighting weighting = EntropyWeighting::size_weighted) {
  if (n_trials == 0) throw Error(Errc::invalid_config, "n_trials must be >= 1");
  if (bounds.k_min < 2 || bounds.k_max < bounds.k_min || !(bounds.t_min > 0.0) || !(bounds.t_max < 1.0) ||
      bounds.t_max < bounds.t_min) {
    throw Error(Errc::invalid_config, "invalid search bounds");
  }
  std::vector<std::pair<std::size_t, double>> points;
  if (strategy == SearchStrategy::random) {
    std::mt19937_64 rng(seed);
    const std::size_t span = bounds.k_max - bounds.k_min + 1;
    for (std::size_t i = 0; i < n_trials; ++i) {
      const std::size_t k = bounds.k_min + detail::uniform_index(rng, span);
      const double t = bounds.t_min + (bounds.t_max - bounds.t_min) * detail::uniform01(rng);
      points.emplace_back(k, t);
    }
  } else {
    const std::size_t span = bounds.k_max - bounds.k_min + 1;
    const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_trials))));
    const std::size_t nk = std::min(span, side);
    const std::size_t nt = (n_trials + nk - 1) / nk;
    const auto ks = detail::linspace(static_cast<double>(bounds.k_min), static_cast<double>(bounds.k_max), nk);
    const auto ts = detail::linspace(bounds.t_min, bounds.t_max, nt);
    for (double kv : ks) {
      for (double tv : ts) {
        if (points.size() < n_trials) points.emplace_back(static_cast<std::size_t>(std::llround(kv)), tv);
      }
    }
  }

  SearchResult result;
  std::map<std::size_t, KMeansFit> cache;
  std::optional<std::size_t> best_index;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Trial trial{i, points[i].first, points[i].second, std::nullopt, {}};
    try {
      auto it = cache.find(trial.k);
      if (it == cache.end()) {
        ClusterConfig cfg = base;
        cfg.k = trial.k;
        cfg.t = trial.t;
        it = cache.emplace(trial.k, kmeans_fit(x, cfg)).first;
      }
      trial.objective = composite_objective(it->second.model, it->second.assignments, origin, trial.t, weighting);
      if (!best_index || trial.objective->total < result.trials[*best_index].objective->total) best_index = i;
    } catch (const Error& e) {
      trial.error = e.what();
    }
    result.trials.push_back(std::move(trial));
  }
  if (!best_index) throw Error(Errc::invalid_config, "every search trial failed");
  result.best = base;
  result.best.k = result.trials[*best_index].k;
  result.best.t = result.trials[*best_index].t;
  result.best_objective = *result.trials[*best_index].objective;
  return result;
}

// ---------------------------------------------------------------------------
// Clustering-only scoring

struct ClusterScore {
  std::size_t cluster = 0;
  double ood_score = 0.0;
};

/// Nearest centroid (ties to the lowest index) and 1 - its ID fraction.
inline ClusterScore nearest_cluster_score(const ClusterModel& model, std::span<const float> z) {
  if (!model.labelled() || model.k() == 0) throw Error(Errc::unfitted_model, "cluster model has no ID fractions");
  if (z.size() != model.dim) {
    throw Error(Errc::dimension_mismatch,
                "vector of length " + std::to_string(z.size()) + " for model dim " + std::to_string(model.dim));
  }
  const auto [c, d] = detail::nearest(z, model.centroids, model.k(), model.dim);
  (void)d;
  return {c, 1.0 - model.id_fraction[c]};
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ClusterConfig& c) {
  return {{"k", c.k}, {"t", c.t}, {"seed", c.seed}, {"max_iter", c.max_iter}, {"tol", c.tol}, {"n_init", c.n_init}};
}

inline nlohmann::json to_json(const ObjectiveBreakdown& o) {
  return {{"entropy_h", o.entropy_h}, {"p_mis_id", o.p_mis_id}, {"p_corr_id", o.p_corr_id}, {"total", o.total}};
}

inline nlohmann::json to_json(const ClusterModel& m) {
  nlohmann::json j;
  j["k"] = m.k();
  j["dim"] = m.dim;
  j["t"] = m.t;
  auto cents = nlohmann::json::array();
  for (std::size_t c = 0; c < m.k(); ++c) {
    const auto row = m.centroid(c);
    cents.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["centroids"] = std::move(cents);
  j["cluster_sizes"] = m.cluster_sizes;
  j["id_fraction"] = m.id_fraction;
  std::vector<int> labels;
  for (auto l : m.surrogate_label) labels.push_back(static_cast<int>(l));
  j["surrogate_label"] = labels;
  j["inertia"] = m.inertia;
  return j;
}

inline ClusterModel cluster_model_from_json(const nlohmann::json& j) {
  try {
    ClusterModel m;
    m.dim = j.at("dim").get<std::size_t>();
    m.t = j.at("t").get<double>();
    for (const auto& row : j.at("centroids")) {
      const auto v = row.get<std::vector<double>>();
      if (v.size() != m.dim) throw Error(Errc::invalid_config, "centroid length differs from dim");
      m.centroids.insert(m.centroids.end(), v.begin(), v.end());
    }
    m.cluster_sizes = j.at("cluster_sizes").get<std::vector<std::size_t>>();
    m.id_fraction = j.at("id_fraction").get<std::vector<double>>();
    for (int l : j.at("surrogate_label").get<std::vector<int>>()) {
      m.surrogate_label.push_back(l == 0 ? SurrogateLabel::id : SurrogateLabel::ood);
    }
    m.inertia = j.at("inertia").get<double>();
    if (m.centroids.size() != m.k() * m.dim || (m.labelled() && m.id_fraction.size() != m.k())) {
      throw Error(Errc::invalid_config, "cluster model arrays disagree on k");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, std::string("cluster model: ") + e.what());
  }
}

}  // namespace tardis
