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

// End-to-end runs: join ID and WILD features, shuffle, hold out a validation
// split, cluster the rest into surrogate labels, train the distribution
// classifier and evaluate it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tardis/baselines.hpp"
#include "tardis/classifier.hpp"
#include "tardis/clustering.hpp"
#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"
#include "tardis/geojson.hpp"
#include "tardis/io.hpp"
#include "tardis/metrics.hpp"
#include "tardis/pooling.hpp"

namespace tardis {

enum class RunMode { surrogate, oracle, both };

inline std::string_view run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::surrogate: return "surrogate";
    case RunMode::oracle: return "oracle";
    case RunMode::both: return "both";
  }
  return "?";
}

namespace cluster_choice {

/// k = ceil(k_ratio * M) with M the clustered-set size, T fixed.
struct Auto {
  double k_ratio = 0.3;
  double t = 0.1;
};
struct Fixed {
  ClusterConfig config;
};
struct Search {
  std::size_t n_trials = 20;
  SearchStrategy strategy = SearchStrategy::random;
  std::optional<SearchBounds> bounds;
};

}  // namespace cluster_choice

using ClusterChoice = std::variant<cluster_choice::Auto, cluster_choice::Fixed, cluster_choice::Search>;

struct PipelineConfig {
  fs::path id_manifest;
  fs::path wild_manifest;
  std::optional<PoolingMethod> pooling;
  double validation_fraction = 0.30;
  ClusterChoice cluster = cluster_choice::Auto{};
  /// k-means restarts / limits; k and T come from `cluster`.
  ClusterConfig kmeans;
  TrainConfig train;
  std::uint64_t seed = 0;
  RunMode mode = RunMode::both;
  std::size_t n_runs = 1;
  bool pin_known_id = false;
  EntropyWeighting weighting = EntropyWeighting::size_weighted;
  fs::path out_dir = "tardis_out";
};

/// ID and WILD sets after loading (and pooling, when raw tensors are given).
struct ExperimentData {
  Dataset id;
  Dataset wild;
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  Combined combined;
  /// Ground truth per combined row, when known.
  std::vector<std::optional<int>> truth;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;

  ClusterConfig cluster_config;
  std::optional<ClusterModel> cluster_model;
  std::vector<std::size_t> assignments;  // per train row
  std::vector<int> surrogate;            // per train row
  std::optional<ObjectiveBreakdown> objective;
  std::optional<SearchResult> search;

  std::optional<ClassifierModel> g_star;
  std::optional<ClassifierModel> g_oracle;
  std::vector<double> g_star_loss;

  /// "truth" when every validation row has a known label, else "surrogate".
  std::string eval_labels = "truth";
  std::vector<int> val_labels;
  std::optional<EvalReport> g_star_report;
  std::optional<EvalReport> g_oracle_report;
  std::optional<EvalReport> cluster_only_report;
  /// g* decisions vs the surrogate labels of the validation rows.
  std::optional<double> surrogate_agreement;
  /// Surrogate labels vs truth on the clustered WILD rows.
  std::optional<double> wild_label_accuracy;

  std::map<std::string, std::vector<int>> stage_labels;
  std::map<std::string, double> stage_ood_ratios;
};

inline std::size_t validation_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

namespace detail {

inline void check_pipeline_config(const PipelineConfig& cfg) {
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw Error(Errc::invalid_config, "validation_fraction must lie in (0, 1)");
  }
  if (cfg.n_runs == 0) throw Error(Errc::invalid_config, "n_runs must be >= 1");
}

inline bool has_truth(const Dataset& wild) {
  return std::all_of(wild.manifest.samples.begin(), wild.manifest.samples.end(),
                     [](const SampleRecord& s) { return truth_label(s.role).has_value(); });
}

inline std::vector<int> surrogate_for_rows(const ClusterModel& model, const FeatureMatrix& x,
                                           std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    out.push_back(static_cast<int>(model.surrogate_label[nearest_cluster_score(model, x.row(r)).cluster]));
  }
  return out;
}

}  // namespace detail

/// Loads both manifests, pooling raw tensors when the config asks for it.
/// A PCA basis is fitted on the ID set and reused for WILD.
inline ExperimentData load_experiment_data(const PipelineConfig& cfg) {
  ExperimentData data;
  try {
    data.id = load_dataset(cfg.id_manifest);
    data.wild = load_dataset(cfg.wild_manifest);
  } catch (const Error& e) {
    throw with_context(e, "loading manifests");
  }
  const bool raw = data.id.manifest.tensor_shape.has_value() || data.wild.manifest.tensor_shape.has_value();
  if (raw) {
    if (!cfg.pooling) throw Error(Errc::invalid_config, "raw tensor manifests need a pooling method");
    PoolingMethod method = *cfg.pooling;
    data.id = pool_batch(data.id, method);
    data.wild = pool_batch(data.wild, method);
  }
  return data;
}

/// One full surrogate-labelling experiment in memory.
inline ExperimentResult run_experiment(const ExperimentData& data, const PipelineConfig& cfg, std::uint64_t seed) {
  detail::check_pipeline_config(cfg);
  ExperimentResult res;
  res.seed = seed;
  const bool wild_truth = detail::has_truth(data.wild);
  const bool want_star = cfg.mode != RunMode::oracle;
  const bool want_oracle = cfg.mode != RunMode::surrogate;
  if (want_oracle && !wild_truth) {
    throw Error(Errc::invalid_config, "oracle mode requires LABELED_ID / LABELED_OOD roles in the WILD manifest");
  }

  // Steps 1-2: join and shuffle.
  res.combined = concat(data.id.features, data.wild.features);
  const std::size_t n = res.combined.features.n_rows();
  res.truth.assign(data.id.features.n_rows(), 0);
  for (const auto& s : data.wild.manifest.samples) res.truth.push_back(truth_label(s.role));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  {
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[detail::uniform_index(rng, i)]);
  }

  // Step 3: hold out validation rows, cluster the rest.
  const std::size_t n_val = validation_count(n, cfg.validation_fraction);
  res.val_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  res.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  const FeatureMatrix x_train = res.combined.features.select_rows(res.train_rows);
  std::vector<Origin> origin_train;
  for (std::size_t r : res.train_rows) origin_train.push_back(res.combined.origin[r]);

  if (want_star) {
    ClusterConfig cc = cfg.kmeans;
    cc.seed = seed;
    if (const auto* a = std::get_if<cluster_choice::Auto>(&cfg.cluster)) {
      const std::size_t m = x_train.n_rows();
      cc.k = a->k_ratio == 0.3 ? default_config(m).k : k_from_ratio(a->k_ratio, m);
      cc.t = a->t;
    } else if (const auto* f = std::get_if<cluster_choice::Fixed>(&cfg.cluster)) {
      cc.k = f->config.k;
      cc.t = f->config.t;
    } else {
      const auto& s = std::get<cluster_choice::Search>(cfg.cluster);
      const SearchBounds bounds = s.bounds.value_or(default_bounds(x_train.n_rows()));
      res.search = search_kt(x_train, origin_train, bounds, s.n_trials, s.strategy, seed, cc, cfg.weighting);
      cc = res.search->best;
    }
    res.cluster_config = cc;
    KMeansFit fit;
    try {
      fit = kmeans_fit(x_train, cc);
    } catch (const Error& e) {
      throw with_context(e, "clustering");
    }
    res.assignments = std::move(fit.assignments);
    res.cluster_model = std::move(fit.model);
    res.surrogate = assign_surrogate_labels(*res.cluster_model, res.assignments, origin_train, cc.t, cfg.pin_known_id);
    try {
      res.objective = composite_objective(*res.cluster_model, res.assignments, origin_train, cc.t, cfg.weighting);
    } catch (const Error&) {
      res.objective.reset();
    }

    // Step 4: train g* on surrogate labels.
    try {
      auto tr = train(x_train, res.surrogate, cfg.train, TrainedOn::surrogate);
      res.g_star = std::move(tr.model);
      res.g_star_loss = std::move(tr.loss_history);
    } catch (const Error& e) {
      throw with_context(e, "training g*");
    }
  }

  if (want_oracle) {
    std::vector<int> y;
    for (std::size_t r : res.train_rows) y.push_back(*res.truth[r]);
    try {
      res.g_oracle = train(x_train, y, cfg.train, TrainedOn::oracle).model;
    } catch (const Error& e) {
      throw with_context(e, "training g_oracle");
    }
  }

  // Evaluation on the held-out rows.
  const FeatureMatrix x_val = res.combined.features.select_rows(res.val_rows);
  const bool val_truth = std::all_of(res.val_rows.begin(), res.val_rows.end(),
                                     [&](std::size_t r) { return res.truth[r].has_value(); });
  std::vector<int> val_surrogate;
  if (res.cluster_model) val_surrogate = detail::surrogate_for_rows(*res.cluster_model, res.combined.features, res.val_rows);
  if (val_truth) {
    res.eval_labels = "truth";
    for (std::size_t r : res.val_rows) res.val_labels.push_back(*res.truth[r]);
  } else {
    res.eval_labels = "surrogate";
    for (std::size_t i = 0; i < res.val_rows.size(); ++i) {
      const std::size_t r = res.val_rows[i];
      res.val_labels.push_back(res.combined.origin[r] == Origin::id ? 0 : val_surrogate[i]);
    }
  }

  auto score_g = [&](const ClassifierModel& g) {
    std::vector<double> s(x_val.n_rows());
    std::vector<int> p(x_val.n_rows());
    for (std::size_t i = 0; i < x_val.n_rows(); ++i) {
      s[i] = predict_proba(g, x_val.row(i));
      p[i] = s[i] >= g.threshold ? 1 : 0;
    }
    auto rep = evaluate(s, res.val_labels, p);
    rep.labels = res.eval_labels;
    return std::pair{rep, p};
  };
  try {
    if (res.g_star) {
      auto [rep, pred] = score_g(*res.g_star);
      res.g_star_report = rep;
      res.surrogate_agreement = accuracy(pred, val_surrogate);
    }
    if (res.g_oracle) res.g_oracle_report = score_g(*res.g_oracle).first;
    if (res.cluster_model) {
      std::vector<double> s(x_val.n_rows());
      for (std::size_t i = 0; i < x_val.n_rows(); ++i) {
        s[i] = nearest_cluster_score(*res.cluster_model, x_val.row(i)).ood_score;
      }
      res.cluster_only_report = evaluate(s, res.val_labels, val_surrogate);
      res.cluster_only_report->labels = res.eval_labels;
    }
  } catch (const Error& e) {
    throw with_context(e, "evaluating the validation split");
  }

  if (res.cluster_model && wild_truth) {
    std::size_t hits = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < res.train_rows.size(); ++i) {
      const std::size_t r = res.train_rows[i];
      if (res.combined.origin[r] != Origin::wild) continue;
      ++total;
      hits += res.surrogate[i] == *res.truth[r] ? 1 : 0;
    }
    if (total > 0) res.wild_label_accuracy = static_cast<double>(hits) / static_cast<double>(total);
  }

  // Stage label sets: what each stage sees as OOD.
  {
    std::vector<int> clustering;
    for (std::size_t r : res.train_rows) {
      clustering.push_back(res.truth[r] ? *res.truth[r] : static_cast<int>(res.combined.origin[r]));
    }
    res.stage_labels["clustering"] = std::move(clustering);
    if (res.g_star) res.stage_labels["classifier"] = res.surrogate;
    res.stage_labels["validation"] = res.val_labels;
    res.stage_ood_ratios = stage_ood_ratio(res.stage_labels);
  }
  return res;
}

/// Baseline-suite input for the validation rows of one experiment. Logits are
/// attached only when every validation row has them; Mahalanobis is fitted on
/// the known-ID training rows, per class when every such row has a class label.
inline SuiteInput suite_input(const ExperimentData& data, const ExperimentResult& res) {
  const std::size_t n_id = data.id.features.n_rows();
  auto sample = [&](std::size_t r) -> const SampleRecord& {
    return r < n_id ? data.id.manifest.samples[r] : data.wild.manifest.samples[r - n_id];
  };
  SuiteInput in;
  in.eval_features = res.combined.features.select_rows(res.val_rows);
  in.eval_truth = res.val_labels;

  if (data.id.logits && data.wild.logits && data.id.logits->values.n_cols() == data.wild.logits->values.n_cols()) {
    LogitTable t{FeatureMatrix(res.val_rows.size(), data.id.logits->values.n_cols()),
                 std::vector<bool>(res.val_rows.size(), false)};
    for (std::size_t i = 0; i < res.val_rows.size(); ++i) {
      const std::size_t r = res.val_rows[i];
      const LogitTable& src = r < n_id ? *data.id.logits : *data.wild.logits;
      const std::size_t sr = r < n_id ? r : r - n_id;
      if (!src.present[sr]) continue;
      std::copy(src.values.row(sr).begin(), src.values.row(sr).end(), t.values.row(i).begin());
      t.present[i] = true;
    }
    in.eval_logits = std::move(t);
  }

  std::vector<std::size_t> fit_rows;
  for (std::size_t r : res.train_rows) {
    if (res.combined.origin[r] == Origin::id) fit_rows.push_back(r);
  }
  in.fit_features = res.combined.features.select_rows(fit_rows);
  std::vector<std::string> classes;
  for (std::size_t r : fit_rows) {
    const auto& label = sample(r).class_label;
    if (!label) break;
    classes.push_back(*label);
  }
  if (!fit_rows.empty() && classes.size() == fit_rows.size()) in.fit_class_labels = std::move(classes);
  return in;
}

// ---------------------------------------------------------------------------
// Repeated runs

struct RepeatResult {
  std::vector<ExperimentResult> runs;
  std::optional<EvalReport> g_star;
  std::optional<EvalReport> g_oracle;
  std::optional<EvalReport> cluster_only;
  /// Welch test on AUROC, g_oracle vs g*.
  std::optional<WelchResult> significance;
  std::string significance_error;
};

namespace detail {

inline EvalReport aggregate(std::vector<EvalReport> runs) {
  EvalReport agg;
  const auto s = summarize(runs);
  agg.auroc = s.auroc.mean;
  agg.fpr95 = s.fpr95.mean;
  agg.accuracy = s.accuracy.mean;
  agg.n_id = runs.front().n_id;
  agg.n_ood = runs.front().n_ood;
  agg.labels = runs.front().labels;
  agg.runs = std::move(runs);
  return agg;
}

}  // namespace detail

/// Runs seeds base_seed + i for i < n_runs and aggregates the reports.
inline RepeatResult repeat_runs(const ExperimentData& data, const PipelineConfig& cfg, std::size_t n_runs,
                                std::uint64_t base_seed) {
  if (n_runs == 0) throw Error(Errc::invalid_config, "n_runs must be >= 1");
  RepeatResult out;
  std::vector<EvalReport> star;
  std::vector<EvalReport> oracle;
  std::vector<EvalReport> clus;
  for (std::size_t i = 0; i < n_runs; ++i) {
    auto r = run_experiment(data, cfg, base_seed + i);
    if (r.g_star_report) star.push_back(*r.g_star_report);
    if (r.g_oracle_report) oracle.push_back(*r.g_oracle_report);
    if (r.cluster_only_report) clus.push_back(*r.cluster_only_report);
    out.runs.push_back(std::move(r));
  }
  if (n_runs == 1) {
    if (!star.empty()) out.g_star = star.front();
    if (!oracle.empty()) out.g_oracle = oracle.front();
    if (!clus.empty()) out.cluster_only = clus.front();
    out.significance_error = std::string(errc_name(Errc::too_few_runs)) + ": a single run has no spread";
    return out;
  }
  if (!star.empty()) out.g_star = detail::aggregate(star);
  if (!oracle.empty()) out.g_oracle = detail::aggregate(oracle);
  if (!clus.empty()) out.cluster_only = detail::aggregate(clus);
  if (!star.empty() && !oracle.empty()) {
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& r : oracle) a.push_back(r.auroc);
    for (const auto& r : star) b.push_back(r.auroc);
    try {
      out.significance = welch_t_test(a, b);
    } catch (const Error& e) {
      out.significance_error = e.what();
    }
  } else {
    out.significance_error = "significance test needs mode = both";
  }
  return out;
}

// ---------------------------------------------------------------------------
// k sweep

struct SweepPoint {
  std::size_t k = 0;
  double ratio = 0.0;  // k / clustered-set size
  std::optional<EvalReport> g_star;
  std::optional<EvalReport> g_oracle;
  std::optional<EvalReport> cluster_only;
  std::string error;
};

/// Evaluates g* and g_oracle for each k with a fixed seed and split.
inline std::vector<SweepPoint> k_sweep(const ExperimentData& data, PipelineConfig cfg,
                                       std::span<const std::size_t> ks) {
  const std::size_t n = data.id.features.n_rows() + data.wild.features.n_rows();
  const std::size_t m = n - validation_count(n, cfg.validation_fraction);
  const double t = std::visit(
      [](const auto& c) -> double {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, cluster_choice::Auto>) return c.t;
        else if constexpr (std::is_same_v<C, cluster_choice::Fixed>) return c.config.t;
        else return 0.1;
      },
      cfg.cluster);
  std::vector<SweepPoint> curve;
  for (std::size_t k : ks) {
    SweepPoint p;
    p.k = k;
    p.ratio = static_cast<double>(k) / static_cast<double>(m);
    try {
      if (k < 2 || k > m) throw Error(Errc::invalid_config, "k must lie in [2, " + std::to_string(m) + "]");
      ClusterConfig cc = cfg.kmeans;
      cc.k = k;
      cc.t = t;
      cfg.cluster = cluster_choice::Fixed{cc};
      const auto r = run_experiment(data, cfg, cfg.seed);
      p.g_star = r.g_star_report;
      p.g_oracle = r.g_oracle_report;
      p.cluster_only = r.cluster_only_report;
    } catch (const Error& e) {
      p.error = e.what();
    }
    curve.push_back(std::move(p));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Config and artifacts

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  PipelineConfig cfg;
  auto path = [&](const std::string& key) -> fs::path {
    if (!j.contains(key) || !j[key].is_string()) throw Error(Errc::invalid_config, key + " must be a path string");
    fs::path p = j[key].get<std::string>();
    return p.is_relative() ? base_dir / p : p;
  };
  try {
    cfg.id_manifest = path("id_manifest");
    cfg.wild_manifest = path("wild_manifest");
    if (j.contains("pooling") && !j["pooling"].is_null()) {
      const auto& pj = j["pooling"];
      const std::string name = pj.is_string() ? pj.get<std::string>() : pj.at("method").get<std::string>();
      const std::size_t comps = pj.is_object() ? pj.value("pca_components", std::size_t{10}) : 10;
      cfg.pooling = parse_pooling(name, comps);
      if (!cfg.pooling) throw Error(Errc::invalid_config, "unknown pooling method '" + name + "'");
    }
    cfg.validation_fraction = j.value("validation_fraction", 0.30);
    if (j.contains("cluster")) {
      const auto& c = j["cluster"];
      if (c.is_string()) {
        if (c.get<std::string>() != "auto") throw Error(Errc::invalid_config, "cluster must be \"auto\" or an object");
        cfg.cluster = cluster_choice::Auto{};
      } else if (c.contains("search")) {
        cluster_choice::Search s;
        const auto& sj = c["search"];
        s.n_trials = sj.value("trials", std::size_t{20});
        const std::string strat = sj.value("strategy", std::string("random"));
        if (strat != "random" && strat != "grid") throw Error(Errc::invalid_config, "strategy must be random|grid");
        s.strategy = strat == "grid" ? SearchStrategy::grid : SearchStrategy::random;
        if (sj.contains("k_min") || sj.contains("k_max") || sj.contains("t_min") || sj.contains("t_max")) {
          SearchBounds b;
          b.k_min = sj.value("k_min", b.k_min);
          b.k_max = sj.value("k_max", std::max<std::size_t>(b.k_min, 2));
          b.t_min = sj.value("t_min", b.t_min);
          b.t_max = sj.value("t_max", b.t_max);
          s.bounds = b;
        }
        cfg.cluster = s;
      } else if (c.contains("k")) {
        ClusterConfig cc;
        cc.k = c.at("k").get<std::size_t>();
        cc.t = c.value("t", 0.1);
        cfg.cluster = cluster_choice::Fixed{cc};
      } else {
        cfg.cluster = cluster_choice::Auto{c.value("k_ratio", 0.3), c.value("t", 0.1)};
      }
      if (c.is_object()) {
        cfg.kmeans.max_iter = c.value("max_iter", cfg.kmeans.max_iter);
        cfg.kmeans.tol = c.value("tol", cfg.kmeans.tol);
        cfg.kmeans.n_init = c.value("n_init", cfg.kmeans.n_init);
      }
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      cfg.train.max_iter = t.value("max_iter", cfg.train.max_iter);
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      if (t.contains("l2_lambda") && !t["l2_lambda"].is_null()) cfg.train.l2_lambda = t["l2_lambda"].get<double>();
      cfg.train.tol = t.value("tol", cfg.train.tol);
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.train.seed = cfg.seed;
    const std::string mode = j.value("mode", std::string("both"));
    if (mode == "surrogate") cfg.mode = RunMode::surrogate;
    else if (mode == "oracle") cfg.mode = RunMode::oracle;
    else if (mode == "both") cfg.mode = RunMode::both;
    else throw Error(Errc::invalid_config, "mode must be surrogate|oracle|both");
    cfg.n_runs = j.value("n_runs", std::size_t{1});
    cfg.pin_known_id = j.value("pin_known_id", false);
    cfg.weighting = j.value("entropy_weighting", std::string("size")) == "unweighted"
                        ? EntropyWeighting::unweighted
                        : EntropyWeighting::size_weighted;
    if (j.contains("out_dir")) cfg.out_dir = path("out_dir");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  detail::check_pipeline_config(cfg);
  return cfg;
}

inline std::string scores_csv(const std::vector<std::string>& ids, std::span<const double> proba, double threshold) {
  std::string out = "sample_id,ood_proba,ood_label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    out += ',';
    out += io::format_number(proba[i]);
    out += proba[i] >= threshold ? ",1\n" : ",0\n";
  }
  return out;
}

struct RunArtifacts {
  fs::path cluster_model;
  fs::path g_star;
  fs::path g_oracle;
  fs::path report;
  fs::path scores;
  fs::path trials;
  fs::path geojson;
  std::map<std::string, fs::path> stage_label_files;
  nlohmann::json report_json;
  ExperimentResult result;
};

inline nlohmann::json experiment_report(const ExperimentResult& r, const PipelineConfig& cfg) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["mode"] = std::string(run_mode_name(cfg.mode));
  j["labels"] = r.eval_labels;
  j["n_train"] = r.train_rows.size();
  j["n_validation"] = r.val_rows.size();
  if (r.cluster_model) {
    j["cluster_config"] = to_json(r.cluster_config);
    if (r.objective) j["objective"] = to_json(*r.objective);
  }
  if (r.g_star_report) j["g_star"] = to_json(*r.g_star_report);
  if (r.g_oracle_report) j["g_oracle"] = to_json(*r.g_oracle_report);
  if (r.cluster_only_report) j["cluster_only"] = to_json(*r.cluster_only_report);
  if (r.surrogate_agreement) j["surrogate_agreement"] = *r.surrogate_agreement;
  if (r.wild_label_accuracy) j["wild_surrogate_accuracy"] = *r.wild_label_accuracy;
  j["stage_ood_ratios"] = r.stage_ood_ratios;
  return j;
}

inline nlohmann::json to_json(const RepeatResult& rr) {
  nlohmann::json j;
  j["n_runs"] = rr.runs.size();
  if (rr.g_star) j["g_star"] = to_json(*rr.g_star);
  if (rr.g_oracle) j["g_oracle"] = to_json(*rr.g_oracle);
  if (rr.cluster_only) j["cluster_only"] = to_json(*rr.cluster_only);
  if (rr.significance) j["welch_auroc_oracle_vs_star"] = to_json(*rr.significance);
  if (!rr.significance_error.empty()) j["significance_error"] = rr.significance_error;
  return j;
}

inline std::string trials_csv(const SearchResult& s) {
  std::string out = "trial,k,t,entropy_h,p_mis_id,p_corr_id,total,error\n";
  for (const auto& t : s.trials) {
    out += std::to_string(t.index) + ',' + std::to_string(t.k) + ',' + io::format_number(t.t);
    if (t.objective) {
      out += ',' + io::format_number(t.objective->entropy_h) + ',' + io::format_number(t.objective->p_mis_id) + ',' +
             io::format_number(t.objective->p_corr_id) + ',' + io::format_number(t.objective->total) + ",\n";
    } else {
      std::string err = t.error;
      std::replace(err.begin(), err.end(), ',', ';');
      out += ",,,,," + err + "\n";
    }
  }
  return out;
}

/// Runs the configured experiment and writes every artifact into out_dir.
inline RunArtifacts run_pipeline(const PipelineConfig& cfg) {
  detail::check_pipeline_config(cfg);
  const ExperimentData data = load_experiment_data(cfg);
  RunArtifacts art;
  art.result = run_experiment(data, cfg, cfg.seed);
  const auto& r = art.result;
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);

  if (r.cluster_model) {
    art.cluster_model = dir / "cluster_model.json";
    nlohmann::json cj = to_json(*r.cluster_model);
    cj["config"] = to_json(r.cluster_config);
    io::write_json(art.cluster_model, cj);
  }
  if (r.g_star) {
    art.g_star = dir / "g_star.json";
    io::write_json(art.g_star, to_json(*r.g_star));
  }
  if (r.g_oracle) {
    art.g_oracle = dir / "g_oracle.json";
    io::write_json(art.g_oracle, to_json(*r.g_oracle));
  }
  if (r.search) {
    art.trials = dir / "trials.csv";
    io::write_file_atomic(art.trials, trials_csv(*r.search));
  }

  // Per-sample scores over every input sample, ID first, with the deployed
  // classifier (g* unless only the oracle was trained).
  const ClassifierModel& deployed = r.g_star ? *r.g_star : *r.g_oracle;
  std::vector<std::string> ids;
  for (const auto& s : data.id.manifest.samples) ids.push_back(s.sample_id);
  for (const auto& s : data.wild.manifest.samples) ids.push_back(s.sample_id);
  const auto proba = predict_proba(deployed, r.combined.features);
  art.scores = dir / "scores.csv";
  io::write_file_atomic(art.scores, scores_csv(ids, proba, deployed.threshold));

  for (const auto& [stage, labels] : r.stage_labels) {
    const auto& rows = stage == "validation" ? r.val_rows : r.train_rows;
    std::string out = "sample_id,label\n";
    for (std::size_t i = 0; i < rows.size(); ++i) out += ids[rows[i]] + ',' + std::to_string(labels[i]) + '\n';
    const fs::path p = dir / ("stage_" + stage + ".csv");
    io::write_file_atomic(p, out);
    art.stage_label_files[stage] = p;
  }

  std::vector<const Dataset*> sets{&data.id, &data.wild};
  if (all_have_coordinates(sets)) {
    art.geojson = dir / "map.geojson";
    std::vector<ScoreRow> rows;
    for (std::size_t i = 0; i < ids.size(); ++i) rows.push_back({ids[i], proba[i]});
    io::write_json(art.geojson, emit_geojson(rows, sets, deployed.threshold));
  }

  art.report_json = experiment_report(r, cfg);
  if (cfg.n_runs > 1) art.report_json["repeat"] = to_json(repeat_runs(data, cfg, cfg.n_runs, cfg.seed));
  art.report = dir / "report.json";
  io::write_json(art.report, art.report_json);
  return art;
}

}  // namespace tardis
