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

// Command-line front end. Exit codes: 0 success, 2 configuration error,
// 3 data error, 4 runtime failure.

#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "tardis/tardis.hpp"

namespace {

using namespace tardis;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

Role role_arg(const std::string& s) {
  const auto r = parse_role(s);
  if (!r) throw Error(Errc::invalid_config, "unknown role '" + s + "' (ID|WILD|LABELED_ID|LABELED_OOD)");
  return *r;
}

// sample_id,label
std::unordered_map<std::string, int> read_labels(const fs::path& path) {
  const auto lines = io::read_lines(path);
  if (lines.empty() || io::split(lines[0]).size() < 2 || io::split(lines[0])[0] != "sample_id") {
    throw Error(Errc::header_mismatch, path.string() + ": expected header sample_id,label");
  }
  std::unordered_map<std::string, int> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = io::split(lines[i]);
    const auto v = cells.size() >= 2 ? io::parse_number<int>(cells[1]) : std::nullopt;
    if (!v || (*v != 0 && *v != 1)) {
      throw Error(Errc::malformed_manifest, path.string() + ": line " + std::to_string(i + 1) + " needs a 0/1 label");
    }
    out[std::string(cells[0])] = *v;
  }
  return out;
}

void write_labels(const fs::path& path, const std::vector<std::string>& ids, std::span<const int> labels) {
  std::string out = "sample_id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + ',' + std::to_string(labels[i]) + '\n';
  io::write_file_atomic(path, out);
}

std::vector<std::string> sample_ids(const Dataset& ds) {
  std::vector<std::string> ids;
  for (const auto& s : ds.manifest.samples) ids.push_back(s.sample_id);
  return ids;
}

// Stacks several feature manifests into one matrix.
Dataset stack(const std::vector<std::string>& paths) {
  Dataset out;
  for (const auto& p : paths) {
    Dataset ds = load_dataset(p);
    if (ds.manifest.tensor_shape) throw Error(Errc::invalid_config, p + ": raw tensors must be pooled first");
    for (std::size_t i = 0; i < ds.features.n_rows(); ++i) out.features.append_row(ds.features.row(i));
    for (auto& s : ds.manifest.samples) out.manifest.samples.push_back(std::move(s));
  }
  out.manifest.feature_dim = out.features.n_cols();
  return out;
}

std::string score_table(const std::vector<std::string>& ids, std::span<const double> s) {
  std::string out = "sample_id,ood_score\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + ',' + io::format_number(s[i]) + '\n';
  return out;
}

nlohmann::json report_or_null(const std::optional<EvalReport>& r) { return r ? to_json(*r) : nlohmann::json(); }

// ---------------------------------------------------------------------------

struct ImportCsvArgs {
  std::string csv, role = "WILD", out;
};

void cmd_import_csv(const ImportCsvArgs& a) {
  const auto ds = import_csv(a.csv, role_arg(a.role), a.out);
  std::printf("imported %zu samples x %zu features -> %s\n", ds.features.n_rows(), ds.features.n_cols(),
              a.out.c_str());
}

struct PoolArgs {
  std::string in, method = "max", out;
  std::size_t pca_components = 10;
};

void cmd_pool(const PoolArgs& a) {
  auto method = parse_pooling(a.method, a.pca_components);
  if (!method) throw Error(Errc::invalid_config, "unknown pooling method '" + a.method + "'");
  const auto pooled = pool_batch(load_dataset(a.in), *method);
  write_dataset(a.out, pooled);
  std::printf("pooled %zu samples to %zu features -> %s\n", pooled.features.n_rows(), pooled.features.n_cols(),
              a.out.c_str());
}

struct ClusterArgs {
  std::string id, wild, out, labels_out;
  std::size_t k = 0;
  double t = 0.1;
  std::size_t search = 0;
  std::string strategy = "random";
  std::uint64_t seed = 0;
  std::size_t n_init = 10;
  bool pin = false;
};

void cmd_cluster(const ClusterArgs& a) {
  const auto id = load_dataset(a.id);
  const auto wild = load_dataset(a.wild);
  const auto c = concat(id.features, wild.features);
  const std::size_t m = c.features.n_rows();
  ClusterConfig cc;
  cc.seed = a.seed;
  cc.n_init = a.n_init;
  std::optional<SearchResult> search;
  if (a.search > 0) {
    if (a.strategy != "random" && a.strategy != "grid") throw Error(Errc::invalid_config, "strategy must be random|grid");
    search = search_kt(c.features, c.origin, default_bounds(m), a.search,
                       a.strategy == "grid" ? SearchStrategy::grid : SearchStrategy::random, a.seed, cc);
    cc = search->best;
  } else {
    cc.k = a.k > 0 ? a.k : default_config(m).k;
    cc.t = a.t;
  }
  auto fit = kmeans_fit(c.features, cc);
  const auto labels = assign_surrogate_labels(fit.model, fit.assignments, c.origin, cc.t, a.pin);
  auto j = to_json(fit.model);
  j["config"] = to_json(cc);
  try {
    j["objective"] = to_json(composite_objective(fit.model, fit.assignments, c.origin, cc.t));
  } catch (const Error&) {
  }
  io::write_json(a.out, j);
  if (search) io::write_file_atomic(fs::path(a.out).replace_extension(".trials.csv"), trials_csv(*search));
  if (!a.labels_out.empty()) {
    auto ids = sample_ids(id);
    for (auto& s : wild.manifest.samples) ids.push_back(s.sample_id);
    write_labels(a.labels_out, ids, labels);
  }
  std::printf("k=%zu t=%s inertia=%s -> %s\n", cc.k, io::format_number(cc.t).c_str(),
              io::format_number(fit.model.inertia).c_str(), a.out.c_str());
}

struct TrainArgs {
  std::vector<std::string> features;
  std::string labels, from_cluster, out;
  bool oracle = false;
  std::size_t max_iter = 500;
  std::optional<double> lambda;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

void cmd_train(const TrainArgs& a) {
  const int sources = !a.labels.empty() + !a.from_cluster.empty() + a.oracle;
  if (sources != 1) throw Error(Errc::invalid_config, "give exactly one of --labels, --from-cluster, --oracle");
  const Dataset ds = stack(a.features);
  std::vector<int> y;
  if (!a.labels.empty()) {
    const auto table = read_labels(a.labels);
    for (const auto& s : ds.manifest.samples) {
      const auto it = table.find(s.sample_id);
      if (it == table.end()) throw Error(Errc::length_mismatch, "no label for sample " + s.sample_id);
      y.push_back(it->second);
    }
  } else if (!a.from_cluster.empty()) {
    const auto model = cluster_model_from_json(io::read_json(a.from_cluster));
    if (!model.labelled()) throw Error(Errc::unfitted_model, a.from_cluster + " has no surrogate labels");
    for (std::size_t i = 0; i < ds.features.n_rows(); ++i) {
      y.push_back(static_cast<int>(model.surrogate_label[nearest_cluster_score(model, ds.features.row(i)).cluster]));
    }
  } else {
    for (const auto& s : ds.manifest.samples) {
      const auto t = truth_label(s.role);
      if (!t) throw Error(Errc::invalid_config, "--oracle needs labeled roles; " + s.sample_id + " is WILD");
      y.push_back(*t);
    }
  }
  TrainConfig cfg;
  cfg.max_iter = a.max_iter;
  cfg.l2_lambda = a.lambda;
  cfg.tol = a.tol;
  cfg.seed = a.seed;
  const auto r = train(ds.features, y, cfg, a.oracle ? TrainedOn::oracle : TrainedOn::surrogate);
  io::write_json(a.out, to_json(r.model));
  std::printf("trained on %zu samples, %zu iterations, loss %s -> %s\n", y.size(), r.iterations,
              io::format_number(r.loss_history.back()).c_str(), a.out.c_str());
}

struct PredictArgs {
  std::string g, in, out;
};

void cmd_predict(const PredictArgs& a) {
  const auto g = classifier_from_json(io::read_json(a.g));
  const auto ds = load_dataset(a.in);
  const auto p = predict_proba(g, ds.features);
  io::write_file_atomic(a.out, scores_csv(sample_ids(ds), p, g.threshold));
  std::printf("scored %zu samples -> %s\n", p.size(), a.out.c_str());
}

struct EvalArgs {
  std::string scores, labels, out;
};

// Accepts scores.csv from predict (with labels) or from baseline (scores only).
void cmd_eval(const EvalArgs& a) {
  const auto lines = io::read_lines(a.scores);
  if (lines.empty() || io::split(lines[0]).size() < 2 || io::split(lines[0])[0] != "sample_id") {
    throw Error(Errc::header_mismatch, a.scores + ": expected header sample_id,<score>[,ood_label]");
  }
  const std::size_t cols = io::split(lines[0]).size();
  const auto truth_table = read_labels(a.labels);
  std::vector<double> s;
  std::vector<int> truth;
  std::vector<int> pred;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = io::split(lines[i]);
    if (cells.size() != cols) throw Error(Errc::ragged_row, a.scores + ": line " + std::to_string(i + 1));
    const auto v = io::parse_number<double>(cells[1]);
    if (!v) throw Error(Errc::malformed_manifest, a.scores + ": bad score on line " + std::to_string(i + 1));
    const auto it = truth_table.find(std::string(cells[0]));
    if (it == truth_table.end()) throw Error(Errc::length_mismatch, "no label for sample " + std::string(cells[0]));
    s.push_back(*v);
    truth.push_back(it->second);
    if (cols >= 3) pred.push_back(cells[2] == "1" ? 1 : 0);
  }
  const auto rep = cols >= 3 ? evaluate(s, truth, pred) : evaluate_scores_at_tpr95(s, truth);
  io::write_json(a.out, to_json(rep));
  std::printf("auroc %s fpr95 %s accuracy %s -> %s\n", io::format_number(rep.auroc).c_str(),
              io::format_number(rep.fpr95).c_str(), io::format_number(rep.accuracy).c_str(), a.out.c_str());
}

struct BaselineArgs {
  std::string method, in, logits, fit, cluster_model, out;
  std::size_t logit_dim = 0;
  double temperature = 1.0;
};

void cmd_baseline(const BaselineArgs& a) {
  Dataset ds = load_dataset(a.in);
  const std::size_t n = ds.features.n_rows();
  std::vector<double> s(n);
  if (a.method == "msp" || a.method == "energy") {
    if (!a.logits.empty()) {
      const std::size_t dim = a.logit_dim > 0 ? a.logit_dim : ds.manifest.logit_dim.value_or(0);
      if (dim == 0) throw Error(Errc::invalid_config, "--logits needs --logit-dim or logit_dim in the manifest");
      const auto raw = detail::decode_f32(io::read_file(a.logits));
      if (raw.size() % dim != 0) throw Error(Errc::payload_size_mismatch, a.logits + ": not a whole number of rows");
      const FeatureMatrix table(raw.size() / dim, dim, raw);
      LogitTable lt{FeatureMatrix(n, dim), std::vector<bool>(n, true)};
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = ds.manifest.samples[i].logits_row.value_or(i);
        if (r >= table.n_rows()) throw Error(Errc::missing_logits, ds.manifest.samples[i].sample_id);
        std::copy_n(table.row(r).begin(), dim, lt.values.row(i).begin());
      }
      ds.logits = std::move(lt);
    }
    if (!ds.logits || !ds.logits->complete()) throw Error(Errc::missing_logits, a.in + " has no logits for every sample");
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = ds.logits->values.row(i);
      s[i] = a.method == "msp" ? msp_score(l) : energy_score(l, a.temperature);
    }
  } else if (a.method == "mahalanobis") {
    FeatureMatrix fit_x;
    std::vector<std::string> classes;
    bool all_classes = true;
    auto take = [&](const Dataset& src, bool only_id) {
      for (std::size_t i = 0; i < src.features.n_rows(); ++i) {
        const auto& rec = src.manifest.samples[i];
        if (only_id && rec.role != Role::id) continue;
        fit_x.append_row(src.features.row(i));
        all_classes = all_classes && rec.class_label.has_value();
        classes.push_back(rec.class_label.value_or(""));
      }
    };
    if (!a.fit.empty()) take(load_dataset(a.fit), false);
    else take(ds, true);
    std::optional<std::span<const std::string>> labels;
    if (all_classes) labels = std::span<const std::string>(classes);
    const auto model = mahalanobis_fit(fit_x, labels);
    for (std::size_t i = 0; i < n; ++i) s[i] = mahalanobis_score(model, ds.features.row(i));
  } else if (a.method == "cluster-only") {
    if (a.cluster_model.empty()) throw Error(Errc::invalid_config, "cluster-only needs --cluster-model");
    const auto model = cluster_model_from_json(io::read_json(a.cluster_model));
    for (std::size_t i = 0; i < n; ++i) s[i] = nearest_cluster_score(model, ds.features.row(i)).ood_score;
  } else {
    throw Error(Errc::invalid_config, "method must be msp|energy|mahalanobis|cluster-only");
  }
  io::write_file_atomic(a.out, score_table(sample_ids(ds), s));
  std::printf("%s scores for %zu samples -> %s\n", a.method.c_str(), n, a.out.c_str());
}

PipelineConfig load_config(const std::string& path) {
  return pipeline_config_from_json(io::read_json(path), fs::path(path).parent_path());
}

struct SuiteArgs {
  std::string config, out;
  double temperature = 1.0;
};

void cmd_suite(const SuiteArgs& a) {
  const auto cfg = load_config(a.config);
  if (cfg.mode == RunMode::oracle) throw Error(Errc::invalid_config, "the suite needs g*; mode must not be oracle");
  const auto data = load_experiment_data(cfg);
  const auto r = run_experiment(data, cfg, cfg.seed);
  auto j = to_json(run_baseline_suite(suite_input(data, r), *r.g_star, *r.cluster_model, a.temperature));
  io::write_json(a.out, {{"labels", r.eval_labels}, {"methods", j}});
  for (const auto& m : j) std::cout << m.dump() << '\n';
}

struct RunArgs {
  std::string config, out_dir;
};

void cmd_run(const RunArgs& a) {
  auto cfg = load_config(a.config);
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  const auto art = run_pipeline(cfg);
  std::cout << art.report_json.dump(2) << '\n';
}

struct SweepArgs {
  std::string config, out;
  std::vector<std::size_t> ks;
  std::vector<double> ratios;
};

void cmd_sweep(const SweepArgs& a) {
  const auto cfg = load_config(a.config);
  const auto data = load_experiment_data(cfg);
  std::vector<std::size_t> ks = a.ks;
  if (!a.ratios.empty()) {
    const std::size_t n = data.id.features.n_rows() + data.wild.features.n_rows();
    const std::size_t m = n - validation_count(n, cfg.validation_fraction);
    for (double r : a.ratios) ks.push_back(k_from_ratio(r, m));
  }
  if (ks.empty()) throw Error(Errc::invalid_config, "give --ks or --ratios");
  auto curve = nlohmann::json::array();
  for (const auto& p : k_sweep(data, cfg, ks)) {
    nlohmann::json j{{"k", p.k}, {"ratio", p.ratio}};
    j["g_star"] = report_or_null(p.g_star);
    j["g_oracle"] = report_or_null(p.g_oracle);
    j["cluster_only"] = report_or_null(p.cluster_only);
    if (!p.error.empty()) j["error"] = p.error;
    std::printf("k=%zu ratio=%s g*=%s\n", p.k, io::format_number(p.ratio).c_str(),
                p.g_star ? io::format_number(p.g_star->auroc).c_str() : "-");
    curve.push_back(std::move(j));
  }
  if (!a.out.empty()) io::write_json(a.out, curve);
}

struct SynthArgs {
  std::string spec, out;
  SynthSpec s;
};

void cmd_synth(SynthArgs a, const CLI::App& sub) {
  SynthSpec s = a.spec.empty() ? SynthSpec{} : synth_spec_from_json(io::read_json(a.spec, Errc::invalid_spec));
  // Flags given on the command line override the spec file.
  if (sub.count("--n-id")) s.n_id = a.s.n_id;
  if (sub.count("--n-wild")) s.n_wild = a.s.n_wild;
  if (sub.count("--ood-fraction")) s.ood_fraction = a.s.ood_fraction;
  if (sub.count("--dim")) s.dim = a.s.dim;
  if (sub.count("--separation")) s.separation = a.s.separation;
  if (sub.count("--seed")) s.seed = a.s.seed;
  if (sub.count("--with-logits")) s.with_logits = true;
  write_synth(synth_generate(s), a.out);
  io::write_json(fs::path(a.out) / "spec.json", to_json(s));
  std::printf("wrote %s/id/manifest.json and %s/wild/manifest.json\n", a.out.c_str(), a.out.c_str());
}

struct GeojsonArgs {
  std::string scores, out;
  std::vector<std::string> manifests;
  double threshold = 0.5;
};

void cmd_geojson(const GeojsonArgs& a) {
  std::vector<Dataset> sets;
  for (const auto& m : a.manifests) sets.push_back(load_dataset(m));
  std::vector<const Dataset*> ptrs;
  for (const auto& d : sets) ptrs.push_back(&d);
  const auto rows = read_scores_csv(a.scores);
  io::write_json(a.out, emit_geojson(rows, ptrs, a.threshold));
  std::printf("%zu features -> %s\n", rows.size(), a.out.c_str());
}

struct BenchArgs {
  std::string g, out;
  std::size_t dim = 1280;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  double budget = 3.0;
};

int cmd_bench(const BenchArgs& a) {
  ClassifierModel model;
  if (!a.g.empty()) {
    model = classifier_from_json(io::read_json(a.g));
  } else {
    model = zero_model(a.dim);
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<double> normal(0.0, 0.05);
    for (auto& w : model.weights) w = normal(rng);
  }
  const auto st = throughput_bench(model, a.n, a.seed, a.budget);
  auto j = to_json(st);
  if (!a.out.empty()) io::write_json(a.out, j);
  std::cout << j.dump() << '\n';
  return st.within_budget ? 0 : kExitRuntime;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::config: return kExitConfig;
    case ErrorCategory::data: return kExitData;
    case ErrorCategory::runtime: return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tardis: post-hoc out-of-distribution detection on exported activations"};
  app.require_subcommand(1);

  ImportCsvArgs imp;
  auto* c_imp = app.add_subcommand("import-csv", "Convert a CSV feature table to a manifest");
  c_imp->add_option("--csv", imp.csv, "input CSV")->required();
  c_imp->add_option("--role", imp.role, "role for every row");
  c_imp->add_option("--out", imp.out, "manifest to write")->required();

  PoolArgs pl;
  auto* c_pool = app.add_subcommand("pool", "Pool raw activation tensors");
  c_pool->add_option("--in", pl.in)->required();
  c_pool->add_option("--method", pl.method, "meanstd|avg|max|pca");
  c_pool->add_option("--pca-components", pl.pca_components);
  c_pool->add_option("--out", pl.out)->required();

  ClusterArgs cl;
  auto* c_cluster = app.add_subcommand("cluster", "Cluster ID+WILD features and assign surrogate labels");
  c_cluster->add_option("--id", cl.id)->required();
  c_cluster->add_option("--wild", cl.wild)->required();
  auto* k_opt = c_cluster->add_option("--k", cl.k, "number of clusters");
  auto* auto_flag = c_cluster->add_flag("--auto", "k = ceil(0.3 M), the default");
  auto* search_opt = c_cluster->add_option("--search", cl.search, "random-search trials over (k, T)");
  k_opt->excludes(auto_flag)->excludes(search_opt);
  c_cluster->add_option("--strategy", cl.strategy, "random|grid");
  c_cluster->add_option("--t", cl.t, "ID-fraction threshold");
  c_cluster->add_option("--seed", cl.seed);
  c_cluster->add_option("--n-init", cl.n_init, "k-means++ restarts");
  c_cluster->add_flag("--pin-known-id", cl.pin);
  c_cluster->add_option("--labels-out", cl.labels_out, "write sample_id,label for every row");
  c_cluster->add_option("--out", cl.out)->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train-g", "Train the distribution classifier");
  c_train->add_option("--features", tr.features, "feature manifests, stacked in order")->required();
  c_train->add_option("--labels", tr.labels, "sample_id,label CSV");
  c_train->add_option("--from-cluster", tr.from_cluster, "label rows by their nearest cluster");
  c_train->add_flag("--oracle", tr.oracle, "use LABELED_ID / LABELED_OOD roles");
  c_train->add_option("--max-iter", tr.max_iter);
  c_train->add_option("--lambda", tr.lambda, "L2 strength, default 1/n");
  c_train->add_option("--tol", tr.tol);
  c_train->add_option("--seed", tr.seed);
  c_train->add_option("--out", tr.out)->required();

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Score a manifest with a trained classifier");
  c_pred->add_option("--g", pr.g)->required();
  c_pred->add_option("--in", pr.in)->required();
  c_pred->add_option("--out", pr.out)->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "AUROC, FPR95 and accuracy of a score file");
  c_eval->add_option("--scores", ev.scores)->required();
  c_eval->add_option("--labels", ev.labels, "sample_id,label CSV")->required();
  c_eval->add_option("--out", ev.out)->required();

  BaselineArgs bl;
  auto* c_base = app.add_subcommand("baseline", "Score with a baseline detector");
  c_base->add_option("--method", bl.method, "msp|energy|mahalanobis|cluster-only")->required();
  c_base->add_option("--in", bl.in)->required();
  c_base->add_option("--logits", bl.logits, "raw f32 logits overriding the manifest's");
  c_base->add_option("--logit-dim", bl.logit_dim);
  c_base->add_option("--fit", bl.fit, "ID manifest for the Mahalanobis fit");
  c_base->add_option("--cluster-model", bl.cluster_model);
  c_base->add_option("--temperature", bl.temperature);
  c_base->add_option("--out", bl.out)->required();

  SuiteArgs su;
  auto* c_suite = app.add_subcommand("suite", "Compare every method on one experiment");
  c_suite->add_option("--config", su.config)->required();
  c_suite->add_option("--temperature", su.temperature);
  c_suite->add_option("--out", su.out)->required();

  RunArgs rn;
  auto* c_run = app.add_subcommand("run", "Run the full pipeline and write its artifacts");
  c_run->add_option("--config", rn.config)->required();
  c_run->add_option("--out-dir", rn.out_dir);

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep-k", "Metrics as a function of k");
  c_sweep->add_option("--config", sw.config)->required();
  c_sweep->add_option("--ks", sw.ks)->delimiter(',');
  c_sweep->add_option("--ratios", sw.ratios)->delimiter(',');
  c_sweep->add_option("--out", sw.out);

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic ID/WILD benchmark");
  c_synth->add_option("--spec", sy.spec, "JSON spec");
  c_synth->add_option("--n-id", sy.s.n_id);
  c_synth->add_option("--n-wild", sy.s.n_wild);
  c_synth->add_option("--ood-fraction", sy.s.ood_fraction);
  c_synth->add_option("--dim", sy.s.dim);
  c_synth->add_option("--separation", sy.s.separation, "per-axis shift in sigmas");
  c_synth->add_option("--seed", sy.s.seed);
  c_synth->add_flag("--with-logits");
  c_synth->add_option("--out", sy.out)->required();

  GeojsonArgs gj;
  auto* c_geo = app.add_subcommand("geojson", "Map per-sample scores");
  c_geo->add_option("--scores", gj.scores)->required();
  c_geo->add_option("--manifest", gj.manifests, "manifests holding the coordinates")->required();
  c_geo->add_option("--threshold", gj.threshold);
  c_geo->add_option("--out", gj.out)->required();

  BenchArgs bn;
  auto* c_bench = app.add_subcommand("bench", "Per-sample inference latency");
  c_bench->add_option("--g", bn.g, "classifier JSON; random weights when absent");
  c_bench->add_option("--dim", bn.dim);
  c_bench->add_option("--n", bn.n);
  c_bench->add_option("--seed", bn.seed);
  c_bench->add_option("--budget-ms", bn.budget);
  c_bench->add_option("--out", bn.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*c_imp) cmd_import_csv(imp);
    else if (*c_pool) cmd_pool(pl);
    else if (*c_cluster) cmd_cluster(cl);
    else if (*c_train) cmd_train(tr);
    else if (*c_pred) cmd_predict(pr);
    else if (*c_eval) cmd_eval(ev);
    else if (*c_base) cmd_baseline(bl);
    else if (*c_suite) cmd_suite(su);
    else if (*c_run) cmd_run(rn);
    else if (*c_sweep) cmd_sweep(sw);
    else if (*c_synth) cmd_synth(sy, *c_synth);
    else if (*c_geo) cmd_geojson(gj);
    else if (*c_bench) return cmd_bench(bn);
  } catch (const Error& e) {
    std::cerr << "tardis: " << e.what() << '\n';
    return exit_code(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "tardis: InvalidConfig: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "tardis: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
