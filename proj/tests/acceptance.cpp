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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tardis/tardis.hpp"
#include "test_util.hpp"

namespace {

using namespace tardis;
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

ExperimentData synth_data(double separation, std::size_t n_id, std::size_t n_wild, double ood_fraction,
                          std::size_t dim, std::uint64_t seed, bool logits = false) {
  SynthSpec s;
  s.n_id = n_id;
  s.n_wild = n_wild;
  s.ood_fraction = ood_fraction;
  s.dim = dim;
  s.separation = separation;
  s.seed = seed;
  s.with_logits = logits;
  auto d = synth_generate(s);
  return {std::move(d.id), std::move(d.wild)};
}

// 1. AUROC and FPR95 against exhaustive oracles.
Outcome metric_oracles() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(101);
  std::size_t auroc_bad = 0;
  std::size_t fpr_bad = 0;
  for (int set = 0; set < 200; ++set) {
    const std::size_t n = 2 + rng() % 99;
    // A coarse grid forces ties within and across classes.
    const int levels = 2 + static_cast<int>(rng() % 20);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % levels) / levels;
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    if (auroc(s, y) != oracle::auroc_pairwise(s, y)) ++auroc_bad;
    if (fpr_at_tpr(s, y, 0.95) != oracle::fpr_sweep(s, y, 0.95)) ++fpr_bad;
  }
  const double secs = seconds_since(t0);
  return {auroc_bad == 0 && fpr_bad == 0 && secs < 5.0,
          fmt("200 sets: auroc mismatches %zu, fpr95 mismatches %zu, %.3f s (< 5 s)", auroc_bad, fpr_bad, secs)};
}

// 2. Lloyd iterations never raise the inertia; tiny two-cluster problems reach
// the exhaustive optimum.
Outcome kmeans_sanity() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(202);
  std::size_t rising = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 10 + rng() % 190;
    const std::size_t dim = 1 + rng() % 6;
    const auto x = testing::random_matrix(n, dim, rng, 3.0f);
    ClusterConfig cc;
    cc.k = 2 + rng() % 8;
    cc.seed = rng();
    const auto fit = kmeans_fit(x, cc);
    for (std::size_t i = 1; i < fit.inertia_history.size(); ++i) {
      if (fit.inertia_history[i] > fit.inertia_history[i - 1]) {
        ++rising;
        break;
      }
    }
  }

  std::size_t matched = 0;
  std::string misses;
  const int tiny = 100;
  for (int inst = 0; inst < tiny; ++inst) {
    const std::size_t n = 3 + rng() % 6;
    const std::size_t dim = 1 + rng() % 3;
    const auto x = testing::random_matrix(n, dim, rng, 2.0f);
    std::vector<double> pts(x.values().begin(), x.values().end());
    const double best = oracle::best_two_partition(pts, n, dim);
    ClusterConfig cc;
    cc.k = 2;
    cc.seed = static_cast<std::uint64_t>(inst);
    const auto fit = kmeans_fit(x, cc);
    if (std::abs(fit.model.inertia - best) <= 1e-9) {
      ++matched;
    } else {
      misses += fmt(" [seed %d n=%zu: %.6g vs %.6g, local optimum]", inst, n, fit.model.inertia, best);
    }
  }
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(matched) / tiny;
  return {rising == 0 && rate >= 0.95 && secs < 10.0,
          fmt("inertia rose in %zu/100; brute-force match %d/%d (>= 95%%), %.3f s (< 10 s)", rising,
              static_cast<int>(matched), tiny, secs) +
              misses};
}

// 3. Well separated clouds: the surrogate labels are the hidden truth.
Outcome surrogate_exactness() {
  const auto data = synth_data(10.0, 500, 500, 1.0, 8, 303);
  const auto r = run_experiment(data, {}, 0);
  const double acc = r.wild_label_accuracy.value_or(0.0);
  const double total = r.objective ? r.objective->total : 1.0;
  return {acc >= 0.99 && total <= -0.9,
          fmt("WILD surrogate accuracy %.4f (>= 0.99), objective total %.4f (<= -0.9)", acc, total)};
}

struct OverlapRuns {
  std::vector<double> star;
  std::vector<double> oracle;
  std::vector<double> cluster_only;
};

const OverlapRuns& overlap_runs() {
  static const OverlapRuns runs = [] {
    OverlapRuns o;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto data = synth_data(3.0, 500, 500, 0.5, 2, 400 + seed);
      const auto r = run_experiment(data, {}, seed);
      o.star.push_back(r.g_star_report->auroc);
      o.oracle.push_back(r.g_oracle_report->auroc);
      o.cluster_only.push_back(r.cluster_only_report->auroc);
    }
    return o;
  }();
  return runs;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// 4. On overlapping clouds g* tracks the oracle classifier.
Outcome approaches_oracle() {
  const auto& o = overlap_runs();
  double worst = 0.0;
  for (std::size_t i = 0; i < o.star.size(); ++i) worst = std::max(worst, std::abs(o.star[i] - o.oracle[i]));
  const double gap = std::abs(mean(o.star) - mean(o.oracle));
  return {worst <= 0.05, fmt("10 seeds: max per-seed |g* - oracle| %.4f (<= 0.05), mean g* %.4f, mean oracle %.4f, "
                             "gap of means %.4f",
                             worst, mean(o.star), mean(o.oracle), gap)};
}

// 5. The classifier stage improves on scoring by nearest cluster alone.
Outcome beats_clustering() {
  const auto& o = overlap_runs();
  const double lift = mean(o.star) - mean(o.cluster_only);
  return {lift >= 0.02,
          fmt("mean g* %.4f, mean cluster-only %.4f, lift %.4f (>= 0.02)", mean(o.star), mean(o.cluster_only), lift)};
}

// 6. Analytic gradients and monotone training.
Outcome classifier_numerics() {
  std::mt19937_64 rng(606);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  std::size_t non_monotone = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 5 + rng() % 40;
    const std::size_t dim = 1 + rng() % 6;
    const auto x = testing::random_matrix(n, dim, rng, 2.0f);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng() % 2);
    y[0] = 0;
    y[1] = 1;
    std::vector<double> design(x.values().begin(), x.values().end());
    const LogisticObjective obj(design, y, dim, 1.0 / static_cast<double>(n));
    std::vector<double> theta(dim + 1);
    for (auto& v : theta) v = normal(rng);
    worst = std::max(worst, gradient_check(obj, theta));

    const auto tr = train(x, y, {});
    for (std::size_t i = 1; i < tr.loss_history.size(); ++i) {
      if (tr.loss_history[i] > tr.loss_history[i - 1]) {
        ++non_monotone;
        break;
      }
    }
  }
  return {worst <= 1e-4 && non_monotone == 0,
          fmt("20 instances: max gradient relative error %.3g (<= 1e-4), non-monotone loss curves %zu", worst,
              non_monotone)};
}

// 7. When WILD is drawn from the ID distribution no method can separate them.
Outcome indistinguishable_null() {
  std::vector<std::string> names;
  std::vector<std::vector<double>> per_method;
  auto add = [&](const std::string& name, double v) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      names.push_back(name);
      per_method.push_back({v});
    } else {
      per_method[static_cast<std::size_t>(it - names.begin())].push_back(v);
    }
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = synth_data(0.0, 1000, 1000, 1.0, 8, 700 + seed, true);
    const auto r = run_experiment(data, {}, seed);
    add("g_oracle", r.g_oracle_report->auroc);
    for (const auto& m : run_baseline_suite(suite_input(data, r), *r.g_star, *r.cluster_model)) {
      if (!m.report) throw std::runtime_error(std::string(method_name(m.method)) + " unavailable: " + m.unavailable);
      add(std::string(method_name(m.method)), m.report->auroc);
    }
  }
  bool pass = true;
  std::string detail = "n=2000, mean AUROC over 10 seeds (0.5 +/- 0.05):";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double m = mean(per_method[i]);
    const auto [lo, hi] = std::minmax_element(per_method[i].begin(), per_method[i].end());
    pass = pass && std::abs(m - 0.5) <= 0.05;
    detail += fmt(" %s %.4f [seed range %.3f..%.3f]", names[i].c_str(), m, *lo, *hi);
  }
  return {pass, detail};
}

// 8. Per-sample inference latency at F = 1280.
Outcome throughput() {
  auto model = zero_model(1280);
  std::mt19937_64 rng(808);
  std::normal_distribution<double> normal(0.0, 0.05);
  for (auto& w : model.weights) w = normal(rng);
  for (auto& m : model.feature_mean) m = normal(rng);
  const auto st = throughput_bench(model, 10000, 8);
  return {st.mean_ms < 3.0, fmt("F=1280, n=10000: mean %.5f ms, p99 %.5f ms (mean < 3 ms)", st.mean_ms, st.p99_ms)};
}

// 9. Two full runs with the same config write identical scores.
Outcome determinism() {
  testing::TempDir dir;
  SynthSpec s;
  s.n_id = 300;
  s.n_wild = 300;
  s.ood_fraction = 0.5;
  s.dim = 8;
  s.separation = 2.0;
  s.seed = 909;
  write_synth(synth_generate(s), dir / "data");
  PipelineConfig cfg;
  cfg.id_manifest = dir / "data/id/manifest.json";
  cfg.wild_manifest = dir / "data/wild/manifest.json";
  cfg.cluster = cluster_choice::Search{5, SearchStrategy::random, std::nullopt};
  cfg.seed = 9;
  cfg.out_dir = dir / "run1";
  const auto a = run_pipeline(cfg);
  cfg.out_dir = dir / "run2";
  const auto b = run_pipeline(cfg);
  const auto sa = io::read_file(a.scores);
  const auto sb = io::read_file(b.scores);
  return {sa == sb && !sa.empty(), fmt("scores.csv %zu bytes vs %zu bytes, %s", sa.size(), sb.size(),
                                       sa == sb ? "bitwise identical" : "differ")};
}

// 10. MSP and Energy ignore a constant logit shift; Mahalanobis ignores an
// invertible affine map of the features.
Outcome baseline_invariances() {
  std::mt19937_64 rng(1010);
  std::normal_distribution<float> normal(0.0f, 2.0f);
  std::uniform_int_distribution<int> shift(-50, 50);
  double msp_worst = 0.0;
  double energy_worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<float> l(2 + rng() % 9);
    // Multiples of 1/64 stay exact under an integer shift.
    for (auto& v : l) v = std::round(normal(rng) * 64.0f) / 64.0f;
    const auto c = static_cast<float>(shift(rng));
    auto s = l;
    for (auto& v : s) v += c;
    msp_worst = std::max(msp_worst, std::abs(msp_score(l) - msp_score(s)));
    // Energy moves by exactly -c; the centred score is the invariant.
    energy_worst = std::max(energy_worst, std::abs(energy_score(l) - energy_score(s) - c));
  }

  std::uniform_int_distribution<int> small(-8, 8);
  std::uniform_int_distribution<int> unit(-1, 1);
  double maha_worst = 0.0;
  std::size_t jittered = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto d = static_cast<Eigen::Index>(2 + rng() % 4);
    const auto du = static_cast<std::size_t>(d);
    FeatureMatrix x(60, du);
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
    for (std::size_t i = 0; i < x.n_rows(); ++i) xt.append_row(apply(x.row(i)));
    const auto m1 = mahalanobis_fit(x);
    const auto m2 = mahalanobis_fit(xt);
    if (m1.applied_jitter != 0.0 || m2.applied_jitter != 0.0) ++jittered;
    for (int q = 0; q < 10; ++q) {
      std::vector<float> z(du);
      for (auto& v : z) v = static_cast<float>(small(rng));
      maha_worst = std::max(maha_worst, std::abs(mahalanobis_score(m1, z) - mahalanobis_score(m2, apply(z))));
    }
  }
  const bool pass = msp_worst <= 1e-6 && energy_worst <= 1e-6 && maha_worst <= 1e-6 && jittered == 0;
  return {pass, fmt("50 instances each: msp %.3g, energy %.3g, mahalanobis %.3g (<= 1e-6), jittered fits %zu",
                    msp_worst, energy_worst, maha_worst, jittered)};
}

}  // namespace

int main() {
  report("metric-oracles", metric_oracles);
  report("kmeans-sanity", kmeans_sanity);
  report("surrogate-exactness", surrogate_exactness);
  report("g-star-approaches-oracle", approaches_oracle);
  report("beats-clustering-only", beats_clustering);
  report("classifier-numerics", classifier_numerics);
  report("indistinguishability-null", indistinguishable_null);
  report("throughput", throughput);
  report("determinism", determinism);
  report("baseline-invariances", baseline_invariances);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
