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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "tardis/classifier.hpp"
#include "tardis/errors.hpp"

namespace tardis {

struct BenchStats {
  std::size_t n = 0;
  std::size_t dim = 0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
  double budget_ms = 3.0;
  bool within_budget = false;  // mean below budget
  /// Classifier outputs; deterministic for a given seed.
  std::vector<double> predictions;
};

/// Times predict_proba on n standard-normal vectors, one call per sample.
inline BenchStats throughput_bench(const ClassifierModel& model, std::size_t n, std::uint64_t seed = 0,
                                   double budget_ms = 3.0) {
  if (n == 0) throw Error(Errc::empty_stats, "benchmark needs at least one sample");
  const std::size_t dim = model.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> inputs(n * dim);
  for (auto& v : inputs) v = normal(rng);

  BenchStats st;
  st.n = n;
  st.dim = dim;
  st.budget_ms = budget_ms;
  st.predictions.resize(n);
  std::vector<double> lat(n);
  using clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t0 = clock::now();
    st.predictions[i] = predict_proba(model, std::span<const float>(inputs.data() + i * dim, dim));
    lat[i] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  }
  double sum = 0.0;
  for (double v : lat) sum += v;
  st.mean_ms = sum / static_cast<double>(n);
  std::sort(lat.begin(), lat.end());
  const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n))) - 1;
  st.p99_ms = lat[std::min(idx, n - 1)];
  st.within_budget = st.mean_ms < budget_ms;
  return st;
}

inline nlohmann::json to_json(const BenchStats& s) {
  return {{"n", s.n},           {"dim", s.dim},         {"mean_ms", s.mean_ms},
          {"p99_ms", s.p99_ms}, {"budget_ms", s.budget_ms}, {"within_budget", s.within_budget}};
}

}  // namespace tardis
