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

// Synthetic ID / WILD feature sets with known ground truth.
//
// The ID law is an equal-weight mixture of isotropic Gaussians (std sigma)
// whose centres lie in the hyperplane orthogonal to the all-ones direction.
// The OOD law is the same mixture shifted by `separation * sigma` on every
// axis, so the separation alone controls how distinguishable the two laws are.
// WILD rows carry their truth as LABELED_ID / LABELED_OOD roles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"

namespace tardis {

struct SynthSpec {
  std::size_t n_id = 500;
  std::size_t n_wild = 500;
  double ood_fraction = 1.0;
  std::size_t dim = 8;
  double separation = 10.0;  // per-axis shift in units of sigma
  std::uint64_t seed = 0;
  std::size_t n_modes = 3;
  double mode_spread = 3.0;  // std of mode centres, in units of sigma
  double sigma = 1.0;
  /// Emit per-sample logits of a nearest-mode Gaussian classifier.
  bool with_logits = false;
};

struct SynthData {
  Dataset id;
  Dataset wild;
};

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"n_id", s.n_id},
          {"n_wild", s.n_wild},
          {"ood_fraction", s.ood_fraction},
          {"dim", s.dim},
          {"separation", s.separation},
          {"seed", s.seed},
          {"n_modes", s.n_modes},
          {"mode_spread", s.mode_spread},
          {"sigma", s.sigma},
          {"with_logits", s.with_logits}};
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.n_id = j.value("n_id", s.n_id);
    s.n_wild = j.value("n_wild", s.n_wild);
    s.ood_fraction = j.value("ood_fraction", s.ood_fraction);
    s.dim = j.value("dim", s.dim);
    s.separation = j.value("separation", s.separation);
    s.seed = j.value("seed", s.seed);
    s.n_modes = j.value("n_modes", s.n_modes);
    s.mode_spread = j.value("mode_spread", s.mode_spread);
    s.sigma = j.value("sigma", s.sigma);
    s.with_logits = j.value("with_logits", s.with_logits);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_spec, e.what());
  }
  return s;
}

inline SynthData synth_generate(const SynthSpec& spec) {
  if (spec.n_id == 0 || spec.n_wild == 0 || spec.dim == 0 || spec.n_modes == 0) {
    throw Error(Errc::invalid_spec, "n_id, n_wild, dim and n_modes must be positive");
  }
  if (!(spec.ood_fraction >= 0.0 && spec.ood_fraction <= 1.0)) {
    throw Error(Errc::invalid_spec, "ood_fraction must lie in [0, 1]");
  }
  if (!(spec.separation >= 0.0) || !(spec.sigma > 0.0) || !(spec.mode_spread >= 0.0)) {
    throw Error(Errc::invalid_spec, "separation and mode_spread must be >= 0 and sigma > 0");
  }
  if (spec.with_logits && spec.n_modes < 2) throw Error(Errc::invalid_spec, "logits need n_modes >= 2");

  const std::size_t dim = spec.dim;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> centres(spec.n_modes, std::vector<double>(dim));
  for (auto& c : centres) {
    double mean = 0.0;
    for (auto& v : c) {
      v = spec.mode_spread * spec.sigma * normal(rng);
      mean += v;
    }
    mean /= static_cast<double>(dim);
    for (auto& v : c) v -= mean;  // drop the component along the shift axis
  }

  auto draw = [&](bool ood, std::size_t& mode, std::vector<float>& out) {
    mode = static_cast<std::size_t>(rng() % spec.n_modes);
    const double shift = ood ? spec.separation * spec.sigma : 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      out[j] = static_cast<float>(centres[mode][j] + shift + spec.sigma * normal(rng));
    }
  };

  auto logits_for = [&](std::span<const float> x, std::span<float> out) {
    for (std::size_t c = 0; c < spec.n_modes; ++c) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = x[j] - centres[c][j];
        d2 += d * d;
      }
      out[c] = static_cast<float>(-0.5 * d2 / (spec.sigma * spec.sigma));
    }
  };

  auto make = [&](std::size_t n, const std::vector<bool>& is_ood, bool wild, const char* prefix) {
    Dataset ds;
    ds.manifest.feature_dim = dim;
    ds.features = FeatureMatrix(n, dim);
    if (spec.with_logits) {
      ds.logits = LogitTable{FeatureMatrix(n, spec.n_modes), std::vector<bool>(n, true)};
      ds.manifest.logit_dim = spec.n_modes;
      ds.manifest.logits_file = "logits.bin";
    }
    std::vector<float> row(dim);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t mode = 0;
      draw(is_ood[i], mode, row);
      std::copy(row.begin(), row.end(), ds.features.row(i).begin());
      SampleRecord s;
      char id[32];
      std::snprintf(id, sizeof(id), "%s-%06zu", prefix, i);
      s.sample_id = id;
      s.role = wild ? (is_ood[i] ? Role::labeled_ood : Role::labeled_id) : Role::id;
      s.row = i;
      s.class_label = "mode" + std::to_string(mode);
      if (spec.with_logits) {
        logits_for(ds.features.row(i), ds.logits->values.row(i));
        s.logits_row = i;
      }
      ds.manifest.samples.push_back(std::move(s));
    }
    return ds;
  };

  SynthData out;
  out.id = make(spec.n_id, std::vector<bool>(spec.n_id, false), false, "id");

  const auto n_ood = static_cast<std::size_t>(std::llround(spec.ood_fraction * static_cast<double>(spec.n_wild)));
  std::vector<bool> wild_ood(spec.n_wild, false);
  std::fill_n(wild_ood.begin(), n_ood, true);
  for (std::size_t i = spec.n_wild; i > 1; --i) {
    std::swap(wild_ood[i - 1], wild_ood[static_cast<std::size_t>(rng() % i)]);
  }
  out.wild = make(spec.n_wild, wild_ood, true, "wild");
  return out;
}

/// Writes `<dir>/id/manifest.json` and `<dir>/wild/manifest.json`.
inline void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  write_dataset(dir / "id" / "manifest.json", data.id);
  write_dataset(dir / "wild" / "manifest.json", data.wild);
}

}  // namespace tardis
