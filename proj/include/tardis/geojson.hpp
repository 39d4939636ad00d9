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

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"
#include "tardis/io.hpp"

namespace tardis {

struct ScoreRow {
  std::string sample_id;
  double ood_proba = 0.0;
};

/// Reads a `sample_id,ood_proba[,ood_label]` file.
inline std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  if (lines.empty()) throw Error(Errc::header_mismatch, path.string() + ": empty scores file");
  const auto header = io::split(lines[0]);
  if (header.size() < 2 || header[0] != "sample_id" || header[1] != "ood_proba") {
    throw Error(Errc::header_mismatch, path.string() + ": expected header sample_id,ood_proba[,ood_label]");
  }
  std::vector<ScoreRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = io::split(lines[i]);
    if (cells.size() != header.size()) throw Error(Errc::ragged_row, path.string() + ": line " + std::to_string(i + 1));
    const auto p = io::parse_number<double>(cells[1]);
    if (!p) throw Error(Errc::malformed_manifest, path.string() + ": bad score on line " + std::to_string(i + 1));
    rows.push_back({std::string(cells[0]), *p});
  }
  return rows;
}

inline bool all_have_coordinates(std::span<const Dataset* const> sets) {
  for (const auto* ds : sets) {
    for (const auto& s : ds->manifest.samples) {
      if (!s.lat || !s.lon) return false;
    }
  }
  return true;
}

/// One Point feature per scored sample, coordinates [lon, lat]. Samples are
/// looked up by id across `sets`.
inline nlohmann::json emit_geojson(std::span<const ScoreRow> scores, std::span<const Dataset* const> sets,
                                   double threshold = 0.5) {
  std::unordered_map<std::string, const SampleRecord*> index;
  for (const auto* ds : sets) {
    for (const auto& s : ds->manifest.samples) index.emplace(s.sample_id, &s);
  }
  auto features = nlohmann::json::array();
  for (const auto& row : scores) {
    const auto it = index.find(row.sample_id);
    if (it == index.end()) throw Error(Errc::missing_coordinates, row.sample_id + ": not in any manifest");
    const SampleRecord& s = *it->second;
    if (!s.lat || !s.lon) throw Error(Errc::missing_coordinates, row.sample_id);
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {*s.lon, *s.lat}}}},
                        {"properties",
                         {{"sample_id", s.sample_id},
                          {"ood_proba", row.ood_proba},
                          {"ood_label", row.ood_proba >= threshold ? 1 : 0},
                          {"role", std::string(role_name(s.role))}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace tardis
