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

// Activation datasets on disk and in memory.
//
// A dataset is a JSON manifest plus a headerless payload of little-endian
// binary32 values, one fixed-size record per sample, row-major. The manifest
// carries all structure: sample ids, roles, optional coordinates, class labels
// and an optional parallel logits payload.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tardis/errors.hpp"
#include "tardis/io.hpp"

namespace tardis {

namespace fs = std::filesystem;

enum class Role { id, wild, labeled_id, labeled_ood };

constexpr std::string_view role_name(Role r) {
  switch (r) {
    case Role::id: return "ID";
    case Role::wild: return "WILD";
    case Role::labeled_id: return "LABELED_ID";
    case Role::labeled_ood: return "LABELED_OOD";
  }
  return "?";
}

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "ID") return Role::id;
  if (s == "WILD") return Role::wild;
  if (s == "LABELED_ID") return Role::labeled_id;
  if (s == "LABELED_OOD") return Role::labeled_ood;
  return std::nullopt;
}

/// Ground-truth distribution label implied by a role: 0 (ID), 1 (OOD), or
/// nothing for unlabeled WILD rows.
constexpr std::optional<int> truth_label(Role r) {
  switch (r) {
    case Role::id:
    case Role::labeled_id: return 0;
    case Role::labeled_ood: return 1;
    case Role::wild: return std::nullopt;
  }
  return std::nullopt;
}

struct SampleRecord {
  std::string sample_id;
  Role role = Role::wild;
  std::size_t row = 0;
  std::optional<double> lat;
  std::optional<double> lon;
  std::optional<std::string> class_label;
  std::optional<std::size_t> logits_row;

  bool operator==(const SampleRecord&) const = default;
};

struct TensorShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  std::size_t spatial() const { return height * width; }
  bool operator==(const TensorShape&) const = default;
};

struct DatasetManifest {
  int version = 1;
  std::optional<std::size_t> feature_dim;
  std::optional<TensorShape> tensor_shape;
  std::vector<SampleRecord> samples;
  std::string data_file = "features.bin";
  std::optional<std::size_t> logit_dim;
  std::optional<std::string> logits_file;

  /// Values per payload record: F, or C*H*W for raw tensors.
  std::size_t record_size() const {
    return feature_dim ? *feature_dim : (tensor_shape ? tensor_shape->size() : 0);
  }

  bool operator==(const DatasetManifest&) const = default;
};

/// Dense row-major matrix of binary32 values.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw Error(Errc::dimension_mismatch, "matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                                " given " + std::to_string(values_.size()) + " values");
    }
  }

  std::size_t n_rows() const { return rows_; }
  std::size_t n_cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<float> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  float operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  float& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  const std::vector<float>& values() const { return values_; }
  std::vector<float>& values() { return values_; }

  void append_row(std::span<const float> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) {
      throw Error(Errc::dimension_mismatch,
                  "row of length " + std::to_string(r.size()) + " into matrix with " + std::to_string(cols_) + " cols");
    }
    values_.insert(values_.end(), r.begin(), r.end());
    ++rows_;
  }

  /// Rows picked by index, in the given order.
  FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy_n(values_.data() + idx[i] * cols_, cols_, out.values_.data() + i * cols_);
    }
    return out;
  }

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

/// Logits aligned with manifest samples; rows without logits are zero and
/// flagged absent.
struct LogitTable {
  FeatureMatrix values;
  std::vector<bool> present;

  bool complete() const {
    return !present.empty() && std::all_of(present.begin(), present.end(), [](bool p) { return p; });
  }
};

/// A loaded dataset. Row i of `features` belongs to `manifest.samples[i]`.
struct Dataset {
  DatasetManifest manifest;
  FeatureMatrix features;
  std::optional<LogitTable> logits;
};

// ---------------------------------------------------------------------------
// Manifest JSON

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  if (m.feature_dim) j["feature_dim"] = *m.feature_dim;
  if (m.tensor_shape) j["tensor_shape"] = {m.tensor_shape->channels, m.tensor_shape->height, m.tensor_shape->width};
  j["data_file"] = m.data_file;
  if (m.logit_dim) j["logit_dim"] = *m.logit_dim;
  if (m.logits_file) j["logits_file"] = *m.logits_file;
  auto samples = nlohmann::json::array();
  for (const auto& s : m.samples) {
    nlohmann::json r;
    r["sample_id"] = s.sample_id;
    r["role"] = std::string(role_name(s.role));
    r["row"] = s.row;
    if (s.lat) r["lat"] = *s.lat;
    if (s.lon) r["lon"] = *s.lon;
    if (s.class_label) r["class_label"] = *s.class_label;
    if (s.logits_row) r["logits_row"] = *s.logits_row;
    samples.push_back(std::move(r));
  }
  j["samples"] = std::move(samples);
  return j;
}

namespace detail {

[[noreturn]] inline void malformed(const std::string& what) { throw Error(Errc::malformed_manifest, what); }

inline std::size_t positive_size(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() <= 0) malformed(key + " must be a positive integer");
  return v.get<std::size_t>();
}

inline std::size_t index_value(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) malformed(key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace detail

/// Parses and validates a manifest document (payload checks happen at load).
inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  using detail::malformed;
  if (!j.is_object()) malformed("manifest must be a JSON object");
  DatasetManifest m;
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() < 1) {
    malformed("version must be an integer >= 1");
  }
  m.version = j["version"].get<int>();
  if (j.contains("feature_dim")) m.feature_dim = detail::positive_size(j["feature_dim"], "feature_dim");
  if (j.contains("tensor_shape")) {
    const auto& ts = j["tensor_shape"];
    if (!ts.is_array() || ts.size() != 3) malformed("tensor_shape must be [C, H, W]");
    m.tensor_shape = TensorShape{detail::positive_size(ts[0], "tensor_shape[0]"),
                                 detail::positive_size(ts[1], "tensor_shape[1]"),
                                 detail::positive_size(ts[2], "tensor_shape[2]")};
  }
  if (m.feature_dim.has_value() == m.tensor_shape.has_value()) {
    malformed("exactly one of feature_dim / tensor_shape must be present");
  }
  if (!j.contains("data_file") || !j["data_file"].is_string()) malformed("data_file must be a string");
  m.data_file = j["data_file"].get<std::string>();
  if (j.contains("logit_dim")) m.logit_dim = detail::positive_size(j["logit_dim"], "logit_dim");
  if (j.contains("logits_file")) {
    if (!j["logits_file"].is_string()) malformed("logits_file must be a string");
    m.logits_file = j["logits_file"].get<std::string>();
  }
  if (m.logit_dim.has_value() != m.logits_file.has_value()) {
    malformed("logit_dim and logits_file must appear together");
  }
  if (!j.contains("samples") || !j["samples"].is_array()) malformed("samples must be an array");

  const std::size_t n = j["samples"].size();
  std::vector<bool> row_seen(n, false);
  std::set<std::string> ids;
  for (const auto& r : j["samples"]) {
    if (!r.is_object()) malformed("sample entries must be objects");
    SampleRecord s;
    if (!r.contains("sample_id") || !r["sample_id"].is_string()) malformed("sample_id must be a string");
    s.sample_id = r["sample_id"].get<std::string>();
    if (!ids.insert(s.sample_id).second) malformed("duplicate sample_id '" + s.sample_id + "'");
    if (!r.contains("role") || !r["role"].is_string()) malformed(s.sample_id + ": role must be a string");
    const auto role = parse_role(r["role"].get<std::string>());
    if (!role) malformed(s.sample_id + ": unknown role '" + r["role"].get<std::string>() + "'");
    s.role = *role;
    if (!r.contains("row")) malformed(s.sample_id + ": missing row");
    s.row = detail::index_value(r["row"], s.sample_id + ".row");
    if (s.row >= n) malformed(s.sample_id + ": row " + std::to_string(s.row) + " out of range");
    if (row_seen[s.row]) malformed(s.sample_id + ": row " + std::to_string(s.row) + " used twice");
    row_seen[s.row] = true;
    auto coord = [&](const char* key, double lim) -> std::optional<double> {
      if (!r.contains(key) || r[key].is_null()) return std::nullopt;
      if (!r[key].is_number()) malformed(s.sample_id + ": " + key + " must be a number");
      const double v = r[key].get<double>();
      if (!(v >= -lim && v <= lim)) malformed(s.sample_id + ": " + key + " out of range");
      return v;
    };
    s.lat = coord("lat", 90.0);
    s.lon = coord("lon", 180.0);
    if (r.contains("class_label") && !r["class_label"].is_null()) {
      if (!r["class_label"].is_string()) malformed(s.sample_id + ": class_label must be a string");
      s.class_label = r["class_label"].get<std::string>();
    }
    if (r.contains("logits_row") && !r["logits_row"].is_null()) {
      if (!m.logit_dim) malformed(s.sample_id + ": logits_row without logits_file");
      s.logits_row = detail::index_value(r["logits_row"], s.sample_id + ".logits_row");
    }
    m.samples.push_back(std::move(s));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Payloads

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

inline std::vector<float> decode_f32(std::string_view bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(to_le(u));
  }
  return out;
}

inline std::string encode_f32(std::span<const float> values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t u = to_le(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(out.data() + 4 * i, &u, 4);
  }
  return out;
}

inline FeatureMatrix read_records(const fs::path& path, std::size_t n_records, std::size_t record_size) {
  const std::string bytes = io::read_file(path);
  const std::size_t expected = n_records * record_size * 4;
  if (bytes.size() != expected) {
    throw Error(Errc::payload_size_mismatch, path.string() + " holds " + std::to_string(bytes.size()) +
                                                 " bytes, expected " + std::to_string(expected));
  }
  return FeatureMatrix(n_records, record_size, decode_f32(bytes));
}

}  // namespace detail

/// Throws NonFiniteError listing every NaN/Inf cell.
inline void validate_finite(const FeatureMatrix& m) {
  std::vector<NonFiniteError::Cell> bad;
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    for (std::size_t j = 0; j < m.n_cols(); ++j) {
      if (!std::isfinite(m(i, j))) bad.emplace_back(i, j);
    }
  }
  if (!bad.empty()) throw NonFiniteError(std::move(bad));
}

/// Loads a manifest and its payload(s). Matrix row i holds the payload
/// record `samples[i].row`.
inline Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = manifest_from_json(io::read_json(manifest_path, Errc::malformed_manifest));
  const fs::path base = manifest_path.parent_path();
  const auto& m = ds.manifest;
  const std::size_t n = m.samples.size();

  const FeatureMatrix payload = detail::read_records(base / m.data_file, n, m.record_size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = m.samples[i].row;
  ds.features = payload.select_rows(order);
  validate_finite(ds.features);

  if (m.logits_file) {
    const fs::path lpath = base / *m.logits_file;
    const std::size_t bytes = fs::exists(lpath) ? fs::file_size(lpath) : 0;
    const std::size_t record_bytes = *m.logit_dim * 4;
    if (bytes % record_bytes != 0) {
      throw Error(Errc::payload_size_mismatch,
                  lpath.string() + " size " + std::to_string(bytes) + " is not a multiple of logit_dim * 4");
    }
    const FeatureMatrix raw = detail::read_records(lpath, bytes / record_bytes, *m.logit_dim);
    LogitTable table{FeatureMatrix(n, *m.logit_dim), std::vector<bool>(n, false)};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& lr = m.samples[i].logits_row;
      if (!lr) continue;
      if (*lr >= raw.n_rows()) {
        throw Error(Errc::malformed_manifest, m.samples[i].sample_id + ": logits_row out of range");
      }
      std::copy(raw.row(*lr).begin(), raw.row(*lr).end(), table.values.row(i).begin());
      table.present[i] = true;
    }
    validate_finite(table.values);
    ds.logits = std::move(table);
  }
  return ds;
}

/// Writes the dataset next to `manifest_path`, renumbering rows so that the
/// payload order equals sample order.
inline void write_dataset(const fs::path& manifest_path, Dataset ds) {
  auto& m = ds.manifest;
  if (ds.features.n_rows() != m.samples.size() || ds.features.n_cols() != m.record_size()) {
    throw Error(Errc::dimension_mismatch, "features do not match manifest shape");
  }
  const fs::path base = manifest_path.parent_path();
  for (std::size_t i = 0; i < m.samples.size(); ++i) m.samples[i].row = i;
  io::write_file_atomic(base / m.data_file, detail::encode_f32(ds.features.values()));
  if (ds.logits) {
    if (!m.logits_file) m.logits_file = "logits.bin";
    m.logit_dim = ds.logits->values.n_cols();
    std::vector<float> packed;
    std::size_t next = 0;
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
      if (ds.logits->present[i]) {
        auto r = ds.logits->values.row(i);
        packed.insert(packed.end(), r.begin(), r.end());
        m.samples[i].logits_row = next++;
      } else {
        m.samples[i].logits_row.reset();
      }
    }
    io::write_file_atomic(base / *m.logits_file, detail::encode_f32(packed));
  }
  io::write_json(manifest_path, to_json(m));
}

// ---------------------------------------------------------------------------
// CSV import / export

/// Reads `sample_id[,lat,lon],f0..f{F-1}` rows. Empty lat/lon cells mean
/// "no coordinates".
inline Dataset parse_csv(const fs::path& csv_path, Role role) {
  const auto lines = io::read_lines(csv_path);
  if (lines.empty()) throw Error(Errc::header_mismatch, csv_path.string() + ": missing header");
  const auto header = io::split(lines[0]);
  if (header.empty() || header[0] != "sample_id") {
    throw Error(Errc::header_mismatch, "first column must be sample_id");
  }
  std::size_t first_feature = 1;
  const bool has_coords = header.size() >= 3 && header[1] == "lat" && header[2] == "lon";
  if (has_coords) first_feature = 3;
  const std::size_t dim = header.size() - first_feature;
  if (dim == 0) throw Error(Errc::header_mismatch, "no feature columns");
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[first_feature + c] != "f" + std::to_string(c)) {
      throw Error(Errc::header_mismatch, "expected column f" + std::to_string(c) + ", found '" +
                                             std::string(header[first_feature + c]) + "'");
    }
  }

  Dataset ds;
  ds.manifest.feature_dim = dim;
  ds.features = FeatureMatrix(0, dim);
  std::vector<float> row(dim);
  std::set<std::string> ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = io::split(lines[li]);
    if (cells.size() != header.size()) {
      throw Error(Errc::ragged_row, "line " + std::to_string(li + 1) + " has " + std::to_string(cells.size()) +
                                        " cells, header has " + std::to_string(header.size()));
    }
    SampleRecord s;
    s.sample_id = std::string(cells[0]);
    if (s.sample_id.empty() || !ids.insert(s.sample_id).second) {
      throw Error(Errc::malformed_manifest, "line " + std::to_string(li + 1) + ": empty or duplicate sample_id");
    }
    s.role = role;
    s.row = li - 1;
    if (has_coords) {
      const bool lat_blank = cells[1].empty();
      const bool lon_blank = cells[2].empty();
      if (lat_blank != lon_blank) {
        throw Error(Errc::malformed_manifest, s.sample_id + ": lat and lon must both be set or both empty");
      }
      if (!lat_blank) {
        s.lat = io::parse_number<double>(cells[1]);
        s.lon = io::parse_number<double>(cells[2]);
        if (!s.lat || !s.lon || std::abs(*s.lat) > 90.0 || std::abs(*s.lon) > 180.0) {
          throw Error(Errc::malformed_manifest, s.sample_id + ": invalid coordinates");
        }
      }
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const auto v = io::parse_number<float>(cells[first_feature + c]);
      if (!v) {
        throw Error(Errc::malformed_manifest,
                    s.sample_id + ": cannot parse '" + std::string(cells[first_feature + c]) + "'");
      }
      row[c] = *v;
    }
    ds.features.append_row(row);
    ds.manifest.samples.push_back(std::move(s));
  }
  validate_finite(ds.features);
  return ds;
}

/// Parses the CSV, writes manifest + payload, and returns the loaded result.
inline Dataset import_csv(const fs::path& csv_path, Role role, const fs::path& manifest_out) {
  write_dataset(manifest_out, parse_csv(csv_path, role));
  return load_dataset(manifest_out);
}

/// Writes features in the import format; lat/lon columns are always emitted.
inline void export_csv(const Dataset& ds, const fs::path& csv_path) {
  const std::size_t dim = ds.features.n_cols();
  std::string out = "sample_id,lat,lon";
  for (std::size_t c = 0; c < dim; ++c) out += ",f" + std::to_string(c);
  out += '\n';
  for (std::size_t i = 0; i < ds.features.n_rows(); ++i) {
    const auto& s = ds.manifest.samples[i];
    out += s.sample_id;
    out += ',';
    if (s.lat) out += io::format_number(*s.lat);
    out += ',';
    if (s.lon) out += io::format_number(*s.lon);
    for (float v : ds.features.row(i)) {
      out += ',';
      out += io::format_number(v);
    }
    out += '\n';
  }
  io::write_file_atomic(csv_path, out);
}

// ---------------------------------------------------------------------------
// Joining ID and WILD sets

enum class Origin : std::uint8_t { id = 0, wild = 1 };

struct Combined {
  FeatureMatrix features;
  std::vector<Origin> origin;
};

/// Stacks ID rows above WILD rows, flagging each row's origin.
inline Combined concat(const FeatureMatrix& id_set, const FeatureMatrix& wild_set) {
  if (id_set.n_cols() != wild_set.n_cols()) {
    throw Error(Errc::dimension_mismatch, "ID set has " + std::to_string(id_set.n_cols()) + " columns, WILD set has " +
                                              std::to_string(wild_set.n_cols()));
  }
  Combined out;
  std::vector<float> values = id_set.values();
  values.insert(values.end(), wild_set.values().begin(), wild_set.values().end());
  out.features = FeatureMatrix(id_set.n_rows() + wild_set.n_rows(), id_set.n_cols(), std::move(values));
  out.origin.assign(id_set.n_rows(), Origin::id);
  out.origin.insert(out.origin.end(), wild_set.n_rows(), Origin::wild);
  return out;
}

}  // namespace tardis
