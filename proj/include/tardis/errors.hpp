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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tardis {

/// Error codes raised by the library. Each code belongs to one category,
/// which the CLI maps to its exit status.
enum class Errc {
  // data
  malformed_manifest,
  payload_size_mismatch,
  non_finite_value,
  ragged_row,
  header_mismatch,
  dimension_mismatch,
  empty_tensor,
  shape_mismatch,
  missing_coordinates,
  missing_logits,
  // configuration / preconditions
  invalid_config,
  too_few_samples,
  unfitted_pca,
  unfitted_model,
  no_id_samples,
  single_class,
  single_class_training_set,
  length_mismatch,
  degenerate_distribution,
  too_few_runs,
  empty_stage,
  too_few_logits,
  invalid_temperature,
  too_few_samples_per_class,
  invalid_spec,
  empty_stats,
  // runtime
  singular_covariance,
  io_failure,
};

enum class ErrorCategory { config, data, runtime };

constexpr std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::malformed_manifest: return "MalformedManifest";
    case Errc::payload_size_mismatch: return "PayloadSizeMismatch";
    case Errc::non_finite_value: return "NonFiniteValue";
    case Errc::ragged_row: return "RaggedRow";
    case Errc::header_mismatch: return "HeaderMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_tensor: return "EmptyTensor";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::missing_coordinates: return "MissingCoordinates";
    case Errc::missing_logits: return "MissingLogits";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::unfitted_pca: return "UnfittedPCA";
    case Errc::unfitted_model: return "UnfittedModel";
    case Errc::no_id_samples: return "NoIdSamples";
    case Errc::single_class: return "SingleClass";
    case Errc::single_class_training_set: return "SingleClassTrainingSet";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::degenerate_distribution: return "DegenerateDistribution";
    case Errc::too_few_runs: return "TooFewRuns";
    case Errc::empty_stage: return "EmptyStage";
    case Errc::too_few_logits: return "TooFewLogits";
    case Errc::invalid_temperature: return "InvalidTemperature";
    case Errc::too_few_samples_per_class: return "TooFewSamplesPerClass";
    case Errc::invalid_spec: return "InvalidSpec";
    case Errc::empty_stats: return "EmptyStats";
    case Errc::singular_covariance: return "SingularCovariance";
    case Errc::io_failure: return "IoFailure";
  }
  return "Unknown";
}

constexpr ErrorCategory errc_category(Errc e) {
  switch (e) {
    case Errc::malformed_manifest:
    case Errc::payload_size_mismatch:
    case Errc::non_finite_value:
    case Errc::ragged_row:
    case Errc::header_mismatch:
    case Errc::dimension_mismatch:
    case Errc::empty_tensor:
    case Errc::shape_mismatch:
    case Errc::missing_coordinates:
    case Errc::missing_logits:
      return ErrorCategory::data;
    case Errc::singular_covariance:
    case Errc::io_failure:
      return ErrorCategory::runtime;
    default:
      return ErrorCategory::config;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return errc_category(code_); }

 private:
  Errc code_;
};

/// Raised when a payload holds NaN or Inf. Lists every offending cell.
class NonFiniteError : public Error {
 public:
  using Cell = std::pair<std::size_t, std::size_t>;

  explicit NonFiniteError(std::vector<Cell> cells)
      : Error(Errc::non_finite_value, describe(cells)), cells_(std::move(cells)) {}

  const std::vector<Cell>& cells() const noexcept { return cells_; }
  std::size_t row() const noexcept { return cells_.front().first; }
  std::size_t col() const noexcept { return cells_.front().second; }

 private:
  static std::string describe(const std::vector<Cell>& cells) {
    std::string out = "non-finite values at (row, col):";
    const std::size_t shown = cells.size() < 16 ? cells.size() : 16;
    for (std::size_t i = 0; i < shown; ++i) {
      out += " (" + std::to_string(cells[i].first) + ", " + std::to_string(cells[i].second) + ")";
    }
    if (shown < cells.size()) out += " ... " + std::to_string(cells.size() - shown) + " more";
    return out;
  }

  std::vector<Cell> cells_;
};

/// Prefixes an error message with context while keeping its code.
inline Error with_context(const Error& e, std::string_view context) {
  std::string what = e.what();
  const std::string prefix = std::string(errc_name(e.code())) + ": ";
  if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
  return Error(e.code(), std::string(context) + ": " + what);
}

}  // namespace tardis
