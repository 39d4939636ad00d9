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

// Spatial downsampling of C x H x W activation maps to flat feature vectors.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"

namespace tardis {

/// One activation map. Values are channel-major, then row-major spatial.
struct ActivationTensor {
  TensorShape shape;
  std::vector<float> values;
};

/// Fitted principal subspace over flattened tensors.
struct PcaBasis {
  TensorShape shape;
  Eigen::VectorXd mean;        // length C*H*W
  Eigen::MatrixXd components;  // (C*H*W) x n_components, orthonormal columns
};

namespace pooling {

/// Per-channel spatial mean followed by per-channel population std.
struct MeanStd {};
/// Per-channel spatial mean.
struct AvgPool {};
/// Per-channel spatial maximum.
struct MaxPool {};
struct Pca {
  std::size_t n_components = 10;
  std::optional<PcaBasis> basis;
};

}  // namespace pooling

using PoolingMethod = std::variant<pooling::MeanStd, pooling::AvgPool, pooling::MaxPool, pooling::Pca>;

inline std::string_view pooling_name(const PoolingMethod& m) {
  switch (m.index()) {
    case 0: return "meanstd";
    case 1: return "avg";
    case 2: return "max";
    default: return "pca";
  }
}

inline std::optional<PoolingMethod> parse_pooling(std::string_view name, std::size_t pca_components = 10) {
  if (name == "meanstd") return pooling::MeanStd{};
  if (name == "avg") return pooling::AvgPool{};
  if (name == "max") return pooling::MaxPool{};
  if (name == "pca") return pooling::Pca{pca_components, std::nullopt};
  return std::nullopt;
}

inline std::size_t pooled_size(const PoolingMethod& m, const TensorShape& shape) {
  return std::visit(
      [&](const auto& p) -> std::size_t {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, pooling::MeanStd>) return 2 * shape.channels;
        else if constexpr (std::is_same_v<P, pooling::Pca>) return p.n_components;
        else return shape.channels;
      },
      m);
}

namespace detail {

inline void check_tensor(const TensorShape& shape, std::span<const float> values) {
  if (shape.size() == 0) throw Error(Errc::empty_tensor, "tensor has zero elements");
  if (values.size() != shape.size()) {
    throw Error(Errc::shape_mismatch, "tensor holds " + std::to_string(values.size()) + " values, shape needs " +
                                          std::to_string(shape.size()));
  }
}

}  // namespace detail

/// Pools one tensor given as a flat span.
inline std::vector<float> pool_values(std::span<const float> values, const TensorShape& shape,
                                      const PoolingMethod& method) {
  detail::check_tensor(shape, values);
  const std::size_t c_count = shape.channels;
  const std::size_t hw = shape.spatial();
  auto channel = [&](std::size_t c) { return values.subspan(c * hw, hw); };

  if (const auto* pca = std::get_if<pooling::Pca>(&method)) {
    if (!pca->basis) throw Error(Errc::unfitted_pca, "PCA pooling used before fit_pca");
    if (pca->basis->shape != shape) throw Error(Errc::shape_mismatch, "tensor shape differs from fitted PCA shape");
    Eigen::VectorXd x(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) x[static_cast<Eigen::Index>(i)] = values[i];
    const Eigen::VectorXd proj = pca->basis->components.transpose() * (x - pca->basis->mean);
    std::vector<float> out(static_cast<std::size_t>(proj.size()));
    for (Eigen::Index i = 0; i < proj.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(proj[i]);
    return out;
  }

  if (std::holds_alternative<pooling::MaxPool>(method)) {
    std::vector<float> out(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
      const auto ch = channel(c);
      out[c] = *std::max_element(ch.begin(), ch.end());
    }
    return out;
  }

  const bool with_std = std::holds_alternative<pooling::MeanStd>(method);
  std::vector<float> out(with_std ? 2 * c_count : c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    const auto ch = channel(c);
    double sum = 0.0;
    for (float v : ch) sum += v;
    const double mean = sum / static_cast<double>(hw);
    out[c] = static_cast<float>(mean);
    if (with_std) {
      double ss = 0.0;
      for (float v : ch) ss += (v - mean) * (v - mean);
      out[c_count + c] = static_cast<float>(std::sqrt(ss / static_cast<double>(hw)));
    }
  }
  return out;
}

inline std::vector<float> pool(const ActivationTensor& t, const PoolingMethod& method) {
  return pool_values(t.values, t.shape, method);
}

/// Fits a PCA basis on flattened tensors stored as matrix rows.
inline pooling::Pca fit_pca_rows(const FeatureMatrix& rows, const TensorShape& shape, std::size_t n_components) {
  if (n_components == 0) throw Error(Errc::invalid_config, "n_components must be positive");
  if (rows.n_rows() < n_components) {
    throw Error(Errc::too_few_samples, std::to_string(rows.n_rows()) + " samples for " +
                                           std::to_string(n_components) + " components");
  }
  if (rows.n_cols() != shape.size()) throw Error(Errc::shape_mismatch, "rows do not match tensor shape");
  if (n_components > shape.size()) {
    throw Error(Errc::too_few_samples, "n_components exceeds tensor size " + std::to_string(shape.size()));
  }
  const auto n = static_cast<Eigen::Index>(rows.n_rows());
  const auto d = static_cast<Eigen::Index>(rows.n_cols());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  PcaBasis basis;
  basis.shape = shape;
  basis.mean = x.colwise().mean().transpose();
  x.rowwise() -= basis.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto k = static_cast<Eigen::Index>(n_components);
  basis.components = svd.matrixV().leftCols(k);
  // Sign convention: the largest-magnitude entry of each component is positive.
  for (Eigen::Index col = 0; col < k; ++col) {
    Eigen::Index arg = 0;
    basis.components.col(col).cwiseAbs().maxCoeff(&arg);
    if (basis.components(arg, col) < 0) basis.components.col(col) *= -1.0;
  }
  return pooling::Pca{n_components, std::move(basis)};
}

inline pooling::Pca fit_pca(std::span<const ActivationTensor> samples, std::size_t n_components) {
  if (samples.empty() || samples.size() < n_components) {
    throw Error(Errc::too_few_samples, std::to_string(samples.size()) + " samples for " +
                                           std::to_string(n_components) + " components");
  }
  const TensorShape shape = samples.front().shape;
  FeatureMatrix rows(0, shape.size());
  for (const auto& t : samples) {
    if (t.shape != shape) throw Error(Errc::shape_mismatch, "samples differ in tensor shape");
    detail::check_tensor(t.shape, t.values);
    rows.append_row(t.values);
  }
  return fit_pca_rows(rows, shape, n_components);
}

/// Pools every record of a raw-tensor dataset. An unfitted PCA method is fit
/// on the batch itself; the fitted method is written back through `method`.
inline Dataset pool_batch(const Dataset& raw, PoolingMethod& method) {
  if (!raw.manifest.tensor_shape) {
    throw Error(Errc::invalid_config, "pool_batch needs a manifest with tensor_shape");
  }
  const TensorShape shape = *raw.manifest.tensor_shape;
  if (auto* pca = std::get_if<pooling::Pca>(&method); pca && !pca->basis) {
    method = fit_pca_rows(raw.features, shape, pca->n_components);
  }
  const std::size_t out_dim = pooled_size(method, shape);
  Dataset out;
  out.manifest = raw.manifest;
  out.manifest.tensor_shape.reset();
  out.manifest.feature_dim = out_dim;
  out.manifest.data_file = "features.bin";
  out.logits = raw.logits;
  out.features = FeatureMatrix(raw.features.n_rows(), out_dim);
  for (std::size_t i = 0; i < raw.features.n_rows(); ++i) {
    try {
      const auto pooled = pool_values(raw.features.row(i), shape, method);
      std::copy(pooled.begin(), pooled.end(), out.features.row(i).begin());
    } catch (const Error& e) {
      throw with_context(e, "sample '" + raw.manifest.samples[i].sample_id + "'");
    }
  }
  return out;
}

}  // namespace tardis
