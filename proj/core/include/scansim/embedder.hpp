/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 scansim contributors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>

#include <Eigen/Core>

#include "scansim/volume.hpp"
#include "scansim/workflow.hpp"

namespace scansim {

inline constexpr int kFeatureDim = 768;
inline constexpr int kStageEmbeddingDim = 16;
inline constexpr int kContextInputDim = 2 * kFeatureDim + kStageEmbeddingDim;  // 1552
inline constexpr int kEmbeddingDim = 256;

using FeatureVector = Eigen::VectorXd;

/// Scalar code of a stage: 0.1, 0.2, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9.
double stage_code(ScanStage stage);
/// Constant 16-vector filled with stage_code(stage).
Eigen::VectorXd stage_embedding(ScanStage stage);

/// [f_prev | f_curr | stage_embedding(prev_stage)]. Throws ShapeMismatch.
Eigen::VectorXd assemble_input(const FeatureVector& f_prev, const FeatureVector& f_curr,
                               ScanStage prev_stage);

/// Deterministic stand-in for a frozen image encoder: 7x7 grid of cell
/// mean and standard deviation (intensities scaled to [0,1]), a seeded
/// Gaussian projection to 768 values, then unit normalization.
class SurrogateEncoder {
 public:
  static constexpr int kGrid = 7;
  static constexpr int kStatDim = 2 * kGrid * kGrid;  // 98

  explicit SurrogateEncoder(std::uint64_t seed);

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  /// Per-cell statistics: 49 means followed by 49 standard deviations.
  [[nodiscard]] Eigen::VectorXd cell_statistics(const SliceImage& image) const;
  [[nodiscard]] FeatureVector encode(const SliceImage& image) const;
  [[nodiscard]] const Eigen::MatrixXd& projection() const noexcept { return projection_; }

 private:
  std::uint64_t seed_;
  Eigen::MatrixXd projection_;  // 768 x 98
};

/// Convenience wrapper constructing the encoder each call.
FeatureVector surrogate_encode(const SliceImage& image, std::uint64_t seed);

/// Where per-image features come from: the surrogate encoder, or a
/// precomputed .feat table keyed by image_ref. Spelled "surrogate:<seed>"
/// or a file path.
class FeatureSource {
 public:
  static FeatureSource parse(const std::string& spec);
  static FeatureSource surrogate(std::uint64_t seed);
  static FeatureSource from_table(std::unordered_map<std::string, FeatureVector> table,
                                  std::string spec);

  [[nodiscard]] const std::string& spec() const noexcept { return spec_; }
  [[nodiscard]] bool is_surrogate() const noexcept { return encoder_.has_value(); }
  [[nodiscard]] const SurrogateEncoder* encoder() const noexcept {
    return encoder_ ? &*encoder_ : nullptr;
  }

  /// Features for an image reference. Surrogate sources read the PNG at
  /// base_dir/image_ref (cached by resolved path); table sources look the
  /// reference up and throw MissingField when absent.
  FeatureVector lookup(const std::string& image_ref, const std::filesystem::path& base_dir);
  /// Features for an in-memory frame. Throws InvalidArgument for table
  /// sources, which have no encoder.
  [[nodiscard]] FeatureVector encode(const SliceImage& image) const;

 private:
  std::string spec_;
  std::optional<SurrogateEncoder> encoder_;
  std::unordered_map<std::string, FeatureVector> table_;
  std::unordered_map<std::string, FeatureVector> cache_;
};

/// .feat reader/writer: JSONL {image_ref, values:[768]}.
std::unordered_map<std::string, FeatureVector> load_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::unordered_map<std::string, FeatureVector>& table,
                        const std::filesystem::path& path);

}  // namespace scansim
