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

#include "scansim/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json_io.hpp"
#include "scansim/error.hpp"
#include "scansim/image_io.hpp"
#include "scansim/rng.hpp"

namespace scansim {

double stage_code(ScanStage stage) {
  switch (stage) {
    case ScanStage::ExamineCcaProximal: return 0.1;
    case ScanStage::ExamineCcaDistal: return 0.2;
    case ScanStage::ExamineBifurcation: return 0.4;
    case ScanStage::TransverseScanCompleted: return 0.5;
    case ScanStage::ReturnToCarotidBulb: return 0.6;
    case ScanStage::ReturnCompleted: return 0.7;
    case ScanStage::RotateToLongitudinalView: return 0.8;
    case ScanStage::LongitudinalScanCompleted: return 0.9;
  }
  throw Error(ErrorCode::UnknownStage, "invalid stage value");
}

Eigen::VectorXd stage_embedding(ScanStage stage) {
  return Eigen::VectorXd::Constant(kStageEmbeddingDim, stage_code(stage));
}

Eigen::VectorXd assemble_input(const FeatureVector& f_prev, const FeatureVector& f_curr,
                               ScanStage prev_stage) {
  if (f_prev.size() != kFeatureDim || f_curr.size() != kFeatureDim) {
    throw Error(ErrorCode::ShapeMismatch, "feature vectors must have 768 entries");
  }
  Eigen::VectorXd x(kContextInputDim);
  x << f_prev, f_curr, stage_embedding(prev_stage);
  return x;
}

SurrogateEncoder::SurrogateEncoder(std::uint64_t seed)
    : seed_(seed), projection_(kFeatureDim, kStatDim) {
  Rng rng(derive_seed(seed, 0x5E1F));
  const double scale = 1.0 / std::sqrt(static_cast<double>(kStatDim));
  // Filled row by row so the draw order does not depend on Eigen storage.
  for (int r = 0; r < kFeatureDim; ++r) {
    for (int c = 0; c < kStatDim; ++c) projection_(r, c) = rng.normal() * scale;
  }
}

Eigen::VectorXd SurrogateEncoder::cell_statistics(const SliceImage& image) const {
  if (image.width < kGrid || image.height < kGrid ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorCode::ShapeMismatch, "image too small for the encoder grid");
  }
  Eigen::VectorXd stats(kStatDim);
  for (int gr = 0; gr < kGrid; ++gr) {
    const int r0 = gr * image.height / kGrid;
    const int r1 = (gr + 1) * image.height / kGrid;
    for (int gc = 0; gc < kGrid; ++gc) {
      const int c0 = gc * image.width / kGrid;
      const int c1 = (gc + 1) * image.width / kGrid;
      double sum = 0.0, sum_sq = 0.0;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          const double v = image.at(r, c) / 255.0;
          sum += v;
          sum_sq += v * v;
        }
      }
      const double n = static_cast<double>((r1 - r0) * (c1 - c0));
      const double mean = sum / n;
      const double var = std::max(0.0, sum_sq / n - mean * mean);
      const int cell = gr * kGrid + gc;
      stats(cell) = mean;
      stats(kGrid * kGrid + cell) = std::sqrt(var);
    }
  }
  return stats;
}

FeatureVector SurrogateEncoder::encode(const SliceImage& image) const {
  FeatureVector f = projection_ * cell_statistics(image);
  const double norm = f.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    // Blank frames have no direction; pin them to a fixed unit vector.
    f.setZero();
    f(0) = 1.0;
    return f;
  }
  return f / norm;
}

FeatureVector surrogate_encode(const SliceImage& image, std::uint64_t seed) {
  return SurrogateEncoder(seed).encode(image);
}

FeatureSource FeatureSource::surrogate(std::uint64_t seed) {
  FeatureSource s;
  s.spec_ = "surrogate:" + std::to_string(seed);
  s.encoder_.emplace(seed);
  return s;
}

FeatureSource FeatureSource::from_table(std::unordered_map<std::string, FeatureVector> table,
                                        std::string spec) {
  FeatureSource s;
  s.spec_ = std::move(spec);
  s.table_ = std::move(table);
  return s;
}

FeatureSource FeatureSource::parse(const std::string& spec) {
  const std::string prefix = "surrogate:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string num = spec.substr(prefix.size());
    try {
      std::size_t used = 0;
      const auto seed = std::stoull(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
      return surrogate(seed);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad surrogate seed in '" + spec + "'");
    }
  }
  if (spec == "surrogate") return surrogate(0);
  return from_table(load_feature_file(spec), spec);
}

FeatureVector FeatureSource::lookup(const std::string& image_ref,
                                    const std::filesystem::path& base_dir) {
  if (!encoder_) {
    const auto it = table_.find(image_ref);
    if (it == table_.end()) {
      throw Error(ErrorCode::MissingField, "no features for image '" + image_ref + "'");
    }
    return it->second;
  }
  const std::string key = (base_dir / image_ref).lexically_normal().string();
  const auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  FeatureVector f = encoder_->encode(read_png(key));
  cache_.emplace(key, f);
  return f;
}

FeatureVector FeatureSource::encode(const SliceImage& image) const {
  if (!encoder_) {
    throw Error(ErrorCode::InvalidArgument,
                "feature table '" + spec_ + "' cannot encode new frames");
  }
  return encoder_->encode(image);
}

std::unordered_map<std::string, FeatureVector> load_feature_file(const std::filesystem::path& path) {
  std::unordered_map<std::string, FeatureVector> table;
  for (const auto& row : detail::read_jsonl_file(path)) {
    const auto ref = detail::require(row, "image_ref").get<std::string>();
    const auto& values = detail::require(row, "values");
    if (!values.is_array() || values.size() != static_cast<std::size_t>(kFeatureDim)) {
      throw Error(ErrorCode::ShapeMismatch, "feature '" + ref + "' must have 768 values");
    }
    FeatureVector f(kFeatureDim);
    for (int i = 0; i < kFeatureDim; ++i) {
      f(i) = values[static_cast<std::size_t>(i)].get<double>();
      if (!std::isfinite(f(i))) {
        throw Error(ErrorCode::ShapeMismatch, "feature '" + ref + "' has a non-finite value");
      }
    }
    table.emplace(ref, std::move(f));
  }
  return table;
}

void write_feature_file(const std::unordered_map<std::string, FeatureVector>& table,
                        const std::filesystem::path& path) {
  std::map<std::string, const FeatureVector*> sorted;
  for (const auto& [k, v] : table) sorted.emplace(k, &v);
  std::string text;
  for (const auto& [k, v] : sorted) {
    detail::Json vals = detail::Json::array();
    for (int i = 0; i < v->size(); ++i) vals.push_back((*v)(i));
    text += detail::Json{{"image_ref", k}, {"values", vals}}.dump() + "\n";
  }
  detail::write_text_file(path, text);
}

}  // namespace scansim
