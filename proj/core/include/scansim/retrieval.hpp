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

#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "scansim/dataset.hpp"
#include "scansim/embedder.hpp"
#include "scansim/resmlp.hpp"
#include "scansim/workflow.hpp"

namespace scansim {

/// One retrievable scanning context: two frames, the stage before the
/// latest frame and the labels of the latest frame.
struct ContextRecord {
  std::string id;
  std::string volume_id;
  std::string demo_id;
  std::string first_image_ref;
  std::string last_image_ref;
  ScanStage prev_stage = ScanStage::ExamineCcaProximal;
  ScanStage stage = ScanStage::ExamineCcaProximal;
  std::string explanation;
  NextApi next_api;
  std::string vqa_text;
};

struct RetrievalHit {
  std::size_t index = 0;  // insertion position
  std::string id;
  double score = 0.0;
};

struct RetrievalResult {
  int k = 0;
  std::vector<RetrievalHit> hits;
};

/// Optional restrictions applied before ranking.
struct QueryFilter {
  /// Keep only records whose stage is listed; empty keeps all.
  std::vector<ScanStage> stages;
  /// Drop records of this demonstration (empty keeps all).
  std::string exclude_demo_id;
};

/// Exact cosine-similarity store. Safe for concurrent queries; add() takes
/// an exclusive lock.
class ContextStore {
 public:
  explicit ContextStore(int dim = kEmbeddingDim);
  ContextStore(ContextStore&& other) noexcept;
  ContextStore& operator=(ContextStore&& other) noexcept;
  ContextStore(const ContextStore&) = delete;
  ContextStore& operator=(const ContextStore&) = delete;

  /// Throws DuplicateId, ZeroEmbedding (zero or non-finite), ShapeMismatch.
  void add(ContextRecord record, const Eigen::VectorXd& embedding);

  /// Top-k by cosine score, ties broken by insertion order. Returns
  /// min(k, matching records) hits. Throws EmptyStore, ZeroQuery,
  /// ShapeMismatch, InvalidArgument (k < 1).
  [[nodiscard]] RetrievalResult query(const Eigen::VectorXd& q, int k,
                                      const QueryFilter& filter = {}) const;

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] bool empty() const { return size() == 0; }
  /// Copies, so callers never hold references across a concurrent add().
  [[nodiscard]] ContextRecord record(std::size_t index) const;
  [[nodiscard]] Eigen::VectorXd embedding(std::size_t index) const;
  [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const;

  /// Metadata persisted in the manifest.
  std::string model_ref;
  std::string encoder_spec;

 private:
  int dim_;
  std::unique_ptr<std::shared_mutex> mutex_;
  std::vector<ContextRecord> records_;
  std::vector<Eigen::VectorXd> raw_;
  Eigen::MatrixXd unit_;  // dim x capacity, first records_.size() columns valid
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// .ctxdb: JSON manifest line followed by little-endian f64 embeddings in
/// insertion order.
void save_store(const ContextStore& store, const std::filesystem::path& path);
ContextStore load_store(const std::filesystem::path& path);

struct RetrievalQuery {
  Eigen::VectorXd embedding;
  ScanStage true_stage = ScanStage::ExamineCcaProximal;
  std::string demo_id;
};

struct TopkReport {
  int k = 0;
  std::size_t queries = 0;
  /// Fraction of all queries with a correct stage in the top k.
  double overall = 0.0;
  /// Per-stage fractions, only for stages that have queries.
  std::map<ScanStage, double> per_stage;
  std::map<ScanStage, std::size_t> per_stage_queries;
  /// Mean of per_stage values.
  double average = 0.0;
};

/// A query scores 1 when any of its top-k records shares its stage.
/// Throws EmptyStore, EmptyDataset.
TopkReport topk_accuracy(const ContextStore& store, const std::vector<RetrievalQuery>& queries,
                         int k, bool exclude_same_demo);

std::string topk_reports_to_json(const std::vector<TopkReport>& reports);

/// Turns frame pairs into store embeddings: features for both frames,
/// assembled with the previous stage, through the ResMLP.
class ContextEmbedder {
 public:
  ContextEmbedder(ResMlpParams model, FeatureSource features);

  [[nodiscard]] const ResMlpParams& model() const noexcept { return model_; }
  [[nodiscard]] FeatureSource& features() noexcept { return features_; }

  [[nodiscard]] Eigen::VectorXd embed_features(const FeatureVector& f_prev,
                                               const FeatureVector& f_curr,
                                               ScanStage prev_stage) const;
  [[nodiscard]] Eigen::VectorXd embed_images(const SliceImage& prev, const SliceImage& curr,
                                             ScanStage prev_stage) const;
  Eigen::VectorXd embed_entry(const WindowEntry& entry, const std::filesystem::path& base_dir);

 private:
  ResMlpParams model_;
  FeatureSource features_;
};

ContextRecord context_record_from_entry(const WindowEntry& entry);

/// Embeds every dataset-A entry into a new store.
ContextStore build_context_store(const std::vector<WindowEntry>& entries, ContextEmbedder& embedder,
                                 const std::filesystem::path& base_dir);

}  // namespace scansim
