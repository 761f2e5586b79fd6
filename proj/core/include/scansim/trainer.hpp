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
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "scansim/dataset.hpp"
#include "scansim/embedder.hpp"
#include "scansim/resmlp.hpp"

namespace scansim {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  int val_batch_size = 64;
  double learning_rate = 3e-6;
  double weight_decay = 1e-5;
  double warmup_fraction = 0.1;
  double margin = 0.75;
  double val_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int width = kEmbeddingDim;
  int block_count = 2;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Learning rate at 0-based optimizer step: linear warmup to the
/// base rate over the first ceil(warmup_fraction * total) steps, then
/// cosine decay to zero at the last step.
double scheduled_learning_rate(const TrainConfig& config, long step, long total_steps);

/// Decoupled-weight-decay Adam over a flat parameter vector.
class AdamW {
 public:
  AdamW(std::size_t size, double beta1, double beta2, double eps, double weight_decay);
  void step(std::vector<double>& params, const std::vector<double>& grads, double lr);
  [[nodiscard]] long steps_taken() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

/// Indices of anchor, positive and negative columns in an input matrix.
struct TripletIndex {
  Eigen::Index anchor = 0;
  Eigen::Index positive = 0;
  Eigen::Index negative = 0;
};

struct TrainResult {
  ResMlpParams params;
  std::vector<double> train_loss;  // one mean per epoch
  std::vector<double> val_loss;    // empty without a validation split
  long steps = 0;
};

/// Mean triplet loss and parameter gradients for one batch.
double triplet_batch_gradient(const ResMlpParams& params, const Eigen::MatrixXd& inputs,
                              const std::vector<TripletIndex>& batch, double margin,
                              ResMlpParams* grads);

/// Mini-batch AdamW training on triplets over columns of inputs.
/// Throws EmptyDataset, DivergedLoss.
TrainResult train_resmlp(const Eigen::MatrixXd& inputs, const std::vector<TripletIndex>& triplets,
                         const TrainConfig& config,
                         const std::function<void(int, double)>& on_epoch = {});

/// Assembled inputs (one column per dataset-A entry referenced by a
/// triplet) plus the triplets as column indices.
struct TrainingSet {
  Eigen::MatrixXd inputs;
  std::vector<TripletIndex> triplets;
  std::vector<std::string> ids;  // column -> entry id
};

/// Image refs in entries are resolved against base_dir. Throws MissingField
/// for triplet ids absent from entries.
TrainingSet prepare_training_set(const std::vector<WindowEntry>& entries,
                                 const std::vector<TripletSpec>& triplets, FeatureSource& features,
                                 const std::filesystem::path& base_dir);

/// Assembled input for one dataset-A entry.
Eigen::VectorXd entry_input(const WindowEntry& entry, FeatureSource& features,
                            const std::filesystem::path& base_dir);

}  // namespace scansim
