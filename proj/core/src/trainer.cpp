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

#include "scansim/trainer.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "scansim/error.hpp"
#include "scansim/rng.hpp"
#include "scansim/triplet.hpp"

namespace scansim {

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || val_batch_size < 1 || !(learning_rate > 0.0) ||
      weight_decay < 0.0 || warmup_fraction < 0.0 || warmup_fraction >= 1.0 || !(margin > 0.0) ||
      val_fraction < 0.0 || val_fraction >= 1.0 || width < 1 || block_count < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid training configuration");
  }
}

double scheduled_learning_rate(const TrainConfig& config, long step, long total_steps) {
  const long warmup =
      static_cast<long>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));
  if (step < warmup) {
    return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const long decay = total_steps - warmup;
  if (decay <= 1) return config.learning_rate;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay - 1);
  return config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(std::size_t size, double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay), m_(size, 0.0),
      v_(size, 0.0) {}

void AdamW::step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] *= 1.0 - lr * weight_decay_;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

double triplet_batch_gradient(const ResMlpParams& params, const Eigen::MatrixXd& inputs,
                              const std::vector<TripletIndex>& batch, double margin,
                              ResMlpParams* grads) {
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  if (b == 0) throw Error(ErrorCode::EmptyDataset, "empty batch");
  // Anchors, positives and negatives go through the network as one matrix.
  Eigen::MatrixXd stacked(inputs.rows(), 3 * b);
  for (Eigen::Index i = 0; i < b; ++i) {
    stacked.col(i) = inputs.col(batch[static_cast<std::size_t>(i)].anchor);
    stacked.col(b + i) = inputs.col(batch[static_cast<std::size_t>(i)].positive);
    stacked.col(2 * b + i) = inputs.col(batch[static_cast<std::size_t>(i)].negative);
  }
  if (!grads) {
    const Eigen::MatrixXd out = resmlp_forward_batch(params, stacked);
    return triplet_batch_loss(out.leftCols(b), out.middleCols(b, b), out.rightCols(b), margin).loss;
  }
  ResMlpTape tape;
  const Eigen::MatrixXd out = resmlp_forward_tape(params, stacked, tape);
  const auto loss =
      triplet_batch_loss(out.leftCols(b), out.middleCols(b, b), out.rightCols(b), margin);
  Eigen::MatrixXd dout(out.rows(), 3 * b);
  dout << loss.grad_anchor, loss.grad_positive, loss.grad_negative;
  *grads = resmlp_backward(params, tape, dout);
  return loss.loss;
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

TrainResult train_resmlp(const Eigen::MatrixXd& inputs, const std::vector<TripletIndex>& triplets,
                         const TrainConfig& config,
                         const std::function<void(int, double)>& on_epoch) {
  config.validate();
  if (triplets.empty() || inputs.cols() == 0) {
    throw Error(ErrorCode::EmptyDataset, "no triplets to train on");
  }
  for (const auto& t : triplets) {
    if (t.anchor < 0 || t.anchor >= inputs.cols() || t.positive < 0 ||
        t.positive >= inputs.cols() || t.negative < 0 || t.negative >= inputs.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "triplet index outside the input matrix");
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(triplets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::size_t val_count =
      static_cast<std::size_t>(std::floor(config.val_fraction * static_cast<double>(order.size())));
  if (val_count >= order.size()) val_count = 0;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<long>(val_count));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(val_count), order.end());

  TrainResult result;
  result.params = ResMlpParams::random(static_cast<int>(inputs.rows()), config.width,
                                       config.block_count, derive_seed(config.seed, 1));
  std::vector<double> flat = result.params.flatten();
  AdamW opt(flat.size(), config.beta1, config.beta2, config.eps, config.weight_decay);

  const auto bs = static_cast<std::size_t>(config.batch_size);
  const long per_epoch = static_cast<long>((train.size() + bs - 1) / bs);
  const long total = per_epoch * config.epochs;
  std::vector<TripletIndex> batch;
  ResMlpParams grads;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(train, rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < train.size(); start += bs) {
      batch.clear();
      for (std::size_t i = start; i < std::min(train.size(), start + bs); ++i) {
        batch.push_back(triplets[train[i]]);
      }
      const double loss = triplet_batch_gradient(result.params, inputs, batch, config.margin, &grads);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch));
      }
      sum += loss * static_cast<double>(batch.size());
      opt.step(flat, grads.flatten(), scheduled_learning_rate(config, step, total));
      result.params.unflatten(flat);
      ++step;
    }
    result.train_loss.push_back(sum / static_cast<double>(train.size()));
    if (!val.empty()) {
      double vsum = 0.0;
      const auto vbs = static_cast<std::size_t>(config.val_batch_size);
      for (std::size_t start = 0; start < val.size(); start += vbs) {
        batch.clear();
        for (std::size_t i = start; i < std::min(val.size(), start + vbs); ++i) {
          batch.push_back(triplets[val[i]]);
        }
        vsum += triplet_batch_gradient(result.params, inputs, batch, config.margin, nullptr) *
                static_cast<double>(batch.size());
      }
      const double vloss = vsum / static_cast<double>(val.size());
      if (!std::isfinite(vloss)) {
        throw Error(ErrorCode::DivergedLoss, "non-finite validation loss at epoch " +
                                                 std::to_string(epoch));
      }
      result.val_loss.push_back(vloss);
    }
    if (on_epoch) on_epoch(epoch, result.train_loss.back());
  }
  result.steps = step;
  return result;
}

Eigen::VectorXd entry_input(const WindowEntry& entry, FeatureSource& features,
                            const std::filesystem::path& base_dir) {
  return assemble_input(features.lookup(entry.first_image_ref, base_dir),
                        features.lookup(entry.last_image_ref, base_dir), entry.prev_stage);
}

TrainingSet prepare_training_set(const std::vector<WindowEntry>& entries,
                                 const std::vector<TripletSpec>& triplets, FeatureSource& features,
                                 const std::filesystem::path& base_dir) {
  if (triplets.empty()) throw Error(ErrorCode::EmptyDataset, "no triplets");
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < entries.size(); ++i) by_id.emplace(entries[i].id, i);
  std::unordered_map<std::string, Eigen::Index> column;
  TrainingSet set;
  std::vector<std::size_t> used;
  auto col_of = [&](const std::string& id) -> Eigen::Index {
    const auto c = column.find(id);
    if (c != column.end()) return c->second;
    const auto e = by_id.find(id);
    if (e == by_id.end()) throw Error(ErrorCode::MissingField, "unknown dataset entry '" + id + "'");
    const auto idx = static_cast<Eigen::Index>(used.size());
    used.push_back(e->second);
    set.ids.push_back(id);
    column.emplace(id, idx);
    return idx;
  };
  for (const auto& t : triplets) {
    set.triplets.push_back({col_of(t.anchor_id), col_of(t.positive_id), col_of(t.negative_id)});
  }
  set.inputs.resize(kContextInputDim, static_cast<Eigen::Index>(used.size()));
  for (std::size_t c = 0; c < used.size(); ++c) {
    set.inputs.col(static_cast<Eigen::Index>(c)) = entry_input(entries[used[c]], features, base_dir);
  }
  return set;
}

}  // namespace scansim
