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

#include "scansim/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "json_io.hpp"
#include "scansim/error.hpp"
#include "scansim/trainer.hpp"

namespace scansim {

using detail::Json;

ContextStore::ContextStore(int dim) : dim_(dim), mutex_(std::make_unique<std::shared_mutex>()) {
  if (dim < 1) throw Error(ErrorCode::ShapeMismatch, "store dimension must be positive");
  unit_.resize(dim, 0);
}

ContextStore::ContextStore(ContextStore&& other) noexcept
    : model_ref(std::move(other.model_ref)), encoder_spec(std::move(other.encoder_spec)),
      dim_(other.dim_), mutex_(std::move(other.mutex_)), records_(std::move(other.records_)),
      raw_(std::move(other.raw_)), unit_(std::move(other.unit_)), by_id_(std::move(other.by_id_)) {
  other.mutex_ = std::make_unique<std::shared_mutex>();
}

ContextStore& ContextStore::operator=(ContextStore&& other) noexcept {
  if (this != &other) {
    model_ref = std::move(other.model_ref);
    encoder_spec = std::move(other.encoder_spec);
    dim_ = other.dim_;
    mutex_ = std::move(other.mutex_);
    records_ = std::move(other.records_);
    raw_ = std::move(other.raw_);
    unit_ = std::move(other.unit_);
    by_id_ = std::move(other.by_id_);
    other.mutex_ = std::make_unique<std::shared_mutex>();
  }
  return *this;
}

void ContextStore::add(ContextRecord record, const Eigen::VectorXd& embedding) {
  if (embedding.size() != dim_) {
    throw Error(ErrorCode::ShapeMismatch, "embedding has " + std::to_string(embedding.size()) +
                                              " entries, store expects " + std::to_string(dim_));
  }
  const double norm = embedding.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::ZeroEmbedding, "embedding for '" + record.id + "' is zero or non-finite");
  }
  std::unique_lock lock(*mutex_);
  if (by_id_.count(record.id)) {
    throw Error(ErrorCode::DuplicateId, "context id '" + record.id + "' already stored");
  }
  const auto n = static_cast<Eigen::Index>(records_.size());
  if (n == unit_.cols()) unit_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(16, 2 * n));
  unit_.col(n) = embedding / norm;
  raw_.push_back(embedding);
  by_id_.emplace(record.id, records_.size());
  records_.push_back(std::move(record));
}

RetrievalResult ContextStore::query(const Eigen::VectorXd& q, int k,
                                    const QueryFilter& filter) const {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (q.size() != dim_) throw Error(ErrorCode::ShapeMismatch, "query dimension mismatch");
  const double qn = q.norm();
  if (!(qn > 0.0) || !std::isfinite(qn)) throw Error(ErrorCode::ZeroQuery, "query is zero or non-finite");
  std::shared_lock lock(*mutex_);
  if (records_.empty()) throw Error(ErrorCode::EmptyStore, "context store is empty");
  const Eigen::VectorXd qu = q / qn;
  const auto n = static_cast<Eigen::Index>(records_.size());
  const Eigen::VectorXd scores = unit_.leftCols(n).transpose() * qu;

  std::vector<std::size_t> cand;
  cand.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!filter.stages.empty() &&
        std::find(filter.stages.begin(), filter.stages.end(), r.stage) == filter.stages.end()) {
      continue;
    }
    if (!filter.exclude_demo_id.empty() && r.demo_id == filter.exclude_demo_id) continue;
    cand.push_back(i);
  }
  const std::size_t take = std::min(cand.size(), static_cast<std::size_t>(k));
  auto better = [&scores](std::size_t a, std::size_t b) {
    const double sa = scores(static_cast<Eigen::Index>(a));
    const double sb = scores(static_cast<Eigen::Index>(b));
    return sa != sb ? sa > sb : a < b;
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(take), cand.end(), better);
  RetrievalResult out;
  out.k = k;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t idx = cand[i];
    const double s = std::clamp(scores(static_cast<Eigen::Index>(idx)), -1.0, 1.0);
    out.hits.push_back({idx, records_[idx].id, s});
  }
  return out;
}

std::size_t ContextStore::size() const {
  std::shared_lock lock(*mutex_);
  return records_.size();
}

ContextRecord ContextStore::record(std::size_t index) const {
  std::shared_lock lock(*mutex_);
  return records_.at(index);
}

Eigen::VectorXd ContextStore::embedding(std::size_t index) const {
  std::shared_lock lock(*mutex_);
  return raw_.at(index);
}

std::optional<std::size_t> ContextStore::find(const std::string& id) const {
  std::shared_lock lock(*mutex_);
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

void save_store(const ContextStore& store, const std::filesystem::path& path) {
  Json records = Json::array();
  std::vector<char> blob;
  const std::size_t n = store.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ContextRecord r = store.record(i);
    records.push_back({{"id", r.id},
                       {"volume_id", r.volume_id},
                       {"demo_id", r.demo_id},
                       {"first_image_ref", r.first_image_ref},
                       {"last_image_ref", r.last_image_ref},
                       {"prev_stage", stage_name(r.prev_stage)},
                       {"stage", stage_name(r.stage)},
                       {"explanation", r.explanation},
                       {"next_api", next_api_name(r.next_api)},
                       {"vqa_text", r.vqa_text}});
    const Eigen::VectorXd e = store.embedding(i);
    for (Eigen::Index j = 0; j < e.size(); ++j) detail::append_le_f64(blob, e(j));
  }
  Json manifest{{"format", "ctxdb"},  {"version", 1},        {"dim", store.dim()},
                {"dtype", "f64"},     {"count", n},          {"model", store.model_ref},
                {"encoder", store.encoder_spec}, {"records", records}};
  std::string text = manifest.dump() + "\n";
  text.append(blob.begin(), blob.end());
  detail::write_text_file(path, text);
}

ContextStore load_store(const std::filesystem::path& path) {
  const auto file = detail::read_headered_file(path);
  const auto& m = file.header;
  try {
    if (m.value("version", 1) != 1) {
      throw Error(ErrorCode::UnsupportedVersion, path.string() + ": unsupported store version");
    }
    if (m.value("dtype", "f64") != "f64") {
      throw Error(ErrorCode::UnsupportedVersion, path.string() + ": unsupported dtype");
    }
    const int dim = m.at("dim").get<int>();
    const auto& records = m.at("records");
    const std::size_t n = records.size();
    if (m.value("count", n) != n || file.payload.size() != n * static_cast<std::size_t>(dim) * 8) {
      throw Error(ErrorCode::MalformedHeader, path.string() + ": embedding blob size mismatch");
    }
    ContextStore store(dim);
    store.model_ref = m.value("model", "");
    store.encoder_spec = m.value("encoder", "");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& j = records[i];
      ContextRecord r;
      r.id = j.at("id").get<std::string>();
      r.volume_id = j.value("volume_id", "");
      r.demo_id = j.value("demo_id", "");
      r.first_image_ref = j.value("first_image_ref", "");
      r.last_image_ref = j.value("last_image_ref", "");
      r.prev_stage = parse_stage(j.at("prev_stage").get<std::string>());
      r.stage = parse_stage(j.at("stage").get<std::string>());
      r.explanation = j.value("explanation", "");
      r.next_api = parse_next_api(j.at("next_api").get<std::string>());
      r.vqa_text = j.value("vqa_text", "");
      Eigen::VectorXd e(dim);
      const char* base = file.payload.data() + i * static_cast<std::size_t>(dim) * 8;
      for (int d = 0; d < dim; ++d) e(d) = detail::read_le_f64(base + 8 * d);
      store.add(std::move(r), e);
    }
    return store;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
  }
}

TopkReport topk_accuracy(const ContextStore& store, const std::vector<RetrievalQuery>& queries,
                         int k, bool exclude_same_demo) {
  if (store.empty()) throw Error(ErrorCode::EmptyStore, "context store is empty");
  if (queries.empty()) throw Error(ErrorCode::EmptyDataset, "no retrieval queries");
  TopkReport rep;
  rep.k = k;
  rep.queries = queries.size();
  std::map<ScanStage, std::size_t> hits;
  std::size_t total_hits = 0;
  for (const auto& q : queries) {
    QueryFilter filter;
    if (exclude_same_demo) filter.exclude_demo_id = q.demo_id;
    const auto result = store.query(q.embedding, k, filter);
    bool hit = false;
    for (const auto& h : result.hits) {
      if (store.record(h.index).stage == q.true_stage) {
        hit = true;
        break;
      }
    }
    ++rep.per_stage_queries[q.true_stage];
    if (hit) {
      ++hits[q.true_stage];
      ++total_hits;
    }
  }
  rep.overall = static_cast<double>(total_hits) / static_cast<double>(queries.size());
  double sum = 0.0;
  for (const auto& [stage, count] : rep.per_stage_queries) {
    const double acc = static_cast<double>(hits[stage]) / static_cast<double>(count);
    rep.per_stage[stage] = acc;
    sum += acc;
  }
  rep.average = sum / static_cast<double>(rep.per_stage_queries.size());
  return rep;
}

std::string topk_reports_to_json(const std::vector<TopkReport>& reports) {
  Json out = Json::array();
  for (const auto& r : reports) {
    Json per = Json::object();
    for (const auto& [stage, acc] : r.per_stage) {
      per[std::string(stage_name(stage))] = {{"accuracy", acc},
                                             {"queries", r.per_stage_queries.at(stage)}};
    }
    out.push_back({{"k", r.k},
                   {"queries", r.queries},
                   {"overall", r.overall},
                   {"average", r.average},
                   {"per_stage", per}});
  }
  return Json{{"reports", out}}.dump(2) + "\n";
}

ContextEmbedder::ContextEmbedder(ResMlpParams model, FeatureSource features)
    : model_(std::move(model)), features_(std::move(features)) {
  model_.validate();
  if (model_.input_dim() != kContextInputDim) {
    throw Error(ErrorCode::ShapeMismatch, "retrieval model must take 1552 inputs");
  }
}

Eigen::VectorXd ContextEmbedder::embed_features(const FeatureVector& f_prev,
                                                const FeatureVector& f_curr,
                                                ScanStage prev_stage) const {
  return resmlp_forward(model_, assemble_input(f_prev, f_curr, prev_stage));
}

Eigen::VectorXd ContextEmbedder::embed_images(const SliceImage& prev, const SliceImage& curr,
                                              ScanStage prev_stage) const {
  return embed_features(features_.encode(prev), features_.encode(curr), prev_stage);
}

Eigen::VectorXd ContextEmbedder::embed_entry(const WindowEntry& entry,
                                             const std::filesystem::path& base_dir) {
  return resmlp_forward(model_, entry_input(entry, features_, base_dir));
}

ContextRecord context_record_from_entry(const WindowEntry& e) {
  ContextRecord r;
  r.id = e.id;
  r.volume_id = e.volume_id;
  r.demo_id = e.demo_id;
  r.first_image_ref = e.first_image_ref;
  r.last_image_ref = e.last_image_ref;
  r.prev_stage = e.prev_stage;
  r.stage = e.stage;
  r.explanation = e.explanation;
  r.next_api = e.next_api;
  r.vqa_text = render_vqa_text(e.stage, e.explanation, e.next_api);
  return r;
}

ContextStore build_context_store(const std::vector<WindowEntry>& entries, ContextEmbedder& embedder,
                                 const std::filesystem::path& base_dir) {
  ContextStore store(embedder.model().width());
  store.encoder_spec = embedder.features().spec();
  for (const auto& e : entries) store.add(context_record_from_entry(e), embedder.embed_entry(e, base_dir));
  return store;
}

}  // namespace scansim
