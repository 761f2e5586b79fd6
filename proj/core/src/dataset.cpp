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

#include "scansim/dataset.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "json_io.hpp"
#include "scansim/error.hpp"
#include "scansim/rng.hpp"

namespace scansim {

namespace fs = std::filesystem;
using detail::Json;

std::vector<WindowEntry> window_dataset(const Demonstration& demo, int n, int stride) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "window length must be >= 2");
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  const int length = static_cast<int>(demo.records.size());
  if (length < n) {
    throw Error(ErrorCode::DemoTooShort, "demonstration '" + demo.demo_id + "' has " +
                                             std::to_string(length) + " records, window needs " +
                                             std::to_string(n));
  }
  const int count = (length - n) / stride + 1;
  std::vector<WindowEntry> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int e = 0; e < count; ++e) {
    const int first = e * stride;
    const int last = first + n - 1;
    const DemoRecord& a = demo.records[static_cast<std::size_t>(first)];
    const DemoRecord& b = demo.records[static_cast<std::size_t>(last)];
    WindowEntry w;
    w.id = demo.demo_id + "_w" + std::to_string(first);
    w.volume_id = demo.volume_id;
    w.demo_id = demo.demo_id;
    w.first_index = first;
    w.last_index = last;
    w.first_image = a.image;
    w.last_image = b.image;
    w.first_image_ref = a.image_ref;
    w.last_image_ref = b.image_ref;
    w.stage = b.stage;
    w.explanation = b.explanation;
    w.next_api = b.next_api;
    w.prev_stage = demo.records[static_cast<std::size_t>(last - 1)].stage;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<TripletSpec> sample_triplets(const std::vector<WindowEntry>& entries, int per_anchor,
                                         std::uint64_t seed) {
  if (per_anchor < 1) throw Error(ErrorCode::InvalidArgument, "per_anchor must be >= 1");
  if (entries.empty()) throw Error(ErrorCode::EmptyDataset, "no window entries");
  std::map<ScanStage, std::vector<std::size_t>> by_stage;
  for (std::size_t i = 0; i < entries.size(); ++i) by_stage[entries[i].stage].push_back(i);
  if (by_stage.size() < 2) {
    throw Error(ErrorCode::InsufficientStages, "triplets need at least two stages");
  }

  Rng rng(seed);
  auto pick = [&rng](const std::vector<std::size_t>& pool) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
  };

  std::vector<TripletSpec> out;
  std::vector<std::size_t> pos_cross, pos_other_demo, pos_same_demo, neg_same, neg_cross;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const WindowEntry& anchor = entries[i];
    pos_cross.clear();
    pos_other_demo.clear();
    pos_same_demo.clear();
    for (std::size_t j : by_stage[anchor.stage]) {
      if (j == i) continue;
      const WindowEntry& e = entries[j];
      if (e.volume_id != anchor.volume_id) pos_cross.push_back(j);
      else if (e.demo_id != anchor.demo_id) pos_other_demo.push_back(j);
      else pos_same_demo.push_back(j);
    }
    const std::vector<std::size_t>* positives = !pos_cross.empty()        ? &pos_cross
                                                : !pos_other_demo.empty() ? &pos_other_demo
                                                                          : &pos_same_demo;
    if (positives->empty()) continue;
    const bool same_volume = positives != &pos_cross;

    neg_same.clear();
    neg_cross.clear();
    for (const auto& [stage, pool] : by_stage) {
      if (stage == anchor.stage) continue;
      for (std::size_t j : pool) {
        (entries[j].volume_id == anchor.volume_id ? neg_same : neg_cross).push_back(j);
      }
    }
    for (int t = 0; t < per_anchor; ++t) {
      const bool want_same = (t % 2) == 0;
      const auto& negatives = want_same ? (neg_same.empty() ? neg_cross : neg_same)
                                        : (neg_cross.empty() ? neg_same : neg_cross);
      const std::size_t p = pick(*positives);
      const std::size_t n = pick(negatives);
      out.push_back({anchor.id, entries[p].id, entries[n].id, same_volume});
    }
  }
  return out;
}

std::string render_vqa_text(ScanStage stage, std::string_view explanation, const NextApi& next_api) {
  std::string s;
  s += "Q: " + std::string(kStageQuestion) + "\n";
  s += "A: " + std::string(stage_name(stage)) + "\n";
  s += "Q: " + std::string(kExplanationQuestion) + "\n";
  s += "A: " + std::string(explanation) + "\n";
  s += "Q: " + std::string(kNextApiQuestion) + "\n";
  s += "A: " + std::string(next_api_name(next_api)) + "\n";
  return s;
}

namespace {

Json entry_to_json(const WindowEntry& w) {
  return Json{{"id", w.id},
              {"demo_id", w.demo_id},
              {"volume_id", w.volume_id},
              {"first_index", w.first_index},
              {"last_index", w.last_index},
              {"first_img", w.first_image_ref},
              {"last_img", w.last_image_ref},
              {"prev_stage", stage_name(w.prev_stage)},
              {"stage", stage_name(w.stage)},
              {"explanation", w.explanation},
              {"next_api", next_api_name(w.next_api)}};
}

std::string generic_ref(const fs::path& p) { return p.lexically_normal().generic_string(); }

// Collects demonstration directories at depth one or two below root.
std::vector<fs::path> find_demo_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::MissingFile, "demonstration directory not found: " + root.string());
  }
  std::vector<fs::path> dirs;
  if (fs::exists(root / "demo.jsonl")) dirs.push_back(root);
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    if (fs::exists(entry.path() / "demo.jsonl")) {
      dirs.push_back(entry.path());
      continue;
    }
    for (const auto& inner : fs::directory_iterator(entry.path())) {
      if (inner.is_directory() && fs::exists(inner.path() / "demo.jsonl")) {
        dirs.push_back(inner.path());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

void write_dataset_a(const std::vector<WindowEntry>& entries, const fs::path& path) {
  std::string text;
  for (const auto& w : entries) text += entry_to_json(w).dump() + "\n";
  detail::write_text_file(path, text);
}

std::vector<WindowEntry> load_dataset_a(const fs::path& path) {
  std::vector<WindowEntry> out;
  std::size_t line = 0;
  for (const auto& row : detail::read_jsonl_file(path)) {
    WindowEntry w;
    try {
      w.first_image_ref = row.at("first_img").get<std::string>();
      w.last_image_ref = row.at("last_img").get<std::string>();
      w.prev_stage = parse_stage(row.at("prev_stage").get<std::string>());
      w.stage = parse_stage(row.at("stage").get<std::string>());
      w.explanation = row.at("explanation").get<std::string>();
      w.next_api = parse_next_api(row.at("next_api").get<std::string>());
      w.volume_id = row.at("volume_id").get<std::string>();
      w.demo_id = row.value("demo_id", w.volume_id);
      w.id = row.value("id", w.demo_id + "_r" + std::to_string(line));
      w.first_index = row.value("first_index", 0);
      w.last_index = row.value("last_index", 0);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MissingField,
                  path.string() + " line " + std::to_string(line + 1) + ": " + e.what());
    }
    out.push_back(std::move(w));
    ++line;
  }
  return out;
}

void write_triplets(const std::vector<TripletSpec>& triplets, const fs::path& path) {
  std::string text;
  for (const auto& t : triplets) {
    text += Json{{"anchor_id", t.anchor_id},
                 {"positive_id", t.positive_id},
                 {"negative_id", t.negative_id},
                 {"positive_same_volume", t.positive_same_volume}}
                .dump() +
            "\n";
  }
  detail::write_text_file(path, text);
}

std::vector<TripletSpec> load_triplets(const fs::path& path) {
  std::vector<TripletSpec> out;
  for (const auto& row : detail::read_jsonl_file(path)) {
    try {
      out.push_back({row.at("anchor_id").get<std::string>(), row.at("positive_id").get<std::string>(),
                     row.at("negative_id").get<std::string>(),
                     row.value("positive_same_volume", false)});
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MissingField, path.string() + ": " + e.what());
    }
  }
  return out;
}

DatasetSummary build_datasets(const fs::path& demos_root, const fs::path& out_dir,
                              const DatasetBuildOptions& options) {
  DatasetSummary summary;
  fs::create_directories(out_dir);
  const fs::path out_abs = fs::absolute(out_dir);
  std::vector<WindowEntry> all;
  std::string text_b, text_c;
  for (const auto& dir : find_demo_dirs(demos_root)) {
    Demonstration demo = load_demonstration(dir, false);
    ++summary.demos;
    const fs::path dir_abs = fs::absolute(dir);
    for (auto& rec : demo.records) {
      rec.image_ref = generic_ref(fs::relative(dir_abs / rec.image_ref, out_abs));
      for (int q = 0; q < 2; ++q) {
        text_b += Json{{"img", rec.image_ref},
                       {"question", q == 0 ? kStageQuestion : kExplanationQuestion},
                       {"answer", q == 0 ? std::string(stage_name(rec.stage)) : rec.explanation}}
                      .dump() +
                  "\n";
        ++summary.dataset_b;
      }
    }
    if (static_cast<int>(demo.records.size()) < options.window) {
      ++summary.skipped_demos;
      continue;
    }
    for (auto& w : window_dataset(demo, options.window, options.stride)) {
      Json turns = Json::array();
      turns.push_back({{"q", kStageQuestion}, {"a", stage_name(w.stage)}});
      turns.push_back({{"q", kExplanationQuestion}, {"a", w.explanation}});
      turns.push_back({{"q", kNextApiQuestion}, {"a", next_api_name(w.next_api)}});
      text_c += Json{{"id", w.id},
                     {"imgs", Json::array({w.first_image_ref, w.last_image_ref})},
                     {"turns", turns}}
                    .dump() +
                "\n";
      ++summary.dataset_c;
      all.push_back(std::move(w));
    }
  }
  if (all.empty()) throw Error(ErrorCode::EmptyDataset, "no demonstration long enough for a window");
  summary.dataset_a = all.size();
  write_dataset_a(all, out_dir / "dataset_a.jsonl");
  detail::write_text_file(out_dir / "dataset_b.jsonl", text_b);
  detail::write_text_file(out_dir / "dataset_c.jsonl", text_c);
  const auto triplets = sample_triplets(all, options.per_anchor, options.seed);
  summary.triplets = triplets.size();
  write_triplets(triplets, out_dir / "triplets.jsonl");
  return summary;
}

}  // namespace scansim
