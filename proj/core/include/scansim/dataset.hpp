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
#include <string>
#include <vector>

#include "scansim/demo.hpp"

namespace scansim {

struct WindowEntry {
  std::string id;
  std::string volume_id;
  std::string demo_id;
  int first_index = 0;
  int last_index = 0;
  SliceImage first_image;
  SliceImage last_image;
  /// Image paths; relative to wherever the entry was serialized.
  std::string first_image_ref;
  std::string last_image_ref;
  /// Annotations of the last frame.
  ScanStage stage = ScanStage::ExamineCcaProximal;
  std::string explanation;
  NextApi next_api;
  /// Stage of the frame just before the last frame.
  ScanStage prev_stage = ScanStage::ExamineCcaProximal;
};

/// Sliding windows of length n at offsets 0, stride, 2*stride, ...
/// Entry ids are "<demo_id>_w<first_index>". Throws DemoTooShort.
std::vector<WindowEntry> window_dataset(const Demonstration& demo, int n, int stride);

struct TripletSpec {
  std::string anchor_id;
  std::string positive_id;
  std::string negative_id;
  /// The positive came from the anchor's own volume because no other
  /// volume has the stage.
  bool positive_same_volume = false;
};

/// per_anchor triplets for each entry that has at least one same-stage
/// partner. Positives prefer other volumes, then other demos of the same
/// volume. Negatives alternate between same-volume and cross-volume
/// sources when both exist. Throws InsufficientStages, InvalidArgument.
std::vector<TripletSpec> sample_triplets(const std::vector<WindowEntry>& entries, int per_anchor,
                                         std::uint64_t seed);

/// Annotation block for a context: the three questions with their answers.
std::string render_vqa_text(ScanStage stage, std::string_view explanation, const NextApi& next_api);

struct DatasetBuildOptions {
  int window = 5;
  int stride = 1;
  int per_anchor = 20;
  std::uint64_t seed = 0;
};

struct DatasetSummary {
  std::size_t demos = 0;
  std::size_t skipped_demos = 0;
  std::size_t dataset_a = 0;
  std::size_t dataset_b = 0;
  std::size_t dataset_c = 0;
  std::size_t triplets = 0;
};

/// Reads every demonstration under demos_root (recursively one or two levels)
/// and writes dataset_a.jsonl, dataset_b.jsonl, dataset_c.jsonl and
/// triplets.jsonl into out_dir. Image refs are relative to out_dir.
/// Demonstrations shorter than the window are skipped.
DatasetSummary build_datasets(const std::filesystem::path& demos_root,
                              const std::filesystem::path& out_dir,
                              const DatasetBuildOptions& options);

/// Dataset-A reader; images are not decoded. Refs are kept as written.
std::vector<WindowEntry> load_dataset_a(const std::filesystem::path& path);
void write_dataset_a(const std::vector<WindowEntry>& entries, const std::filesystem::path& path);

std::vector<TripletSpec> load_triplets(const std::filesystem::path& path);
void write_triplets(const std::vector<TripletSpec>& triplets, const std::filesystem::path& path);

}  // namespace scansim
