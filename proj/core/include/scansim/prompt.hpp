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

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "scansim/retrieval.hpp"
#include "scansim/volume.hpp"
#include "scansim/workflow.hpp"

namespace scansim {

struct PolicyDecision {
  ScanStage stage = ScanStage::ExamineCcaProximal;
  std::string explanation;
  NextApi next_api;
  bool operator==(const PolicyDecision&) const = default;
};

struct RenderedContext {
  std::string id;
  std::array<std::string, 2> image_refs;
  std::string text;
};

struct PromptBundle {
  std::string system_text;
  std::vector<RenderedContext> contexts;
  ScanStage prev_stage = ScanStage::ExamineCcaProximal;
  std::string query_text;
  /// [earlier frame, current frame].
  std::array<SliceImage, 2> images;

  /// Whole prompt as one text. Query images appear as digest placeholders
  /// and context images as reference placeholders, so the result is
  /// byte-stable.
  [[nodiscard]] std::string render() const;
};

std::string system_prompt_text();
std::string render_context(const ContextRecord& record, std::size_t position);
std::string query_prompt_text(ScanStage prev_stage, const std::array<SliceImage, 2>& images);

/// Throws ContextCountMismatch when contexts.size() != k, ShapeMismatch for
/// empty images.
PromptBundle assemble_prompt(ScanStage prev_stage, const std::vector<ContextRecord>& contexts,
                             const std::array<SliceImage, 2>& images, int k);

/// Three labeled lines: "stage: ", "explanation: ", "next_API: ".
std::string render_decision(const PolicyDecision& decision);
/// Reads the first line for each marker (case-insensitive). Throws
/// MissingField, UnknownStage, UnknownApi.
PolicyDecision parse_decision(std::string_view reply);

}  // namespace scansim
