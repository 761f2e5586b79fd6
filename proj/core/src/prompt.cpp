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

#include "scansim/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "scansim/error.hpp"
#include "scansim/image_io.hpp"

namespace scansim {

std::string system_prompt_text() {
  std::string s;
  s += "You operate a virtual ultrasound probe during a carotid artery examination.\n";
  s += "Each step shows two B-mode frames, an earlier one and the current one, together with "
       "the stage you reported at the previous step.\n";
  s += "Answer three questions in order: the current scanning stage, the image evidence for that "
       "stage, and the next API to execute.\n";
  s += "Scanning stages, in examination order:\n";
  for (ScanStage st : kAllStages) {
    s += std::to_string(stage_ordinal(st)) + ". " + std::string(stage_name(st)) + "\n";
  }
  s += "Executable APIs:\n";
  for (ApiCommand api : kAllApis) s += "- " + std::string(api_name(api)) + "\n";
  s += "Use \"" + std::string(kDoneName) + "\" as the next API once the examination is finished.\n";
  s += "Reply with exactly three labeled lines:\n";
  s += "stage: <one stage name>\n";
  s += "explanation: <short reason>\n";
  s += "next_API: <one API name or done>\n";
  return s;
}

std::string render_context(const ContextRecord& r, std::size_t position) {
  std::string s = "Context example " + std::to_string(position) + ":\n";
  s += "Images: <image ref=" + r.first_image_ref + "> <image ref=" + r.last_image_ref + ">\n";
  s += "Previous stage: " + std::string(stage_name(r.prev_stage)) + "\n";
  s += r.vqa_text.empty() ? render_vqa_text(r.stage, r.explanation, r.next_api) : r.vqa_text;
  if (s.back() != '\n') s += '\n';
  return s;
}

std::string query_prompt_text(ScanStage prev_stage, const std::array<SliceImage, 2>& images) {
  std::string s = "Current query:\n";
  s += "Images: <image digest=" + image_digest(images[0]) + "> <image digest=" +
       image_digest(images[1]) + ">\n";
  s += "Previous stage: " + std::string(stage_name(prev_stage)) + "\n";
  s += "Q1: " + std::string(kStageQuestion) + "\n";
  s += "Q2: " + std::string(kExplanationQuestion) + "\n";
  s += "Q3: " + std::string(kNextApiQuestion) + "\n";
  return s;
}

PromptBundle assemble_prompt(ScanStage prev_stage, const std::vector<ContextRecord>& contexts,
                             const std::array<SliceImage, 2>& images, int k) {
  if (k < 0 || contexts.size() != static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::ContextCountMismatch, "expected " + std::to_string(k) +
                                                     " contexts, got " +
                                                     std::to_string(contexts.size()));
  }
  for (const auto& img : images) {
    if (img.width < 1 || img.height < 1 ||
        img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
      throw Error(ErrorCode::ShapeMismatch, "prompt images must be non-empty");
    }
  }
  PromptBundle b;
  b.system_text = system_prompt_text();
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const auto& r = contexts[i];
    b.contexts.push_back({r.id, {r.first_image_ref, r.last_image_ref}, render_context(r, i + 1)});
  }
  b.prev_stage = prev_stage;
  b.query_text = query_prompt_text(prev_stage, images);
  b.images = images;
  return b;
}

std::string PromptBundle::render() const {
  std::string s = "[system]\n" + system_text;
  for (const auto& c : contexts) s += "[context]\n" + c.text;
  s += "[query]\n" + query_text;
  return s;
}

std::string render_decision(const PolicyDecision& d) {
  return "stage: " + std::string(stage_name(d.stage)) + "\nexplanation: " + d.explanation +
         "\nnext_API: " + std::string(next_api_name(d.next_api)) + "\n";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Value after "marker:" if the line starts with it, ignoring case.
std::optional<std::string_view> field(std::string_view line, std::string_view marker) {
  line = trim(line);
  if (line.size() <= marker.size()) return std::nullopt;
  for (std::size_t i = 0; i < marker.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(line[i])) !=
        std::tolower(static_cast<unsigned char>(marker[i]))) {
      return std::nullopt;
    }
  }
  if (line[marker.size()] != ':') return std::nullopt;
  return trim(line.substr(marker.size() + 1));
}

}  // namespace

PolicyDecision parse_decision(std::string_view reply) {
  std::optional<std::string_view> stage, explanation, api;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    const std::size_t end = std::min(reply.find('\n', pos), reply.size());
    const std::string_view line = reply.substr(pos, end - pos);
    if (!stage) stage = field(line, "stage");
    if (!explanation) explanation = field(line, "explanation");
    if (!api) api = field(line, "next_API");
    pos = end + 1;
  }
  if (!stage || stage->empty()) throw Error(ErrorCode::MissingField, "reply has no stage line");
  if (!explanation || explanation->empty()) {
    throw Error(ErrorCode::MissingField, "reply has no explanation line");
  }
  if (!api || api->empty()) throw Error(ErrorCode::MissingField, "reply has no next_API line");
  PolicyDecision d;
  d.stage = parse_stage(*stage);
  d.explanation = std::string(*explanation);
  d.next_api = parse_next_api(*api);
  return d;
}

}  // namespace scansim
