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

// Internal JSON helpers shared by the file-format code. Not installed.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scansim/geometry.hpp"

namespace scansim::detail {

using Json = nlohmann::json;

Json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);

/// {"position_mm":[3], "quaternion_wxyz":[4]}
Json pose_to_json(const ProbePose& pose);
ProbePose pose_from_json(const Json& j);

/// {"position_mm":[3], "rotation_rowmajor":[9]}; exact round trip.
Json pose_to_json_exact(const ProbePose& pose);
ProbePose pose_from_json_exact(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);
std::vector<Json> read_jsonl_file(const std::filesystem::path& path);

/// Reads a '\n'-terminated JSON header line followed by a binary payload.
struct HeaderedFile {
  Json header;
  std::vector<char> payload;
};
HeaderedFile read_headered_file(const std::filesystem::path& path);

/// Field access that maps type/absence errors onto MalformedHeader-style
/// scansim errors with the field name in the message.
const Json& require(const Json& j, const char* key);

void append_le_f64(std::vector<char>& out, double value);
double read_le_f64(const char* data);

}  // namespace scansim::detail
