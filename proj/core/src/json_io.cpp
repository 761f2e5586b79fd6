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

#include "json_io.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "scansim/error.hpp"

namespace scansim::detail {

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::InvalidArgument, "expected a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json pose_to_json(const ProbePose& pose) {
  const auto q = to_quaternion(pose.orientation);
  return Json{{"position_mm", vec3_to_json(pose.position)},
              {"quaternion_wxyz", Json::array({q[0], q[1], q[2], q[3]})}};
}

ProbePose pose_from_json(const Json& j) {
  if (j.contains("rotation_rowmajor")) return pose_from_json_exact(j);
  ProbePose pose;
  pose.position = vec3_from_json(require(j, "position_mm"));
  const auto& q = require(j, "quaternion_wxyz");
  if (!q.is_array() || q.size() != 4) {
    throw Error(ErrorCode::InvalidArgument, "quaternion_wxyz must have 4 entries");
  }
  pose.orientation =
      from_quaternion({q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()});
  return pose;
}

Json pose_to_json_exact(const ProbePose& pose) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot.push_back(pose.orientation(r, c));
  }
  return Json{{"position_mm", vec3_to_json(pose.position)}, {"rotation_rowmajor", rot}};
}

ProbePose pose_from_json_exact(const Json& j) {
  ProbePose pose;
  pose.position = vec3_from_json(require(j, "position_mm"));
  const auto& rot = require(j, "rotation_rowmajor");
  if (!rot.is_array() || rot.size() != 9) {
    throw Error(ErrorCode::InvalidArgument, "rotation_rowmajor must have 9 entries");
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.orientation(r, c) = rot[r * 3 + c].get<double>();
  }
  return pose;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
  }
}

std::vector<Json> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::MalformedHeader,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

HeaderedFile read_headered_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line) || in.eof()) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": missing header line");
  }
  HeaderedFile file;
  try {
    file.header = Json::parse(header_line);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
  }
  file.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return file;
}

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::MissingField, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

void append_le_f64(std::vector<char>& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.insert(out.end(), buf, buf + 8);
}

double read_le_f64(const char* data) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, data, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace scansim::detail
