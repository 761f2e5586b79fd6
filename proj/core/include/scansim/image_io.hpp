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
#include <string_view>
#include <vector>

#include "scansim/volume.hpp"

namespace scansim {

/// 8-bit grayscale PNG encoding with fixed compression settings, so equal
/// images encode to equal bytes.
std::vector<std::uint8_t> encode_png(const SliceImage& image);
SliceImage decode_png(const std::vector<std::uint8_t>& bytes);

void write_png(const SliceImage& image, const std::filesystem::path& path);
SliceImage read_png(const std::filesystem::path& path);

/// FNV-1a 64-bit digest over (width, height, pixels), as 16 hex digits.
std::string image_digest(const SliceImage& image);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace scansim
