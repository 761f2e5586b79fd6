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

// Writes the bundled carotid phantom: volume, annotation set and ground truth.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "scansim/annotations.hpp"
#include "scansim/error.hpp"
#include "scansim/phantom.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic carotid phantom", "scansim-phantom"};
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--seed", seed, "Speckle seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    namespace fs = std::filesystem;
    fs::create_directories(out);
    const auto ph = scansim::make_carotid_phantom(seed);
    const std::string id = ph.annotations.volume_id;
    scansim::write_volume(ph.volume, fs::path(out) / (id + ".usvol"));
    scansim::save_annotation_set(ph.annotations, fs::path(out) / (id + ".annotations.json"));
    scansim::save_ground_truth(*ph.annotations.ground_truth, fs::path(out) / (id + ".gt.json"));
    std::cout << "wrote " << id << " to " << out << "\n";
  } catch (const scansim::Error& e) {
    std::cerr << "error code=" << scansim::error_code_name(e.code()) << " message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
