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

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "scansim/closed_loop.hpp"

namespace scansim {

struct ServiceConfig {
  /// Directory scanned for *.usvol files; the file stem is the volume id.
  std::filesystem::path volumes_dir;
  /// Annotations live at <data_dir>/<id>.annotations.json and finished run
  /// logs under <data_dir>/runs/. Defaults to volumes_dir.
  std::filesystem::path data_dir;
  /// Optional .ctxdb; its manifest names the model and feature source.
  std::optional<std::filesystem::path> store_path;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  LoopParams loop;
};

/// Pose on the wire: "px,py,pz,rx,ry,rz", position in mm then rotation
/// vector (axis times angle in radians). Throws InvalidArgument.
ProbePose parse_wire_pose(const std::string& text);
std::string format_wire_pose(const ProbePose& pose);

/// HTTP front end for slicing, annotations, retrieval and run control.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns once listening.
  /// Throws IoError if the port cannot be bound.
  void start();
  /// Binds and serves on the calling thread until stop().
  void run();
  /// Stops the listener and aborts active runs.
  void stop();
  [[nodiscard]] int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scansim
