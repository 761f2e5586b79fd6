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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scansim/annotations.hpp"
#include "scansim/volume.hpp"
#include "scansim/workflow.hpp"

namespace scansim {

struct RefinedWaypoints {
  std::vector<Waypoint> waypoints;
  /// True where the plane missed the mask and the waypoint was left unchanged.
  std::vector<bool> flagged;
};

/// Shifts each transverse waypoint along its u axis so the in-plane vessel
/// centroid lands on the image center column. Waypoints whose orientation
/// differs from the first waypoint (the rotation phase) inherit the world
/// shift of the latest refined transverse waypoint, so the rotation pivots
/// about the refined point. Throws NoMask.
RefinedWaypoints refine_waypoints(const UsVolume& volume, std::span<const Waypoint> waypoints,
                                  const SliceSpec& spec);

struct TrajectoryStep {
  ProbePose pose;
  ScanStage stage = ScanStage::ExamineCcaProximal;
  /// Command that moves this pose to the next one; nullopt on the last step.
  NextApi next_api;
  /// The move into this pose was shortened to land on a waypoint.
  bool clamped = false;
};

using Trajectory = std::vector<TrajectoryStep>;

/// Connects consecutive waypoints with api_to_motion steps. Translation
/// segments advance along the probe w axis (forward or backward by sign),
/// rotation segments turn about v. The move that would reach or overshoot a
/// waypoint lands exactly on it. Intermediate poses carry the stage of the
/// segment's start waypoint; the landing pose carries the target's stage.
/// With seed absent no perturbation is applied.
Trajectory build_trajectory(std::span<const Waypoint> waypoints, const MotionParams& params,
                            std::optional<std::uint64_t> seed);

struct DemoRecord {
  int step_index = 0;
  ProbePose pose;
  SliceImage image;
  ScanStage stage = ScanStage::ExamineCcaProximal;
  std::string explanation;
  NextApi next_api;
  /// Frame file relative to the demonstration directory (set on write/load).
  std::string image_ref;
};

struct Demonstration {
  std::string demo_id;
  std::string volume_id;
  std::uint64_t seed = 0;
  std::vector<DemoRecord> records;
};

/// Samples one slice per trajectory step.
Demonstration execute_trajectory(const UsVolume& volume, const Trajectory& trajectory,
                                 const SliceSpec& spec);

/// Two-waypoint list ending on the first waypoint of sparse_stage, starting
/// approach_steps nominal moves before it on the approach segment.
std::vector<Waypoint> balancing_waypoints(std::span<const Waypoint> waypoints, ScanStage sparse_stage,
                                          int approach_steps, const MotionParams& params);

/// Stages that receive extra short scans when balancing is enabled.
inline constexpr std::array<ScanStage, 3> kSparseStages = {ScanStage::TransverseScanCompleted,
                                                           ScanStage::ReturnCompleted,
                                                           ScanStage::LongitudinalScanCompleted};

struct DemoPlan {
  int full_scans = 3;
  bool balance_stages = false;
  int balance_scans = 20;
  /// Minimum useful scan length; balancing scans approach with window-1
  /// to window+3 steps.
  int window = 5;
  std::uint64_t seed = 0;
  bool refine = true;
};

/// Full scans followed by balancing scans, all reproducible from plan.seed.
std::vector<Demonstration> generate_demonstrations(const UsVolume& volume,
                                                   const std::string& volume_id,
                                                   std::span<const Waypoint> waypoints,
                                                   const DemoPlan& plan, const MotionParams& params,
                                                   const SliceSpec& spec);

/// Writes demo.jsonl, meta.json and frames/*.png under dir.
void write_demonstration(const Demonstration& demo, const std::filesystem::path& dir);
/// Reads a demonstration written by write_demonstration. Frames are decoded
/// only when load_images is set.
Demonstration load_demonstration(const std::filesystem::path& dir, bool load_images);
/// Subdirectories of root containing demo.jsonl, sorted by name.
std::vector<std::filesystem::path> list_demonstration_dirs(const std::filesystem::path& root);

}  // namespace scansim
