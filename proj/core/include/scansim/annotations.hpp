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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scansim/geometry.hpp"
#include "scansim/workflow.hpp"

namespace scansim {

/// Anatomical waypoint marking where a stage begins along the scan.
struct Waypoint {
  ProbePose pose;
  ScanStage stage = ScanStage::ExamineCcaProximal;
  std::string name;
};

/// Half-open interval [begin_mm, end_mm) of the scan coordinate.
struct StageInterval {
  ScanStage stage = ScanStage::ExamineCcaProximal;
  double begin_mm = 0.0;
  double end_mm = 0.0;
};

/// Per-volume ground truth used by the scripted oracle and the evaluator.
///
/// The scan coordinate of a probe position p is dot(p - scan_origin, scan_axis),
/// i.e. the signed elevational distance from the start of the sweep.
struct GroundTruthAnnotation {
  std::string volume_id;
  Vec3 scan_origin_mm = Vec3::Zero();
  Vec3 scan_axis = Vec3::UnitZ();
  Mat3 reference_orientation = Mat3::Identity();
  /// Forward-sweep intervals for the first three stages, ordered.
  std::vector<StageInterval> stage_intervals;
  /// Labeled waypoint at which the transverse sweep is complete.
  double transverse_completion_mm = 0.0;
  /// Waypoint at which the return is complete.
  double return_waypoint_mm = 0.0;
  /// Annotated bulb region between the bifurcations.
  double return_region_begin_mm = 0.0;
  double return_region_end_mm = 0.0;
  /// Longitudinal view counts as visualized when lumen covers at least this
  /// fraction of image columns.
  double longitudinal_min_column_fraction = 0.6;
  double rotation_total_deg = 90.0;

  void validate() const;
  [[nodiscard]] double scan_coordinate(const Vec3& position_mm) const;
  [[nodiscard]] ProbePose start_pose() const;
  /// Stage of the forward interval containing s, if any.
  [[nodiscard]] std::optional<ScanStage> forward_stage_at(double s_mm) const;
};

/// Waypoints and ground truth for one volume, as persisted by the service.
struct AnnotationSet {
  std::string volume_id;
  std::vector<Waypoint> waypoints;
  std::optional<GroundTruthAnnotation> ground_truth;
};

/// Waypoint list invariant: stage ordinals weakly increase.
void validate_waypoint_order(const std::vector<Waypoint>& waypoints);

std::string annotation_set_to_json(const AnnotationSet& set);
AnnotationSet annotation_set_from_json(std::string_view text);
AnnotationSet load_annotation_set(const std::filesystem::path& path);
void save_annotation_set(const AnnotationSet& set, const std::filesystem::path& path);

std::string ground_truth_to_json(const GroundTruthAnnotation& gt);
GroundTruthAnnotation ground_truth_from_json(std::string_view text);
/// Accepts a bare ground-truth document or an annotation set carrying one.
GroundTruthAnnotation load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const GroundTruthAnnotation& gt, const std::filesystem::path& path);

}  // namespace scansim
