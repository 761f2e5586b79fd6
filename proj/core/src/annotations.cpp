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

#include "scansim/annotations.hpp"

#include <cmath>

#include "json_io.hpp"
#include "scansim/error.hpp"

namespace scansim {

using detail::Json;

void GroundTruthAnnotation::validate() const {
  if (std::abs(scan_axis.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "ground truth scan_axis must be unit length");
  }
  if (!is_proper_rotation(reference_orientation, 1e-6)) {
    throw Error(ErrorCode::InvalidArgument, "ground truth reference orientation is not a rotation");
  }
  for (std::size_t i = 0; i < stage_intervals.size(); ++i) {
    const auto& iv = stage_intervals[i];
    if (!(iv.end_mm > iv.begin_mm)) {
      throw Error(ErrorCode::InvalidArgument, "ground truth interval must have end > begin");
    }
    if (i > 0) {
      const auto& prev = stage_intervals[i - 1];
      if (iv.begin_mm < prev.end_mm || stage_ordinal(iv.stage) <= stage_ordinal(prev.stage)) {
        throw Error(ErrorCode::InvalidArgument,
                    "ground truth intervals must be ordered and non-overlapping");
      }
    }
  }
  if (return_region_end_mm < return_region_begin_mm) {
    throw Error(ErrorCode::InvalidArgument, "return region end precedes its begin");
  }
  if (!(longitudinal_min_column_fraction > 0.0 && longitudinal_min_column_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "longitudinal column fraction must be in (0, 1]");
  }
}

double GroundTruthAnnotation::scan_coordinate(const Vec3& position_mm) const {
  return (position_mm - scan_origin_mm).dot(scan_axis);
}

ProbePose GroundTruthAnnotation::start_pose() const {
  return ProbePose{scan_origin_mm, reference_orientation};
}

std::optional<ScanStage> GroundTruthAnnotation::forward_stage_at(double s_mm) const {
  for (const auto& iv : stage_intervals) {
    if (s_mm >= iv.begin_mm && s_mm < iv.end_mm) return iv.stage;
  }
  return std::nullopt;
}

void validate_waypoint_order(const std::vector<Waypoint>& waypoints) {
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (stage_ordinal(waypoints[i].stage) < stage_ordinal(waypoints[i - 1].stage)) {
      throw Error(ErrorCode::UnorderedWaypoints,
                  "waypoint '" + waypoints[i].name + "' has a lower stage than its predecessor");
    }
  }
}

namespace {

Json gt_to_json(const GroundTruthAnnotation& gt) {
  Json intervals = Json::array();
  for (const auto& iv : gt.stage_intervals) {
    intervals.push_back(
        {{"stage", stage_name(iv.stage)}, {"begin_mm", iv.begin_mm}, {"end_mm", iv.end_mm}});
  }
  const auto q = to_quaternion(gt.reference_orientation);
  return Json{{"volume_id", gt.volume_id},
              {"scan_origin_mm", detail::vec3_to_json(gt.scan_origin_mm)},
              {"scan_axis", detail::vec3_to_json(gt.scan_axis)},
              {"reference_quaternion_wxyz", {q[0], q[1], q[2], q[3]}},
              {"stage_intervals", intervals},
              {"transverse_completion_mm", gt.transverse_completion_mm},
              {"return_waypoint_mm", gt.return_waypoint_mm},
              {"return_region_mm", {gt.return_region_begin_mm, gt.return_region_end_mm}},
              {"longitudinal_min_column_fraction", gt.longitudinal_min_column_fraction},
              {"rotation_total_deg", gt.rotation_total_deg}};
}

GroundTruthAnnotation gt_from_json(const Json& j) {
  GroundTruthAnnotation gt;
  try {
    gt.volume_id = j.value("volume_id", std::string{});
    gt.scan_origin_mm = detail::vec3_from_json(detail::require(j, "scan_origin_mm"));
    gt.scan_axis = detail::vec3_from_json(detail::require(j, "scan_axis"));
    const auto& q = detail::require(j, "reference_quaternion_wxyz");
    gt.reference_orientation = from_quaternion(
        {q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>()});
    for (const auto& iv : detail::require(j, "stage_intervals")) {
      gt.stage_intervals.push_back({parse_stage(detail::require(iv, "stage").get<std::string>()),
                                    detail::require(iv, "begin_mm").get<double>(),
                                    detail::require(iv, "end_mm").get<double>()});
    }
    gt.transverse_completion_mm = detail::require(j, "transverse_completion_mm").get<double>();
    gt.return_waypoint_mm = detail::require(j, "return_waypoint_mm").get<double>();
    const auto& region = detail::require(j, "return_region_mm");
    gt.return_region_begin_mm = region.at(0).get<double>();
    gt.return_region_end_mm = region.at(1).get<double>();
    gt.longitudinal_min_column_fraction = j.value("longitudinal_min_column_fraction", 0.6);
    gt.rotation_total_deg = j.value("rotation_total_deg", 90.0);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, std::string("ground truth: ") + e.what());
  }
  gt.validate();
  return gt;
}

Json annotation_json(const AnnotationSet& set) {
  Json wps = Json::array();
  for (const auto& w : set.waypoints) {
    wps.push_back({{"name", w.name},
                   {"stage", stage_name(w.stage)},
                   {"pose", detail::pose_to_json(w.pose)}});
  }
  Json j{{"volume_id", set.volume_id}, {"waypoints", wps}};
  if (set.ground_truth) j["ground_truth"] = gt_to_json(*set.ground_truth);
  return j;
}

AnnotationSet annotation_from_json(const Json& j) {
  AnnotationSet set;
  try {
    set.volume_id = j.value("volume_id", std::string{});
    for (const auto& w : detail::require(j, "waypoints")) {
      Waypoint wp;
      wp.name = w.value("name", std::string{});
      wp.stage = parse_stage(detail::require(w, "stage").get<std::string>());
      wp.pose = detail::pose_from_json(detail::require(w, "pose"));
      validate_pose(wp.pose);
      set.waypoints.push_back(std::move(wp));
    }
    if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
      set.ground_truth = gt_from_json(j.at("ground_truth"));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, std::string("annotation set: ") + e.what());
  }
  validate_waypoint_order(set.waypoints);
  return set;
}

Json parse_or_throw(std::string_view text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::MalformedHeader, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string annotation_set_to_json(const AnnotationSet& set) { return annotation_json(set).dump(2); }

AnnotationSet annotation_set_from_json(std::string_view text) {
  return annotation_from_json(parse_or_throw(text, "annotation set"));
}

AnnotationSet load_annotation_set(const std::filesystem::path& path) {
  return annotation_from_json(detail::read_json_file(path));
}

void save_annotation_set(const AnnotationSet& set, const std::filesystem::path& path) {
  detail::write_text_file(path, annotation_set_to_json(set) + "\n");
}

std::string ground_truth_to_json(const GroundTruthAnnotation& gt) { return gt_to_json(gt).dump(2); }

GroundTruthAnnotation ground_truth_from_json(std::string_view text) {
  return gt_from_json(parse_or_throw(text, "ground truth"));
}

GroundTruthAnnotation load_ground_truth(const std::filesystem::path& path) {
  const Json j = detail::read_json_file(path);
  if (j.contains("ground_truth")) {
    return gt_from_json(j.at("ground_truth"));
  }
  return gt_from_json(j);
}

void save_ground_truth(const GroundTruthAnnotation& gt, const std::filesystem::path& path) {
  detail::write_text_file(path, ground_truth_to_json(gt) + "\n");
}

}  // namespace scansim
