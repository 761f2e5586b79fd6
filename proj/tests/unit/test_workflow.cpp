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

#include "doctest.h"

#include <algorithm>
#include <set>

#include "../support/oracles.hpp"
#include "scansim/annotations.hpp"
#include "scansim/error.hpp"
#include "scansim/workflow.hpp"

using namespace scansim;

TEST_CASE("motion: nominal step sizes") {
  const MotionParams m;
  const PoseDelta fwd = api_to_motion(ApiCommand::TrackingForward, m, 0, nullptr);
  CHECK(fwd.translation == Vec3(0, 0, 1.0));
  CHECK(fwd.rotation == Mat3::Identity());
  CHECK(api_to_motion(ApiCommand::TrackingBackward, m, 0, nullptr).translation == Vec3(0, 0, -2.0));
  CHECK(api_to_motion(ApiCommand::TrackingBackward, m, 1, nullptr).translation == Vec3(0, 0, -1.5));
  CHECK(api_to_motion(ApiCommand::TrackingBackward, m, 7, nullptr).translation == Vec3(0, 0, -1.5));
  const PoseDelta rot = api_to_motion(ApiCommand::RotationClockwise, m, 0, nullptr);
  CHECK(rot.translation == Vec3::Zero());
  CHECK(std::abs(rotation_angle(rot.rotation) - 5.0 * M_PI / 180.0) < 1e-12);
  CHECK(std::abs(rot.rotation(1, 1) - 1.0) < 1e-15);  // about v
  CHECK(m.rotation_step_count() == 18);
}

TEST_CASE("motion: seeded perturbation stays inside and reaches the bounds") {
  const MotionParams m;
  Rng rng(derive_seed(42, 3));
  double max_lat = 0, max_long = 0;
  for (int i = 0; i < 10000; ++i) {
    const PoseDelta d = api_to_motion(ApiCommand::TrackingForward, m, 0, &rng);
    const double lat = std::abs(d.translation.x());
    const double lon = std::abs(d.translation.z() - 1.0);
    REQUIRE(lat <= 0.2);
    REQUIRE(lon <= 0.3 + 1e-15);
    REQUIRE(d.translation.y() == 0.0);
    max_lat = std::max(max_lat, lat);
    max_long = std::max(max_long, lon);
  }
  CHECK(max_lat >= 0.19);
  CHECK(max_long >= 0.29);
}

TEST_CASE("motion: parameter validation") {
  MotionParams m;
  m.rotation_step_deg = 7.0;  // 90 is not a multiple
  CHECK_THROWS_AS(m.validate(), Error);
  MotionParams neg;
  neg.forward_step_mm = -1;
  CHECK_THROWS_AS(neg.validate(), Error);
  CHECK_THROWS_AS(api_to_motion(ApiCommand::TrackingBackward, MotionParams{}, -1, nullptr), Error);
}

TEST_CASE("workflow: names, explanations, successors") {
  CHECK(stage_explanation(ScanStage::ExamineCcaProximal) == "Thyroid is near the CCA");
  CHECK(stage_explanation(ScanStage::ExamineCcaDistal) == "Thyroid is not visible");
  std::set<std::string> expl, names;
  for (ScanStage s : kAllStages) {
    CHECK_FALSE(stage_explanation(s).empty());
    expl.insert(std::string(stage_explanation(s)));
    names.insert(std::string(stage_name(s)));
    CHECK(parse_stage(stage_name(s)) == s);
  }
  CHECK(expl.size() == 8);
  CHECK(names.size() == 8);
  CHECK(next_stage_candidates(ScanStage::ExamineCcaProximal) ==
        std::vector<ScanStage>{ScanStage::ExamineCcaProximal, ScanStage::ExamineCcaDistal});
  CHECK(next_stage_candidates(ScanStage::LongitudinalScanCompleted) ==
        std::vector<ScanStage>{ScanStage::LongitudinalScanCompleted});
  std::set<ScanStage> all;
  for (ScanStage s : kAllStages)
    for (ScanStage c : next_stage_candidates(s)) all.insert(c);
  CHECK(all.size() == 8);
  for (ApiCommand a : kAllApis) CHECK(parse_api(api_name(a)) == a);
  CHECK(api_name(ApiCommand::TrackingForward) == "tracking forward");
  CHECK(api_name(ApiCommand::TrackingBackward) == "tracking backward");
  CHECK(api_name(ApiCommand::RotationClockwise) == "rotation clockwise");
  CHECK(parse_next_api("done") == std::nullopt);
  CHECK(parse_stage("  examine cca DISTAL ") == ScanStage::ExamineCcaDistal);
  CHECK_THROWS_AS(parse_stage("Examine aorta"), Error);
  CHECK_THROWS_AS(parse_api("rotate fast"), Error);
  CHECK_THROWS_AS(stage_from_ordinal(9), Error);
}

TEST_CASE("annotations: round trip and ordering") {
  const auto& ph = scansim_test::carotid_phantom();
  const std::string text = annotation_set_to_json(ph.annotations);
  const AnnotationSet back = annotation_set_from_json(text);
  CHECK(annotation_set_to_json(back) == text);
  REQUIRE(back.waypoints.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(stage_ordinal(back.waypoints[i].stage) == static_cast<int>(i) + 1);
    CHECK(back.waypoints[i].pose.position == ph.annotations.waypoints[i].pose.position);
    // stored as a quaternion, so the matrix comes back to within round-off
    CHECK(back.waypoints[i].pose.orientation.isApprox(ph.annotations.waypoints[i].pose.orientation, 1e-12));
  }
  REQUIRE(back.ground_truth.has_value());
  CHECK(ground_truth_to_json(*back.ground_truth) == ground_truth_to_json(*ph.annotations.ground_truth));

  auto dir = scansim_test::temp_dir("ann");
  save_annotation_set(ph.annotations, dir / "a.json");
  CHECK(annotation_set_to_json(load_annotation_set(dir / "a.json")) == text);

  std::vector<Waypoint> bad = ph.annotations.waypoints;
  std::swap(bad[1], bad[2]);
  try {
    validate_waypoint_order(bad);
    FAIL("expected UnorderedWaypoints");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnorderedWaypoints);
  }
}

TEST_CASE("ground truth: scan coordinate and forward intervals") {
  const GroundTruthAnnotation& gt = *scansim_test::carotid_phantom().annotations.ground_truth;
  CHECK(gt.scan_coordinate(gt.scan_origin_mm + 10.0 * gt.scan_axis) == doctest::Approx(10.0));
  CHECK(gt.forward_stage_at(0.0) == ScanStage::ExamineCcaProximal);
  CHECK(gt.forward_stage_at(30.0) == ScanStage::ExamineCcaDistal);
  CHECK(gt.forward_stage_at(50.0) == ScanStage::ExamineBifurcation);
  CHECK_FALSE(gt.forward_stage_at(-1.0).has_value());
  CHECK(gt.transverse_completion_mm > gt.return_waypoint_mm);
  CHECK(gt.return_waypoint_mm >= gt.return_region_begin_mm);
  CHECK(gt.return_waypoint_mm <= gt.return_region_end_mm);
}
