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

#include <map>

#include "../support/oracles.hpp"
#include "scansim/dataset.hpp"
#include "scansim/demo.hpp"
#include "scansim/error.hpp"

using namespace scansim;
using scansim_test::carotid_phantom;

namespace {

Waypoint wp(Vec3 pos, ScanStage st, Mat3 rot = Mat3::Identity()) {
  Waypoint w;
  w.pose.position = pos;
  w.pose.orientation = rot;
  w.stage = st;
  return w;
}

// Vessel running along z with a circular cross-section centered at
// (cx, cy) in voxel units.
UsVolume tube_volume(double cx, double cy, double radius_vox) {
  const int nx = 101, ny = 60, nz = 6;
  std::vector<std::uint8_t> vox(static_cast<std::size_t>(nx) * ny * nz, 80), mask(vox.size(), 0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if ((i - cx) * (i - cx) + (j - cy) * (j - cy) <= radius_vox * radius_vox)
          mask[i + nx * (j + static_cast<std::size_t>(ny) * k)] = 1;
  return UsVolume({nx, ny, nz}, Vec3::Constant(0.2), Vec3::Zero(), vox, mask);
}

WindowEntry entry(const std::string& id, const std::string& vol, const std::string& demo, ScanStage st) {
  WindowEntry e;
  e.id = id;
  e.volume_id = vol;
  e.demo_id = demo;
  e.stage = st;
  e.prev_stage = st;
  return e;
}

}  // namespace

TEST_CASE("trajectory: forward segment in 1 mm steps") {
  const std::vector<Waypoint> w{wp(Vec3(0, 0, 0), ScanStage::ExamineCcaProximal),
                                wp(Vec3(0, 0, 10), ScanStage::ExamineCcaDistal)};
  const Trajectory t = build_trajectory(w, MotionParams{}, std::nullopt);
  REQUIRE(t.size() == 11);
  for (int i = 0; i < 10; ++i) {
    CHECK(t[i].next_api == ApiCommand::TrackingForward);
    CHECK(t[i + 1].pose.position.z() == doctest::Approx(i + 1.0).epsilon(1e-12));
  }
  CHECK(t.back().pose.position == Vec3(0, 0, 10));
  CHECK(t.back().stage == ScanStage::ExamineCcaDistal);
  CHECK(t[9].stage == ScanStage::ExamineCcaProximal);
  CHECK_FALSE(t.back().next_api.has_value());
}

TEST_CASE("trajectory: return segment 2.0 then 1.5 mm with clamped landing") {
  const std::vector<Waypoint> w{wp(Vec3(0, 0, 30), ScanStage::TransverseScanCompleted),
                                wp(Vec3(0, 0, 22), ScanStage::ReturnCompleted)};
  const Trajectory t = build_trajectory(w, MotionParams{}, std::nullopt);
  REQUIRE(t.size() == 6);
  const double expect[] = {30, 28, 26.5, 25, 23.5, 22};
  for (int i = 0; i < 6; ++i) CHECK(t[i].pose.position.z() == doctest::Approx(expect[i]).epsilon(1e-12));
  for (int i = 0; i < 5; ++i) CHECK(t[i].next_api == ApiCommand::TrackingBackward);
  CHECK(t.back().pose.position.z() == 22.0);
  // 2 + 4 * 1.5 lands exactly, nothing to shorten
  CHECK_FALSE(t.back().clamped);
}

TEST_CASE("trajectory: short residual into the waypoint is clamped") {
  const std::vector<Waypoint> w{wp(Vec3(0, 0, 30), ScanStage::TransverseScanCompleted),
                                wp(Vec3(0, 0, 23), ScanStage::ReturnCompleted)};
  const Trajectory t = build_trajectory(w, MotionParams{}, std::nullopt);
  REQUIRE(t.size() == 6);
  const double expect[] = {30, 28, 26.5, 25, 23.5, 23};
  for (int i = 0; i < 6; ++i) CHECK(t[i].pose.position.z() == doctest::Approx(expect[i]).epsilon(1e-12));
  CHECK(t.back().pose.position.z() == 23.0);
  CHECK(t.back().clamped);
  for (int i = 0; i < 5; ++i) CHECK_FALSE(t[i].clamped);
}

TEST_CASE("trajectory: rotation segment has 18 steps") {
  const Mat3 quarter = axis_rotation(ProbeAxis::V, M_PI / 2);
  const std::vector<Waypoint> w{wp(Vec3(1, 2, 3), ScanStage::ReturnCompleted),
                                wp(Vec3(1, 2, 3), ScanStage::LongitudinalScanCompleted, quarter)};
  const Trajectory t = build_trajectory(w, MotionParams{}, std::nullopt);
  REQUIRE(t.size() == 19);
  for (int i = 0; i < 18; ++i) CHECK(t[i].next_api == ApiCommand::RotationClockwise);
  CHECK((t.back().pose.orientation - quarter).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trajectory: rotation about another axis is rejected") {
  const std::vector<Waypoint> w{
      wp(Vec3::Zero(), ScanStage::ReturnCompleted),
      wp(Vec3::Zero(), ScanStage::LongitudinalScanCompleted, axis_rotation(ProbeAxis::U, 0.5))};
  CHECK_THROWS_AS(build_trajectory(w, MotionParams{}, std::nullopt), Error);
}

TEST_CASE("trajectory: seeded perturbation is reproducible and still lands") {
  const auto& wps = carotid_phantom().annotations.waypoints;
  const Trajectory a = build_trajectory(wps, MotionParams{}, 9u);
  const Trajectory b = build_trajectory(wps, MotionParams{}, 9u);
  const Trajectory c = build_trajectory(wps, MotionParams{}, 10u);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].pose == b[i].pose);
  bool differs = a.size() != c.size();
  for (std::size_t i = 0; !differs && i < a.size(); ++i) differs = !(a[i].pose == c[i].pose);
  CHECK(differs);
}

TEST_CASE("execute: length-1 trajectory and replay equality") {
  const auto& ph = carotid_phantom();
  const SliceSpec spec{64, 64, 0.4};
  Trajectory one{TrajectoryStep{ph.annotations.waypoints[0].pose, ScanStage::ExamineCcaProximal, {}, false}};
  CHECK(execute_trajectory(ph.volume, one, spec).records.size() == 1);

  const Trajectory t = build_trajectory(ph.annotations.waypoints, MotionParams{}, 1u);
  const Demonstration d = execute_trajectory(ph.volume, t, spec);
  REQUIRE(d.records.size() == t.size());
  int last = 0;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    REQUIRE(d.records[i].image == sample_slice(ph.volume, d.records[i].pose, spec));
    const int o = stage_ordinal(d.records[i].stage);
    CHECK(o >= last);
    CHECK(o <= last + 1);
    last = o;
    CHECK(d.records[i].explanation == stage_explanation(d.records[i].stage));
  }
  CHECK(last == 8);
}

TEST_CASE("refine: centered waypoint unchanged, offset vessel shifted along u") {
  const SliceSpec spec{101, 60, 0.2};
  const Waypoint w = wp(Vec3(10.0, 0.0, 0.4), ScanStage::ExamineCcaProximal);
  {
    const UsVolume v = tube_volume(50, 30, 8);
    const RefinedWaypoints r = refine_waypoints(v, std::vector<Waypoint>{w}, spec);
    CHECK(r.waypoints[0].pose == w.pose);
    CHECK_FALSE(r.flagged[0]);
  }
  {
    const UsVolume v = tube_volume(60, 30, 8);
    const RefinedWaypoints r = refine_waypoints(v, std::vector<Waypoint>{w}, spec);
    CHECK(r.waypoints[0].pose.position.x() == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(r.waypoints[0].pose.position.y() == 0.0);
  }
  {
    // random tubes: after refinement the centroid column is at the center
    std::uint64_t state = 77;
    for (int trial = 0; trial < 15; ++trial) {
      const double cx = 25 + scansim_test::random_unit(state) * 50;
      const double cy = 15 + scansim_test::random_unit(state) * 30;
      const double rad = 3 + scansim_test::random_unit(state) * 8;
      const UsVolume v = tube_volume(cx, cy, rad);
      const RefinedWaypoints r = refine_waypoints(v, std::vector<Waypoint>{w}, spec);
      const auto c = mask_centroid_in_plane(v, r.waypoints[0].pose, spec);
      REQUIRE(c.has_value());
      CHECK(std::abs(c->col - 50.0) <= 1.0);
    }
  }
  {
    const UsVolume v = tube_volume(60, 30, 8);
    const Waypoint miss = wp(Vec3(10.0, 0.0, 50.0), ScanStage::ExamineCcaProximal);  // beyond z
    const RefinedWaypoints r = refine_waypoints(v, std::vector<Waypoint>{miss}, spec);
    CHECK(r.flagged[0]);
    CHECK(r.waypoints[0].pose == miss.pose);
  }
}

TEST_CASE("demonstrations: write/load round trip and stage coverage") {
  const auto& ph = carotid_phantom();
  const SliceSpec spec{64, 64, 0.4};
  DemoPlan plan;
  plan.full_scans = 1;
  plan.seed = 5;
  const auto demos = generate_demonstrations(ph.volume, "phantom", ph.annotations.waypoints, plan,
                                             MotionParams{}, spec);
  REQUIRE(demos.size() == 1);
  CHECK(demos[0].demo_id == "phantom_full_00");
  const auto dir = scansim_test::temp_dir("demo_rt") / demos[0].demo_id;
  write_demonstration(demos[0], dir);
  const Demonstration back = load_demonstration(dir, true);
  REQUIRE(back.records.size() == demos[0].records.size());
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    CHECK(back.records[i].image == demos[0].records[i].image);
    CHECK(back.records[i].stage == demos[0].records[i].stage);
    CHECK(back.records[i].next_api == demos[0].records[i].next_api);
    CHECK(back.records[i].pose.position == demos[0].records[i].pose.position);
  }
  std::map<ScanStage, int> seen;
  for (const auto& r : back.records) ++seen[r.stage];
  CHECK(seen.size() == 8);
}

TEST_CASE("dataset: sliding windows") {
  Demonstration d;
  d.demo_id = "d0";
  d.volume_id = "v";
  for (int i = 0; i < 12; ++i) {
    DemoRecord r;
    r.step_index = i;
    r.stage = stage_from_ordinal(1 + i / 3);
    r.explanation = std::string(stage_explanation(r.stage));
    r.next_api = default_next_api(r.stage);
    d.records.push_back(r);
  }
  const auto w = window_dataset(d, 5, 1);
  REQUIRE(w.size() == 8);
  for (const auto& e : w) {
    CHECK(e.last_index - e.first_index == 4);
    CHECK(e.stage == d.records[e.last_index].stage);
    CHECK(e.prev_stage == d.records[e.last_index - 1].stage);
  }
  CHECK(w[0].id == "d0_w0");
  CHECK(window_dataset(d, 5, 3).size() == 3);
  try {
    window_dataset(d, 13, 1);
    FAIL("expected DemoTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DemoTooShort);
  }
}

TEST_CASE("dataset: row counts match an independent count over generated demos") {
  const auto& ph = carotid_phantom();
  const SliceSpec spec{32, 32, 0.8};
  const auto root = scansim_test::temp_dir("count");
  DemoPlan plan;
  plan.balance_stages = true;
  plan.seed = 3;
  for (const auto& d :
       generate_demonstrations(ph.volume, "phantom", ph.annotations.waypoints, plan, MotionParams{}, spec))
    write_demonstration(d, root / "demos" / "phantom" / d.demo_id);
  DatasetBuildOptions opt;
  opt.per_anchor = 4;
  const DatasetSummary sum = build_datasets(root / "demos", root / "data", opt);
  CHECK(sum.demos == 23);
  CHECK(sum.dataset_a == scansim_test::oracle_dataset_a_rows(root / "demos", 5, 1));
  CHECK(load_dataset_a(root / "data" / "dataset_a.jsonl").size() == sum.dataset_a);
  CHECK(load_triplets(root / "data" / "triplets.jsonl").size() == sum.triplets);
  CHECK(sum.triplets == 4 * sum.dataset_a);
}

TEST_CASE("triplets: per-anchor count and stage invariants") {
  std::vector<WindowEntry> es;
  for (int v = 0; v < 3; ++v)
    for (int i = 0; i < 24; ++i)
      es.push_back(entry("v" + std::to_string(v) + "_" + std::to_string(i), "v" + std::to_string(v),
                         "v" + std::to_string(v) + "_d" + std::to_string(i % 2), stage_from_ordinal(1 + i % 8)));
  const auto ts = sample_triplets(es, 20, 1);
  std::map<std::string, const WindowEntry*> by_id;
  for (const auto& e : es) by_id[e.id] = &e;
  std::map<std::string, int> per;
  for (const auto& t : ts) {
    ++per[t.anchor_id];
    const auto *a = by_id.at(t.anchor_id), *p = by_id.at(t.positive_id), *n = by_id.at(t.negative_id);
    CHECK(a->stage == p->stage);
    CHECK(a->stage != n->stage);
    CHECK(t.anchor_id != t.positive_id);
    CHECK(p->volume_id != a->volume_id);
    CHECK_FALSE(t.positive_same_volume);
  }
  CHECK(per.size() == es.size());
  for (const auto& [id, c] : per) CHECK(c == 20);
}

TEST_CASE("triplets: stage present in a single volume") {
  std::vector<WindowEntry> es;
  for (int i = 0; i < 6; ++i) es.push_back(entry("a" + std::to_string(i), "A", "A_d", ScanStage::ExamineCcaDistal));
  for (int i = 0; i < 6; ++i) es.push_back(entry("b" + std::to_string(i), "B", "B_d", ScanStage::ExamineCcaProximal));
  es.push_back(entry("a_only0", "A", "A_d", ScanStage::ReturnCompleted));
  es.push_back(entry("a_only1", "A", "A_e", ScanStage::ReturnCompleted));
  const auto ts = sample_triplets(es, 5, 2);
  int flagged = 0;
  for (const auto& t : ts) {
    if (t.anchor_id.rfind("a_only", 0) == 0) {
      CHECK(t.positive_same_volume);
      CHECK(t.positive_id.rfind("a_only", 0) == 0);
      ++flagged;
    }
  }
  CHECK(flagged == 10);

  std::vector<WindowEntry> mono;
  for (int i = 0; i < 4; ++i) mono.push_back(entry("m" + std::to_string(i), "A", "A_d", ScanStage::ExamineCcaDistal));
  try {
    sample_triplets(mono, 5, 2);
    FAIL("expected InsufficientStages");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientStages);
  }
}

TEST_CASE("dataset: VQA text carries the three questions") {
  const std::string t = render_vqa_text(ScanStage::ExamineCcaDistal, "Thyroid is not visible",
                                        ApiCommand::TrackingForward);
  CHECK(t.find(std::string(kStageQuestion)) != std::string::npos);
  CHECK(t.find(std::string(kExplanationQuestion)) != std::string::npos);
  CHECK(t.find(std::string(kNextApiQuestion)) != std::string::npos);
  CHECK(t.find("Examine CCA distal") != std::string::npos);
  CHECK(t.find("tracking forward") != std::string::npos);
}
