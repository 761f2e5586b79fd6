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

#include "scansim/demo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json_io.hpp"
#include "scansim/error.hpp"
#include "scansim/image_io.hpp"

namespace scansim {

namespace {

constexpr double kLandTol = 1e-9;
constexpr int kMaxSegmentSteps = 100000;

bool same_orientation(const Mat3& a, const Mat3& b) {
  return (a - b).cwiseAbs().maxCoeff() < 1e-9;
}

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

enum class SegmentKind { Zero, Forward, Backward, Rotation };

struct Segment {
  SegmentKind kind = SegmentKind::Zero;
  double length = 0.0;  // mm for translations, radians for rotations
};

Segment classify(const Waypoint& from, const Waypoint& to) {
  const Mat3 rel = from.pose.orientation.transpose() * to.pose.orientation;
  const double angle = rotation_angle(rel);
  if (angle > 1e-9) {
    if ((to.pose.position - from.pose.position).norm() > 1e-6) {
      throw Error(ErrorCode::InvalidTrajectory,
                  "waypoints '" + from.name + "' -> '" + to.name +
                      "' combine rotation and translation");
    }
    const Vec3 axis = Eigen::AngleAxisd(rel).axis();
    if (std::abs(axis.y() - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidTrajectory,
                  "rotation segment '" + from.name + "' -> '" + to.name +
                      "' is not a positive turn about the probe depth axis");
    }
    return {SegmentKind::Rotation, angle};
  }
  const double along = (to.pose.position - from.pose.position).dot(from.pose.w_axis());
  if (along > kLandTol) return {SegmentKind::Forward, along};
  if (along < -kLandTol) return {SegmentKind::Backward, -along};
  return {SegmentKind::Zero, 0.0};
}

}  // namespace

RefinedWaypoints refine_waypoints(const UsVolume& volume, std::span<const Waypoint> waypoints,
                                  const SliceSpec& spec) {
  (void)volume.mask();  // NoMask before any work
  spec.validate();
  RefinedWaypoints out;
  if (waypoints.empty()) return out;
  const Mat3 transverse = waypoints.front().pose.orientation;
  const double center_col = (spec.width_px - 1) / 2.0;
  Vec3 last_shift = Vec3::Zero();
  for (const auto& wp : waypoints) {
    Waypoint refined = wp;
    bool flagged = false;
    if (same_orientation(wp.pose.orientation, transverse)) {
      const auto centroid = mask_centroid_in_plane(volume, wp.pose, spec);
      if (centroid) {
        const double du = (centroid->col - center_col) * spec.pixel_spacing_mm;
        last_shift = wp.pose.u_axis() * du;
        refined.pose.position = wp.pose.position + last_shift;
      } else {
        flagged = true;
      }
    } else {
      refined.pose.position = wp.pose.position + last_shift;
    }
    out.waypoints.push_back(std::move(refined));
    out.flagged.push_back(flagged);
  }
  return out;
}

Trajectory build_trajectory(std::span<const Waypoint> waypoints, const MotionParams& params,
                            std::optional<std::uint64_t> seed) {
  params.validate();
  if (waypoints.size() < 2) {
    throw Error(ErrorCode::InvalidTrajectory, "a trajectory needs at least two waypoints");
  }
  validate_waypoint_order({waypoints.begin(), waypoints.end()});
  for (const auto& w : waypoints) validate_pose(w.pose);

  std::optional<Rng> rng;
  if (seed) rng.emplace(*seed);
  Rng* rng_ptr = rng ? &*rng : nullptr;

  Trajectory traj;
  traj.push_back({waypoints[0].pose, waypoints[0].stage, std::nullopt, false});
  int retract_index = 0;
  const double rot_step = deg2rad(params.rotation_step_deg);

  for (std::size_t j = 0; j + 1 < waypoints.size(); ++j) {
    const Waypoint& from = waypoints[j];
    const Waypoint& to = waypoints[j + 1];
    const Segment seg = classify(from, to);
    if (seg.kind == SegmentKind::Zero) {
      // Coincident waypoints: snap onto the target without emitting a step.
      traj.back().pose = to.pose;
      continue;
    }
    const ApiCommand cmd = seg.kind == SegmentKind::Forward    ? ApiCommand::TrackingForward
                           : seg.kind == SegmentKind::Backward ? ApiCommand::TrackingBackward
                                                               : ApiCommand::RotationClockwise;
    if (cmd != ApiCommand::TrackingBackward) retract_index = 0;

    for (int n = 0;; ++n) {
      if (n >= kMaxSegmentSteps) {
        throw Error(ErrorCode::InvalidTrajectory, "segment did not converge: " + to.name);
      }
      const ProbePose& cur = traj.back().pose;
      traj.back().next_api = cmd;
      TrajectoryStep next;
      next.next_api = std::nullopt;
      if (cmd == ApiCommand::RotationClockwise) {
        const double remaining =
            rotation_angle(cur.orientation.transpose() * to.pose.orientation);
        if (remaining <= rot_step + kLandTol) {
          next.pose = to.pose;
          next.stage = to.stage;
          next.clamped = remaining < rot_step - kLandTol;
          traj.push_back(next);
          break;
        }
        next.pose = transform_pose(cur, api_to_motion(cmd, params, 0, nullptr));
        next.stage = from.stage;
        traj.push_back(next);
        continue;
      }
      const PoseDelta delta = api_to_motion(cmd, params, retract_index, rng_ptr);
      ++retract_index;
      const double remaining = std::abs((to.pose.position - cur.position).dot(cur.w_axis()));
      const double advance = std::abs(delta.translation.z());
      if (remaining <= advance + kLandTol) {
        next.pose = to.pose;
        next.stage = to.stage;
        next.clamped = remaining < advance - kLandTol;
        traj.push_back(next);
        break;
      }
      next.pose = transform_pose(cur, delta);
      next.stage = from.stage;
      traj.push_back(next);
    }
  }
  traj.back().next_api = std::nullopt;
  return traj;
}

Demonstration execute_trajectory(const UsVolume& volume, const Trajectory& trajectory,
                                 const SliceSpec& spec) {
  if (trajectory.empty()) throw Error(ErrorCode::InvalidTrajectory, "empty trajectory");
  Demonstration demo;
  demo.records.reserve(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& step = trajectory[i];
    DemoRecord rec;
    rec.step_index = static_cast<int>(i);
    rec.pose = step.pose;
    rec.image = sample_slice(volume, step.pose, spec);
    rec.stage = step.stage;
    rec.explanation = std::string(stage_explanation(step.stage));
    rec.next_api = step.next_api;
    demo.records.push_back(std::move(rec));
  }
  return demo;
}

std::vector<Waypoint> balancing_waypoints(std::span<const Waypoint> waypoints, ScanStage sparse_stage,
                                          int approach_steps, const MotionParams& params) {
  if (approach_steps < 1) throw Error(ErrorCode::InvalidArgument, "approach_steps must be >= 1");
  std::size_t target = waypoints.size();
  for (std::size_t j = 1; j < waypoints.size(); ++j) {
    if (waypoints[j].stage == sparse_stage) {
      target = j;
      break;
    }
  }
  if (target == waypoints.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "no waypoint after the first carries stage " + std::string(stage_name(sparse_stage)));
  }
  // Walk back past coincident waypoints to the segment that reaches the target.
  std::size_t start = target - 1;
  while (start > 0 && classify(waypoints[start], waypoints[target]).kind == SegmentKind::Zero) {
    --start;
  }
  const Waypoint& from = waypoints[start];
  const Waypoint& to = waypoints[target];
  const Segment seg = classify(from, to);

  Waypoint begin = from;
  begin.name = to.name + "_approach";
  begin.stage = waypoints[target - 1].stage;
  if (seg.kind == SegmentKind::Rotation) {
    const double back = deg2rad(params.rotation_step_deg) * approach_steps;
    if (back < seg.length) {
      begin.pose.position = to.pose.position;
      begin.pose.orientation = to.pose.orientation * axis_rotation(ProbeAxis::V, -back);
    }
  } else if (seg.kind != SegmentKind::Zero) {
    double dist = 0.0;
    if (seg.kind == SegmentKind::Forward) {
      dist = params.forward_step_mm * approach_steps;
    } else {
      dist = params.first_retract_mm + params.retract_step_mm * (approach_steps - 1);
    }
    if (dist < seg.length) {
      const Vec3 dir = (to.pose.position - from.pose.position).normalized();
      begin.pose.position = to.pose.position - dir * dist;
      begin.pose.orientation = from.pose.orientation;
    }
  }
  return {begin, to};
}

std::vector<Demonstration> generate_demonstrations(const UsVolume& volume,
                                                   const std::string& volume_id,
                                                   std::span<const Waypoint> waypoints,
                                                   const DemoPlan& plan, const MotionParams& params,
                                                   const SliceSpec& spec) {
  if (plan.full_scans < 0 || plan.balance_scans < 0 || plan.window < 2) {
    throw Error(ErrorCode::InvalidArgument, "invalid demonstration plan");
  }
  std::vector<Waypoint> route(waypoints.begin(), waypoints.end());
  if (plan.refine) route = refine_waypoints(volume, route, spec).waypoints;

  std::vector<Demonstration> demos;
  char name[64];
  for (int i = 0; i < plan.full_scans; ++i) {
    const std::uint64_t seed = derive_seed(plan.seed, static_cast<std::uint64_t>(i));
    Demonstration demo = execute_trajectory(volume, build_trajectory(route, params, seed), spec);
    std::snprintf(name, sizeof name, "%s_full_%02d", volume_id.c_str(), i);
    demo.demo_id = name;
    demo.volume_id = volume_id;
    demo.seed = seed;
    demos.push_back(std::move(demo));
  }
  if (plan.balance_stages) {
    Rng approach_rng(derive_seed(plan.seed, 0xBA1A));
    for (int b = 0; b < plan.balance_scans; ++b) {
      const ScanStage stage = kSparseStages[static_cast<std::size_t>(b) % kSparseStages.size()];
      const int steps = plan.window - 1 + static_cast<int>(approach_rng.below(5));
      const auto short_route = balancing_waypoints(route, stage, steps, params);
      const std::uint64_t seed = derive_seed(plan.seed, 1000 + static_cast<std::uint64_t>(b));
      Demonstration demo =
          execute_trajectory(volume, build_trajectory(short_route, params, seed), spec);
      std::snprintf(name, sizeof name, "%s_bal_%02d", volume_id.c_str(), b);
      demo.demo_id = name;
      demo.volume_id = volume_id;
      demo.seed = seed;
      demos.push_back(std::move(demo));
    }
  }
  return demos;
}

void write_demonstration(const Demonstration& demo, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  std::string lines;
  char frame[64];
  for (const auto& rec : demo.records) {
    std::snprintf(frame, sizeof frame, "frames/frame_%04d.png", rec.step_index);
    write_png(rec.image, dir / frame);
    detail::Json row{{"step_index", rec.step_index},
                     {"pose", detail::pose_to_json(rec.pose)},
                     {"stage", stage_name(rec.stage)},
                     {"explanation", rec.explanation},
                     {"next_api", next_api_name(rec.next_api)},
                     {"image", frame}};
    lines += row.dump() + "\n";
  }
  detail::write_text_file(dir / "demo.jsonl", lines);
  detail::Json meta{{"demo_id", demo.demo_id},
                    {"volume_id", demo.volume_id},
                    {"seed", demo.seed},
                    {"record_count", demo.records.size()}};
  detail::write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

Demonstration load_demonstration(const std::filesystem::path& dir, bool load_images) {
  Demonstration demo;
  const auto meta = detail::read_json_file(dir / "meta.json");
  try {
    demo.demo_id = meta.at("demo_id").get<std::string>();
    demo.volume_id = meta.at("volume_id").get<std::string>();
    demo.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& row : detail::read_jsonl_file(dir / "demo.jsonl")) {
      DemoRecord rec;
      rec.step_index = row.at("step_index").get<int>();
      rec.pose = detail::pose_from_json(row.at("pose"));
      rec.stage = parse_stage(row.at("stage").get<std::string>());
      rec.explanation = row.at("explanation").get<std::string>();
      rec.next_api = parse_next_api(row.at("next_api").get<std::string>());
      rec.image_ref = row.at("image").get<std::string>();
      if (load_images) rec.image = read_png(dir / rec.image_ref);
      demo.records.push_back(std::move(rec));
    }
  } catch (const detail::Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, dir.string() + ": " + e.what());
  }
  return demo;
}

std::vector<std::filesystem::path> list_demonstration_dirs(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::MissingFile, "demonstration directory not found: " + root.string());
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "demo.jsonl")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace scansim
