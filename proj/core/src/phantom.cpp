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

#include "scansim/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scansim/rng.hpp"

namespace scansim {

namespace {

double sq(double v) { return v * v; }

// Distance from p to the lumen boundary, negative inside.
double lumen_distance(const PhantomGeometry& g, const Vec3& p) {
  const double dy = p.y() - g.vessel_depth_mm;
  double best = 1e9;
  auto circle = [&](double cx, double r) {
    best = std::min(best, std::sqrt(sq(p.x() - cx) + sq(dy)) - r);
  };
  const double z = p.z();
  if (z < g.split_z_mm) {
    double r = g.cca_radius_mm;
    if (z > g.bulb_start_z_mm) r += 0.5 * (z - g.bulb_start_z_mm) / (g.split_z_mm - g.bulb_start_z_mm);
    circle(g.vessel_x_mm, r);
  } else {
    const double bulb_r = (g.cca_radius_mm + 0.5) * (g.bulb_end_z_mm - z) /
                          (g.bulb_end_z_mm - g.split_z_mm);
    if (bulb_r > 0.0) circle(g.vessel_x_mm, bulb_r);
    const double off = g.branch_slope * (z - g.split_z_mm);
    circle(g.vessel_x_mm - off, g.branch_radius_mm);
    circle(g.vessel_x_mm + off, g.branch_radius_mm);
  }
  return best;
}

double thyroid_level(const PhantomGeometry& g, const Vec3& p) {
  const double fade_begin = g.thyroid_end_z_mm - 5.0;
  double scale = 1.0;
  if (p.z() >= g.thyroid_end_z_mm) return 0.0;
  if (p.z() > fade_begin) scale = (g.thyroid_end_z_mm - p.z()) / 5.0;
  const double cx = g.vessel_x_mm - 11.5;
  const double e = sq((p.x() - cx) / (7.0 * scale)) + sq((p.y() - 12.0) / (5.0 * scale));
  return e < 1.0 ? 1.0 : 0.0;
}

// Per-voxel speckle in [0, 1).
double speckle(std::uint64_t seed, std::size_t index) {
  return static_cast<double>(derive_seed(seed, index) >> 11) * 0x1.0p-53;
}

}  // namespace

bool phantom_lumen(const PhantomGeometry& g, const Vec3& p) { return lumen_distance(g, p) < 0.0; }

CarotidPhantom make_carotid_phantom(std::uint64_t noise_seed, const PhantomGeometry& g) {
  const auto [nx, ny, nz] = g.dims;
  const std::size_t count = static_cast<std::size_t>(nx) * ny * nz;
  std::vector<std::uint8_t> voxels(count), mask(count);
  const Vec3 spacing = Vec3::Constant(g.spacing_mm);
  std::size_t idx = 0;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i, ++idx) {
        const Vec3 p(i * g.spacing_mm, j * g.spacing_mm, k * g.spacing_mm);
        const double n = speckle(noise_seed, idx);
        const double d = lumen_distance(g, p);
        double v = 55.0 + 50.0 * n;
        if (thyroid_level(g, p) > 0.0) v = 120.0 + 60.0 * n;
        if (p.y() < 2.0) v = 170.0 + 20.0 * n;
        if (d < 1.0 && d >= 0.0) v = 190.0 + 20.0 * n;
        if (d < 0.0) {
          v = 5.0 + 10.0 * n;
          mask[idx] = 1;
        }
        voxels[idx] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }

  const Vec3 origin = Vec3::Zero();
  const Vec3 start(g.vessel_x_mm, 0.0, g.start_z_mm);
  auto at = [&](double s) {
    ProbePose pose;
    pose.position = start + Vec3(0.0, 0.0, s);
    return pose;
  };
  AnnotationSet set;
  set.volume_id = "phantom";
  const double s_distal = g.thyroid_end_z_mm - g.start_z_mm;        // 25
  const double s_bifurcation = g.split_z_mm - g.start_z_mm;                // 45
  const double s_complete = 62.0;
  const double s_return = 48.0;
  ProbePose longitudinal = at(s_return);
  longitudinal.orientation = axis_rotation(ProbeAxis::V, std::numbers::pi / 2.0);
  set.waypoints = {
      {at(0.0), ScanStage::ExamineCcaProximal, "cca_proximal"},
      {at(s_distal), ScanStage::ExamineCcaDistal, "cca_distal"},
      {at(s_bifurcation), ScanStage::ExamineBifurcation, "bifurcation"},
      {at(s_complete), ScanStage::TransverseScanCompleted, "transverse_completed"},
      {at(s_complete), ScanStage::ReturnToCarotidBulb, "return_start"},
      {at(s_return), ScanStage::ReturnCompleted, "return_completed"},
      {at(s_return), ScanStage::RotateToLongitudinalView, "rotation_start"},
      {longitudinal, ScanStage::LongitudinalScanCompleted, "longitudinal_completed"},
  };

  GroundTruthAnnotation gt;
  gt.volume_id = set.volume_id;
  gt.scan_origin_mm = start;
  gt.scan_axis = Vec3::UnitZ();
  gt.stage_intervals = {{ScanStage::ExamineCcaProximal, 0.0, s_distal},
                        {ScanStage::ExamineCcaDistal, s_distal, s_bifurcation},
                        {ScanStage::ExamineBifurcation, s_bifurcation, s_complete}};
  gt.transverse_completion_mm = s_complete;
  gt.return_waypoint_mm = s_return;
  gt.return_region_begin_mm = 44.0;
  gt.return_region_end_mm = g.bulb_end_z_mm - g.start_z_mm;  // 52
  set.ground_truth = gt;

  return {UsVolume(g.dims, spacing, origin, std::move(voxels), std::move(mask)), std::move(set)};
}

}  // namespace scansim
