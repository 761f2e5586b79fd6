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
#include <string>

#include "scansim/annotations.hpp"
#include "scansim/volume.hpp"

namespace scansim {

/// Synthetic neck volume with a carotid artery that bifurcates part-way
/// along z, a thyroid lobe beside the proximal segment, and a lumen mask.
/// The probe starts on the skin surface above the proximal artery looking
/// down (+y) and advances along +z.
struct CarotidPhantom {
  UsVolume volume;
  AnnotationSet annotations;  // waypoints for all eight stages plus ground truth
};

struct PhantomGeometry {
  UsVolume::Dims dims = {97, 97, 221};
  double spacing_mm = 0.5;
  double vessel_x_mm = 24.0;
  double vessel_depth_mm = 16.0;
  double cca_radius_mm = 3.5;
  double branch_radius_mm = 3.0;
  double bulb_start_z_mm = 60.0;   // lumen starts to dilate
  double split_z_mm = 65.0;        // branches start to diverge
  double bulb_end_z_mm = 72.0;     // common lumen fully gone
  double branch_slope = 0.25;      // lateral offset per mm of z
  double thyroid_end_z_mm = 45.0;  // thyroid visible for z below this
  double start_z_mm = 20.0;
};

CarotidPhantom make_carotid_phantom(std::uint64_t noise_seed = 0, const PhantomGeometry& g = {});

/// Whether a world point lies inside the phantom lumen.
bool phantom_lumen(const PhantomGeometry& g, const Vec3& p);

}  // namespace scansim
