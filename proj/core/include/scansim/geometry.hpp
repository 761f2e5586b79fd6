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

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace scansim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Probe-frame axis indices: u lateral (image columns), v axial depth
/// (image rows), w elevational advance (plane normal).
enum class ProbeAxis { U = 0, V = 1, W = 2 };

/// 6-DoF virtual probe pose. Columns of orientation are the probe u, v, w
/// axes expressed in the world frame (world <- probe).
struct ProbePose {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();

  [[nodiscard]] Vec3 u_axis() const { return orientation.col(0); }
  [[nodiscard]] Vec3 v_axis() const { return orientation.col(1); }
  [[nodiscard]] Vec3 w_axis() const { return orientation.col(2); }

  bool operator==(const ProbePose& other) const {
    return position == other.position && orientation == other.orientation;
  }
};

/// Motion expressed in the probe frame: translate, then rotate about the
/// probe origin.
struct PoseDelta {
  Vec3 translation = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

/// True when m is orthonormal with determinant +1 within tol.
bool is_proper_rotation(const Mat3& m, double tol = 1e-9);

/// Throws InvalidArgument if the pose orientation is not a proper rotation.
void validate_pose(const ProbePose& pose);

/// Right-handed rotation by angle_rad about a probe-frame axis.
Mat3 axis_rotation(ProbeAxis axis, double angle_rad);

/// position' = position + R * dt, R' = R * dR.
ProbePose transform_pose(const ProbePose& pose, const PoseDelta& delta);
ProbePose transform_pose(const ProbePose& pose, const Vec3& delta_translation,
                         const Mat3& delta_rotation);

/// Rotation angle of m in radians, in [0, pi].
double rotation_angle(const Mat3& m);

/// Unit quaternion (w, x, y, z) with w >= 0.
std::array<double, 4> to_quaternion(const Mat3& m);
Mat3 from_quaternion(const std::array<double, 4>& wxyz);

/// Rotation vector (axis * angle, radians) and back.
Vec3 to_axis_angle(const Mat3& m);
Mat3 from_axis_angle(const Vec3& rotvec);

}  // namespace scansim
