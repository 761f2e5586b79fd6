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

#include "scansim/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "scansim/error.hpp"

namespace scansim {

bool is_proper_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const Mat3 gram = m.transpose() * m;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

void validate_pose(const ProbePose& pose) {
  if (!pose.position.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "probe position is not finite");
  }
  if (!is_proper_rotation(pose.orientation)) {
    throw Error(ErrorCode::InvalidArgument, "probe orientation is not a proper rotation");
  }
}

Mat3 axis_rotation(ProbeAxis axis, double angle_rad) {
  const double c = std::cos(angle_rad);
  const double s = std::sin(angle_rad);
  Mat3 r = Mat3::Identity();
  switch (axis) {
    case ProbeAxis::U:
      r << 1, 0, 0, 0, c, -s, 0, s, c;
      break;
    case ProbeAxis::V:
      r << c, 0, s, 0, 1, 0, -s, 0, c;
      break;
    case ProbeAxis::W:
      r << c, -s, 0, s, c, 0, 0, 0, 1;
      break;
  }
  return r;
}

ProbePose transform_pose(const ProbePose& pose, const Vec3& delta_translation,
                         const Mat3& delta_rotation) {
  ProbePose out;
  out.position = pose.position + pose.orientation * delta_translation;
  out.orientation = pose.orientation * delta_rotation;
  return out;
}

ProbePose transform_pose(const ProbePose& pose, const PoseDelta& delta) {
  return transform_pose(pose, delta.translation, delta.rotation);
}

double rotation_angle(const Mat3& m) {
  const double c = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

std::array<double, 4> to_quaternion(const Mat3& m) {
  Eigen::Quaterniond q(m);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {q.w(), q.x(), q.y(), q.z()};
}

Mat3 from_quaternion(const std::array<double, 4>& wxyz) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  if (q.norm() == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "zero quaternion");
  }
  q.normalize();
  return q.toRotationMatrix();
}

Vec3 to_axis_angle(const Mat3& m) {
  const Eigen::AngleAxisd aa(m);
  return aa.axis() * aa.angle();
}

Mat3 from_axis_angle(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, rotvec / angle).toRotationMatrix();
}

}  // namespace scansim
