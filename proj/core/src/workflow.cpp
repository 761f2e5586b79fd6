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

#include "scansim/workflow.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include "scansim/error.hpp"

namespace scansim {

namespace {

std::string normalize(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

}  // namespace

ScanStage stage_from_ordinal(int ordinal) {
  if (ordinal < 1 || ordinal > static_cast<int>(kStageCount)) {
    throw Error(ErrorCode::UnknownStage, "stage ordinal out of range: " + std::to_string(ordinal));
  }
  return static_cast<ScanStage>(ordinal);
}

std::string_view stage_name(ScanStage stage) {
  switch (stage) {
    case ScanStage::ExamineCcaProximal: return "Examine CCA proximal";
    case ScanStage::ExamineCcaDistal: return "Examine CCA distal";
    case ScanStage::ExamineBifurcation: return "Examine bifurcation";
    case ScanStage::TransverseScanCompleted: return "Transverse scan completed";
    case ScanStage::ReturnToCarotidBulb: return "Return to carotid bulb";
    case ScanStage::ReturnCompleted: return "Return completed";
    case ScanStage::RotateToLongitudinalView: return "Rotate to longitudinal view";
    case ScanStage::LongitudinalScanCompleted: return "Longitudinal scan completed";
  }
  throw Error(ErrorCode::UnknownStage, "invalid stage value");
}

std::string_view api_name(ApiCommand api) {
  switch (api) {
    case ApiCommand::TrackingForward: return "tracking forward";
    case ApiCommand::TrackingBackward: return "tracking backward";
    case ApiCommand::RotationClockwise: return "rotation clockwise";
  }
  throw Error(ErrorCode::UnknownApi, "invalid api value");
}

std::string_view next_api_name(const NextApi& api) { return api ? api_name(*api) : kDoneName; }

ScanStage parse_stage(std::string_view text) {
  const std::string key = normalize(text);
  for (ScanStage s : kAllStages) {
    if (normalize(stage_name(s)) == key) return s;
  }
  throw Error(ErrorCode::UnknownStage, "unknown stage: '" + std::string(text) + "'");
}

ApiCommand parse_api(std::string_view text) {
  const std::string key = normalize(text);
  for (ApiCommand a : kAllApis) {
    if (api_name(a) == key) return a;
  }
  throw Error(ErrorCode::UnknownApi, "unknown api: '" + std::string(text) + "'");
}

NextApi parse_next_api(std::string_view text) {
  if (normalize(text) == kDoneName) return std::nullopt;
  return parse_api(text);
}

std::string_view stage_explanation(ScanStage stage) {
  switch (stage) {
    case ScanStage::ExamineCcaProximal: return "Thyroid is near the CCA";
    case ScanStage::ExamineCcaDistal: return "Thyroid is not visible";
    case ScanStage::ExamineBifurcation: return "Carotid bulb reached, lumen begins to split";
    case ScanStage::TransverseScanCompleted: return "Lumen is clearly divided into ICA and ECA";
    case ScanStage::ReturnToCarotidBulb: return "ICA and ECA are merging back toward one lumen";
    case ScanStage::ReturnCompleted: return "Single lumen at the carotid bulb";
    case ScanStage::RotateToLongitudinalView: return "Vessel cross-section is elongating";
    case ScanStage::LongitudinalScanCompleted: return "Carotid artery visible along its long axis";
  }
  throw Error(ErrorCode::UnknownStage, "invalid stage value");
}

std::vector<ScanStage> next_stage_candidates(ScanStage stage) {
  if (stage == ScanStage::LongitudinalScanCompleted) return {stage};
  return {stage, stage_from_ordinal(stage_ordinal(stage) + 1)};
}

NextApi default_next_api(ScanStage stage) {
  switch (stage) {
    case ScanStage::ExamineCcaProximal:
    case ScanStage::ExamineCcaDistal:
    case ScanStage::ExamineBifurcation:
      return ApiCommand::TrackingForward;
    case ScanStage::TransverseScanCompleted:
    case ScanStage::ReturnToCarotidBulb:
      return ApiCommand::TrackingBackward;
    case ScanStage::ReturnCompleted:
    case ScanStage::RotateToLongitudinalView:
      return ApiCommand::RotationClockwise;
    case ScanStage::LongitudinalScanCompleted:
      return std::nullopt;
  }
  throw Error(ErrorCode::UnknownStage, "invalid stage value");
}

void MotionParams::validate() const {
  const double values[] = {forward_step_mm,    first_retract_mm,  retract_step_mm,
                           perturb_long_max_mm, perturb_lat_max_mm, rotation_step_deg,
                           rotation_total_deg};
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, "motion parameters must be positive");
    }
  }
  const double q = rotation_total_deg / rotation_step_deg;
  if (std::abs(q - std::round(q)) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument,
                "rotation_total must be an integer multiple of rotation_step");
  }
}

int MotionParams::rotation_step_count() const {
  return static_cast<int>(std::lround(rotation_total_deg / rotation_step_deg));
}

PoseDelta api_to_motion(ApiCommand cmd, const MotionParams& params, int retract_index, Rng* rng) {
  if (retract_index < 0) throw Error(ErrorCode::InvalidArgument, "retract_index must be >= 0");
  PoseDelta delta;
  if (cmd == ApiCommand::RotationClockwise) {
    delta.rotation =
        axis_rotation(ProbeAxis::V, params.rotation_step_deg * std::numbers::pi / 180.0);
    return delta;
  }
  double lateral = 0.0;
  double longitudinal = 0.0;
  if (rng != nullptr) {
    lateral = rng->uniform(-params.perturb_lat_max_mm, params.perturb_lat_max_mm);
    longitudinal = rng->uniform(-params.perturb_long_max_mm, params.perturb_long_max_mm);
  }
  double advance = 0.0;
  if (cmd == ApiCommand::TrackingForward) {
    advance = params.forward_step_mm;
  } else {
    advance = -(retract_index == 0 ? params.first_retract_mm : params.retract_step_mm);
  }
  delta.translation = Vec3(lateral, 0.0, advance + longitudinal);
  return delta;
}

}  // namespace scansim
