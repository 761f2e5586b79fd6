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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scansim/geometry.hpp"
#include "scansim/rng.hpp"

namespace scansim {

/// The eight ordered stages of a carotid examination.
enum class ScanStage : std::uint8_t {
  ExamineCcaProximal = 1,
  ExamineCcaDistal,
  ExamineBifurcation,
  TransverseScanCompleted,
  ReturnToCarotidBulb,
  ReturnCompleted,
  RotateToLongitudinalView,
  LongitudinalScanCompleted,
};

inline constexpr std::size_t kStageCount = 8;

inline constexpr std::array<ScanStage, kStageCount> kAllStages = {
    ScanStage::ExamineCcaProximal,       ScanStage::ExamineCcaDistal,
    ScanStage::ExamineBifurcation,       ScanStage::TransverseScanCompleted,
    ScanStage::ReturnToCarotidBulb,      ScanStage::ReturnCompleted,
    ScanStage::RotateToLongitudinalView, ScanStage::LongitudinalScanCompleted,
};

/// 1-based ordinal.
constexpr int stage_ordinal(ScanStage s) { return static_cast<int>(s); }
/// Inverse of stage_ordinal; throws UnknownStage outside 1..8.
ScanStage stage_from_ordinal(int ordinal);

/// Executable probe-motion commands.
enum class ApiCommand : std::uint8_t { TrackingForward, TrackingBackward, RotationClockwise };

inline constexpr std::array<ApiCommand, 3> kAllApis = {
    ApiCommand::TrackingForward, ApiCommand::TrackingBackward, ApiCommand::RotationClockwise};

/// A command, or nullopt meaning the examination is done.
using NextApi = std::optional<ApiCommand>;

inline constexpr std::string_view kDoneName = "done";

std::string_view stage_name(ScanStage stage);
std::string_view api_name(ApiCommand api);
std::string_view next_api_name(const NextApi& api);

/// Names match after trimming and whitespace collapsing, case-insensitively.
ScanStage parse_stage(std::string_view text);
ApiCommand parse_api(std::string_view text);
NextApi parse_next_api(std::string_view text);

/// Canonical clinical explanation used as the dataset label for a stage.
std::string_view stage_explanation(ScanStage stage);

/// {stage, successor}; the terminal stage maps to itself only.
std::vector<ScanStage> next_stage_candidates(ScanStage stage);

/// Default command for a recognized stage: forward through the transverse
/// sweep, backward for the return, rotation to the longitudinal plane, then
/// done.
NextApi default_next_api(ScanStage stage);

/// The three questions posed at every decision step, in order.
inline constexpr std::string_view kStageQuestion = "What is the current scanning stage?";
inline constexpr std::string_view kExplanationQuestion =
    "Which anatomical feature in the images supports this stage?";
inline constexpr std::string_view kNextApiQuestion = "Which API should be executed next?";

struct MotionParams {
  double forward_step_mm = 1.0;
  double first_retract_mm = 2.0;
  double retract_step_mm = 1.5;
  double perturb_long_max_mm = 0.3;
  double perturb_lat_max_mm = 0.2;
  double rotation_step_deg = 5.0;
  double rotation_total_deg = 90.0;

  void validate() const;
  [[nodiscard]] int rotation_step_count() const;
};

/// Probe-frame motion for a command. Translation commands draw a uniform
/// lateral (u) and longitudinal (w) perturbation when rng is given; the
/// rotation is never perturbed and consumes no randomness.
PoseDelta api_to_motion(ApiCommand cmd, const MotionParams& params, int retract_index, Rng* rng);

}  // namespace scansim
