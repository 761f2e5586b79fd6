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
#include <functional>
#include <map>
#include <string>

#include "scansim/annotations.hpp"
#include "scansim/closed_loop.hpp"
#include "scansim/volume.hpp"

namespace scansim {

/// Stages that receive an accuracy score, in report order.
inline constexpr std::array<ScanStage, 6> kScoredStages = {
    ScanStage::ExamineCcaProximal,      ScanStage::ExamineCcaDistal,
    ScanStage::ExamineBifurcation,      ScanStage::TransverseScanCompleted,
    ScanStage::ReturnCompleted,         ScanStage::LongitudinalScanCompleted};

struct EvalReport {
  std::map<ScanStage, double> accuracy;  // the six scored stages
  double average = 0.0;
  /// Ground-truth forward steps per sweep stage (denominators).
  std::map<ScanStage, int> gt_steps;
  std::map<ScanStage, int> correct_steps;
  /// How often each stage was predicted, including the unscored ones.
  std::map<ScanStage, int> predictions;
};

/// Fraction of image columns showing lumen at a pose.
using CoverageFn = std::function<double(const ProbePose&)>;

/// Sweep stages score the share of their ground-truth forward steps that
/// were predicted correctly; the forward sweep ends at the first executed
/// backward or rotation command. Completion stages score 1 or 0: the
/// transverse sweep when the stage is predicted at or past the labeled
/// waypoint, the return when it is first predicted inside the annotated
/// region, the longitudinal view when lumen covers enough columns where it
/// is first predicted. Throws UncoveredSpan, EmptyDataset.
EvalReport eval_stage_accuracy(const RunLog& log, const GroundTruthAnnotation& gt,
                               const CoverageFn& coverage);
/// Coverage from the volume mask. Throws NoMask.
EvalReport eval_stage_accuracy(const RunLog& log, const GroundTruthAnnotation& gt,
                               const UsVolume& volume, const SliceSpec& spec);

std::string eval_report_to_json(const EvalReport& report);

}  // namespace scansim
