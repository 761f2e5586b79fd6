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

#include "scansim/evaluation.hpp"

#include <algorithm>

#include "json_io.hpp"
#include "scansim/error.hpp"

namespace scansim {

EvalReport eval_stage_accuracy(const RunLog& log, const GroundTruthAnnotation& gt,
                               const CoverageFn& coverage) {
  if (log.steps.empty()) throw Error(ErrorCode::EmptyDataset, "run log has no steps");
  gt.validate();
  constexpr double kTol = 1e-9;
  EvalReport rep;
  for (ScanStage st : kAllStages) rep.predictions[st] = 0;
  for (const auto& iv : gt.stage_intervals) {
    rep.gt_steps[iv.stage] = 0;
    rep.correct_steps[iv.stage] = 0;
  }

  bool forward_phase = true;
  bool transverse_done = false;
  std::optional<bool> return_ok;
  std::optional<bool> longitudinal_ok;
  for (const auto& step : log.steps) {
    const ScanStage pred = step.decision.stage;
    ++rep.predictions[pred];
    const double s = gt.scan_coordinate(step.pose.position);
    if (forward_phase && s < gt.transverse_completion_mm - kTol) {
      const auto truth = gt.forward_stage_at(s);
      if (!truth) {
        throw Error(ErrorCode::UncoveredSpan, "step " + std::to_string(step.step) + " at " +
                                                  std::to_string(s) +
                                                  " mm lies outside every annotated interval");
      }
      ++rep.gt_steps[*truth];
      if (pred == *truth) ++rep.correct_steps[*truth];
    }
    if (pred == ScanStage::TransverseScanCompleted && s >= gt.transverse_completion_mm - kTol) {
      transverse_done = true;
    }
    if (pred == ScanStage::ReturnCompleted && !return_ok) {
      return_ok = s >= gt.return_region_begin_mm - kTol && s <= gt.return_region_end_mm + kTol;
    }
    if (pred == ScanStage::LongitudinalScanCompleted && !longitudinal_ok) {
      longitudinal_ok = coverage(step.pose) >= gt.longitudinal_min_column_fraction - kTol;
    }
    if (step.executed_api && *step.executed_api != ApiCommand::TrackingForward) forward_phase = false;
  }

  for (const auto& iv : gt.stage_intervals) {
    const int total = rep.gt_steps[iv.stage];
    const double ratio =
        total == 0 ? 0.0 : static_cast<double>(rep.correct_steps[iv.stage]) / total;
    rep.accuracy[iv.stage] = std::clamp(ratio, 0.0, 1.0);
  }
  for (ScanStage st : {ScanStage::ExamineCcaProximal, ScanStage::ExamineCcaDistal,
                       ScanStage::ExamineBifurcation}) {
    rep.accuracy.try_emplace(st, 0.0);
  }
  rep.accuracy[ScanStage::TransverseScanCompleted] = transverse_done ? 1.0 : 0.0;
  rep.accuracy[ScanStage::ReturnCompleted] = return_ok.value_or(false) ? 1.0 : 0.0;
  rep.accuracy[ScanStage::LongitudinalScanCompleted] = longitudinal_ok.value_or(false) ? 1.0 : 0.0;
  double sum = 0.0;
  for (ScanStage st : kScoredStages) sum += rep.accuracy[st];
  rep.average = sum / static_cast<double>(kScoredStages.size());
  return rep;
}

EvalReport eval_stage_accuracy(const RunLog& log, const GroundTruthAnnotation& gt,
                               const UsVolume& volume, const SliceSpec& spec) {
  (void)volume.mask();
  return eval_stage_accuracy(log, gt, [&](const ProbePose& pose) {
    return mask_column_coverage(volume, pose, spec);
  });
}

std::string eval_report_to_json(const EvalReport& r) {
  detail::Json acc = detail::Json::object();
  for (ScanStage st : kScoredStages) acc[std::string(stage_name(st))] = r.accuracy.at(st);
  detail::Json gt_steps = detail::Json::object();
  for (const auto& [st, n] : r.gt_steps) {
    gt_steps[std::string(stage_name(st))] = {{"gt_steps", n}, {"correct", r.correct_steps.at(st)}};
  }
  detail::Json preds = detail::Json::object();
  for (const auto& [st, n] : r.predictions) preds[std::string(stage_name(st))] = n;
  return detail::Json{{"accuracy", acc},
                      {"average", r.average},
                      {"duration", gt_steps},
                      {"predictions", preds}}
             .dump(2) +
         "\n";
}

}  // namespace scansim
