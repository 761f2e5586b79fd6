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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scansim/policy.hpp"
#include "scansim/retrieval.hpp"
#include "scansim/volume.hpp"
#include "scansim/workflow.hpp"

namespace scansim {

struct LoopParams {
  int window = 5;        // frames kept in the buffer
  int frame_gap = 4;     // earlier frame is this many steps back once available
  int k = 2;
  int max_steps = 500;
  MotionParams motion;
  SliceSpec slice;
  double out_of_volume_margin_mm = 5.0;
  bool perturb = true;
  std::uint64_t seed = 0;
  /// Extra attempts after a failed decision.
  int retries = 1;
  /// Retrieval only considers the previous stage and its successor.
  bool restrict_to_next_stages = true;
  /// Wall-clock latency is recorded only when set; otherwise 0 so reruns
  /// produce identical logs.
  bool record_timing = false;
  std::string run_id = "run";
  void validate() const;
};

enum class Termination { Completed, MaxSteps, BackendFailure, OutOfVolume, Aborted };

std::string_view termination_name(Termination t);
Termination parse_termination(std::string_view text);

struct RetrievedRef {
  std::string id;
  double score = 0.0;
};

struct RunStep {
  int step = 0;
  ProbePose pose;
  SliceImage image;  // not serialized; frames are written as PNG files
  std::string image_ref;
  std::string image_digest;
  ScanStage prev_stage = ScanStage::ExamineCcaProximal;
  std::vector<RetrievedRef> retrieved;
  PolicyDecision decision;
  /// The command actually executed after this step (override or decision).
  NextApi executed_api;
  bool override_applied = false;
  double rotation_accum_deg = 0.0;  // before executing this step's command
  int attempts = 1;
  double latency_ms = 0.0;
};

struct RunLog {
  std::string run_id;
  std::string volume_id;
  std::string volume_path;
  std::string backend;
  std::uint64_t seed = 0;
  std::vector<RunStep> steps;
  Termination termination = Termination::MaxSteps;
  std::string detail;
};

/// Callbacks that let a supervisor observe and steer a run. All optional.
struct LoopHooks {
  /// Called between steps; blocks while paused. Returning false aborts.
  std::function<bool()> checkpoint;
  /// A pending human override for the command to execute next, consumed.
  std::function<std::optional<NextApi>()> take_override;
  std::function<void(const RunStep&)> on_step;
};

/// Runs decide, record, execute until a termination condition. The store
/// and embedder may be null when k == 0 or the backend needs no retrieval.
/// Never throws for backend failures; parameter errors throw.
RunLog run_closed_loop(const UsVolume& volume, PolicyBackend& backend, const ContextStore* store,
                       const ContextEmbedder* embedder, const ProbePose& start,
                       const LoopParams& params, const LoopHooks& hooks = {});

/// Serialized step line, as written to run.jsonl and streamed as an event.
std::string run_step_to_json(const RunStep& step);
std::string run_summary_to_json(const RunLog& log);

/// dir/run.jsonl (one step per line, then a summary line) and
/// dir/frames/step_XXXX.png.
void write_run_log(const RunLog& log, const std::filesystem::path& dir);
/// Accepts the run directory or the run.jsonl file. Frames are not loaded.
RunLog load_run_log(const std::filesystem::path& path);

}  // namespace scansim
