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

#include "scansim/closed_loop.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <numbers>

#include "json_io.hpp"
#include "scansim/error.hpp"
#include "scansim/image_io.hpp"

namespace scansim {

using detail::Json;

void LoopParams::validate() const {
  if (window < 2 || frame_gap < 1 || frame_gap >= window || k < 0 || max_steps < 1 ||
      retries < 0 || out_of_volume_margin_mm < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid loop parameters");
  }
  motion.validate();
  slice.validate();
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "Completed";
    case Termination::MaxSteps: return "MaxSteps";
    case Termination::BackendFailure: return "BackendFailure";
    case Termination::OutOfVolume: return "OutOfVolume";
    case Termination::Aborted: return "Aborted";
  }
  return "Unknown";
}

Termination parse_termination(std::string_view text) {
  for (auto t : {Termination::Completed, Termination::MaxSteps, Termination::BackendFailure,
                 Termination::OutOfVolume, Termination::Aborted}) {
    if (termination_name(t) == text) return t;
  }
  throw Error(ErrorCode::MalformedHeader, "unknown termination reason: " + std::string(text));
}

RunLog run_closed_loop(const UsVolume& volume, PolicyBackend& backend, const ContextStore* store,
                       const ContextEmbedder* embedder, const ProbePose& start,
                       const LoopParams& params, const LoopHooks& hooks) {
  params.validate();
  validate_pose(start);
  const bool retrieve = params.k > 0 && store && embedder && !store->empty();

  RunLog log;
  log.run_id = params.run_id;
  log.backend = backend.name();
  log.seed = params.seed;

  Rng rng(derive_seed(params.seed, 0x100F));
  ProbePose pose = start;
  ScanStage prev_stage = ScanStage::ExamineCcaProximal;
  std::deque<SliceImage> buffer;
  double rotation_accum = 0.0;
  int retract_index = 0;
  const double tol = 1e-9;

  for (int t = 0;; ++t) {
    if (t >= params.max_steps) {
      log.termination = Termination::MaxSteps;
      break;
    }
    if (hooks.checkpoint && !hooks.checkpoint()) {
      log.termination = Termination::Aborted;
      break;
    }
    if (!inside_bounds(volume, pose.position, params.out_of_volume_margin_mm)) {
      log.termination = Termination::OutOfVolume;
      log.detail = "probe left the volume at step " + std::to_string(t);
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();

    RunStep rec;
    rec.step = t;
    rec.pose = pose;
    rec.image = sample_slice(volume, pose, params.slice);
    rec.image_digest = image_digest(rec.image);
    rec.prev_stage = prev_stage;
    rec.rotation_accum_deg = rotation_accum;
    buffer.push_back(rec.image);
    while (static_cast<int>(buffer.size()) > params.window) buffer.pop_front();
    const std::size_t gap_index =
        buffer.size() - 1 >= static_cast<std::size_t>(params.frame_gap)
            ? buffer.size() - 1 - static_cast<std::size_t>(params.frame_gap)
            : 0;
    const std::array<SliceImage, 2> pair = {buffer[gap_index], buffer.back()};

    PolicyQuery query;
    query.step = t;
    query.prev_stage = prev_stage;
    query.pose = pose;
    query.rotation_accum_deg = rotation_accum;
    if (params.restrict_to_next_stages) query.stage_candidates = next_stage_candidates(prev_stage);

    std::vector<ContextRecord> contexts;
    if (retrieve) {
      query.embedding = embedder->embed_images(pair[0], pair[1], prev_stage);
      QueryFilter filter;
      filter.stages = query.stage_candidates;
      auto result = store->query(query.embedding, params.k, filter);
      if (static_cast<int>(result.hits.size()) < params.k) result = store->query(query.embedding, params.k);
      for (const auto& h : result.hits) {
        rec.retrieved.push_back({h.id, h.score});
        contexts.push_back(store->record(h.index));
      }
    }
    PromptBundle bundle;
    if (backend.wants_prompt()) {
      bundle = assemble_prompt(prev_stage, contexts, pair, static_cast<int>(contexts.size()));
      query.bundle = &bundle;
    }

    std::optional<PolicyDecision> decision;
    std::string failure;
    for (int attempt = 0; attempt <= params.retries; ++attempt) {
      rec.attempts = attempt + 1;
      try {
        decision = backend.decide(query);
        break;
      } catch (const Error& e) {
        failure = std::string(error_code_name(e.code())) + ": " + e.what();
      }
    }
    if (!decision) {
      log.termination = Termination::BackendFailure;
      log.detail = failure;
      break;
    }
    rec.decision = *decision;
    rec.executed_api = decision->next_api;
    if (hooks.take_override) {
      if (auto o = hooks.take_override()) {
        rec.executed_api = *o;
        rec.override_applied = true;
      }
    }
    if (params.record_timing) {
      rec.latency_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }

    const bool finished =
        !rec.executed_api ||
        (decision->stage == ScanStage::LongitudinalScanCompleted &&
         rotation_accum >= params.motion.rotation_total_deg - tol);
    const NextApi executed = rec.executed_api;
    prev_stage = decision->stage;
    log.steps.push_back(std::move(rec));
    if (hooks.on_step) hooks.on_step(log.steps.back());
    if (finished) {
      log.termination = Termination::Completed;
      break;
    }

    const ApiCommand cmd = *executed;
    if (cmd == ApiCommand::RotationClockwise) {
      retract_index = 0;
      // At the rotation cap the command is a no-op.
      if (rotation_accum + params.motion.rotation_step_deg <= params.motion.rotation_total_deg + tol) {
        pose = transform_pose(pose, api_to_motion(cmd, params.motion, 0, nullptr));
        rotation_accum += params.motion.rotation_step_deg;
      }
    } else {
      const int idx = cmd == ApiCommand::TrackingBackward ? retract_index : 0;
      pose = transform_pose(pose, api_to_motion(cmd, params.motion, idx,
                                                params.perturb ? &rng : nullptr));
      retract_index = cmd == ApiCommand::TrackingBackward ? retract_index + 1 : 0;
    }
  }
  return log;
}

namespace {

std::string frame_ref(int step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "frames/step_%04d.png", step);
  return buf;
}

}  // namespace

std::string run_step_to_json(const RunStep& s) {
  Json retrieved = Json::array();
  for (const auto& r : s.retrieved) retrieved.push_back({{"id", r.id}, {"score", r.score}});
  Json pose = detail::pose_to_json_exact(s.pose);
  pose["quaternion_wxyz"] = to_quaternion(s.pose.orientation);
  Json j{{"step", s.step},
         {"pose", pose},
         {"image_ref", s.image_ref.empty() ? frame_ref(s.step) : s.image_ref},
         {"image_digest", s.image_digest},
         {"prev_stage", stage_name(s.prev_stage)},
         {"retrieved_ids", retrieved},
         {"decision",
          {{"stage", stage_name(s.decision.stage)},
           {"explanation", s.decision.explanation},
           {"next_api", next_api_name(s.decision.next_api)}}},
         {"executed_api", next_api_name(s.executed_api)},
         {"override", s.override_applied},
         {"rotation_accum_deg", s.rotation_accum_deg},
         {"attempts", s.attempts},
         {"latency_ms", s.latency_ms}};
  return j.dump();
}

std::string run_summary_to_json(const RunLog& log) {
  Json stages = Json::array();
  for (const auto& s : log.steps) {
    const auto name = std::string(stage_name(s.decision.stage));
    if (stages.empty() || stages.back() != name) stages.push_back(name);
  }
  Json j{{"summary", true},
         {"run_id", log.run_id},
         {"volume_id", log.volume_id},
         {"volume_path", log.volume_path},
         {"backend", log.backend},
         {"seed", log.seed},
         {"steps", log.steps.size()},
         {"termination", termination_name(log.termination)},
         {"detail", log.detail},
         {"stage_sequence", stages}};
  return j.dump();
}

void write_run_log(const RunLog& log, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "frames");
  std::string text;
  for (const auto& s : log.steps) {
    if (!s.image.pixels.empty()) write_png(s.image, dir / frame_ref(s.step));
    text += run_step_to_json(s) + "\n";
  }
  text += run_summary_to_json(log) + "\n";
  detail::write_text_file(dir / "run.jsonl", text);
}

RunLog load_run_log(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / "run.jsonl" : path;
  RunLog log;
  bool have_summary = false;
  try {
    for (const auto& j : detail::read_jsonl_file(file)) {
      if (j.value("summary", false)) {
        log.run_id = j.value("run_id", "");
        log.volume_id = j.value("volume_id", "");
        log.volume_path = j.value("volume_path", "");
        log.backend = j.value("backend", "");
        log.seed = j.value("seed", std::uint64_t{0});
        log.termination = parse_termination(j.at("termination").get<std::string>());
        log.detail = j.value("detail", "");
        have_summary = true;
        continue;
      }
      RunStep s;
      s.step = j.at("step").get<int>();
      s.pose = detail::pose_from_json(j.at("pose"));
      s.image_ref = j.value("image_ref", "");
      s.image_digest = j.value("image_digest", "");
      s.prev_stage = parse_stage(j.at("prev_stage").get<std::string>());
      for (const auto& r : j.at("retrieved_ids")) {
        s.retrieved.push_back({r.at("id").get<std::string>(), r.at("score").get<double>()});
      }
      const auto& d = j.at("decision");
      s.decision.stage = parse_stage(d.at("stage").get<std::string>());
      s.decision.explanation = d.at("explanation").get<std::string>();
      s.decision.next_api = parse_next_api(d.at("next_api").get<std::string>());
      s.executed_api = parse_next_api(j.at("executed_api").get<std::string>());
      s.override_applied = j.value("override", false);
      s.rotation_accum_deg = j.value("rotation_accum_deg", 0.0);
      s.attempts = j.value("attempts", 1);
      s.latency_ms = j.value("latency_ms", 0.0);
      if (s.step != static_cast<int>(log.steps.size())) {
        throw Error(ErrorCode::MalformedHeader, file.string() + ": step indices are not contiguous");
      }
      log.steps.push_back(std::move(s));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, file.string() + ": " + e.what());
  }
  if (!have_summary) throw Error(ErrorCode::MalformedHeader, file.string() + ": missing summary line");
  return log;
}

}  // namespace scansim
