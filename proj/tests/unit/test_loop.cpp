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

#include "doctest.h"

#include "../support/oracles.hpp"
#include "scansim/closed_loop.hpp"
#include "scansim/error.hpp"
#include "scansim/evaluation.hpp"
#include "scansim/policy.hpp"

using namespace scansim;
using scansim_test::LogRow;

namespace {

class ForwardForever final : public PolicyBackend {
 public:
  PolicyDecision decide(const PolicyQuery&) override {
    return {ScanStage::ExamineCcaProximal, "always forward", ApiCommand::TrackingForward};
  }
  std::string name() const override { return "forward"; }
  bool wants_prompt() const override { return false; }
};

class Failing final : public PolicyBackend {
 public:
  int calls = 0;
  PolicyDecision decide(const PolicyQuery&) override {
    ++calls;
    throw Error(ErrorCode::BackendUnavailable, "down");
  }
  std::string name() const override { return "failing"; }
  bool wants_prompt() const override { return false; }
};

const GroundTruthAnnotation& phantom_gt() { return *scansim_test::carotid_phantom().annotations.ground_truth; }

RunLog oracle_run(std::uint64_t seed, bool perturb = true) {
  OracleBackend o(phantom_gt());
  LoopParams p;
  p.seed = seed;
  p.perturb = perturb;
  p.slice = SliceSpec{96, 96, 0.3};
  return run_closed_loop(scansim_test::carotid_phantom().volume, o, nullptr, nullptr,
                         phantom_gt().start_pose(), p);
}

std::vector<ScanStage> stage_sequence(const RunLog& log) {
  std::vector<ScanStage> seq;
  for (const auto& s : log.steps)
    if (seq.empty() || seq.back() != s.decision.stage) seq.push_back(s.decision.stage);
  return seq;
}

}  // namespace

TEST_CASE("closed loop: oracle on the phantom completes with a perfect score") {
  const RunLog log = oracle_run(3);
  CHECK(log.termination == Termination::Completed);
  const auto seq = stage_sequence(log);
  REQUIRE(seq.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(seq[i] == kAllStages[i]);
  const EvalReport rep =
      eval_stage_accuracy(log, phantom_gt(), scansim_test::carotid_phantom().volume, SliceSpec{96, 96, 0.3});
  CHECK(rep.average == 1.0);
  CHECK(scansim_test::run_fingerprint(log) == scansim_test::run_fingerprint(oracle_run(3)));
  CHECK(scansim_test::run_fingerprint(log) != scansim_test::run_fingerprint(oracle_run(4)));
  for (const auto& s : log.steps) {
    CHECK(s.latency_ms == 0.0);
    CHECK(s.attempts == 1);
  }
}

TEST_CASE("closed loop: a policy that never rotates cannot complete") {
  ForwardForever f;
  LoopParams p;
  p.slice = SliceSpec{32, 32, 0.5};
  const RunLog log =
      run_closed_loop(scansim_test::carotid_phantom().volume, f, nullptr, nullptr, phantom_gt().start_pose(), p);
  CHECK((log.termination == Termination::OutOfVolume || log.termination == Termination::MaxSteps));
  p.max_steps = 10;
  const RunLog short_log =
      run_closed_loop(scansim_test::carotid_phantom().volume, f, nullptr, nullptr, phantom_gt().start_pose(), p);
  CHECK(short_log.termination == Termination::MaxSteps);
  CHECK(short_log.steps.size() == 10);
}

TEST_CASE("closed loop: backend failure after one retry") {
  Failing f;
  LoopParams p;
  p.slice = SliceSpec{32, 32, 0.5};
  const RunLog log =
      run_closed_loop(scansim_test::carotid_phantom().volume, f, nullptr, nullptr, phantom_gt().start_pose(), p);
  CHECK(log.termination == Termination::BackendFailure);
  CHECK(f.calls == 2);
  CHECK(log.steps.empty());
  CHECK(log.detail.find("BackendUnavailable") != std::string::npos);
}

TEST_CASE("closed loop: hooks override, observe and abort") {
  OracleBackend o(phantom_gt());
  LoopParams p;
  p.slice = SliceSpec{32, 32, 0.5};
  p.perturb = false;
  int seen = 0, checks = 0;
  bool pending = false;
  LoopHooks h;
  h.on_step = [&](const RunStep& s) {
    ++seen;
    if (s.step == 3) pending = true;
  };
  h.take_override = [&]() -> std::optional<NextApi> {
    if (!pending) return std::nullopt;
    pending = false;
    return NextApi(ApiCommand::TrackingBackward);
  };
  h.checkpoint = [&] { return ++checks <= 8; };
  const RunLog log =
      run_closed_loop(scansim_test::carotid_phantom().volume, o, nullptr, nullptr, phantom_gt().start_pose(), p, h);
  CHECK(log.termination == Termination::Aborted);
  REQUIRE(log.steps.size() == 8);
  CHECK(seen == 8);
  CHECK(log.steps[4].override_applied);
  CHECK(log.steps[4].executed_api == ApiCommand::TrackingBackward);
  CHECK(log.steps[4].decision.next_api == ApiCommand::TrackingForward);
  CHECK(log.steps[5].pose.position.z() == doctest::Approx(log.steps[4].pose.position.z() - 2.0));
  CHECK_FALSE(log.steps[3].override_applied);
}

TEST_CASE("closed loop: run log files round trip") {
  const RunLog log = oracle_run(1);
  const auto dir = scansim_test::temp_dir("runlog");
  write_run_log(log, dir / "r");
  RunLog back = load_run_log(dir / "r");
  CHECK(back.termination == log.termination);
  REQUIRE(back.steps.size() == log.steps.size());
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    CHECK(back.steps[i].pose.position == log.steps[i].pose.position);
    CHECK(back.steps[i].pose.orientation == log.steps[i].pose.orientation);
    CHECK(back.steps[i].decision == log.steps[i].decision);
    CHECK(back.steps[i].image_digest == log.steps[i].image_digest);
    CHECK(run_step_to_json(back.steps[i]) == run_step_to_json(log.steps[i]));
  }
  CHECK(std::filesystem::exists(dir / "r" / "frames" / "step_0000.png"));
  CHECK(eval_stage_accuracy(back, phantom_gt(), scansim_test::carotid_phantom().volume, SliceSpec{96, 96, 0.3})
            .average == 1.0);
  CHECK(parse_termination("OutOfVolume") == Termination::OutOfVolume);
}

TEST_CASE("evaluator: hand-counted synthetic log") {
  const auto gt = scansim_test::synthetic_gt();
  const auto fwd = NextApi(ApiCommand::TrackingForward);
  const auto back = NextApi(ApiCommand::TrackingBackward);
  const auto rot = NextApi(ApiCommand::RotationClockwise);
  std::vector<LogRow> rows;
  for (int s = 0; s < 10; ++s) rows.push_back({double(s), ScanStage::ExamineCcaProximal, fwd, 0});
  for (int s = 10; s < 20; ++s)  // 5 of 10 right
    rows.push_back({double(s), s < 15 ? ScanStage::ExamineCcaDistal : ScanStage::ExamineCcaProximal, fwd, 0});
  for (int s = 20; s < 30; ++s)  // 7 of 10 right
    rows.push_back({double(s), s < 27 ? ScanStage::ExamineBifurcation : ScanStage::ExamineCcaDistal, fwd, 0});
  rows.push_back({30, ScanStage::TransverseScanCompleted, back, 0});
  rows.push_back({28, ScanStage::ReturnToCarotidBulb, back, 0});
  rows.push_back({26.5, ScanStage::ReturnToCarotidBulb, back, 0});
  rows.push_back({25, ScanStage::ReturnCompleted, rot, 0});
  for (int i = 0; i < 17; ++i) rows.push_back({25, ScanStage::RotateToLongitudinalView, rot, 0.3});
  rows.push_back({25, ScanStage::LongitudinalScanCompleted, std::nullopt, 0.7});
  const auto cov = scansim_test::coverage_from_pose;

  const EvalReport r = eval_stage_accuracy(scansim_test::synthetic_log(rows), gt, cov);
  CHECK(r.accuracy.at(ScanStage::ExamineCcaProximal) == 1.0);
  CHECK(r.accuracy.at(ScanStage::ExamineCcaDistal) == 0.5);
  CHECK(r.accuracy.at(ScanStage::ExamineBifurcation) == 0.7);
  CHECK(r.accuracy.at(ScanStage::TransverseScanCompleted) == 1.0);
  CHECK(r.accuracy.at(ScanStage::ReturnCompleted) == 1.0);
  CHECK(r.accuracy.at(ScanStage::LongitudinalScanCompleted) == 1.0);
  CHECK(r.accuracy.size() == 6);
  CHECK(r.average == (1.0 + 0.5 + 0.7 + 1.0 + 1.0 + 1.0) / 6.0);
  CHECK(r.gt_steps.at(ScanStage::ExamineCcaDistal) == 10);
  CHECK(r.correct_steps.at(ScanStage::ExamineCcaDistal) == 5);

  SUBCASE("completion predicted before the waypoint") {
    auto rr = rows;
    rr[29].predicted = ScanStage::TransverseScanCompleted;
    rr[30].predicted = ScanStage::ReturnToCarotidBulb;
    const EvalReport e = eval_stage_accuracy(scansim_test::synthetic_log(rr), gt, cov);
    CHECK(e.accuracy.at(ScanStage::TransverseScanCompleted) == 0.0);
    CHECK(e.accuracy.at(ScanStage::ExamineBifurcation) == 0.7);
  }
  SUBCASE("return first claimed outside the region") {
    auto rr = rows;
    rr[32].predicted = ScanStage::ReturnCompleted;  // s = 26.5
    const EvalReport e = eval_stage_accuracy(scansim_test::synthetic_log(rr), gt, cov);
    CHECK(e.accuracy.at(ScanStage::ReturnCompleted) == 0.0);
  }
  SUBCASE("longitudinal view not visible where first claimed") {
    auto rr = rows;
    rr.back().coverage = 0.5;
    const EvalReport e = eval_stage_accuracy(scansim_test::synthetic_log(rr), gt, cov);
    CHECK(e.accuracy.at(ScanStage::LongitudinalScanCompleted) == 0.0);
    rr.back().coverage = 0.6;
    CHECK(eval_stage_accuracy(scansim_test::synthetic_log(rr), gt, cov)
              .accuracy.at(ScanStage::LongitudinalScanCompleted) == 1.0);
  }
  SUBCASE("forward sweep ends at the first backward command") {
    auto rr = rows;
    rr[14].executed = back;  // later forward steps no longer count
    const EvalReport e = eval_stage_accuracy(scansim_test::synthetic_log(rr), gt, cov);
    CHECK(e.gt_steps.at(ScanStage::ExamineCcaDistal) == 5);
    CHECK(e.accuracy.at(ScanStage::ExamineCcaDistal) == 1.0);
    CHECK(e.accuracy.at(ScanStage::ExamineBifurcation) == 0.0);
  }
  SUBCASE("uncovered span and empty log") {
    auto rr = rows;
    rr[0].s = -3.0;
    CHECK_THROWS_AS(eval_stage_accuracy(scansim_test::synthetic_log(rr), gt, cov), Error);
    CHECK_THROWS_AS(eval_stage_accuracy(RunLog{}, gt, cov), Error);
  }
  const std::string json = eval_report_to_json(r);
  for (ScanStage s : kScoredStages) CHECK(json.find(std::string(stage_name(s))) != std::string::npos);
  CHECK(json.find("\"average\"") != std::string::npos);
}
