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

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scansim/annotations.hpp"
#include "scansim/prompt.hpp"
#include "scansim/retrieval.hpp"

namespace scansim {

/// Everything a backend may look at for one decision.
struct PolicyQuery {
  int step = 0;
  ScanStage prev_stage = ScanStage::ExamineCcaProximal;
  const PromptBundle* bundle = nullptr;
  Eigen::VectorXd embedding;
  /// Stages a retrieval-backed decision may land on.
  std::vector<ScanStage> stage_candidates;
  ProbePose pose;
  double rotation_accum_deg = 0.0;
};

class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  /// Throws scansim::Error on failure; the loop decides whether to retry.
  virtual PolicyDecision decide(const PolicyQuery& query) = 0;
  [[nodiscard]] virtual std::string name() const = 0;
  /// Whether the loop should retrieve contexts and assemble a prompt.
  [[nodiscard]] virtual bool wants_prompt() const { return true; }
};

/// Decision from the single nearest stored context: its stage, that stage's
/// canonical explanation and default API. Throws EmptyStore.
PolicyDecision rag_only_policy(const ContextStore& store, const Eigen::VectorXd& query_embedding,
                               const QueryFilter& filter = {});

class RagOnlyBackend final : public PolicyBackend {
 public:
  explicit RagOnlyBackend(const ContextStore& store) : store_(store) {}
  PolicyDecision decide(const PolicyQuery& query) override;
  [[nodiscard]] std::string name() const override { return "rag-only"; }
  [[nodiscard]] bool wants_prompt() const override { return false; }

 private:
  const ContextStore& store_;
};

enum class BackendMode { Remote, RagOnly, Oracle };

struct BackendConfig {
  std::string endpoint;  // http://host:port[/prefix]
  double timeout_s = 30.0;
  int retries = 2;
  BackendMode mode = BackendMode::Remote;
  void validate() const;
};

/// Request body for POST /v1/decide. Context images are read as PNG files
/// relative to image_root.
std::string build_remote_request(const PromptBundle& bundle,
                                 const std::filesystem::path& image_root);
/// Extracts the "text" field of a reply envelope. Throws ProtocolError.
std::string parse_remote_reply(const std::string& body);

/// HTTP client for an external vision-language model. The
/// SCANSIM_BACKEND_URL environment variable overrides config.endpoint.
class RemoteVlmBackend final : public PolicyBackend {
 public:
  RemoteVlmBackend(BackendConfig config, std::filesystem::path image_root);
  PolicyDecision decide(const PolicyQuery& query) override;
  [[nodiscard]] std::string name() const override { return "remote:" + config_.endpoint; }
  [[nodiscard]] const BackendConfig& config() const noexcept { return config_; }
  /// Reply text for a bundle. Throws BackendUnavailable, ProtocolError.
  std::string request(const PromptBundle& bundle);

 private:
  BackendConfig config_;
  std::filesystem::path image_root_;
};

PolicyDecision remote_vlm_policy(RemoteVlmBackend& backend, const PromptBundle& bundle);

/// Scripted policy that reads labels off the ground truth from the probe
/// pose: forward through the transverse sweep, back to the return
/// waypoint, then rotate until the full rotation is reached.
class OracleBackend final : public PolicyBackend {
 public:
  explicit OracleBackend(GroundTruthAnnotation gt, double tolerance_mm = 1e-6);
  PolicyDecision decide(const PolicyQuery& query) override;
  [[nodiscard]] std::string name() const override { return "oracle"; }
  [[nodiscard]] bool wants_prompt() const override { return false; }
  void reset() { phase_ = Phase::Forward; }

 private:
  enum class Phase { Forward, Return, Rotate, Done };
  GroundTruthAnnotation gt_;
  double tol_;
  Phase phase_ = Phase::Forward;
};

}  // namespace scansim
