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

#include "scansim/policy.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json_io.hpp"
#include "scansim/error.hpp"
#include "scansim/image_io.hpp"

namespace scansim {

using detail::Json;

PolicyDecision rag_only_policy(const ContextStore& store, const Eigen::VectorXd& query_embedding,
                               const QueryFilter& filter) {
  if (store.empty()) throw Error(ErrorCode::EmptyStore, "context store is empty");
  auto result = store.query(query_embedding, 1, filter);
  if (result.hits.empty()) {
    // The filter removed everything; fall back to the unrestricted store.
    result = store.query(query_embedding, 1);
  }
  const ScanStage stage = store.record(result.hits.front().index).stage;
  return {stage, std::string(stage_explanation(stage)), default_next_api(stage)};
}

PolicyDecision RagOnlyBackend::decide(const PolicyQuery& query) {
  QueryFilter filter;
  filter.stages = query.stage_candidates;
  return rag_only_policy(store_, query.embedding, filter);
}

void BackendConfig::validate() const {
  if (!(timeout_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "backend timeout must be positive");
  if (retries < 0) throw Error(ErrorCode::InvalidArgument, "backend retries must be >= 0");
}

std::string build_remote_request(const PromptBundle& bundle,
                                 const std::filesystem::path& image_root) {
  Json contexts = Json::array();
  for (const auto& c : bundle.contexts) {
    Json images = Json::array();
    for (const auto& ref : c.image_refs) {
      images.push_back(base64_encode(encode_png(read_png(image_root / ref))));
    }
    contexts.push_back({{"text", c.text}, {"images", images}});
  }
  Json query_images = Json::array();
  for (const auto& img : bundle.images) query_images.push_back(base64_encode(encode_png(img)));
  Json body{{"system", bundle.system_text},
            {"contexts", contexts},
            {"query",
             {{"prev_stage", stage_name(bundle.prev_stage)},
              {"text", bundle.query_text},
              {"questions", {kStageQuestion, kExplanationQuestion, kNextApiQuestion}},
              {"images", query_images}}}};
  return body.dump();
}

std::string parse_remote_reply(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("reply is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    throw Error(ErrorCode::ProtocolError, "reply envelope lacks a string 'text' field");
  }
  return j["text"].get<std::string>();
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.substr(0, scheme) != "http") {
    throw Error(ErrorCode::InvalidArgument, "backend endpoint must be an http:// URL: " + url);
  }
  const auto path = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, path);
  if (path != std::string::npos) e.prefix = url.substr(path);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

}  // namespace

RemoteVlmBackend::RemoteVlmBackend(BackendConfig config, std::filesystem::path image_root)
    : config_(std::move(config)), image_root_(std::move(image_root)) {
  if (const char* env = std::getenv("SCANSIM_BACKEND_URL"); env && *env) config_.endpoint = env;
  config_.validate();
  split_endpoint(config_.endpoint);
}

std::string RemoteVlmBackend::request(const PromptBundle& bundle) {
  const Endpoint ep = split_endpoint(config_.endpoint);
  const std::string body = build_remote_request(bundle, image_root_);
  httplib::Client client(ep.origin);
  const auto sec = static_cast<time_t>(config_.timeout_s);
  const auto usec = static_cast<time_t>((config_.timeout_s - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    auto res = client.Post(ep.prefix + "/v1/decide", body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::ProtocolError, "backend answered HTTP " + std::to_string(res->status));
    }
    return parse_remote_reply(res->body);
  }
  throw Error(ErrorCode::BackendUnavailable,
              config_.endpoint + " unreachable after " + std::to_string(config_.retries + 1) +
                  " attempts: " + last_error);
}

PolicyDecision RemoteVlmBackend::decide(const PolicyQuery& query) {
  if (!query.bundle) throw Error(ErrorCode::InvalidArgument, "remote backend needs a prompt");
  return parse_decision(request(*query.bundle));
}

PolicyDecision remote_vlm_policy(RemoteVlmBackend& backend, const PromptBundle& bundle) {
  return parse_decision(backend.request(bundle));
}

OracleBackend::OracleBackend(GroundTruthAnnotation gt, double tolerance_mm)
    : gt_(std::move(gt)), tol_(tolerance_mm) {
  gt_.validate();
}

PolicyDecision OracleBackend::decide(const PolicyQuery& query) {
  const double s = gt_.scan_coordinate(query.pose.position);
  auto decision = [](ScanStage st) {
    return PolicyDecision{st, std::string(stage_explanation(st)), default_next_api(st)};
  };
  switch (phase_) {
    case Phase::Forward: {
      if (s < gt_.transverse_completion_mm - tol_) {
        const auto st = gt_.forward_stage_at(s);
        return decision(st ? *st : ScanStage::ExamineCcaProximal);
      }
      phase_ = Phase::Return;
      return decision(ScanStage::TransverseScanCompleted);
    }
    case Phase::Return: {
      if (s > gt_.return_waypoint_mm + tol_) return decision(ScanStage::ReturnToCarotidBulb);
      phase_ = Phase::Rotate;
      return decision(ScanStage::ReturnCompleted);
    }
    case Phase::Rotate: {
      if (query.rotation_accum_deg < gt_.rotation_total_deg - 1e-6) {
        return decision(ScanStage::RotateToLongitudinalView);
      }
      phase_ = Phase::Done;
      return decision(ScanStage::LongitudinalScanCompleted);
    }
    case Phase::Done: break;
  }
  return decision(ScanStage::LongitudinalScanCompleted);
}

}  // namespace scansim
