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

#include "scansim/error.hpp"

namespace scansim {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::NoMask: return "NoMask";
    case ErrorCode::UnorderedWaypoints: return "UnorderedWaypoints";
    case ErrorCode::InvalidTrajectory: return "InvalidTrajectory";
    case ErrorCode::DemoTooShort: return "DemoTooShort";
    case ErrorCode::InsufficientStages: return "InsufficientStages";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ZeroEmbedding: return "ZeroEmbedding";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::ZeroQuery: return "ZeroQuery";
    case ErrorCode::ContextCountMismatch: return "ContextCountMismatch";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::UnknownStage: return "UnknownStage";
    case ErrorCode::UnknownApi: return "UnknownApi";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::UncoveredSpan: return "UncoveredSpan";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace scansim
