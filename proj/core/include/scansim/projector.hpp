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

#include <Eigen/Core>

namespace scansim {

inline constexpr int kProjectorTokens = 98;  // two images x 49 patch tokens
inline constexpr int kProjectorInputDim = 768;
inline constexpr int kProjectorHiddenDim = 4096;
inline constexpr int kProjectorOutputDim = 4096;

/// Two-layer visual-token projector: out = act(act(z W1^T + b1) W2^T + b2),
/// applied to each token row.
struct ProjectorParams {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // output x hidden
  Eigen::VectorXd b2;

  static ProjectorParams zeros(int input_dim, int hidden_dim, int output_dim);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static ProjectorParams random(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed);
  void validate() const;
};

/// Rows of tokens are tokens. Throws ShapeMismatch.
Eigen::MatrixXd projector_forward(const ProjectorParams& params, const Eigen::MatrixXd& tokens,
                                  bool linear = false);

}  // namespace scansim
