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
#include <vector>

#include <Eigen/Core>

namespace scansim {

/// Pointwise nonlinearity. Identity exists for linearity probes in tests.
enum class Activation { Gelu, Identity };

double gelu(double x);
double gelu_derivative(double x);

struct ResBlock {
  Eigen::MatrixXd weight;  // width x width
  Eigen::VectorXd bias;
};

/// Input affine map followed by residual blocks x -> x + W act(x) + b.
struct ResMlpParams {
  Eigen::MatrixXd w_in;  // width x input
  Eigen::VectorXd b_in;
  std::vector<ResBlock> blocks;

  [[nodiscard]] int input_dim() const { return static_cast<int>(w_in.cols()); }
  [[nodiscard]] int width() const { return static_cast<int>(w_in.rows()); }
  [[nodiscard]] std::size_t parameter_count() const;

  static ResMlpParams zeros(int input_dim, int width, int block_count);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static ResMlpParams random(int input_dim, int width, int block_count, std::uint64_t seed);

  /// Throws ShapeMismatch on inconsistent shapes, InvalidArgument on
  /// non-finite values.
  void validate() const;

  /// Flattened view in file order: w_in (row-major), b_in, then each
  /// block's weight (row-major) and bias.
  [[nodiscard]] std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& values);
};

/// Single-sample forward pass. Throws ShapeMismatch.
Eigen::VectorXd resmlp_forward(const ResMlpParams& params, const Eigen::VectorXd& input,
                               Activation act = Activation::Gelu);
/// Batched forward pass; columns are samples.
Eigen::MatrixXd resmlp_forward_batch(const ResMlpParams& params, const Eigen::MatrixXd& inputs,
                                     Activation act = Activation::Gelu);

/// Activations kept for the backward pass.
struct ResMlpTape {
  Eigen::MatrixXd input;
  /// block_inputs[i] is the input of block i; the last entry is the output.
  std::vector<Eigen::MatrixXd> block_inputs;
};

Eigen::MatrixXd resmlp_forward_tape(const ResMlpParams& params, const Eigen::MatrixXd& inputs,
                                    ResMlpTape& tape);
/// Gradients of a scalar loss given dL/d(output); same layout as params.
ResMlpParams resmlp_backward(const ResMlpParams& params, const ResMlpTape& tape,
                             const Eigen::MatrixXd& grad_output);

/// .resmlp: one JSON header line followed by little-endian f64 values in
/// flatten() order.
void save_resmlp(const ResMlpParams& params, const std::filesystem::path& path);
ResMlpParams load_resmlp(const std::filesystem::path& path);

}  // namespace scansim
