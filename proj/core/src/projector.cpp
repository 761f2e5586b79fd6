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

#include "scansim/projector.hpp"

#include <cmath>

#include "scansim/error.hpp"
#include "scansim/resmlp.hpp"
#include "scansim/rng.hpp"

namespace scansim {

ProjectorParams ProjectorParams::zeros(int input_dim, int hidden_dim, int output_dim) {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) {
    throw Error(ErrorCode::ShapeMismatch, "invalid projector dimensions");
  }
  return {Eigen::MatrixXd::Zero(hidden_dim, input_dim), Eigen::VectorXd::Zero(hidden_dim),
          Eigen::MatrixXd::Zero(output_dim, hidden_dim), Eigen::VectorXd::Zero(output_dim)};
}

ProjectorParams ProjectorParams::random(int input_dim, int hidden_dim, int output_dim,
                                        std::uint64_t seed) {
  ProjectorParams p = zeros(input_dim, hidden_dim, output_dim);
  Rng rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& w, Eigen::VectorXd& b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
  };
  fill(p.w1, p.b1);
  fill(p.w2, p.b2);
  return p;
}

void ProjectorParams::validate() const {
  if (b1.size() != w1.rows() || w2.cols() != w1.rows() || b2.size() != w2.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "projector shape mismatch");
  }
}

Eigen::MatrixXd projector_forward(const ProjectorParams& params, const Eigen::MatrixXd& tokens,
                                  bool linear) {
  params.validate();
  if (tokens.cols() != params.w1.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "token width " + std::to_string(tokens.cols()) +
                                              " does not match projector input " +
                                              std::to_string(params.w1.cols()));
  }
  auto act = [linear](Eigen::MatrixXd& m) {
    if (!linear) m = m.unaryExpr([](double v) { return gelu(v); });
  };
  Eigen::MatrixXd hidden = tokens * params.w1.transpose();
  hidden.rowwise() += params.b1.transpose();
  act(hidden);
  Eigen::MatrixXd out = hidden * params.w2.transpose();
  out.rowwise() += params.b2.transpose();
  act(out);
  return out;
}

}  // namespace scansim
