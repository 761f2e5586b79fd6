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

#include <Eigen/Core>

namespace scansim {

inline constexpr double kDefaultTripletMargin = 0.75;

/// max(|a-p| - |a-n| + margin, 0). Throws ShapeMismatch, InvalidArgument.
double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                    double margin);

struct TripletBatchLoss {
  double loss = 0.0;  // mean over the batch
  Eigen::MatrixXd grad_anchor;
  Eigen::MatrixXd grad_positive;
  Eigen::MatrixXd grad_negative;
};

/// Mean loss over columns and its gradient with respect to each column.
/// A zero distance contributes a zero subgradient for its term.
TripletBatchLoss triplet_batch_loss(const Eigen::MatrixXd& anchors,
                                    const Eigen::MatrixXd& positives,
                                    const Eigen::MatrixXd& negatives, double margin);

}  // namespace scansim
