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

#include "scansim/triplet.hpp"

#include <algorithm>

#include "scansim/error.hpp"

namespace scansim {

double triplet_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n,
                    double margin) {
  if (a.size() != p.size() || a.size() != n.size()) {
    throw Error(ErrorCode::ShapeMismatch, "triplet members differ in length");
  }
  if (!(margin > 0.0)) throw Error(ErrorCode::InvalidArgument, "margin must be positive");
  return std::max((a - p).norm() - (a - n).norm() + margin, 0.0);
}

TripletBatchLoss triplet_batch_loss(const Eigen::MatrixXd& anchors,
                                    const Eigen::MatrixXd& positives,
                                    const Eigen::MatrixXd& negatives, double margin) {
  if (anchors.cols() < 1) throw Error(ErrorCode::EmptyDataset, "empty triplet batch");
  if (anchors.rows() != positives.rows() || anchors.rows() != negatives.rows() ||
      anchors.cols() != positives.cols() || anchors.cols() != negatives.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "triplet batch shapes differ");
  }
  if (!(margin > 0.0)) throw Error(ErrorCode::InvalidArgument, "margin must be positive");
  const Eigen::Index b = anchors.cols();
  TripletBatchLoss out;
  out.grad_anchor = Eigen::MatrixXd::Zero(anchors.rows(), b);
  out.grad_positive = Eigen::MatrixXd::Zero(anchors.rows(), b);
  out.grad_negative = Eigen::MatrixXd::Zero(anchors.rows(), b);
  const double scale = 1.0 / static_cast<double>(b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::VectorXd dp = anchors.col(i) - positives.col(i);
    const Eigen::VectorXd dn = anchors.col(i) - negatives.col(i);
    const double np = dp.norm();
    const double nn = dn.norm();
    const double term = np - nn + margin;
    if (term <= 0.0) continue;
    total += term;
    Eigen::VectorXd up = np > 0.0 ? Eigen::VectorXd(dp / np) : Eigen::VectorXd::Zero(dp.size());
    Eigen::VectorXd un = nn > 0.0 ? Eigen::VectorXd(dn / nn) : Eigen::VectorXd::Zero(dn.size());
    out.grad_anchor.col(i) = scale * (up - un);
    out.grad_positive.col(i) = -scale * up;
    out.grad_negative.col(i) = scale * un;
  }
  out.loss = total * scale;
  return out;
}

}  // namespace scansim
