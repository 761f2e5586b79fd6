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

// Reference implementations used only by tests. They are written from the
// definitions, deliberately without sharing code paths with the library.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scansim/annotations.hpp"
#include "scansim/closed_loop.hpp"
#include "scansim/geometry.hpp"
#include "scansim/phantom.hpp"
#include "scansim/resmlp.hpp"
#include "scansim/retrieval.hpp"
#include "scansim/trainer.hpp"
#include "scansim/projector.hpp"
#include "scansim/prompt.hpp"
#include "scansim/volume.hpp"

namespace scansim_test {

using scansim::ProbePose;
using scansim::SliceSpec;
using scansim::UsVolume;

/// Fresh empty directory under the build tree.
std::filesystem::path temp_dir(const std::string& name);

/// Smooth 32^3 volume: a sum of low-frequency sinusoids, spacing 0.7 mm.
UsVolume smooth_phantom(int n = 32);
/// Voxel value (i + 3j + 7k) mod 251 so every layer is distinct.
UsVolume gradient_phantom(int nx, int ny, int nz, double spacing);

/// Per-pixel trilinear sample as an explicit 8-corner weighted sum.
std::vector<std::uint8_t> oracle_slice(const UsVolume& v, const ProbePose& pose, const SliceSpec& s);

/// Random proper rotation from a normalized Gaussian quaternion.
Eigen::Matrix3d random_rotation(std::uint64_t& state);
double random_unit(std::uint64_t& state);  // [0, 1)

/// Forward pass with explicit loops.
Eigen::VectorXd oracle_resmlp(const scansim::ResMlpParams& p, const Eigen::VectorXd& x, bool linear = false);
Eigen::MatrixXd oracle_projector(const scansim::ProjectorParams& p, const Eigen::MatrixXd& z, bool linear = false);
double oracle_triplet(const Eigen::VectorXd& a, const Eigen::VectorXd& p, const Eigen::VectorXd& n, double beta);

/// Ids ordered by cosine with q (descending), ties by position.
std::vector<std::size_t> oracle_ranking(const std::vector<Eigen::VectorXd>& embeddings, const Eigen::VectorXd& q);

/// Dataset-A row count from line counts of every demo.jsonl below root.
std::size_t oracle_dataset_a_rows(const std::filesystem::path& root, int n, int stride);

/// Ground truth on the z axis: intervals [0,10) [10,20) [20,30),
/// completion at 30, return waypoint 24 inside region [22, 26].
scansim::GroundTruthAnnotation synthetic_gt();

/// One hand-authored log row. The pose sits at (coverage, 0, s) so the
/// coverage function below can read the visibility back from the pose.
struct LogRow {
  double s = 0.0;
  scansim::ScanStage predicted = scansim::ScanStage::ExamineCcaProximal;
  scansim::NextApi executed;
  double coverage = 0.0;
};
scansim::RunLog synthetic_log(const std::vector<LogRow>& rows);
double coverage_from_pose(const scansim::ProbePose& pose);

/// Eight Gaussian clusters, one per stage, laid out like assembled inputs:
/// two 768-d feature blocks around a per-stage center plus the stage code
/// block. Trains with the given config, then stores the training points
/// and queries with held-out points.
struct ClusterBenchmark {
  std::vector<scansim::TopkReport> before;  // k = 1, 2, 3 with the initial weights
  std::vector<scansim::TopkReport> after;   // k = 1, 2, 3 after training
  std::vector<double> epoch_losses;
  bool all_losses_finite = true;
  double seconds = 0.0;
};
ClusterBenchmark run_cluster_benchmark(const scansim::TrainConfig& config, int train_per_cluster,
                                       int held_out_per_cluster, int triplets_per_anchor,
                                       double noise_sigma);

/// Central-difference check of the batch triplet gradient on a random
/// network and random inputs. Returns the worst relative error over
/// parameter tensors, each measured as |g - g_fd| / (|g| + |g_fd|).
double triplet_gradient_check(int input_dim, int width, int blocks, std::uint64_t seed, double eps);

/// Fixed prompt input used by the golden fixture: previous stage distal CCA,
/// two contexts and two small patterned frames.
struct GoldenInput {
  scansim::ScanStage prev_stage;
  std::vector<scansim::ContextRecord> contexts;
  std::array<scansim::SliceImage, 2> images;
};
GoldenInput golden_input();
std::string read_text(const std::filesystem::path& path);

/// Golden fixtures open with a '#' license block and one blank line; these
/// split that block from the compared body.
std::string golden_body(const std::string& file_text);
std::string golden_header(const std::string& file_text);

/// Every serialized step line, the summary line and the frame digests.
std::string run_fingerprint(const scansim::RunLog& log);

/// Shared phantom built once per process.
const scansim::CarotidPhantom& carotid_phantom();

}  // namespace scansim_test
