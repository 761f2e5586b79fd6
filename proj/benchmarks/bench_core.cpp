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

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "scansim/embedder.hpp"
#include "scansim/phantom.hpp"
#include "scansim/resmlp.hpp"
#include "scansim/retrieval.hpp"
#include "scansim/rng.hpp"
#include "scansim/trainer.hpp"
#include "scansim/triplet.hpp"
#include "scansim/volume.hpp"

using namespace scansim;

namespace {

const CarotidPhantom& phantom() {
  static const CarotidPhantom p = make_carotid_phantom(0);
  return p;
}

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_SampleSlice(benchmark::State& state) {
  const auto& ph = phantom();
  ProbePose pose = ph.annotations.waypoints[1].pose;
  const SliceSpec spec{static_cast<int>(state.range(0)), static_cast<int>(state.range(0)), 0.2};
  for (auto _ : state) benchmark::DoNotOptimize(sample_slice(ph.volume, pose, spec));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_SampleSlice)->Arg(128)->Arg(224);

void BM_ResMlpForward(benchmark::State& state) {
  const ResMlpParams p = ResMlpParams::random(kContextInputDim, kEmbeddingDim, 2, 1);
  const Eigen::MatrixXd x = gaussian(kContextInputDim, static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(resmlp_forward_batch(p, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ResMlpForward)->Arg(1)->Arg(32);

void BM_QueryTopK(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ContextStore store;
  const Eigen::MatrixXd e = gaussian(kEmbeddingDim, n, 3);
  for (int i = 0; i < n; ++i) {
    ContextRecord r;
    r.id = "r" + std::to_string(i);
    store.add(std::move(r), e.col(i));
  }
  const Eigen::VectorXd q = gaussian(kEmbeddingDim, 1, 4).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(store.query(q, 2));
}
BENCHMARK(BM_QueryTopK)->Arg(1000)->Arg(10000);

void BM_TripletStep(benchmark::State& state) {
  const ResMlpParams p = ResMlpParams::random(kContextInputDim, kEmbeddingDim, 2, 5);
  const Eigen::MatrixXd x = gaussian(kContextInputDim, 96, 6);
  std::vector<TripletIndex> batch;
  for (int i = 0; i < 32; ++i) batch.push_back({i, 32 + i, 64 + i});
  ResMlpParams grads;
  for (auto _ : state) benchmark::DoNotOptimize(triplet_batch_gradient(p, x, batch, kDefaultTripletMargin, &grads));
}
BENCHMARK(BM_TripletStep);

}  // namespace

BENCHMARK_MAIN();
