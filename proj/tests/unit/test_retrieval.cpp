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

#include "doctest.h"

#include "../support/oracles.hpp"
#include "scansim/error.hpp"
#include "scansim/retrieval.hpp"
#include "scansim/rng.hpp"

using namespace scansim;

namespace {

ContextRecord rec(const std::string& id, ScanStage st, const std::string& demo = "") {
  ContextRecord r;
  r.id = id;
  r.stage = st;
  r.prev_stage = st;
  r.demo_id = demo;
  r.explanation = std::string(stage_explanation(st));
  r.next_api = default_next_api(st);
  return r;
}

Eigen::VectorXd randn(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected scansim::Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("store: add, duplicates, invalid embeddings") {
  ContextStore s(4);
  CHECK(code_of([&] { (void)s.query(Eigen::Vector4d(1, 0, 0, 0), 1); }) == ErrorCode::EmptyStore);
  s.add(rec("a", ScanStage::ExamineCcaProximal), Eigen::Vector4d(1, 2, 3, 4));
  CHECK(s.size() == 1);
  CHECK(code_of([&] { s.add(rec("a", ScanStage::ExamineCcaDistal), Eigen::Vector4d(1, 0, 0, 0)); }) ==
        ErrorCode::DuplicateId);
  CHECK(s.size() == 1);
  CHECK(s.record(0).stage == ScanStage::ExamineCcaProximal);
  CHECK(code_of([&] { s.add(rec("z", ScanStage::ExamineCcaDistal), Eigen::Vector4d::Zero()); }) ==
        ErrorCode::ZeroEmbedding);
  CHECK(code_of([&] { s.add(rec("n", ScanStage::ExamineCcaDistal), Eigen::Vector4d(std::nan(""), 0, 0, 1)); }) ==
        ErrorCode::ZeroEmbedding);
  CHECK(code_of([&] { s.add(rec("w", ScanStage::ExamineCcaDistal), Eigen::Vector3d(1, 0, 0)); }) ==
        ErrorCode::ShapeMismatch);
  CHECK(code_of([&] { (void)s.query(Eigen::Vector4d::Zero(), 1); }) == ErrorCode::ZeroQuery);
  CHECK(code_of([&] { (void)s.query(Eigen::Vector4d(1, 0, 0, 0), 0); }) == ErrorCode::InvalidArgument);
  CHECK(s.find("a") == std::optional<std::size_t>(0));
  CHECK_FALSE(s.find("b").has_value());
}

TEST_CASE("store: single record score is the cosine") {
  ContextStore s(3);
  const Eigen::Vector3d e(1, 2, 2);
  s.add(rec("only", ScanStage::ExamineBifurcation), e);
  const Eigen::Vector3d q(0, 3, 4);
  const auto r = s.query(q, 2);
  REQUIRE(r.hits.size() == 1);
  CHECK(r.hits[0].id == "only");
  CHECK(r.hits[0].score == doctest::Approx(e.dot(q) / (e.norm() * q.norm())).epsilon(1e-14));
}

TEST_CASE("store: self retrieval over 1000 records") {
  Rng rng(4);
  ContextStore s(32);
  std::vector<Eigen::VectorXd> es;
  for (int i = 0; i < 1000; ++i) {
    es.push_back(randn(rng, 32));
    s.add(rec("r" + std::to_string(i), kAllStages[i % 8]), es.back());
  }
  for (int i = 0; i < 1000; ++i) {
    const auto r = s.query(es[i], 1);
    REQUIRE(r.hits[0].index == static_cast<std::size_t>(i));
    CHECK(std::abs(r.hits[0].score - 1.0) <= 1e-12);
  }
}

TEST_CASE("store: rankings equal a brute-force cosine sort") {
  Rng rng(8);
  ContextStore s(64);
  std::vector<Eigen::VectorXd> es;
  for (int i = 0; i < 300; ++i) {
    es.push_back(randn(rng, 64));
    s.add(rec("r" + std::to_string(i), kAllStages[i % 8]), es.back());
  }
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = randn(rng, 64);
    const auto ref = scansim_test::oracle_ranking(es, q);
    const auto got = s.query(q, 300);
    REQUIRE(got.hits.size() == 300);
    for (std::size_t i = 0; i < 300; ++i) REQUIRE(got.hits[i].index == ref[i]);
    CHECK(s.query(q, 2).hits.size() == 2);
  }
}

TEST_CASE("store: ties keep insertion order; filters") {
  ContextStore s(2);
  s.add(rec("first", ScanStage::ExamineCcaProximal, "d0"), Eigen::Vector2d(1, 0));
  s.add(rec("second", ScanStage::ExamineCcaDistal, "d1"), Eigen::Vector2d(2, 0));
  s.add(rec("third", ScanStage::ExamineBifurcation, "d1"), Eigen::Vector2d(0, 1));
  const auto r = s.query(Eigen::Vector2d(1, 0), 3);
  CHECK(r.hits[0].id == "first");
  CHECK(r.hits[1].id == "second");
  QueryFilter f;
  f.stages = {ScanStage::ExamineBifurcation};
  CHECK(s.query(Eigen::Vector2d(1, 0), 2, f).hits.size() == 1);
  QueryFilter ex;
  ex.exclude_demo_id = "d0";
  CHECK(s.query(Eigen::Vector2d(1, 0), 1, ex).hits[0].id == "second");
}

TEST_CASE("store: file round trip") {
  Rng rng(5);
  ContextStore s(16);
  s.model_ref = "m.resmlp";
  s.encoder_spec = "surrogate:3";
  for (int i = 0; i < 20; ++i) {
    ContextRecord r = rec("r" + std::to_string(i), kAllStages[i % 8], "demo" + std::to_string(i % 3));
    r.first_image_ref = "a/" + std::to_string(i) + ".png";
    r.last_image_ref = "b/" + std::to_string(i) + ".png";
    r.vqa_text = "Q: x\nA: y\n";
    s.add(r, randn(rng, 16));
  }
  const auto dir = scansim_test::temp_dir("store");
  save_store(s, dir / "s.ctxdb");
  const ContextStore back = load_store(dir / "s.ctxdb");
  REQUIRE(back.size() == 20);
  CHECK(back.model_ref == "m.resmlp");
  CHECK(back.encoder_spec == "surrogate:3");
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(back.embedding(i) == s.embedding(i));
    CHECK(back.record(i).id == s.record(i).id);
    CHECK(back.record(i).last_image_ref == s.record(i).last_image_ref);
    CHECK(back.record(i).vqa_text == s.record(i).vqa_text);
    CHECK(back.record(i).next_api == s.record(i).next_api);
  }
  CHECK(code_of([&] { (void)load_store(dir / "missing.ctxdb"); }) == ErrorCode::MissingFile);
}

TEST_CASE("top@k: hand-built fixture and monotonicity") {
  ContextStore s(2);
  s.add(rec("wrong", ScanStage::ExamineCcaDistal), Eigen::Vector2d(1, 0));
  s.add(rec("right", ScanStage::ExamineCcaProximal), Eigen::Vector2d(0.9, 0.1));
  s.add(rec("far", ScanStage::ExamineBifurcation), Eigen::Vector2d(-1, 0));
  const std::vector<RetrievalQuery> q1{{Eigen::Vector2d(1, 0), ScanStage::ExamineCcaProximal, ""}};
  CHECK(topk_accuracy(s, q1, 1, false).overall == 0.0);
  CHECK(topk_accuracy(s, q1, 2, false).overall == 1.0);

  Rng rng(6);
  ContextStore big(8);
  std::vector<RetrievalQuery> qs;
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd e = randn(rng, 8);
    big.add(rec("r" + std::to_string(i), kAllStages[i % 8], "d" + std::to_string(i % 5)), e);
    qs.push_back({e, kAllStages[i % 8], "d" + std::to_string(i % 5)});
  }
  CHECK(topk_accuracy(big, qs, 1, false).overall == 1.0);
  double prev = 0.0;
  for (int k = 1; k <= 6; ++k) {
    const auto rep = topk_accuracy(big, qs, k, true);
    CHECK(rep.overall >= prev);
    prev = rep.overall;
    CHECK(rep.per_stage.size() == 8);
  }
  CHECK(code_of([&] { (void)topk_accuracy(big, {}, 1, false); }) == ErrorCode::EmptyDataset);
}

TEST_CASE("top@k: macro average over stages") {
  ContextStore s(2);
  s.add(rec("p", ScanStage::ExamineCcaProximal), Eigen::Vector2d(1, 0));
  s.add(rec("d", ScanStage::ExamineCcaDistal), Eigen::Vector2d(0, 1));
  // three proximal queries all right, one distal query wrong
  const std::vector<RetrievalQuery> qs{{Eigen::Vector2d(1, 0.1), ScanStage::ExamineCcaProximal, ""},
                                       {Eigen::Vector2d(1, 0.2), ScanStage::ExamineCcaProximal, ""},
                                       {Eigen::Vector2d(1, 0.3), ScanStage::ExamineCcaProximal, ""},
                                       {Eigen::Vector2d(1, 0.0), ScanStage::ExamineCcaDistal, ""}};
  const auto rep = topk_accuracy(s, qs, 1, false);
  CHECK(rep.overall == 0.75);
  CHECK(rep.average == 0.5);
  const std::string json = topk_reports_to_json({rep});
  CHECK(json.find("\"k\"") != std::string::npos);
}
