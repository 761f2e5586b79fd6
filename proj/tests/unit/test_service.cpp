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

#include <chrono>
#include <thread>

#include <Eigen/Geometry>

#include <Eigen/Core>

// after Eigen: <resolv.h> defines a _res macro
#include "httplib.h"
#include "json.hpp"

#include "../support/oracles.hpp"
#include "scansim/error.hpp"
#include "scansim/image_io.hpp"
#include "scansim/prompt.hpp"
#include "scansim/service.hpp"

using namespace scansim;
using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir;
  std::unique_ptr<Service> service;
  std::unique_ptr<httplib::Client> client;

  explicit Fixture(const std::string& name, bool with_store = false) {
    dir = scansim_test::temp_dir(name);
    const auto& ph = scansim_test::carotid_phantom();
    write_volume(ph.volume, dir / "vols" / "phantom.usvol");
    save_annotation_set(ph.annotations, dir / "data" / "phantom.annotations.json");
    ServiceConfig cfg;
    cfg.volumes_dir = dir / "vols";
    cfg.data_dir = dir / "data";
    cfg.port = 0;
    cfg.loop.slice = SliceSpec{64, 64, 0.5};
    if (with_store) {
      ContextStore s(4);
      ContextRecord r;
      r.id = "a";
      r.stage = ScanStage::ExamineCcaDistal;
      s.add(r, Eigen::Vector4d(1, 0, 0, 0));
      r.id = "b";
      r.stage = ScanStage::ExamineBifurcation;
      s.add(r, Eigen::Vector4d(0, 1, 0, 0));
      r.id = "c";
      r.stage = ScanStage::ReturnCompleted;
      s.add(r, Eigen::Vector4d(0.7, 0.7, 0, 0));
      save_store(s, dir / "s.ctxdb");
      cfg.store_path = dir / "s.ctxdb";
    }
    service = std::make_unique<Service>(cfg);
    service->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", service->port());
    client->set_read_timeout(30, 0);
  }

  Json post_json(const std::string& path, const Json& body, int expect) {
    auto res = client->Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return Json::parse(res->body);
  }

  // Full SSE stream of a run, split into (event, data) pairs.
  std::vector<std::pair<std::string, Json>> events(const std::string& run_id) {
    std::string raw;
    auto res = client->Get("/runs/" + run_id + "/events", [&](const char* data, std::size_t len) {
      raw.append(data, len);
      return true;
    });
    REQUIRE(res);
    std::vector<std::pair<std::string, Json>> out;
    std::size_t pos = 0;
    while (true) {
      const auto end = raw.find("\n\n", pos);
      if (end == std::string::npos) break;
      const std::string block = raw.substr(pos, end - pos);
      pos = end + 2;
      const auto nl = block.find('\n');
      out.emplace_back(block.substr(7, nl - 7), Json::parse(block.substr(nl + 7)));
    }
    return out;
  }
};

// Model server that answers slowly with a forward decision.
class SlowStub {
 public:
  SlowStub() {
    server_.Post("/v1/decide", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(15));
      const PolicyDecision d{ScanStage::ExamineCcaProximal, "Thyroid is near the CCA", ApiCommand::TrackingForward};
      res.set_content(Json{{"text", render_decision(d)}}.dump(), "application/json");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~SlowStub() {
    server_.stop();
    thread_.join();
  }
  int port = 0;

 private:
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace

TEST_CASE("service: wire pose encoding") {
  ProbePose p;
  p.position = Vec3(1.5, -2, 3.25);
  p.orientation = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const ProbePose q = parse_wire_pose(format_wire_pose(p));
  CHECK((q.position - p.position).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((q.orientation - p.orientation).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(parse_wire_pose("0,0,5,0,0,0").position == Vec3(0, 0, 5));
  CHECK_THROWS_AS(parse_wire_pose("1,2,3"), scansim::Error);
  CHECK_THROWS_AS(parse_wire_pose("1,2,3,a,b,c"), scansim::Error);
}

TEST_CASE("service: volumes, slices and errors") {
  Fixture f("svc_slice");
  auto list = f.client->Get("/volumes");
  REQUIRE(list);
  CHECK(list->status == 200);
  const Json vols = Json::parse(list->body)["volumes"];
  REQUIRE(vols.size() == 1);
  CHECK(vols[0]["id"] == "phantom");

  const auto& v = scansim_test::carotid_phantom().volume;
  ProbePose p;
  p.position = v.origin() + Vec3(48 * 0.5, 0, 40 * 0.5);
  auto res = f.client->Get("/volumes/phantom/slice?pose=" + format_wire_pose(p) + "&w=97&h=97&px=0.5");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  const auto want = encode_png(sample_slice(v, p, SliceSpec{97, 97, 0.5}));
  CHECK(res->body == std::string(want.begin(), want.end()));
  const SliceImage got = decode_png(std::vector<std::uint8_t>(res->body.begin(), res->body.end()));
  for (int r = 0; r < 97; ++r)
    for (int c = 0; c < 97; ++c) REQUIRE(got.at(r, c) == v.at(c, r, 40));

  auto missing = f.client->Get("/volumes/nope/slice?pose=0,0,0,0,0,0");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(Json::parse(missing->body)["error"] == "MissingFile");
  auto bad = f.client->Get("/volumes/phantom/slice?pose=1,2");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(Json::parse(bad->body).contains("message"));
  auto nostore = f.client->Post("/retrieval/query", R"({"embedding":[1,0,0,0]})", "application/json");
  REQUIRE(nostore);
  CHECK(nostore->status == 503);
}

TEST_CASE("service: scripted steering matches pose composition") {
  Fixture f("svc_steer");
  const auto& ph = scansim_test::carotid_phantom();
  // arrows move 1 mm along u or w, modifier 0.1 mm, R rotates 5 degrees about v
  const char* script = "UUDRLUUuRrUUdRlUULRU";
  ProbePose pose = ph.annotations.waypoints[0].pose;
  Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
  h.topLeftCorner<3, 3>() = pose.orientation;
  h.topRightCorner<3, 1>() = pose.position;
  int steps = 0;
  for (const char* c = script; *c; ++c, ++steps) {
    Vec3 t = Vec3::Zero();
    Mat3 r = Mat3::Identity();
    switch (*c) {
      case 'U': t = Vec3(0, 0, 1); break;
      case 'D': t = Vec3(0, 0, -1); break;
      case 'L': t = Vec3(-1, 0, 0); break;
      case 'u': t = Vec3(0, 0, 0.1); break;
      case 'd': t = Vec3(0, 0, -0.1); break;
      case 'l': t = Vec3(-0.1, 0, 0); break;
      case 'r': t = Vec3(0.1, 0, 0); break;
      default: r = axis_rotation(ProbeAxis::V, 5.0 * M_PI / 180.0);
    }
    pose = transform_pose(pose, t, r);
    Eigen::Matrix4d d = Eigen::Matrix4d::Identity();
    d.topLeftCorner<3, 3>() = r;
    d.topRightCorner<3, 1>() = t;
    h = h * d;
    // Each intermediate pose is rendered by the service, as a viewer would.
    auto res = f.client->Get("/volumes/phantom/slice?pose=" + format_wire_pose(pose) + "&w=32&h=32&px=0.5");
    REQUIRE(res);
    REQUIRE(res->status == 200);
  }
  CHECK(steps == 20);
  CHECK((pose.position - h.topRightCorner<3, 1>()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((pose.orientation - h.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff() < 1e-9);
  // the wire round trip keeps the drift below the same bound
  const ProbePose wire = parse_wire_pose(format_wire_pose(pose));
  CHECK((wire.position - pose.position).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(rotation_angle(wire.orientation.transpose() * pose.orientation)) * 180 / M_PI < 1e-9);
}

TEST_CASE("service: annotations round trip byte-equal") {
  Fixture f("svc_ann");
  const auto& ph = scansim_test::carotid_phantom();
  AnnotationSet set;
  set.volume_id = "phantom";
  set.waypoints = ph.annotations.waypoints;
  set.ground_truth = ph.annotations.ground_truth;
  const std::string body = annotation_set_to_json(set);
  auto saved = f.client->Post("/volumes/phantom/annotations", body, "application/json");
  REQUIRE(saved);
  CHECK(saved->status == 200);
  auto got = f.client->Get("/volumes/phantom/annotations");
  REQUIRE(got);
  CHECK(got->body == saved->body);
  CHECK(got->body == body);
  const AnnotationSet back = annotation_set_from_json(got->body);
  REQUIRE(back.waypoints.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(back.waypoints[i].stage == kAllStages[i]);

  std::vector<Waypoint> shuffled = set.waypoints;
  std::swap(shuffled[0], shuffled[5]);
  AnnotationSet bad = set;
  bad.waypoints = shuffled;
  auto rej = f.client->Post("/volumes/phantom/annotations", annotation_set_to_json(bad), "application/json");
  REQUIRE(rej);
  CHECK(rej->status == 400);
  CHECK(Json::parse(rej->body)["error"] == "UnorderedWaypoints");
}

TEST_CASE("service: retrieval endpoint") {
  Fixture f("svc_retr", true);
  const Json r = f.post_json("/retrieval/query", {{"embedding", {1.0, 0.1, 0.0, 0.0}}, {"k", 2}}, 200);
  REQUIRE(r["results"].size() == 2);
  CHECK(r["results"][0]["id"] == "a");
  CHECK(r["results"][1]["id"] == "c");
  const Json filtered = f.post_json(
      "/retrieval/query", {{"embedding", {1.0, 0.1, 0.0, 0.0}}, {"k", 2}, {"stages", {"Examine bifurcation"}}}, 200);
  REQUIRE(filtered["results"].size() == 1);
  CHECK(filtered["results"][0]["id"] == "b");
  f.post_json("/retrieval/query", {{"embedding", {0.0, 0.0, 0.0, 0.0}}}, 400);
}

TEST_CASE("service: oracle run streams all stages and a Completed summary") {
  Fixture f("svc_run");
  const Json h = f.post_json("/runs", {{"volume_id", "phantom"}, {"backend", "oracle"}, {"seed", 2}}, 201);
  const std::string id = h["run_id"];
  CHECK(id == "run-0001");
  const auto evs = f.events(id);
  REQUIRE(evs.size() >= 2);
  std::vector<std::string> stages;
  for (std::size_t i = 0; i + 1 < evs.size(); ++i) {
    CHECK(evs[i].first == "step");
    const std::string st = evs[i].second["decision"]["stage"];
    if (stages.empty() || stages.back() != st) stages.push_back(st);
  }
  REQUIRE(stages.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(stages[i] == stage_name(kAllStages[i]));
  CHECK(evs.back().first == "finished");
  CHECK(evs.back().second["termination"] == "Completed");
  CHECK(evs.back().second["status"] == "Finished");

  auto st = f.client->Get("/runs/" + id);
  REQUIRE(st);
  CHECK(Json::parse(st->body)["status"] == "Finished");
  f.post_json("/runs/" + id + "/pause", Json::object(), 409);
  f.post_json("/runs/" + id + "/override", {{"next_api", "tracking backward"}}, 409);
  CHECK(fs::exists(f.dir / "data" / "runs" / id / "run.jsonl"));
  auto unknown = f.client->Get("/runs/run-9999");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
}

TEST_CASE("service: pause, override and resume a live run") {
  SlowStub stub;
  Fixture f("svc_ctrl");
  const Json h = f.post_json("/runs",
                             {{"volume_id", "phantom"},
                              {"backend", "http://127.0.0.1:" + std::to_string(stub.port)},
                              {"k", 0},
                              {"max_steps", 30}},
                             201);
  const std::string id = h["run_id"];
  const Json paused = f.post_json("/runs/" + id + "/pause", Json::object(), 200);
  CHECK(paused["status"] == "Paused");
  f.post_json("/runs/" + id + "/pause", Json::object(), 409);
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  const int at_pause = Json::parse(f.client->Get("/runs/" + id)->body)["step"];
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  CHECK(Json::parse(f.client->Get("/runs/" + id)->body)["step"] == at_pause);
  f.post_json("/runs/" + id + "/override", {{"next_api", "tracking backward"}}, 200);
  f.post_json("/runs/" + id + "/override", {{"next_api", "sideways"}}, 400);
  f.post_json("/runs/" + id + "/resume", Json::object(), 200);
  f.post_json("/runs/" + id + "/resume", Json::object(), 409);
  const auto evs = f.events(id);
  int first_override = -1, overrides = 0;
  for (const auto& [kind, data] : evs) {
    if (kind != "step" || !data["override"].get<bool>()) continue;
    ++overrides;
    if (first_override < 0) first_override = data["step"];
    CHECK(data["executed_api"] == "tracking backward");
    CHECK(data["decision"]["next_api"] == "tracking forward");
  }
  CHECK(overrides == 1);
  CHECK(first_override >= at_pause);
  CHECK(evs.back().first == "finished");
  CHECK(evs.back().second["termination"] == "MaxSteps");
}
