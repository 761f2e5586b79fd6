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

#include "scansim/service.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json_io.hpp"
#include "scansim/annotations.hpp"
#include "scansim/error.hpp"
#include "scansim/image_io.hpp"
#include "scansim/policy.hpp"

namespace scansim {

namespace fs = std::filesystem;
using detail::Json;

ProbePose parse_wire_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "pose value is not a number: '" + item + "'");
    }
  }
  if (v.size() != 6) {
    throw Error(ErrorCode::InvalidArgument,
                "pose needs 6 comma-separated values (position mm, rotation vector rad)");
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "pose values must be finite");
  }
  ProbePose p;
  p.position = Vec3(v[0], v[1], v[2]);
  p.orientation = from_axis_angle(Vec3(v[3], v[4], v[5]));
  return p;
}

std::string format_wire_pose(const ProbePose& pose) {
  const Vec3 r = to_axis_angle(pose.orientation);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", pose.position.x(),
                pose.position.y(), pose.position.z(), r.x(), r.y(), r.z());
  return buf;
}

namespace {

enum class RunStatus { Pending, Running, Paused, Finished };

std::string_view status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Pending: return "Pending";
    case RunStatus::Running: return "Running";
    case RunStatus::Paused: return "Paused";
    case RunStatus::Finished: return "Finished";
  }
  return "Unknown";
}

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int http_status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingFile: return 404;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::EmptyStore: return 503;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

struct Run {
  std::string id;
  std::string volume_id;
  std::string backend_spec;
  RunStatus status = RunStatus::Pending;
  std::optional<Termination> termination;
  std::optional<NextApi> pending_override;
  std::vector<std::string> events;  // serialized step records
  std::string summary;
  int step = 0;
  std::mutex mu;
  std::condition_variable cv;
  std::thread worker;
};

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread listener;
  int bound_port = 0;
  std::atomic<bool> stopping{false};

  std::mutex volumes_mu;
  std::map<std::string, std::shared_ptr<const UsVolume>> volumes;

  std::mutex annotations_mu;

  std::unique_ptr<ContextStore> store;
  std::unique_ptr<ContextEmbedder> embedder;

  std::mutex runs_mu;
  std::map<std::string, std::shared_ptr<Run>> runs;
  int run_counter = 0;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    if (config.data_dir.empty()) config.data_dir = config.volumes_dir;
    if (!fs::is_directory(config.volumes_dir)) {
      throw Error(ErrorCode::MissingFile, "volume directory not found: " + config.volumes_dir.string());
    }
    config.loop.validate();
    if (config.store_path) load_store_and_model(*config.store_path);
    routes();
  }

  void load_store_and_model(const fs::path& path) {
    store = std::make_unique<ContextStore>(load_store(path));
    if (!store->model_ref.empty()) {
      fs::path model = store->model_ref;
      if (model.is_relative()) model = path.parent_path() / model;
      const std::string enc = store->encoder_spec.empty() ? "surrogate:0" : store->encoder_spec;
      embedder = std::make_unique<ContextEmbedder>(load_resmlp(model), FeatureSource::parse(enc));
    }
  }

  // Volumes ---------------------------------------------------------------

  std::vector<std::string> volume_ids() const {
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(config.volumes_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".usvol") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  fs::path volume_path(const std::string& id) const { return config.volumes_dir / (id + ".usvol"); }

  std::shared_ptr<const UsVolume> volume(const std::string& id) {
    std::lock_guard lock(volumes_mu);
    auto it = volumes.find(id);
    if (it != volumes.end()) return it->second;
    const fs::path p = volume_path(id);
    if (id.find('/') != std::string::npos || id.find("..") != std::string::npos || !fs::exists(p)) {
      throw HttpError{404, "MissingFile", "unknown volume '" + id + "'"};
    }
    auto v = std::make_shared<const UsVolume>(load_volume(p));
    volumes.emplace(id, v);
    return v;
  }

  fs::path annotation_path(const std::string& id) const {
    return config.data_dir / (id + ".annotations.json");
  }

  std::optional<AnnotationSet> annotations(const std::string& id) {
    std::lock_guard lock(annotations_mu);
    const fs::path p = annotation_path(id);
    if (!fs::exists(p)) return std::nullopt;
    return load_annotation_set(p);
  }

  // Helpers ---------------------------------------------------------------

  static void send_json(httplib::Response& res, const Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& code,
                         const std::string& message) {
    send_json(res, Json{{"error", code}, {"message", message}}, status);
  }

  template <class F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.message);
      } catch (const Error& e) {
        send_error(res, http_status_for(e.code()), std::string(error_code_name(e.code())), e.what());
      } catch (const Json::exception& e) {
        send_error(res, 400, "MalformedBody", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  static Json parse_body(const httplib::Request& req) {
    try {
      return Json::parse(req.body);
    } catch (const Json::exception& e) {
      throw HttpError{400, "MalformedBody", e.what()};
    }
  }

  static int int_param(const httplib::Request& req, const char* key, int fallback) {
    if (!req.has_param(key)) return fallback;
    try {
      return std::stoi(req.get_param_value(key));
    } catch (const std::exception&) {
      throw HttpError{400, "InvalidArgument", std::string("bad integer for ") + key};
    }
  }

  static double double_param(const httplib::Request& req, const char* key, double fallback) {
    if (!req.has_param(key)) return fallback;
    try {
      return std::stod(req.get_param_value(key));
    } catch (const std::exception&) {
      throw HttpError{400, "InvalidArgument", std::string("bad number for ") + key};
    }
  }

  // Runs ------------------------------------------------------------------

  std::shared_ptr<Run> find_run(const std::string& id) {
    std::lock_guard lock(runs_mu);
    auto it = runs.find(id);
    if (it == runs.end()) throw HttpError{404, "UnknownRun", "unknown run '" + id + "'"};
    return it->second;
  }

  static Json handle_json(Run& r) {
    Json j{{"run_id", r.id},
           {"volume_id", r.volume_id},
           {"backend", r.backend_spec},
           {"status", status_name(r.status)},
           {"step", r.step}};
    if (r.termination) j["termination"] = termination_name(*r.termination);
    return j;
  }

  std::unique_ptr<PolicyBackend> make_backend(const std::string& spec, const std::string& volume_id) {
    if (spec == "rag-only") {
      if (!store || !embedder) {
        throw HttpError{503, "BackendUnavailable", "rag-only needs a store with a model"};
      }
      return std::make_unique<RagOnlyBackend>(*store);
    }
    if (spec == "oracle") {
      auto set = annotations(volume_id);
      if (!set || !set->ground_truth) {
        throw HttpError{503, "BackendUnavailable", "no ground truth stored for '" + volume_id + "'"};
      }
      return std::make_unique<OracleBackend>(*set->ground_truth);
    }
    if (spec.rfind("oracle:", 0) == 0) {
      return std::make_unique<OracleBackend>(load_ground_truth(spec.substr(7)));
    }
    if (spec.rfind("http://", 0) == 0) {
      BackendConfig cfg;
      cfg.endpoint = spec;
      const fs::path root = config.store_path ? config.store_path->parent_path() : fs::path(".");
      return std::make_unique<RemoteVlmBackend>(cfg, root);
    }
    throw HttpError{400, "InvalidArgument", "unknown backend '" + spec + "'"};
  }

  void start_run(const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const std::string volume_id = detail::require(body, "volume_id").get<std::string>();
    auto vol = volume(volume_id);
    const std::string backend_spec = body.value("backend", std::string("oracle"));
    auto backend = make_backend(backend_spec, volume_id);

    LoopParams params = config.loop;
    params.k = body.value("k", params.k);
    params.max_steps = body.value("max_steps", params.max_steps);
    params.seed = body.value("seed", params.seed);
    params.perturb = body.value("perturb", params.perturb);
    params.validate();

    ProbePose start;
    if (body.contains("start")) {
      start = parse_wire_pose(body["start"].get<std::string>());
    } else {
      auto set = annotations(volume_id);
      if (set && !set->waypoints.empty()) start = set->waypoints.front().pose;
      else if (set && set->ground_truth) start = set->ground_truth->start_pose();
      else throw HttpError{400, "MissingField", "no start pose given and no annotations stored"};
    }

    auto run = std::make_shared<Run>();
    {
      std::lock_guard lock(runs_mu);
      char id[32];
      std::snprintf(id, sizeof id, "run-%04d", ++run_counter);
      run->id = id;
      params.run_id = id;
      runs.emplace(run->id, run);
    }
    run->volume_id = volume_id;
    run->backend_spec = backend_spec;

    std::shared_ptr<PolicyBackend> shared_backend(std::move(backend));
    const std::string vpath = volume_path(volume_id).string();
    run->worker = std::thread([this, run, vol, shared_backend, params, start, vpath, volume_id] {
      {
        std::lock_guard lock(run->mu);
        if (run->status == RunStatus::Pending) run->status = RunStatus::Running;
      }
      LoopHooks hooks;
      hooks.checkpoint = [this, run] {
        std::unique_lock lock(run->mu);
        run->cv.wait(lock, [&] { return run->status != RunStatus::Paused || stopping.load(); });
        return !stopping.load();
      };
      hooks.take_override = [run]() -> std::optional<NextApi> {
        std::lock_guard lock(run->mu);
        auto o = run->pending_override;
        run->pending_override.reset();
        return o;
      };
      hooks.on_step = [run](const RunStep& s) {
        std::lock_guard lock(run->mu);
        run->events.push_back(run_step_to_json(s));
        run->step = s.step + 1;
        run->cv.notify_all();
      };
      RunLog log;
      try {
        log = run_closed_loop(*vol, *shared_backend, store.get(), embedder.get(), start, params, hooks);
      } catch (const Error& e) {
        log.run_id = run->id;
        log.termination = Termination::BackendFailure;
        log.detail = e.what();
      }
      log.volume_id = volume_id;
      log.volume_path = vpath;
      try {
        write_run_log(log, config.data_dir / "runs" / run->id);
      } catch (const std::exception&) {
        // The stream still reports the outcome.
      }
      std::lock_guard lock(run->mu);
      run->termination = log.termination;
      run->summary = run_summary_to_json(log);
      run->status = RunStatus::Finished;
      run->cv.notify_all();
    });
    std::lock_guard lock(run->mu);
    send_json(res, handle_json(*run), 201);
  }

  void transition(const httplib::Request& req, httplib::Response& res, const std::string& action) {
    auto run = find_run(req.path_params.at("id"));
    std::optional<NextApi> api;
    if (action == "override") {
      const Json body = parse_body(req);
      api = parse_next_api(detail::require(body, "next_api").get<std::string>());
    }
    std::lock_guard lock(run->mu);
    if (action == "pause") {
      if (run->status != RunStatus::Running && run->status != RunStatus::Pending) {
        throw HttpError{409, "IllegalTransition", "cannot pause a run that is " +
                                                      std::string(status_name(run->status))};
      }
      run->status = RunStatus::Paused;
    } else if (action == "resume") {
      if (run->status != RunStatus::Paused) {
        throw HttpError{409, "IllegalTransition", "cannot resume a run that is " +
                                                      std::string(status_name(run->status))};
      }
      run->status = RunStatus::Running;
    } else {
      if (run->status == RunStatus::Finished) {
        throw HttpError{409, "IllegalTransition", "run already finished"};
      }
      run->pending_override = *api;
    }
    run->cv.notify_all();
    send_json(res, handle_json(*run));
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    auto run = find_run(req.path_params.at("id"));
    auto sent = std::make_shared<std::size_t>(0);
    auto done = std::make_shared<bool>(false);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, run, sent, done](std::size_t, httplib::DataSink& sink) {
          if (*done) {
            sink.done();
            return true;
          }
          std::unique_lock lock(run->mu);
          run->cv.wait_for(lock, std::chrono::milliseconds(200), [&] {
            return run->events.size() > *sent || run->status == RunStatus::Finished ||
                   stopping.load();
          });
          std::string chunk;
          while (*sent < run->events.size()) {
            chunk += "event: step\ndata: " + run->events[*sent] + "\n\n";
            ++*sent;
          }
          const bool finished = run->status == RunStatus::Finished;
          if (finished) {
            Json fin = Json::parse(run->summary);
            fin["status"] = "Finished";
            chunk += "event: finished\ndata: " + fin.dump() + "\n\n";
          }
          lock.unlock();
          if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
          if (finished || stopping.load()) {
            *done = true;
            sink.done();
          }
          return true;
        });
  }

  // Routes ----------------------------------------------------------------

  void routes() {
    server.Get("/volumes", guarded([this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      for (const auto& id : volume_ids()) {
        auto v = volume(id);
        list.push_back({{"id", id},
                        {"dims", v->dims()},
                        {"spacing_mm", detail::vec3_to_json(v->spacing())},
                        {"has_mask", v->has_mask()}});
      }
      send_json(res, Json{{"volumes", list}});
    }));

    server.Get("/volumes/:id/slice", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto v = volume(req.path_params.at("id"));
      if (!req.has_param("pose")) throw HttpError{400, "MissingField", "pose query parameter required"};
      const ProbePose pose = parse_wire_pose(req.get_param_value("pose"));
      SliceSpec spec;
      spec.width_px = int_param(req, "w", spec.width_px);
      spec.height_px = int_param(req, "h", spec.height_px);
      spec.pixel_spacing_mm = double_param(req, "px", spec.pixel_spacing_mm);
      const auto png = encode_png(sample_slice(*v, pose, spec));
      res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    }));

    server.Get("/volumes/:id/annotations",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.path_params.at("id");
                 volume(id);
                 std::lock_guard lock(annotations_mu);
                 const fs::path p = annotation_path(id);
                 if (!fs::exists(p)) throw HttpError{404, "MissingFile", "no annotations for '" + id + "'"};
                 res.set_content(annotation_set_to_json(load_annotation_set(p)), "application/json");
               }));

    server.Post("/volumes/:id/annotations",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.path_params.at("id");
                  volume(id);
                  AnnotationSet set = annotation_set_from_json(req.body);
                  if (set.volume_id.empty()) set.volume_id = id;
                  if (set.volume_id != id) {
                    throw HttpError{400, "InvalidArgument", "volume_id does not match the URL"};
                  }
                  std::lock_guard lock(annotations_mu);
                  save_annotation_set(set, annotation_path(id));
                  res.set_content(annotation_set_to_json(load_annotation_set(annotation_path(id))),
                                  "application/json");
                }));

    server.Post("/retrieval/query", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!store) throw HttpError{503, "BackendUnavailable", "service started without a store"};
      const Json body = parse_body(req);
      const int k = body.value("k", 2);
      Eigen::VectorXd q;
      if (body.contains("embedding")) {
        const auto& e = body["embedding"];
        q.resize(static_cast<Eigen::Index>(e.size()));
        for (std::size_t i = 0; i < e.size(); ++i) q(static_cast<Eigen::Index>(i)) = e[i].get<double>();
      } else if (body.contains("image_pair")) {
        if (!embedder) throw HttpError{503, "BackendUnavailable", "store has no model for image queries"};
        const auto& pair = body["image_pair"];
        if (!pair.is_array() || pair.size() != 2) {
          throw HttpError{400, "InvalidArgument", "image_pair needs two base64 PNG strings"};
        }
        const SliceImage a = decode_png(base64_decode(pair[0].get<std::string>()));
        const SliceImage b = decode_png(base64_decode(pair[1].get<std::string>()));
        const ScanStage prev = parse_stage(detail::require(body, "prev_stage").get<std::string>());
        q = embedder->embed_images(a, b, prev);
      } else {
        throw HttpError{400, "MissingField", "body needs 'embedding' or 'image_pair'"};
      }
      QueryFilter filter;
      if (body.contains("stages")) {
        for (const auto& s : body["stages"]) filter.stages.push_back(parse_stage(s.get<std::string>()));
      }
      const auto result = store->query(q, k, filter);
      Json hits = Json::array();
      for (const auto& h : result.hits) {
        const ContextRecord r = store->record(h.index);
        hits.push_back({{"id", r.id},
                        {"score", h.score},
                        {"stage", stage_name(r.stage)},
                        {"prev_stage", stage_name(r.prev_stage)},
                        {"explanation", r.explanation},
                        {"next_api", next_api_name(r.next_api)},
                        {"volume_id", r.volume_id},
                        {"demo_id", r.demo_id}});
      }
      send_json(res, Json{{"k", k}, {"results", hits}});
    }));

    server.Post("/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
      start_run(req, res);
    }));
    server.Get("/runs/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto run = find_run(req.path_params.at("id"));
      std::lock_guard lock(run->mu);
      send_json(res, handle_json(*run));
    }));
    for (const std::string action : {"pause", "resume", "override"}) {
      server.Post("/runs/:id/" + action,
                  guarded([this, action](const httplib::Request& req, httplib::Response& res) {
                    transition(req, res, action);
                  }));
    }
    server.Get("/runs/:id/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
      events(req, res);
    }));
  }

  void shutdown() {
    stopping = true;
    std::vector<std::shared_ptr<Run>> all;
    {
      std::lock_guard lock(runs_mu);
      for (auto& [id, r] : runs) all.push_back(r);
    }
    for (auto& r : all) {
      {
        std::lock_guard lock(r->mu);
        r->cv.notify_all();
      }
      if (r->worker.joinable()) r->worker.join();
    }
    server.stop();
    if (listener.joinable()) listener.join();
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

void Service::start() {
  auto& s = *impl_;
  if (s.config.port == 0) {
    s.bound_port = s.server.bind_to_any_port(s.config.host);
  } else if (s.server.bind_to_port(s.config.host, s.config.port)) {
    s.bound_port = s.config.port;
  } else {
    s.bound_port = -1;
  }
  if (s.bound_port <= 0) {
    throw Error(ErrorCode::IoError, "cannot bind " + s.config.host + ":" + std::to_string(s.config.port));
  }
  s.listener = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
}

void Service::run() {
  auto& s = *impl_;
  if (!s.server.bind_to_port(s.config.host, s.config.port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + s.config.host + ":" + std::to_string(s.config.port));
  }
  s.bound_port = s.config.port;
  s.server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->shutdown();
}

int Service::port() const { return impl_->bound_port; }

}  // namespace scansim
