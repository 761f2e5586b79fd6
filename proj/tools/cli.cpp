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

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "scansim/annotations.hpp"
#include "scansim/closed_loop.hpp"
#include "scansim/dataset.hpp"
#include "scansim/demo.hpp"
#include "scansim/error.hpp"
#include "scansim/evaluation.hpp"
#include "scansim/policy.hpp"
#include "scansim/retrieval.hpp"
#include "scansim/service.hpp"
#include "scansim/trainer.hpp"

namespace scansim::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool verbose = false;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::string generic(const fs::path& p) { return p.lexically_normal().generic_string(); }

// gen-demos ---------------------------------------------------------------

struct GenDemosArgs {
  std::string volume, waypoints, out;
  int scans = 3;
  bool balance = false;
  int balance_scans = 20;
  int window = 5;
  bool no_refine = false;
};

void gen_demos(const GenDemosArgs& a, const Globals& g, std::ostream& out, std::ostream& log) {
  const UsVolume volume = load_volume(a.volume);
  const AnnotationSet set = load_annotation_set(a.waypoints);
  const std::string volume_id = set.volume_id.empty() ? fs::path(a.volume).stem().string() : set.volume_id;
  DemoPlan plan;
  plan.full_scans = a.scans;
  plan.balance_stages = a.balance;
  plan.balance_scans = a.balance_scans;
  plan.window = a.window;
  plan.seed = g.seed;
  plan.refine = !a.no_refine;
  const auto demos = generate_demonstrations(volume, volume_id, set.waypoints, plan, MotionParams{},
                                             SliceSpec{});
  std::size_t records = 0;
  for (const auto& d : demos) {
    write_demonstration(d, fs::path(a.out) / d.demo_id);
    records += d.records.size();
    if (g.verbose) log << "wrote " << d.demo_id << " (" << d.records.size() << " records)\n";
  }
  out << Json{{"demos", demos.size()}, {"records", records}, {"out", a.out}}.dump() << "\n";
}

// build-dataset -----------------------------------------------------------

struct BuildDatasetArgs {
  std::string demos, out;
  int window = 5;
  int stride = 1;
  int per_anchor = 20;
};

void build_dataset(const BuildDatasetArgs& a, const Globals& g, std::ostream& out) {
  DatasetBuildOptions opt;
  opt.window = a.window;
  opt.stride = a.stride;
  opt.per_anchor = a.per_anchor;
  opt.seed = g.seed;
  const auto s = build_datasets(a.demos, a.out, opt);
  out << Json{{"demos", s.demos},         {"skipped_demos", s.skipped_demos},
              {"dataset_a", s.dataset_a}, {"dataset_b", s.dataset_b},
              {"dataset_c", s.dataset_c}, {"triplets", s.triplets}}
             .dump()
      << "\n";
}

// train-retriever ---------------------------------------------------------

struct TrainArgs {
  std::string triplets, features = "surrogate:0", dataset, out, store_out;
  TrainConfig config;
};

void train_retriever(TrainArgs a, const Globals& g, std::ostream& out, std::ostream& log) {
  const fs::path triplet_path = a.triplets;
  const fs::path dataset_path =
      a.dataset.empty() ? triplet_path.parent_path() / "dataset_a.jsonl" : fs::path(a.dataset);
  const fs::path base = dataset_path.parent_path();
  const auto entries = load_dataset_a(dataset_path);
  const auto triplets = load_triplets(triplet_path);
  FeatureSource features = FeatureSource::parse(a.features);
  const TrainingSet set = prepare_training_set(entries, triplets, features, base);
  a.config.seed = g.seed;
  const auto result = train_resmlp(set.inputs, set.triplets, a.config, [&](int epoch, double loss) {
    if (g.verbose) log << "epoch " << epoch << " loss " << loss << "\n";
  });

  const fs::path model_path = a.out;
  save_resmlp(result.params, model_path);
  Json history{{"train_loss", result.train_loss}, {"val_loss", result.val_loss}, {"steps", result.steps}};
  write_file(fs::path(a.out + ".history.json"), history.dump(2) + "\n");

  // Store image refs and the model path are relative to the store file.
  const fs::path store_path = a.store_out.empty() ? fs::path(model_path).replace_extension(".ctxdb")
                                                  : fs::path(a.store_out);
  const fs::path store_dir = fs::absolute(store_path).parent_path();
  ContextEmbedder embedder(result.params, std::move(features));
  ContextStore store = build_context_store(entries, embedder, base);
  ContextStore rebased(store.dim());
  for (std::size_t i = 0; i < store.size(); ++i) {
    ContextRecord r = store.record(i);
    r.first_image_ref = generic(fs::relative(fs::absolute(base / r.first_image_ref), store_dir));
    r.last_image_ref = generic(fs::relative(fs::absolute(base / r.last_image_ref), store_dir));
    rebased.add(std::move(r), store.embedding(i));
  }
  rebased.encoder_spec = store.encoder_spec;
  rebased.model_ref = generic(fs::relative(fs::absolute(model_path), store_dir));
  save_store(rebased, store_path);
  out << Json{{"model", a.out},
              {"store", store_path.string()},
              {"records", rebased.size()},
              {"triplets", set.triplets.size()},
              {"final_train_loss", result.train_loss.back()},
              {"final_val_loss", result.val_loss.empty() ? Json(nullptr) : Json(result.val_loss.back())}}
             .dump()
      << "\n";
}

// Store with its model, ready to embed new frames.
struct LoadedStore {
  ContextStore store;
  std::unique_ptr<ContextEmbedder> embedder;
};

LoadedStore open_store(const fs::path& path, const std::string& features_override) {
  LoadedStore s{load_store(path), nullptr};
  if (!s.store.model_ref.empty()) {
    fs::path model = s.store.model_ref;
    if (model.is_relative()) model = path.parent_path() / model;
    const std::string enc = !features_override.empty() ? features_override
                            : s.store.encoder_spec.empty() ? "surrogate:0"
                                                           : s.store.encoder_spec;
    s.embedder = std::make_unique<ContextEmbedder>(load_resmlp(model), FeatureSource::parse(enc));
  }
  return s;
}

// eval-retrieval ----------------------------------------------------------

struct EvalRetrievalArgs {
  std::string store, queries, report, features;
  std::vector<int> k = {1, 2};
  bool include_same_demo = false;
};

void eval_retrieval(const EvalRetrievalArgs& a, std::ostream& out) {
  LoadedStore s = open_store(a.store, a.features);
  const fs::path qpath = a.queries;
  const fs::path base = qpath.parent_path();
  std::vector<RetrievalQuery> queries;
  std::ifstream in(qpath);
  if (!in) throw Error(ErrorCode::MissingFile, "queries file not found: " + a.queries);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MalformedHeader, a.queries + " line " + std::to_string(n) + ": " + e.what());
    }
    RetrievalQuery q;
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      q.embedding.resize(static_cast<Eigen::Index>(e.size()));
      for (std::size_t i = 0; i < e.size(); ++i) q.embedding(static_cast<Eigen::Index>(i)) = e[i].get<double>();
      if (!j.contains("stage")) throw Error(ErrorCode::MissingField, "query line " + std::to_string(n) + " has no stage");
      q.true_stage = parse_stage(j["stage"].get<std::string>());
      q.demo_id = j.value("demo_id", "");
    } else {
      if (!s.embedder) throw Error(ErrorCode::MissingField, "store has no model to embed dataset rows");
      WindowEntry w;
      w.first_image_ref = j.at("first_img").get<std::string>();
      w.last_image_ref = j.at("last_img").get<std::string>();
      w.prev_stage = parse_stage(j.at("prev_stage").get<std::string>());
      q.embedding = s.embedder->embed_entry(w, base);
      q.true_stage = parse_stage(j.at("stage").get<std::string>());
      q.demo_id = j.value("demo_id", "");
    }
    queries.push_back(std::move(q));
  }
  std::vector<TopkReport> reports;
  for (int k : a.k) reports.push_back(topk_accuracy(s.store, queries, k, !a.include_same_demo));
  write_file(a.report, topk_reports_to_json(reports));
  Json summary = Json::object();
  for (const auto& r : reports) summary["top" + std::to_string(r.k)] = {{"overall", r.overall}, {"average", r.average}};
  summary["queries"] = queries.size();
  out << summary.dump() << "\n";
}

// run-loop ----------------------------------------------------------------

struct RunLoopArgs {
  std::string volume, store, backend = "rag-only", out, start, waypoints, features;
  int k = 2;
  int max_steps = 500;
  int window = 5;
  int frame_gap = 4;
  int retries = 1;
  double timeout_s = 30.0;
  bool no_perturb = false;
  bool timing = false;
};

void run_loop(const RunLoopArgs& a, const Globals& g, std::ostream& out) {
  const UsVolume volume = load_volume(a.volume);
  std::optional<LoadedStore> store;
  if (!a.store.empty()) store = open_store(a.store, a.features);

  std::unique_ptr<PolicyBackend> backend;
  std::optional<GroundTruthAnnotation> gt;
  if (a.backend == "rag-only") {
    if (!store || !store->embedder) {
      throw Error(ErrorCode::BackendUnavailable, "rag-only needs --store with a trained model");
    }
    backend = std::make_unique<RagOnlyBackend>(store->store);
  } else if (a.backend.rfind("oracle:", 0) == 0) {
    gt = load_ground_truth(a.backend.substr(7));
    backend = std::make_unique<OracleBackend>(*gt);
  } else if (a.backend.rfind("http://", 0) == 0) {
    BackendConfig cfg;
    cfg.endpoint = a.backend;
    cfg.timeout_s = a.timeout_s;
    backend = std::make_unique<RemoteVlmBackend>(cfg, a.store.empty() ? fs::path(".")
                                                                      : fs::path(a.store).parent_path());
  } else {
    throw Error(ErrorCode::InvalidArgument,
                "unknown backend '" + a.backend + "' (expected rag-only, oracle:<gt.json> or http://...)");
  }

  ProbePose start;
  if (!a.start.empty()) {
    start = parse_wire_pose(a.start);
  } else if (!a.waypoints.empty()) {
    const auto set = load_annotation_set(a.waypoints);
    if (set.waypoints.empty()) throw Error(ErrorCode::MissingField, "waypoint file has no waypoints");
    start = set.waypoints.front().pose;
  } else if (gt) {
    start = gt->start_pose();
  } else {
    throw Error(ErrorCode::MissingField, "no start pose: pass --start or --waypoints");
  }

  LoopParams p;
  p.k = a.k;
  p.max_steps = a.max_steps;
  p.window = a.window;
  p.frame_gap = a.frame_gap;
  p.retries = a.retries;
  p.perturb = !a.no_perturb;
  p.record_timing = a.timing;
  p.seed = g.seed;
  p.run_id = fs::path(a.out).filename().string();
  if (p.run_id.empty()) p.run_id = "run";
  RunLog log = run_closed_loop(volume, *backend, store ? &store->store : nullptr,
                               store && store->embedder ? store->embedder.get() : nullptr, start, p);
  log.volume_id = fs::path(a.volume).stem().string();
  log.volume_path = fs::absolute(a.volume).lexically_normal().string();
  write_run_log(log, a.out);
  out << run_summary_to_json(log) << "\n";
}

// eval-run ----------------------------------------------------------------

struct EvalRunArgs {
  std::string log, gt, report, volume;
};

void eval_run(const EvalRunArgs& a, std::ostream& out) {
  const RunLog log = load_run_log(a.log);
  const GroundTruthAnnotation gt = load_ground_truth(a.gt);
  const std::string vpath = !a.volume.empty() ? a.volume : log.volume_path;
  if (vpath.empty()) throw Error(ErrorCode::MissingField, "run log names no volume; pass --volume");
  const UsVolume volume = load_volume(vpath);
  const EvalReport rep = eval_stage_accuracy(log, gt, volume, SliceSpec{});
  write_file(a.report, eval_report_to_json(rep));
  out << Json{{"average", rep.average}, {"termination", termination_name(log.termination)}}.dump() << "\n";
}

// serve -------------------------------------------------------------------

struct ServeArgs {
  std::string volumes, store, data, host = "127.0.0.1";
  int port = 8080;
};

void serve(const ServeArgs& a, const Globals& g, std::ostream& out) {
  ServiceConfig cfg;
  cfg.volumes_dir = a.volumes;
  cfg.data_dir = a.data.empty() ? fs::path(a.volumes) : fs::path(a.data);
  if (!a.store.empty()) cfg.store_path = fs::path(a.store);
  cfg.host = a.host;
  cfg.port = a.port;
  cfg.loop.seed = g.seed;
  Service service(cfg);
  out << "listening on http://" << a.host << ":" << a.port << std::endl;
  service.run();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-loop carotid ultrasound scanning simulator with retrieval-augmented decisions",
               "scansim"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_flag("--verbose", g.verbose, "Progress messages on stderr");
  app.set_config("--config", "", "Read flags from a key=value file; command-line flags win");

  GenDemosArgs gd;
  auto* c_gd = app.add_subcommand("gen-demos", "Generate expert demonstrations from annotated waypoints");
  c_gd->add_option("--volume", gd.volume, "Input .usvol")->required();
  c_gd->add_option("--waypoints", gd.waypoints, "Annotation set JSON with waypoints")->required();
  c_gd->add_option("--scans", gd.scans, "Full scans per volume")->capture_default_str();
  c_gd->add_flag("--balance-stages", gd.balance, "Add short scans around sparse stages");
  c_gd->add_option("--balance-scans", gd.balance_scans, "Number of balancing scans")->capture_default_str();
  c_gd->add_option("--window", gd.window, "Window length used to size balancing scans")->capture_default_str();
  c_gd->add_flag("--no-refine", gd.no_refine, "Skip centroid refinement of waypoints");
  c_gd->add_option("--out", gd.out, "Output directory")->required();

  BuildDatasetArgs bd;
  auto* c_bd = app.add_subcommand("build-dataset", "Build datasets A/B/C and triplets from demonstrations");
  c_bd->add_option("--demos", bd.demos, "Directory of demonstrations")->required();
  c_bd->add_option("--window", bd.window, "Sliding window length")->capture_default_str();
  c_bd->add_option("--stride", bd.stride, "Window stride")->capture_default_str();
  c_bd->add_option("--per-anchor", bd.per_anchor, "Triplets per anchor")->capture_default_str();
  c_bd->add_option("--out", bd.out, "Output directory")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train-retriever", "Train the retrieval embedder with the triplet loss");
  c_tr->add_option("--triplets", tr.triplets, "triplets.jsonl")->required();
  c_tr->add_option("--features", tr.features, "Feature file or surrogate:<seed>")->capture_default_str();
  c_tr->add_option("--dataset", tr.dataset, "dataset_a.jsonl (default: next to the triplets)");
  c_tr->add_option("--epochs", tr.config.epochs)->capture_default_str();
  c_tr->add_option("--lr", tr.config.learning_rate)->capture_default_str();
  c_tr->add_option("--batch", tr.config.batch_size)->capture_default_str();
  c_tr->add_option("--val-batch", tr.config.val_batch_size)->capture_default_str();
  c_tr->add_option("--weight-decay", tr.config.weight_decay)->capture_default_str();
  c_tr->add_option("--val-fraction", tr.config.val_fraction)->capture_default_str();
  c_tr->add_option("--margin", tr.config.margin)->capture_default_str();
  c_tr->add_option("--out", tr.out, "Output .resmlp")->required();
  c_tr->add_option("--store-out", tr.store_out, "Output .ctxdb (default: --out with .ctxdb)");

  EvalRetrievalArgs er;
  auto* c_er = app.add_subcommand("eval-retrieval", "Top@k retrieval accuracy");
  c_er->add_option("--store", er.store, "Context store .ctxdb")->required();
  c_er->add_option("--queries", er.queries, "JSONL of embeddings or dataset-A rows")->required();
  c_er->add_option("--k", er.k, "One or more k values")->delimiter(',')->capture_default_str();
  c_er->add_option("--report", er.report, "Output report JSON")->required();
  c_er->add_option("--features", er.features, "Override the store's feature source");
  c_er->add_flag("--include-same-demo", er.include_same_demo,
                 "Keep records from the query's own demonstration");

  RunLoopArgs rl;
  auto* c_rl = app.add_subcommand("run-loop", "Run the closed scanning loop");
  c_rl->add_option("--volume", rl.volume, "Input .usvol")->required();
  c_rl->add_option("--store", rl.store, "Context store .ctxdb");
  c_rl->add_option("--backend", rl.backend, "rag-only, oracle:<gt.json> or http://host:port")
      ->capture_default_str();
  c_rl->add_option("--k", rl.k)->capture_default_str();
  c_rl->add_option("--max-steps", rl.max_steps)->capture_default_str();
  c_rl->add_option("--window", rl.window)->capture_default_str();
  c_rl->add_option("--frame-gap", rl.frame_gap)->capture_default_str();
  c_rl->add_option("--retries", rl.retries, "Extra attempts after a failed decision")->capture_default_str();
  c_rl->add_option("--timeout", rl.timeout_s, "Remote backend timeout in seconds")->capture_default_str();
  c_rl->add_option("--start", rl.start, "Start pose px,py,pz,rx,ry,rz");
  c_rl->add_option("--waypoints", rl.waypoints, "Annotation set; the first waypoint is the start");
  c_rl->add_option("--features", rl.features, "Override the store's feature source");
  c_rl->add_flag("--no-perturb", rl.no_perturb, "Disable motion perturbation");
  c_rl->add_flag("--timing", rl.timing, "Record wall-clock latency per step");
  c_rl->add_option("--out", rl.out, "Output run directory")->required();

  EvalRunArgs ev;
  auto* c_ev = app.add_subcommand("eval-run", "Stage-level accuracy of a run log");
  c_ev->add_option("--log", ev.log, "Run directory or run.jsonl")->required();
  c_ev->add_option("--gt", ev.gt, "Ground-truth JSON")->required();
  c_ev->add_option("--report", ev.report, "Output report JSON")->required();
  c_ev->add_option("--volume", ev.volume, "Volume (default: the one named in the log)");

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("serve", "HTTP service for slicing, annotations, retrieval and runs");
  c_sv->add_option("--volumes", sv.volumes, "Directory of .usvol files")->required();
  c_sv->add_option("--store", sv.store, "Context store .ctxdb");
  c_sv->add_option("--data", sv.data, "Annotation and run directory (default: --volumes)");
  c_sv->add_option("--host", sv.host)->capture_default_str();
  c_sv->add_option("--port", sv.port)->capture_default_str();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("scansim");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::RequiredError& e) {
    err << "usage error: missing required flag: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c_gd->parsed()) gen_demos(gd, g, out, err);
    else if (c_bd->parsed()) build_dataset(bd, g, out);
    else if (c_tr->parsed()) train_retriever(tr, g, out, err);
    else if (c_er->parsed()) eval_retrieval(er, out);
    else if (c_rl->parsed()) run_loop(rl, g, out);
    else if (c_ev->parsed()) eval_run(ev, out);
    else if (c_sv->parsed()) serve(sv, g, out);
  } catch (const Error& e) {
    err << "error code=" << error_code_name(e.code()) << " message=" << Json(std::string(e.what())).dump()
        << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error code=IoError message=" << Json(std::string(e.what())).dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace scansim::cli
