// Copyright 2026 The mogcn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mogcn/background.hpp"
#include "mogcn/config.hpp"
#include "mogcn/features.hpp"
#include "mogcn/gcn.hpp"
#include "mogcn/graph.hpp"
#include "mogcn/media_io.hpp"
#include "mogcn/protocol.hpp"

namespace mogcn {

// Output layout under RunConfig::output_dir:
//
//   features/  features.bin catalog.json labels.json instances/ backgrounds/
//   graph/     graph.csr edges.txt graph_meta.json
//   runs/p<partition>_d<density>_r<rep>/
//              split.json model.bin history.csv predictions.csv report.csv
//   report/    summary.json sequences.csv challenges.csv
//   manifest.json, failures.json (only when a run failed)
//
// Every stage directory holds stage.json with the hash of the settings it
// was produced from; a stage whose hash matches is reused.

namespace fs = std::filesystem;

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string density_tag(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", d);
  return buf;
}

inline std::string run_name(int partition, double density, int rep) {
  return "p" + std::to_string(partition) + "_d" + density_tag(density) + "_r" + std::to_string(rep);
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  auto is = open_in(path);
  try {
    nlohmann::json j;
    is >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Settings digests.

inline nlohmann::json videos_json(const RunConfig& cfg) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : cfg.videos)
    arr.push_back({{"id", v.id}, {"challenge", v.challenge}, {"frames", v.frames},
                   {"frame_pattern", v.frame_pattern}, {"instances", v.instances},
                   {"instance_pattern", v.instance_pattern}, {"ground_truth", v.ground_truth},
                   {"gt_pattern", v.gt_pattern}, {"gt_first", v.gt_first}, {"gt_last", v.gt_last}});
  return arr;
}

inline nlohmann::json features_settings(const RunConfig& cfg) {
  const auto& l = cfg.layout;
  return {{"version", kVersion},
          {"videos", videos_json(cfg)},
          {"layout",
           {{"flow_magnitude_bins", l.flow_magnitude_bins},
            {"flow_orientation_bins", l.flow_orientation_bins},
            {"lbp_bins", l.lbp_bins},
            {"intensity_bins", l.intensity_bins},
            {"flow_magnitude_max", l.flow_magnitude_max},
            {"lk_window", l.lk_window}}},
          {"background_max_samples", cfg.background_max_samples}};
}

inline nlohmann::json train_settings(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"weight_decay", t.weight_decay}, {"dropout_rate", t.dropout_rate},
          {"max_epochs", t.max_epochs},       {"early_stop_window", t.early_stop_window},
          {"hidden", t.hidden},               {"beta1", t.beta1},
          {"beta2", t.beta2},                 {"epsilon", t.epsilon}};
}

inline std::uint64_t settings_hash(const nlohmann::json& j) { return fnv1a(j.dump()); }

inline std::uint64_t features_hash(const RunConfig& cfg) { return settings_hash(features_settings(cfg)); }

inline std::uint64_t graph_hash(const RunConfig& cfg) {
  return settings_hash({{"features", hash_hex(features_hash(cfg))}, {"k", cfg.k}});
}

inline std::uint64_t run_hash(const RunConfig& cfg, const PartitionSpec& p, double density, int rep) {
  return settings_hash({{"graph", hash_hex(graph_hash(cfg))},
                        {"train", train_settings(cfg.train)},
                        {"seed", cfg.seed},
                        {"partition", p.id},
                        {"unseen", p.unseen},
                        {"density", density},
                        {"repetition", rep}});
}

inline bool stage_current(const fs::path& dir, std::uint64_t hash) {
  const fs::path stamp = dir / "stage.json";
  if (!fs::exists(stamp)) return false;
  try {
    return read_json(stamp.string()).at("hash").get<std::string>() == hash_hex(hash);
  } catch (const std::exception&) {
    return false;
  }
}

inline void stamp_stage(const fs::path& dir, std::uint64_t hash) {
  write_json((dir / "stage.json").string(), {{"hash", hash_hex(hash)}, {"version", kVersion}});
}

// ---------------------------------------------------------------------------
// Dataset access.

inline std::vector<Instance> read_video_instances(const VideoSource& v) {
  if (fs::is_directory(v.instances)) return load_instance_labels(v.instances, v.instance_pattern, v.id).instances;
  auto file = load_instances(v.instances);
  std::vector<Instance> out;
  for (auto& inst : file.instances) {
    require(inst.video_id == v.id, ErrorCode::kMalformedFile,
            v.instances + " contains instances of video '" + inst.video_id + "'");
    out.push_back(std::move(inst));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
  return out;
}

/// Instances of every video with global node ids (video order, then frame).
/// Ground truth is read lazily from disk.
inline Dataset load_dataset(const RunConfig& cfg, std::ostream* log = nullptr) {
  Dataset data;
  auto gt_paths = std::make_shared<std::map<std::pair<std::string, int>, std::string>>();
  for (const auto& v : cfg.videos) {
    const auto frames = list_sequence(v.frames, v.frame_pattern);
    require(!frames.empty(), ErrorCode::kNoFrames, v.frames);
    require(frames.size() >= 2, ErrorCode::kTooFewFrames, v.frames);
    const RawImage first = read_image(frames.front().path);
    VideoInfo info{v.id, v.challenge, first.width, first.height, {}};
    if (!v.ground_truth.empty()) {
      for (const auto& e : list_sequence(v.ground_truth, v.gt_pattern)) {
        if (v.gt_last > 0 && (e.frame_index < v.gt_first || e.frame_index > v.gt_last)) continue;
        info.gt_frames.push_back(e.frame_index);
        (*gt_paths)[{v.id, e.frame_index}] = e.path;
      }
    }
    auto instances = read_video_instances(v);
    if (instances.empty() && log) *log << "warning: video '" << v.id << "' has no instances\n";
    for (auto& inst : instances) {
      validate_instance(inst, info.width, info.height);
      inst.node_id = static_cast<int>(data.instances.size());
      data.instances.push_back(std::move(inst));
    }
    data.videos.push_back(std::move(info));
  }
  data.ground_truth = [gt_paths](const std::string& video, int frame) -> std::optional<GroundTruthMask> {
    const auto it = gt_paths->find({video, frame});
    if (it == gt_paths->end()) return std::nullopt;
    return load_ground_truth(it->second, video, frame);
  };
  return data;
}

inline nlohmann::json catalog_json(const Dataset& data, const LabelMatrix& labels) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& inst : data.instances) {
    const auto i = static_cast<std::size_t>(inst.node_id);
    nodes.push_back({{"node", inst.node_id},
                     {"video", inst.video_id},
                     {"frame", inst.frame_index},
                     {"label", inst.label},
                     {"bbox", {inst.bbox.x, inst.bbox.y, inst.bbox.w, inst.bbox.h}},
                     {"covered", static_cast<bool>(labels.covered[i])},
                     {"class", labels.covered[i] ? labels.label(i) : -1}});
  }
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : data.videos)
    videos.push_back({{"id", v.id}, {"challenge", v.challenge}, {"width", v.width}, {"height", v.height}});
  return {{"videos", videos}, {"nodes", nodes}};
}

inline LabelMatrix labels_from_catalog(const nlohmann::json& catalog) {
  const auto& nodes = catalog.at("nodes");
  LabelMatrix labels{Matrix::Zero(static_cast<Eigen::Index>(nodes.size()), kClassCount),
                     std::vector<bool>(nodes.size(), false)};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].at("covered").get<bool>()) continue;
    labels.covered[i] = true;
    labels.y(static_cast<Eigen::Index>(i), nodes[i].at("class").get<int>()) = 1.0;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Stages.

struct StageOutcome {
  bool cached = false;
  std::string detail;
};

/// Background models and node descriptors for every instance.
inline FeatureMatrix compute_features(const RunConfig& cfg, const Dataset& data, const fs::path& background_dir,
                                      std::ostream* log = nullptr) {
  std::vector<NodeFeatures> rows(data.instances.size());
  std::size_t first_node = 0;
  for (std::size_t vi = 0; vi < cfg.videos.size(); ++vi) {
    const VideoSource& src = cfg.videos[vi];
    const auto entries = list_sequence(src.frames, src.frame_pattern);
    std::map<int, std::size_t> position;
    for (std::size_t i = 0; i < entries.size(); ++i) position[entries[i].frame_index] = i;

    const int stride = default_stride(entries.size(), cfg.background_max_samples);
    std::vector<Frame> sampled;
    for (std::size_t i = 0; i < entries.size(); i += static_cast<std::size_t>(stride)) {
      if (cfg.background_max_samples != 0 && sampled.size() == cfg.background_max_samples) break;
      sampled.push_back(load_frame(entries[i].path, entries[i].frame_index));
    }
    const BackgroundModel background = median_background(sampled, 0, 1, src.id);
    sampled.clear();
    if (!background_dir.empty()) save_background((background_dir / src.id).string(), background);

    // Instances of this video are contiguous from first_node.
    std::size_t end_node = first_node;
    while (end_node < data.instances.size() && data.instances[end_node].video_id == src.id) ++end_node;
    std::map<int, std::vector<std::size_t>> by_frame;
    for (std::size_t n = first_node; n < end_node; ++n) by_frame[data.instances[n].frame_index].push_back(n);
    std::vector<std::pair<int, std::vector<std::size_t>>> groups(by_frame.begin(), by_frame.end());

    parallel_for(groups.size(), cfg.jobs, [&](std::size_t g) {
      const int frame = groups[g].first;
      const auto it = position.find(frame);
      require(it != position.end(), ErrorCode::kMissingPath,
              "video '" + src.id + "' has instances for missing frame " + std::to_string(frame));
      const Frame current = load_frame(entries[it->second].path, frame);
      const Frame previous = it->second == 0 ? current
                                             : load_frame(entries[it->second - 1].path,
                                                          entries[it->second - 1].frame_index);
      require(current.same_shape(background.image) && previous.same_shape(background.image),
              ErrorCode::kDimensionMismatch, "frame sizes differ within video '" + src.id + "'");
      for (std::size_t n : groups[g].second)
        rows[n] = node_features(current, previous, background, data.instances[n], cfg.layout);
    });
    if (log) *log << "features: " << src.id << " " << (end_node - first_node) << " nodes\n";
    first_node = end_node;
  }
  return assemble_features(rows, cfg.layout);
}

inline StageOutcome stage_features(const RunConfig& cfg, bool force = false, std::ostream* log = nullptr) {
  const fs::path dir = fs::path(cfg.output_dir) / "features";
  const std::uint64_t hash = features_hash(cfg);
  if (!force && stage_current(dir, hash)) return {true, dir.string()};
  fs::create_directories(dir / "instances");
  fs::create_directories(dir / "backgrounds");
  const Dataset data = load_dataset(cfg, log);
  const LabelMatrix labels = label_nodes(data.instances, data.ground_truth);
  const FeatureMatrix fm = compute_features(cfg, data, dir / "backgrounds", log);
  save_features((dir / "features.bin").string(), fm);
  write_json((dir / "catalog.json").string(), catalog_json(data, labels));
  for (const auto& v : data.videos) {
    std::vector<Instance> mine;
    for (const auto& inst : data.instances)
      if (inst.video_id == v.id) mine.push_back(inst);
    write_instances((dir / "instances" / (v.id + ".txt")).string(), mine, v.width, v.height);
  }
  stamp_stage(dir, hash);
  return {false, std::to_string(fm.nodes()) + " nodes, C=" + std::to_string(fm.dimension())};
}

inline StageOutcome stage_graph(const RunConfig& cfg, bool force = false, bool export_edges = true) {
  const fs::path dir = fs::path(cfg.output_dir) / "graph";
  const std::uint64_t hash = graph_hash(cfg);
  if (!force && stage_current(dir, hash)) return {true, dir.string()};
  fs::create_directories(dir);
  const FeatureMatrix fm = load_features((fs::path(cfg.output_dir) / "features" / "features.bin").string());
  const SparseGraph g = build_graph(fm, cfg.k, cfg.jobs);
  save_csr((dir / "graph.csr").string(), g.adjacency);
  if (export_edges) export_edge_list((dir / "edges.txt").string(), g.adjacency);
  write_json((dir / "graph_meta.json").string(),
             {{"nodes", g.n},
              {"k", cfg.k},
              {"directed_edges", g.directed_edge_count},
              {"undirected_edges", g.edges.size()},
              {"nnz", g.adjacency.nnz()},
              {"rho", g.rho},
              {"edge_convention", "k-NN edges symmetrized by union; |E| counts undirected edges once"}});
  stamp_stage(dir, hash);
  return {false, std::to_string(g.edges.size()) + " undirected edges, rho=" + format_double(g.rho)};
}

struct PlannedRun {
  PartitionSpec partition;
  double density = 0.0;
  int repetition = 0;
  std::string name;
};

inline std::vector<PlannedRun> plan_runs(const RunConfig& cfg) {
  std::vector<PlannedRun> out;
  for (const auto& p : cfg.protocol.partitions)
    for (double d : cfg.protocol.densities)
      for (int r = 0; r < cfg.protocol.repetitions; ++r) out.push_back({p, d, r, run_name(p.id, d, r)});
  return out;
}

inline void save_predictions_csv(const std::string& path, const Prediction& p) {
  auto os = open_out(path);
  os << "node,p_background,p_foreground,class\n";
  for (Eigen::Index i = 0; i < p.probabilities.rows(); ++i)
    os << i << ',' << format_double(p.probabilities(i, 0)) << ',' << format_double(p.probabilities(i, 1)) << ','
       << p.classes[static_cast<std::size_t>(i)] << '\n';
}

inline std::vector<int> load_prediction_classes(const std::string& path) {
  auto is = open_in(path);
  std::string line;
  std::getline(is, line);
  std::vector<int> classes;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    require(comma != std::string::npos, ErrorCode::kMalformedFile, path);
    classes.push_back(std::stoi(line.substr(comma + 1)));
  }
  return classes;
}

struct RunFailure {
  std::string run;
  std::string error;
};

/// Trains one model per planned run and stores predictions for every node.
inline std::vector<RunFailure> stage_train(const RunConfig& cfg, bool force = false, std::ostream* log = nullptr) {
  const fs::path out = fs::path(cfg.output_dir);
  const FeatureMatrix fm = load_features((out / "features" / "features.bin").string());
  const NormalizedAdjacency a = normalize(load_csr((out / "graph" / "graph.csr").string()));
  require(a.n == fm.nodes(), ErrorCode::kStaleCache, "graph and features disagree on N");
  const nlohmann::json catalog = read_json((out / "features" / "catalog.json").string());
  const LabelMatrix labels = labels_from_catalog(catalog);
  std::vector<NodeRecord> records;
  for (const auto& n : catalog.at("nodes"))
    records.push_back({n.at("node").get<int>(), n.at("video").get<std::string>(), {}, n.at("frame").get<int>(),
                       n.at("label").get<int>()});
  std::vector<std::string> all_videos;
  for (const auto& v : catalog.at("videos")) all_videos.push_back(v.at("id").get<std::string>());

  const auto runs = plan_runs(cfg);
  std::vector<std::string> errors(runs.size());
  std::vector<char> cached(runs.size(), 0);
  // Runs are independent; each is internally sequential.
  parallel_for(runs.size(), cfg.jobs, [&](std::size_t r) {
    const PlannedRun& run = runs[r];
    const fs::path dir = out / "runs" / run.name;
    const std::uint64_t hash = run_hash(cfg, run.partition, run.density, run.repetition);
    if (!force && stage_current(dir, hash) && fs::exists(dir / "predictions.csv")) {
      cached[r] = 1;
      return;
    }
    try {
      fs::create_directories(dir);
      const auto s_seed = split_seed(cfg.seed, run.partition.id, run.density, run.repetition);
      const auto t_seed = train_seed(cfg.seed, run.partition.id, run.density, run.repetition);
      const SplitSpec split = make_split(records, labels.covered, run.partition.unseen, run.density, s_seed,
                                         run.partition.id);
      std::vector<std::string> train_videos;
      for (const auto& v : all_videos)
        if (std::find(split.unseen_videos.begin(), split.unseen_videos.end(), v) == split.unseen_videos.end())
          train_videos.push_back(v);
      write_json((dir / "split.json").string(), split_to_json(split, train_videos));
      Matrix y = Matrix::Zero(labels.y.rows(), labels.y.cols());
      for (int i : split.train) y.row(i) = labels.y.row(i);
      for (int i : split.validation) y.row(i) = labels.y.row(i);
      TrainConfig tc = cfg.train;
      tc.seed = t_seed;
      const TrainResult result = train(fm.values, a, y, split.train, split.validation, tc);
      save_model((dir / "model.bin").string(), result.model);
      save_history_csv((dir / "history.csv").string(), result.history);
      save_predictions_csv((dir / "predictions.csv").string(), predict(result.model, fm.values, a));
      write_json((dir / "train.json").string(), {{"split_seed", s_seed},
                                                  {"train_seed", t_seed},
                                                  {"best_epoch", result.history.best_epoch},
                                                  {"epochs", result.history.epochs.size()},
                                                  {"stop_reason", result.history.stop_reason}});
      stamp_stage(dir, hash);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });
  std::vector<RunFailure> failures;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!errors[r].empty()) failures.push_back({runs[r].name, errors[r]});
    if (log) *log << "train: " << runs[r].name << (cached[r] ? " (cached)" : errors[r].empty() ? "" : " FAILED") << '\n';
  }
  return failures;
}

inline EvalReport read_report_csv(const std::string& path) {
  auto is = open_in(path);
  std::string line;
  std::getline(is, line);
  require(line == "video,challenge,TP,FP,FN,precision,recall,f", ErrorCode::kMalformedFile, path);
  EvalReport r;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    require(f.size() == 8, ErrorCode::kMalformedFile, path);
    VideoScore v;
    v.video = f[0];
    v.challenge = f[1];
    v.counts = {std::stoull(f[2]), std::stoull(f[3]), std::stoull(f[4])};
    v.precision = std::stod(f[5]);
    v.recall = std::stod(f[6]);
    v.f = std::stod(f[7]);
    r.videos.push_back(std::move(v));
  }
  summarize(r);
  return r;
}

/// Scores every trained run on its unseen videos.
inline std::vector<RunFailure> stage_evaluate(const RunConfig& cfg, std::ostream* log = nullptr) {
  const fs::path out = fs::path(cfg.output_dir);
  const Dataset data = load_dataset(cfg);
  std::vector<RunFailure> failures;
  for (const auto& run : plan_runs(cfg)) {
    const fs::path dir = out / "runs" / run.name;
    try {
      require(fs::exists(dir / "predictions.csv"), ErrorCode::kMissingPath, (dir / "predictions.csv").string());
      const SplitSpec split = split_from_json(read_json((dir / "split.json").string()));
      const auto classes = load_prediction_classes((dir / "predictions.csv").string());
      require(classes.size() == data.instances.size(), ErrorCode::kStaleCache, run.name + ": prediction count");
      write_report_csv((dir / "report.csv").string(), evaluate_videos(data, split.unseen_videos, classes));
      if (log) *log << "evaluate: " << run.name << '\n';
    } catch (const std::exception& e) {
      failures.push_back({run.name, e.what()});
    }
  }
  return failures;
}

/// Monte Carlo aggregation per (partition, density).
inline nlohmann::json stage_report(const RunConfig& cfg) {
  const fs::path out = fs::path(cfg.output_dir);
  const fs::path dir = out / "report";
  fs::create_directories(dir);
  nlohmann::json results = nlohmann::json::array();
  auto seq = open_out((dir / "sequences.csv").string());
  seq << "partition,density,video,challenge,mean_f,best_f\n";
  auto ch = open_out((dir / "challenges.csv").string());
  ch << "partition,density,statistic";
  for (const auto& c : challenge_codes()) ch << ',' << c;
  ch << ",overall\n";
  for (const auto& p : cfg.protocol.partitions) {
    for (double d : cfg.protocol.densities) {
      MonteCarloReport mc;
      for (int r = 0; r < cfg.protocol.repetitions; ++r) {
        const fs::path report = out / "runs" / run_name(p.id, d, r) / "report.csv";
        if (!fs::exists(report)) continue;
        RepetitionResult rr;
        rr.repetition = r;
        rr.report = read_report_csv(report.string());
        mc.runs.push_back(std::move(rr));
      }
      aggregate(mc);
      nlohmann::json entry = summary_json(mc);
      entry["partition"] = p.id;
      entry["density"] = d;
      results.push_back(entry);
      for (const auto& s : mc.sequences)
        seq << p.id << ',' << density_tag(d) << ',' << s.video << ',' << s.challenge << ','
            << format_double(s.mean_f) << ',' << format_double(s.best_f) << '\n';
      for (const auto* stat : {"mean", "best"}) {
        const auto& m = std::string(stat) == "mean" ? mc.challenge_mean_f : mc.challenge_best_f;
        ch << p.id << ',' << density_tag(d) << ',' << stat;
        for (const auto& c : challenge_codes()) {
          ch << ',';
          if (const auto it = m.find(c); it != m.end()) ch << format_double(it->second);
        }
        ch << ',' << format_double(std::string(stat) == "mean" ? mc.overall_mean_f : mc.overall_best_f) << '\n';
      }
    }
  }
  nlohmann::json summary{{"seed", cfg.seed}, {"results", results}};
  write_json((dir / "summary.json").string(), summary);
  return summary;
}

inline nlohmann::json manifest_json(const RunConfig& cfg) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : plan_runs(cfg))
    runs.push_back({{"name", r.name},
                    {"split_seed", split_seed(cfg.seed, r.partition.id, r.density, r.repetition)},
                    {"train_seed", train_seed(cfg.seed, r.partition.id, r.density, r.repetition)}});
  nlohmann::json partitions = nlohmann::json::array();
  for (const auto& p : cfg.protocol.partitions) partitions.push_back({{"id", p.id}, {"unseen", p.unseen}});
  nlohmann::json settings{{"features", features_settings(cfg)},
                          {"k", cfg.k},
                          {"train", train_settings(cfg.train)},
                          {"protocol",
                           {{"partitions", partitions},
                            {"densities", cfg.protocol.densities},
                            {"repetitions", cfg.protocol.repetitions}}},
                          {"seed", cfg.seed}};
  return {{"version", kVersion},
          {"config_hash", hash_hex(settings_hash(settings))},
          {"features_hash", hash_hex(features_hash(cfg))},
          {"graph_hash", hash_hex(graph_hash(cfg))},
          {"settings", settings},
          {"runs", runs}};
}

inline void write_failures(const RunConfig& cfg, const std::vector<RunFailure>& failures) {
  const fs::path path = fs::path(cfg.output_dir) / "failures.json";
  if (failures.empty()) {
    fs::remove(path);
    return;
  }
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : failures) j.push_back({{"run", f.run}, {"error", f.error}});
  write_json(path.string(), j);
}

inline std::string describe_plan(const RunConfig& cfg) {
  std::ostringstream os;
  os << "output: " << cfg.output_dir << '\n';
  os << "videos: " << cfg.videos.size() << '\n';
  for (const auto& v : cfg.videos) os << "  " << v.id << " [" << v.challenge << "] " << v.frames << '\n';
  os << "features: C=" << cfg.layout.dimension() << " (cached: "
     << (stage_current(fs::path(cfg.output_dir) / "features", features_hash(cfg)) ? "yes" : "no") << ")\n";
  os << "graph: k=" << cfg.k << " (cached: "
     << (stage_current(fs::path(cfg.output_dir) / "graph", graph_hash(cfg)) ? "yes" : "no") << ")\n";
  const auto runs = plan_runs(cfg);
  os << "runs: " << runs.size() << '\n';
  for (const auto& r : runs) os << "  " << r.name << '\n';
  return os.str();
}

/// All stages in order. Returns the failures of individual runs.
inline std::vector<RunFailure> run_pipeline(const RunConfig& cfg, bool force = false, std::ostream* log = nullptr) {
  validate(cfg);
  fs::create_directories(cfg.output_dir);
  write_json((fs::path(cfg.output_dir) / "manifest.json").string(), manifest_json(cfg));
  stage_features(cfg, force, log);
  stage_graph(cfg, force);
  auto failures = stage_train(cfg, force, log);
  auto eval_failures = stage_evaluate(cfg, log);
  for (auto& f : eval_failures)
    if (std::none_of(failures.begin(), failures.end(), [&](const auto& g) { return g.run == f.run; }))
      failures.push_back(std::move(f));
  stage_report(cfg);
  write_failures(cfg, failures);
  return failures;
}

// ---------------------------------------------------------------------------
// Synthetic datasets on disk.

/// Three training videos and one unseen video of moving textured squares
/// over a static textured background with static distractor instances.
inline SyntheticDatasetSpec default_synthetic_dataset(std::uint64_t seed = 1) {
  SyntheticDatasetSpec d;
  for (int v = 0; v < 4; ++v) {
    SyntheticSpec s;
    s.video_id = "video" + std::to_string(v);
    s.frames = 30;
    s.width = 64;
    s.height = 48;
    s.noise = 0.02;
    s.seed = derive_seed(seed, "synth", {static_cast<std::uint64_t>(v)});
    MovingObject a;
    a.width = a.height = 8 + v % 2;
    a.start_x = 2 + v;
    a.start_y = 4 + 2 * (v % 3);
    a.velocity_x = 1;
    a.velocity_y = 0;
    a.intensity = 0.8 - 0.05 * v;
    MovingObject b;
    b.width = b.height = 7 + (v + 1) % 2;
    b.start_x = 44 + v % 3;
    b.start_y = 2;
    b.velocity_x = 0;
    b.velocity_y = 1;
    b.intensity = 0.2 + 0.05 * v;
    s.movers = {a, b};
    s.distractors = {StaticDistractor{{6 + v, 34, 9, 9}, 0.75 - 0.04 * v, 0.1},
                     StaticDistractor{{26 + v, 2, 8, 8 + v % 2}, 0.25 + 0.04 * v, 0.1}};
    d.videos.push_back(s);
    d.challenges.push_back("SYN");
  }
  d.unseen = {"video3"};
  return d;
}

struct SynthOutputs {
  std::string config_path;
  std::size_t instance_count = 0;
};

/// Writes frames/<video>/in%06d.pgm, instances/<video>.txt,
/// gt/<video>/gt%06d.pgm and a runnable config.json.
inline SynthOutputs write_synthetic_dataset(const SyntheticDatasetSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  require(fs::is_directory(out_dir), ErrorCode::kIo, "cannot create " + out_dir);
  for (const auto& v : spec.videos) validate(v);
  SynthOutputs result;
  nlohmann::json videos = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.videos.size(); ++i) {
    const SyntheticSpec& s = spec.videos[i];
    const SyntheticSequence seq = synth_sequence(s);
    const fs::path frames = fs::path(out_dir) / "frames" / s.video_id;
    const fs::path gt = fs::path(out_dir) / "gt" / s.video_id;
    fs::create_directories(frames);
    fs::create_directories(gt);
    fs::create_directories(fs::path(out_dir) / "instances");
    for (const auto& f : seq.frames) save_frame((frames / format_template("in%06d.pgm", f.frame_index)).string(), f);
    for (const auto& g : seq.ground_truth)
      write_image((gt / format_template("gt%06d.pgm", g.frame_index)).string(), gt_to_raw(g));
    write_instances((fs::path(out_dir) / "instances" / (s.video_id + ".txt")).string(), seq.instances, s.width,
                    s.height);
    result.instance_count += seq.instances.size();
    videos.push_back({{"id", s.video_id},
                      {"challenge", i < spec.challenges.size() ? spec.challenges[i] : "SYN"},
                      {"frames", "frames/" + s.video_id},
                      {"frame_pattern", "in%06d.pgm"},
                      {"instances", "instances/" + s.video_id + ".txt"},
                      {"ground_truth", "gt/" + s.video_id},
                      {"gt_pattern", "gt%06d.pgm"}});
  }
  nlohmann::json config{{"output_dir", "run"},
                        {"seed", 1},
                        {"videos", videos},
                        {"protocol",
                         {{"partitions", nlohmann::json::array({{{"id", 1}, {"unseen", spec.unseen}}})},
                          {"densities", {0.1}},
                          {"repetitions", 3}}}};
  config.merge_patch(spec.run_overrides);
  nlohmann::json spec_json{{"unseen", spec.unseen}, {"videos", nlohmann::json::array()}};
  for (std::size_t i = 0; i < spec.videos.size(); ++i) {
    auto v = to_json(spec.videos[i]);
    v["challenge"] = i < spec.challenges.size() ? spec.challenges[i] : "SYN";
    spec_json["videos"].push_back(v);
  }
  write_json((fs::path(out_dir) / "synth_spec.json").string(), spec_json);
  result.config_path = (fs::path(out_dir) / "config.json").string();
  write_json(result.config_path, config);
  return result;
}

}  // namespace mogcn
