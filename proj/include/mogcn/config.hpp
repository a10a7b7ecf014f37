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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mogcn/features.hpp"
#include "mogcn/gcn.hpp"
#include "mogcn/media_io.hpp"

namespace mogcn {

/// Where one video's inputs live.
struct VideoSource {
  std::string id;
  std::string challenge;
  std::string frames;                        // directory
  std::string frame_pattern = "in%06d.png";
  std::string instances;                     // text RLE file, or directory of label images
  std::string instance_pattern = "in%06d.png";
  std::string ground_truth;                  // directory; empty = no GT
  std::string gt_pattern = "gt%06d.png";
  int gt_first = 0;                          // inclusive GT frame range; 0/0 = all
  int gt_last = 0;
};

struct PartitionSpec {
  int id = 1;
  std::vector<std::string> unseen;
};

struct ProtocolConfig {
  std::vector<PartitionSpec> partitions;
  std::vector<double> densities{0.001, 0.005, 0.05, 0.1};
  int repetitions = 3;
};

struct RunConfig {
  std::string config_path;  // file the config was read from (for relative paths)
  std::string output_dir = "run";
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::vector<VideoSource> videos;
  FeatureLayout layout;
  std::size_t background_max_samples = 150;
  int k = 30;
  TrainConfig train;
  ProtocolConfig protocol;
};

// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::string cdnet_code(const std::string& dir) {
  static const std::map<std::string, std::string> codes = {
      {"badWeather", "BWT"},   {"baseline", "BSL"},     {"cameraJitter", "CJI"},
      {"dynamicBackground", "DBA"}, {"intermittentObjectMotion", "IOM"}, {"lowFramerate", "LFR"},
      {"PTZ", "PTZ"},          {"shadow", "SHW"},       {"thermal", "THL"}};
  const auto it = codes.find(dir);
  return it == codes.end() ? dir : it->second;
}

}  // namespace detail

/// Expands a CDNet-style tree, <root>/<challenge>/<video>/{input,groundtruth},
/// with label-image instance masks under <instances_root>/<challenge>/<video>.
/// temporalROI.txt, when present, limits the scored GT frames.
inline std::vector<VideoSource> scan_cdnet(const std::string& root, const std::string& instances_root,
                                           const std::string& frame_pattern, const std::string& instance_pattern) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), ErrorCode::kMissingPath, root);
  std::vector<VideoSource> out;
  std::vector<fs::path> challenges;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) challenges.push_back(e.path());
  std::sort(challenges.begin(), challenges.end());
  for (const auto& ch : challenges) {
    std::vector<fs::path> videos;
    for (const auto& e : fs::directory_iterator(ch))
      if (e.is_directory() && fs::is_directory(e.path() / "input")) videos.push_back(e.path());
    std::sort(videos.begin(), videos.end());
    for (const auto& v : videos) {
      VideoSource src;
      src.id = v.filename().string();
      src.challenge = detail::cdnet_code(ch.filename().string());
      src.frames = (v / "input").string();
      src.frame_pattern = frame_pattern;
      src.instances = (fs::path(instances_root) / ch.filename() / v.filename()).string();
      src.instance_pattern = instance_pattern;
      if (fs::is_directory(v / "groundtruth")) src.ground_truth = (v / "groundtruth").string();
      src.gt_pattern = "gt%06d.png";
      if (fs::exists(v / "temporalROI.txt")) {
        std::ifstream is(v / "temporalROI.txt");
        is >> src.gt_first >> src.gt_last;
      }
      out.push_back(std::move(src));
    }
  }
  return out;
}

/// Parses a run configuration. Relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir) {
  namespace fs = std::filesystem;
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    return (path.is_absolute() ? path : fs::path(base_dir) / path).lexically_normal().string();
  };
  RunConfig cfg;
  try {
    detail::read_opt(j, "output_dir", cfg.output_dir);
    cfg.output_dir = resolve(cfg.output_dir);
    detail::read_opt(j, "seed", cfg.seed);
    detail::read_opt(j, "jobs", cfg.jobs);
    if (j.contains("videos")) {
      for (const auto& v : j.at("videos")) {
        VideoSource s;
        s.id = v.at("id").get<std::string>();
        detail::read_opt(v, "challenge", s.challenge);
        s.frames = resolve(v.at("frames").get<std::string>());
        detail::read_opt(v, "frame_pattern", s.frame_pattern);
        s.instances = resolve(v.at("instances").get<std::string>());
        detail::read_opt(v, "instance_pattern", s.instance_pattern);
        detail::read_opt(v, "ground_truth", s.ground_truth);
        s.ground_truth = resolve(s.ground_truth);
        detail::read_opt(v, "gt_pattern", s.gt_pattern);
        detail::read_opt(v, "gt_first", s.gt_first);
        detail::read_opt(v, "gt_last", s.gt_last);
        cfg.videos.push_back(std::move(s));
      }
    }
    if (j.contains("cdnet")) {
      const auto& c = j.at("cdnet");
      std::string frame_pattern = "in%06d.png", instance_pattern = "in%06d.png";
      detail::read_opt(c, "frame_pattern", frame_pattern);
      detail::read_opt(c, "instance_pattern", instance_pattern);
      auto more = scan_cdnet(resolve(c.at("root").get<std::string>()),
                             resolve(c.at("instances_root").get<std::string>()), frame_pattern, instance_pattern);
      cfg.videos.insert(cfg.videos.end(), more.begin(), more.end());
    }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      detail::read_opt(f, "flow_magnitude_bins", cfg.layout.flow_magnitude_bins);
      detail::read_opt(f, "flow_orientation_bins", cfg.layout.flow_orientation_bins);
      detail::read_opt(f, "lbp_bins", cfg.layout.lbp_bins);
      detail::read_opt(f, "intensity_bins", cfg.layout.intensity_bins);
      detail::read_opt(f, "flow_magnitude_max", cfg.layout.flow_magnitude_max);
      detail::read_opt(f, "lk_window", cfg.layout.lk_window);
      detail::read_opt(f, "background_max_samples", cfg.background_max_samples);
    }
    if (j.contains("graph")) detail::read_opt(j.at("graph"), "k", cfg.k);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::read_opt(t, "learning_rate", cfg.train.learning_rate);
      detail::read_opt(t, "weight_decay", cfg.train.weight_decay);
      detail::read_opt(t, "dropout_rate", cfg.train.dropout_rate);
      detail::read_opt(t, "max_epochs", cfg.train.max_epochs);
      detail::read_opt(t, "early_stop_window", cfg.train.early_stop_window);
      detail::read_opt(t, "hidden", cfg.train.hidden);
      detail::read_opt(t, "beta1", cfg.train.beta1);
      detail::read_opt(t, "beta2", cfg.train.beta2);
      detail::read_opt(t, "epsilon", cfg.train.epsilon);
    }
    if (j.contains("protocol")) {
      const auto& p = j.at("protocol");
      if (p.contains("partitions"))
        for (const auto& part : p.at("partitions"))
          cfg.protocol.partitions.push_back({part.at("id").get<int>(), part.at("unseen").get<std::vector<std::string>>()});
      detail::read_opt(p, "densities", cfg.protocol.densities);
      detail::read_opt(p, "repetitions", cfg.protocol.repetitions);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("config: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  auto is = open_in(path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, path + ": " + e.what());
  }
  RunConfig cfg = parse_run_config(j, std::filesystem::path(path).parent_path().string());
  cfg.config_path = path;
  return cfg;
}

/// Checks invariants: inputs exist, ids unique, partitions name known videos.
inline void validate(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  require(!cfg.videos.empty(), ErrorCode::kInvalidArgument, "config lists no videos");
  std::set<std::string> ids;
  for (const auto& v : cfg.videos) {
    require(ids.insert(v.id).second, ErrorCode::kInvalidArgument, "duplicate video id '" + v.id + "'");
    require(fs::is_directory(v.frames), ErrorCode::kMissingPath, v.frames);
    require(fs::exists(v.instances), ErrorCode::kMissingPath, v.instances);
    require(v.ground_truth.empty() || fs::is_directory(v.ground_truth), ErrorCode::kMissingPath, v.ground_truth);
  }
  cfg.layout.validate();
  cfg.train.validate();
  require(cfg.k >= 1, ErrorCode::kInvalidArgument, "k must be >= 1");
  require(cfg.protocol.repetitions >= 1, ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  for (double d : cfg.protocol.densities)
    require(d > 0.0 && d < 1.0, ErrorCode::kInvalidArgument, "densities must lie in (0, 1)");
  for (const auto& p : cfg.protocol.partitions)
    for (const auto& u : p.unseen)
      require(ids.count(u) != 0, ErrorCode::kInvalidArgument,
              "partition " + std::to_string(p.id) + " names unknown video '" + u + "'");
}

// ---------------------------------------------------------------------------
// Synthetic dataset specification files.

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    detail::read_opt(j, "id", s.video_id);
    detail::read_opt(j, "frames", s.frames);
    detail::read_opt(j, "width", s.width);
    detail::read_opt(j, "height", s.height);
    detail::read_opt(j, "first_index", s.first_index);
    detail::read_opt(j, "noise", s.noise);
    detail::read_opt(j, "background_texture", s.background_texture);
    detail::read_opt(j, "seed", s.seed);
    if (j.contains("movers"))
      for (const auto& m : j.at("movers")) {
        MovingObject o;
        detail::read_opt(m, "width", o.width);
        detail::read_opt(m, "height", o.height);
        if (m.contains("size")) o.width = o.height = m.at("size").get<int>();
        detail::read_opt(m, "x", o.start_x);
        detail::read_opt(m, "y", o.start_y);
        detail::read_opt(m, "vx", o.velocity_x);
        detail::read_opt(m, "vy", o.velocity_y);
        detail::read_opt(m, "intensity", o.intensity);
        detail::read_opt(m, "texture", o.texture);
        s.movers.push_back(o);
      }
    if (j.contains("distractors"))
      for (const auto& d : j.at("distractors")) {
        StaticDistractor o;
        o.box = {d.at("x").get<int>(), d.at("y").get<int>(), d.at("width").get<int>(), d.at("height").get<int>()};
        detail::read_opt(d, "intensity", o.intensity);
        detail::read_opt(d, "texture", o.texture);
        s.distractors.push_back(o);
      }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("synthetic spec: ") + e.what());
  }
  return s;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  nlohmann::json j{{"id", s.video_id}, {"frames", s.frames}, {"width", s.width}, {"height", s.height},
                   {"first_index", s.first_index}, {"noise", s.noise},
                   {"background_texture", s.background_texture}, {"seed", s.seed}};
  j["movers"] = nlohmann::json::array();
  for (const auto& m : s.movers)
    j["movers"].push_back({{"width", m.width}, {"height", m.height}, {"x", m.start_x}, {"y", m.start_y},
                           {"vx", m.velocity_x}, {"vy", m.velocity_y}, {"intensity", m.intensity},
                           {"texture", m.texture}});
  j["distractors"] = nlohmann::json::array();
  for (const auto& d : s.distractors)
    j["distractors"].push_back({{"x", d.box.x}, {"y", d.box.y}, {"width", d.box.w}, {"height", d.box.h},
                                {"intensity", d.intensity}, {"texture", d.texture}});
  return j;
}

/// A multi-video synthetic dataset plus the run settings written next to it.
struct SyntheticDatasetSpec {
  std::vector<SyntheticSpec> videos;
  std::vector<std::string> challenges;  // parallel to videos; empty = "SYN"
  std::vector<std::string> unseen;      // partition 1
  nlohmann::json run_overrides = nlohmann::json::object();
};

inline SyntheticDatasetSpec synthetic_dataset_from_json(const nlohmann::json& j) {
  SyntheticDatasetSpec d;
  try {
    std::uint64_t seed = 1;
    detail::read_opt(j, "seed", seed);
    const auto& vids = j.at("videos");
    require(vids.is_array() && !vids.empty(), ErrorCode::kInvalidArgument, "synthetic spec lists no videos");
    for (std::size_t i = 0; i < vids.size(); ++i) {
      SyntheticSpec s = synthetic_spec_from_json(vids[i]);
      if (!vids[i].contains("seed")) s.seed = derive_seed(seed, "synth", {i});
      if (!vids[i].contains("id")) s.video_id = "video" + std::to_string(i);
      d.videos.push_back(std::move(s));
      d.challenges.push_back(vids[i].value("challenge", std::string("SYN")));
    }
    detail::read_opt(j, "unseen", d.unseen);
    if (j.contains("run")) d.run_overrides = j.at("run");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("synthetic spec: ") + e.what());
  }
  return d;
}

}  // namespace mogcn
