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

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mogcn/gcn.hpp"
#include "mogcn/media_io.hpp"

namespace mogcn {

/// Change-detection challenge abbreviations, in report order.
inline const std::vector<std::string>& challenge_codes() {
  static const std::vector<std::string> codes = {"BWT", "BSL", "CJI", "DBA", "IOM", "LFR", "PTZ", "SHW", "THL"};
  return codes;
}

using GroundTruthSource = std::function<std::optional<GroundTruthMask>(const std::string& video, int frame)>;

/// In-memory ground truth keyed by (video, frame).
inline GroundTruthSource ground_truth_from(const std::vector<GroundTruthMask>& masks) {
  auto table = std::make_shared<std::map<std::pair<std::string, int>, GroundTruthMask>>();
  for (const auto& m : masks) (*table)[{m.video_id, m.frame_index}] = m;
  return [table](const std::string& video, int frame) -> std::optional<GroundTruthMask> {
    const auto it = table->find({video, frame});
    if (it == table->end()) return std::nullopt;
    return it->second;
  };
}

// ---------------------------------------------------------------------------

/// One-hot node labels; rows of uncovered nodes are zero.
struct LabelMatrix {
  Matrix y;
  std::vector<bool> covered;

  std::size_t nodes() const { return covered.size(); }
  int label(std::size_t i) const { return y(static_cast<Eigen::Index>(i), 1) > 0.5 ? 1 : 0; }
};

/// Foreground iff strictly more than half of the mask pixels that are not
/// GT-unknown are GT-foreground. Nodes without GT, or whose mask is entirely
/// unknown, are left uncovered. Instance node ids must be 0..N-1.
inline LabelMatrix label_nodes(const std::vector<Instance>& instances, const GroundTruthSource& gt_source) {
  const std::size_t n = instances.size();
  LabelMatrix labels{Matrix::Zero(static_cast<Eigen::Index>(n), kClassCount), std::vector<bool>(n, false)};
  std::map<std::pair<std::string, int>, std::optional<GroundTruthMask>> cache;
  for (const auto& inst : instances) {
    require(inst.node_id >= 0 && static_cast<std::size_t>(inst.node_id) < n, ErrorCode::kInvalidArgument,
            "node ids must be 0..N-1");
    auto key = std::make_pair(inst.video_id, inst.frame_index);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, gt_source(inst.video_id, inst.frame_index)).first;
    if (!it->second) continue;
    const GroundTruthMask& gt = *it->second;
    require(inst.bbox.inside(gt.width, gt.height), ErrorCode::kDimensionMismatch,
            "instance of " + inst.video_id + " frame " + std::to_string(inst.frame_index) +
                " does not fit its ground truth");
    std::size_t fg = 0, known = 0;
    for (const auto& p : inst.mask_pixels) {
      const GtLabel l = gt.at(p.row, p.col);
      if (l == GtLabel::kUnknown) continue;
      ++known;
      if (l == GtLabel::kForeground) ++fg;
    }
    if (known == 0) continue;
    const int cls = 2 * fg > known ? 1 : 0;
    labels.y(inst.node_id, cls) = 1.0;
    labels.covered[static_cast<std::size_t>(inst.node_id)] = true;
  }
  return labels;
}

inline LabelMatrix label_nodes(const std::vector<Instance>& instances, const std::vector<GroundTruthMask>& gt) {
  return label_nodes(instances, ground_truth_from(gt));
}

// ---------------------------------------------------------------------------

/// Node bookkeeping: which video/frame/segment each node came from.
struct NodeRecord {
  int node_id = 0;
  std::string video_id;
  std::string challenge;
  int frame_index = 0;
  int label = 0;
  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct SplitSpec {
  int partition_id = 0;
  std::vector<std::string> unseen_videos;
  std::vector<int> train;       // S
  std::vector<int> validation;  // T_k
  std::vector<int> test;        // U_k
  double density = 0.0;
  std::uint64_t seed = 0;
  std::size_t total_nodes = 0;
};

inline constexpr double kValidationFraction = 0.01;

inline std::size_t rounded_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

/// Unseen-video split: U = all nodes of the unseen videos; S and T are
/// drawn uniformly without replacement from covered nodes of the other
/// videos, |S| = round(density N), |T| = round(0.01 N).
inline SplitSpec make_split(const std::vector<NodeRecord>& catalog, const std::vector<bool>& covered,
                            const std::vector<std::string>& unseen_videos, double density, std::uint64_t seed,
                            int partition_id = 0) {
  require(density > 0.0 && density < 1.0, ErrorCode::kInvalidArgument, "density must be in (0, 1)");
  require(covered.size() == catalog.size(), ErrorCode::kShapeMismatch, "coverage flags differ from catalog size");
  const std::set<std::string> unseen(unseen_videos.begin(), unseen_videos.end());
  require(!unseen.empty(), ErrorCode::kInvalidArgument, "no unseen videos given");
  std::set<std::string> present;
  for (const auto& r : catalog) present.insert(r.video_id);
  for (const auto& v : unseen)
    require(present.count(v) != 0, ErrorCode::kInvalidArgument, "unseen video '" + v + "' has no nodes");

  SplitSpec split;
  split.partition_id = partition_id;
  split.unseen_videos.assign(unseen.begin(), unseen.end());
  split.density = density;
  split.seed = seed;
  split.total_nodes = catalog.size();

  std::vector<int> candidates;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (unseen.count(catalog[i].video_id)) {
      split.test.push_back(static_cast<int>(i));
    } else if (covered[i]) {
      candidates.push_back(static_cast<int>(i));
    }
  }
  const std::size_t n_train = rounded_count(density, catalog.size());
  const std::size_t n_val = rounded_count(kValidationFraction, catalog.size());
  require(n_train >= 1 && n_val >= 1, ErrorCode::kNotEnoughNodes,
          "N=" + std::to_string(catalog.size()) + " too small for density " + format_double(density));
  require(n_train + n_val <= candidates.size(), ErrorCode::kNotEnoughNodes,
          "need " + std::to_string(n_train + n_val) + " labelled nodes outside unseen videos, have " +
              std::to_string(candidates.size()));
  Rng rng(seed);
  rng.shuffle(candidates);
  split.train.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(candidates.begin() + static_cast<std::ptrdiff_t>(n_train),
                          candidates.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

inline nlohmann::json split_to_json(const SplitSpec& s, const std::vector<std::string>& train_videos = {}) {
  nlohmann::json j;
  j["partition"] = s.partition_id;
  j["unseen_videos"] = s.unseen_videos;
  j["train_videos"] = train_videos;
  j["density"] = s.density;
  j["seed"] = s.seed;
  j["total_nodes"] = s.total_nodes;
  j["train"] = s.train;
  j["validation"] = s.validation;
  j["test"] = s.test;
  return j;
}

inline SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  try {
    s.partition_id = j.at("partition").get<int>();
    s.unseen_videos = j.at("unseen_videos").get<std::vector<std::string>>();
    s.density = j.at("density").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.total_nodes = j.at("total_nodes").get<std::size_t>();
    s.train = j.at("train").get<std::vector<int>>();
    s.validation = j.at("validation").get<std::vector<int>>();
    s.test = j.at("test").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, std::string("split file: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 1 = foreground

  bool at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col] != 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1)); }
};

/// Union of the pixels of every instance predicted foreground.
/// `classes` is indexed by node id.
inline BinaryMask render_prediction(const std::vector<const Instance*>& frame_instances, const std::vector<int>& classes,
                                    int width, int height) {
  BinaryMask mask{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  for (const Instance* inst : frame_instances) {
    require(inst->node_id >= 0 && static_cast<std::size_t>(inst->node_id) < classes.size(),
            ErrorCode::kOutOfBounds, "no prediction for node " + std::to_string(inst->node_id));
    if (classes[static_cast<std::size_t>(inst->node_id)] != 1) continue;
    for (const auto& p : inst->mask_pixels) {
      require(p.row >= 0 && p.row < height && p.col >= 0 && p.col < width, ErrorCode::kPixelOutOfFrame,
              "instance pixel outside frame");
      mask.data[static_cast<std::size_t>(p.row) * width + p.col] = 1;
    }
  }
  return mask;
}

struct PixelCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  PixelCounts& operator+=(const PixelCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const PixelCounts&, const PixelCounts&) = default;

  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double f_measure() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct FrameScore {
  PixelCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  bool scored = true;  // false when neither GT nor prediction has foreground
};

/// Pixel-level scores; GT-unknown pixels are ignored.
inline FrameScore f_measure(const BinaryMask& pred, const GroundTruthMask& gt) {
  require(pred.width == gt.width && pred.height == gt.height, ErrorCode::kDimensionMismatch,
          "prediction and ground truth differ in size");
  FrameScore s;
  std::uint64_t gt_fg = 0, pred_fg = 0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (gt.data[i] == GtLabel::kUnknown) continue;
    const bool p = pred.data[i] != 0;
    const bool g = gt.data[i] == GtLabel::kForeground;
    gt_fg += g;
    pred_fg += p;
    if (p && g) ++s.counts.tp;
    else if (p) ++s.counts.fp;
    else if (g) ++s.counts.fn;
  }
  s.precision = s.counts.precision();
  s.recall = s.counts.recall();
  s.f = s.counts.f_measure();
  s.scored = gt_fg != 0 || pred_fg != 0;
  return s;
}

// ---------------------------------------------------------------------------

struct VideoInfo {
  std::string id;
  std::string challenge;
  int width = 0;
  int height = 0;
  std::vector<int> gt_frames;  // frames with ground truth, scored on evaluation
};

/// Everything the protocol needs about a dataset, independent of storage.
struct Dataset {
  std::vector<VideoInfo> videos;
  std::vector<Instance> instances;  // node_id == position
  GroundTruthSource ground_truth;

  const VideoInfo& video(const std::string& id) const {
    for (const auto& v : videos)
      if (v.id == id) return v;
    throw Error(ErrorCode::kInvalidArgument, "unknown video '" + id + "'");
  }

  std::vector<NodeRecord> catalog() const {
    std::vector<NodeRecord> out;
    out.reserve(instances.size());
    for (const auto& inst : instances)
      out.push_back({inst.node_id, inst.video_id, video(inst.video_id).challenge, inst.frame_index, inst.label});
    return out;
  }
};

struct VideoScore {
  std::string video;
  std::string challenge;
  PixelCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct EvalReport {
  std::vector<VideoScore> videos;
  std::map<std::string, double> challenge_f;  // unweighted mean of per-video F
  double overall_f = 0.0;                     // unweighted mean over challenges
};

inline void summarize(EvalReport& r) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& v : r.videos) {
    acc[v.challenge].first += v.f;
    acc[v.challenge].second += 1;
  }
  r.challenge_f.clear();
  double total = 0.0;
  for (const auto& [c, sum_n] : acc) {
    r.challenge_f[c] = sum_n.first / sum_n.second;
    total += r.challenge_f[c];
  }
  r.overall_f = acc.empty() ? 0.0 : total / static_cast<double>(acc.size());
}

/// Scores the given videos frame by frame on their GT frames and sums the
/// counts per video (micro-aggregation).
inline EvalReport evaluate_videos(const Dataset& data, const std::vector<std::string>& video_ids,
                                  const std::vector<int>& classes) {
  std::map<std::pair<std::string, int>, std::vector<const Instance*>> by_frame;
  for (const auto& inst : data.instances) by_frame[{inst.video_id, inst.frame_index}].push_back(&inst);
  EvalReport report;
  for (const auto& id : video_ids) {
    const VideoInfo& info = data.video(id);
    VideoScore vs{id, info.challenge, {}, 0, 0, 0};
    for (int frame : info.gt_frames) {
      const auto gt = data.ground_truth(id, frame);
      if (!gt) continue;
      const auto it = by_frame.find({id, frame});
      static const std::vector<const Instance*> kNone;
      const BinaryMask pred = render_prediction(it == by_frame.end() ? kNone : it->second, classes, gt->width, gt->height);
      const FrameScore s = f_measure(pred, *gt);
      if (s.scored) vs.counts += s.counts;
    }
    vs.precision = vs.counts.precision();
    vs.recall = vs.counts.recall();
    vs.f = vs.counts.f_measure();
    report.videos.push_back(std::move(vs));
  }
  summarize(report);
  return report;
}

inline void write_report_csv(const std::string& path, const EvalReport& r) {
  auto os = open_out(path);
  os << "video,challenge,TP,FP,FN,precision,recall,f\n";
  for (const auto& v : r.videos)
    os << v.video << ',' << v.challenge << ',' << v.counts.tp << ',' << v.counts.fp << ',' << v.counts.fn << ','
       << format_double(v.precision) << ',' << format_double(v.recall) << ',' << format_double(v.f) << '\n';
}

// ---------------------------------------------------------------------------

/// One split -> train -> evaluate configuration.
struct Experiment {
  const Dataset* data = nullptr;
  const Matrix* features = nullptr;
  const NormalizedAdjacency* adjacency = nullptr;
  const LabelMatrix* labels = nullptr;
  std::vector<std::string> unseen_videos;
  int partition_id = 0;
  double density = 0.1;
  TrainConfig train;
  std::uint64_t base_seed = 0;
};

struct RepetitionResult {
  int repetition = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t train_seed = 0;
  SplitSpec split;
  TrainResult training;
  Prediction prediction;
  EvalReport report;
};

struct SequenceSummary {
  std::string video;
  std::string challenge;
  std::vector<double> f_per_repetition;
  double mean_f = 0.0;
  double best_f = 0.0;
};

struct MonteCarloReport {
  std::vector<RepetitionResult> runs;
  std::vector<SequenceSummary> sequences;
  std::map<std::string, double> challenge_mean_f;
  std::map<std::string, double> challenge_best_f;
  double overall_mean_f = 0.0;
  double overall_best_f = 0.0;
};

inline std::uint64_t density_key(double density) { return std::bit_cast<std::uint64_t>(density); }

inline std::uint64_t split_seed(std::uint64_t base, int partition, double density, int rep) {
  return derive_seed(base, "split", {static_cast<std::uint64_t>(partition), density_key(density),
                                     static_cast<std::uint64_t>(rep)});
}

inline std::uint64_t train_seed(std::uint64_t base, int partition, double density, int rep) {
  return derive_seed(base, "train", {static_cast<std::uint64_t>(partition), density_key(density),
                                     static_cast<std::uint64_t>(rep)});
}

/// A single repetition; labels of unseen-video nodes are never read.
inline RepetitionResult run_repetition(const Experiment& exp, int rep) {
  require(exp.data && exp.features && exp.adjacency && exp.labels, ErrorCode::kInvalidArgument,
          "incomplete experiment");
  RepetitionResult r;
  r.repetition = rep;
  r.split_seed = split_seed(exp.base_seed, exp.partition_id, exp.density, rep);
  r.train_seed = train_seed(exp.base_seed, exp.partition_id, exp.density, rep);
  r.split = make_split(exp.data->catalog(), exp.labels->covered, exp.unseen_videos, exp.density, r.split_seed,
                       exp.partition_id);
  TrainConfig cfg = exp.train;
  cfg.seed = r.train_seed;
  // Training sees labels only through S and T.
  Matrix y = Matrix::Zero(exp.labels->y.rows(), exp.labels->y.cols());
  for (int i : r.split.train) y.row(i) = exp.labels->y.row(i);
  for (int i : r.split.validation) y.row(i) = exp.labels->y.row(i);
  r.training = train(*exp.features, *exp.adjacency, y, r.split.train, r.split.validation, cfg);
  r.prediction = predict(r.training.model, *exp.features, *exp.adjacency);
  r.report = evaluate_videos(*exp.data, r.split.unseen_videos, r.prediction.classes);
  return r;
}

/// Aggregates per-sequence mean and best F over repetitions.
inline void aggregate(MonteCarloReport& mc) {
  mc.sequences.clear();
  if (mc.runs.empty()) return;
  for (const auto& v : mc.runs.front().report.videos) mc.sequences.push_back({v.video, v.challenge, {}, 0.0, 0.0});
  for (auto& s : mc.sequences) {
    for (const auto& run : mc.runs)
      for (const auto& v : run.report.videos)
        if (v.video == s.video) s.f_per_repetition.push_back(v.f);
    double sum = 0.0;
    s.best_f = 0.0;
    for (double f : s.f_per_repetition) {
      sum += f;
      s.best_f = std::max(s.best_f, f);
    }
    s.mean_f = s.f_per_repetition.empty() ? 0.0 : sum / static_cast<double>(s.f_per_repetition.size());
  }
  std::map<std::string, std::array<double, 3>> acc;
  for (const auto& s : mc.sequences) {
    auto& a = acc[s.challenge];
    a[0] += s.mean_f;
    a[1] += s.best_f;
    a[2] += 1.0;
  }
  mc.challenge_mean_f.clear();
  mc.challenge_best_f.clear();
  double mean_total = 0.0, best_total = 0.0;
  for (const auto& [c, a] : acc) {
    mc.challenge_mean_f[c] = a[0] / a[2];
    mc.challenge_best_f[c] = a[1] / a[2];
    mean_total += mc.challenge_mean_f[c];
    best_total += mc.challenge_best_f[c];
  }
  mc.overall_mean_f = acc.empty() ? 0.0 : mean_total / static_cast<double>(acc.size());
  mc.overall_best_f = acc.empty() ? 0.0 : best_total / static_cast<double>(acc.size());
}

/// Runs `repetitions` independent split/train/evaluate cycles. Repetitions
/// may run on `jobs` threads; results do not depend on the thread count.
inline MonteCarloReport monte_carlo(const Experiment& exp, int repetitions, unsigned jobs = 1) {
  require(repetitions >= 1, ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  MonteCarloReport mc;
  mc.runs.resize(static_cast<std::size_t>(repetitions));
  parallel_for(static_cast<std::size_t>(repetitions), jobs,
               [&](std::size_t r) { mc.runs[r] = run_repetition(exp, static_cast<int>(r)); });
  aggregate(mc);
  return mc;
}

inline nlohmann::json summary_json(const MonteCarloReport& mc) {
  nlohmann::json j;
  j["repetitions"] = mc.runs.size();
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : mc.sequences)
    seqs.push_back({{"video", s.video},
                    {"challenge", s.challenge},
                    {"f", s.f_per_repetition},
                    {"mean_f", s.mean_f},
                    {"best_f", s.best_f}});
  j["sequences"] = seqs;
  nlohmann::json ch = nlohmann::json::object();
  for (const auto& [c, f] : mc.challenge_mean_f) ch[c] = {{"mean_f", f}, {"best_f", mc.challenge_best_f.at(c)}};
  j["challenges"] = ch;
  j["overall"] = {{"mean_f", mc.overall_mean_f}, {"best_f", mc.overall_best_f}};
  return j;
}

}  // namespace mogcn
