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

// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include "mogcn/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mogcn;
using testing_support::random_matrix;
using testing_support::slurp;
using testing_support::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

oracle::Dense dense(const Matrix& m) {
  oracle::Dense d = oracle::zeros(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

Csr random_graph(Rng& rng, int n, double p, bool weighted) {
  std::vector<std::tuple<int, int, double>> t;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) {
        const double w = weighted ? rng.uniform(0.05, 1.0) : 1.0;
        t.emplace_back(i, j, w);
        t.emplace_back(j, i, w);
      }
  return csr_from_triplets(n, t);
}

// ---------------------------------------------------------------------------

Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const double eps = 1e-5;
  double worst = 0.0;
  const int graphs = 25;
  for (int g = 0; g < graphs; ++g) {
    const int n = 2 + static_cast<int>(rng.below(9));
    const int c = 1 + static_cast<int>(rng.below(8));
    const int h = 1 + static_cast<int>(rng.below(4));
    const NormalizedAdjacency a = normalize(random_graph(rng, n, 0.4, true));
    const Matrix x = random_matrix(rng, n, c);
    Matrix y = Matrix::Zero(n, 2);
    for (int i = 0; i < n; ++i) y(i, static_cast<Eigen::Index>(rng.below(2))) = 1.0;
    std::vector<int> nodes;
    for (int i = 0; i < n; ++i)
      if (rng.uniform() < 0.6 || nodes.empty()) nodes.push_back(i);
    const GcnModel model = init_model(c, h, 2, rng.next());
    const double decay = g % 2 ? 5e-4 : 0.0;

    const auto fwd = forward(x, a, model);
    const Gradients grads = backward(x, a, model, fwd, y, nodes, decay);
    const auto ad = dense(a.matrix.to_dense()), xd = dense(x), yd = dense(y);
    auto numeric = [&](const GcnModel& m) {
      return oracle::gcn_loss(ad, xd, dense(m.w0), dense(m.w1), yd, nodes, decay);
    };
    auto check = [&](Matrix GcnModel::*w, const Matrix& analytic) {
      for (Eigen::Index i = 0; i < (model.*w).rows(); ++i)
        for (Eigen::Index j = 0; j < (model.*w).cols(); ++j) {
          GcnModel plus = model, minus = model;
          (plus.*w)(i, j) += eps;
          (minus.*w)(i, j) -= eps;
          const double fd = (numeric(plus) - numeric(minus)) / (2.0 * eps);
          const double denom = std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-8});
          worst = std::max(worst, std::abs(fd - analytic(i, j)) / denom);
        }
    };
    check(&GcnModel::w0, grads.w0);
    check(&GcnModel::w1, grads.w1);
  }
  const double t = seconds_since(t0);
  std::ostringstream os;
  os << graphs << " graphs, max relative error " << worst << ", " << t << " s";
  return {worst < 1e-4 && t < 10.0, os.str()};
}

Verdict dense_forward_oracle() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double worst = 0.0;
  for (int g = 0; g < 50; ++g) {
    const NormalizedAdjacency a = normalize(random_graph(rng, 10, 0.35, true));
    const int c = 1 + static_cast<int>(rng.below(12));
    const Matrix x = random_matrix(rng, 10, c);
    const GcnModel model = init_model(c, 1 + static_cast<Eigen::Index>(rng.below(16)), 2, rng.next());
    const Matrix z = forward(x, a, model).z;
    const auto want = oracle::gcn_forward(dense(a.matrix.to_dense()), dense(x), dense(model.w0), dense(model.w1));
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 2; ++j) worst = std::max(worst, std::abs(z(i, j) - want[i][j]));
  }
  const double t = seconds_since(t0);
  std::ostringstream os;
  os << "50 graphs, max abs difference " << worst << ", " << t << " s";
  return {worst <= 1e-10 && t < 5.0, os.str()};
}

Verdict normalization_oracle() {
  Rng rng(303);
  double worst = 0.0;
  for (int g = 0; g < 50; ++g) {
    const int n = 1 + static_cast<int>(rng.below(12));
    const Csr adj = random_graph(rng, n, 0.4, g % 2 == 0);
    const Matrix got = normalize(adj).matrix.to_dense();
    const auto want = oracle::normalized_adjacency(dense(adj.to_dense()));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(got(i, j) - want[i][j]));
  }
  const Matrix two = normalize(csr_from_triplets(2, {{0, 1, 1.0}, {1, 0, 1.0}})).matrix.to_dense();
  const bool exact = (two.array() == 0.5).all();
  std::ostringstream os;
  os << "50 graphs, max abs difference " << worst << "; two-node case " << (exact ? "exact" : "inexact");
  return {worst <= 1e-12 && exact, os.str()};
}

Verdict knn_oracle() {
  const auto t0 = Clock::now();
  Rng rng(404);
  bool all_equal = true;
  const int n = 200, k = 5, trials = 5;
  for (int trial = 0; trial < trials; ++trial) {
    FeatureMatrix fm;
    fm.values = random_matrix(rng, n, 16);
    const SparseGraph g = build_graph(fm, k);
    const auto brute = oracle::knn(dense(fm.values), k);
    std::vector<std::set<int>> expected(n), got(n);
    for (int i = 0; i < n; ++i)
      for (int j : brute[i]) {
        expected[i].insert(j);
        expected[j].insert(i);
      }
    for (int i = 0; i < n; ++i)
      for (std::size_t e = g.adjacency.row_offsets[i]; e < g.adjacency.row_offsets[i + 1]; ++e)
        got[i].insert(g.adjacency.cols[e]);
    all_equal = all_equal && got == expected;
    const auto directed = knn(fm, k);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < k; ++r) all_equal = all_equal && directed[i * k + r].to == brute[i][r];
  }
  const double t = seconds_since(t0);
  std::ostringstream os;
  os << trials << " point sets of N=200, k=5: " << (all_equal ? "exact match" : "MISMATCH") << ", " << t << " s";
  return {all_equal && t < 5.0, os.str()};
}

Verdict learning_sanity() {
  const auto t0 = Clock::now();
  const int n = 200, dim = 8;
  double worst = 1.0;
  std::ostringstream accs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(derive_seed(seed, "blobs"));
    FeatureMatrix fm;
    fm.values = Matrix(n, dim);
    Matrix y = Matrix::Zero(n, 2);
    for (int i = 0; i < n; ++i) {
      const int cls = i < n / 2 ? 0 : 1;
      for (int c = 0; c < dim; ++c) fm.values(i, c) = (cls ? 1.0 : -1.0) + rng.normal();
      y(i, cls) = 1.0;
    }
    const NormalizedAdjacency a = normalize(build_graph(fm, 10));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    // 5% labelled, stratified; 1% validation; the rest is test.
    std::vector<int> s, t, test;
    int per_class[2] = {0, 0};
    for (int i : order) {
      const int cls = y(i, 1) > 0.5;
      if (per_class[cls] < 5) {
        s.push_back(i);
        ++per_class[cls];
      } else if (t.size() < 2) {
        t.push_back(i);
      } else {
        test.push_back(i);
      }
    }
    TrainConfig cfg;
    cfg.seed = seed;
    const auto result = train(fm.values, a, y, s, t, cfg);
    const auto [test_loss, test_acc] = evaluate_nodes(forward(fm.values, a, result.model).z, y, test);
    (void)test_loss;
    worst = std::min(worst, test_acc);
    accs << (seed > 1 ? ", " : "") << test_acc;
  }
  const double t = seconds_since(t0);
  std::ostringstream os;
  os << "test accuracy per seed [" << accs.str() << "], min " << worst << ", " << t << " s";
  return {worst >= 0.95 && t < 30.0, os.str()};
}

RunConfig synthetic_config(const TempDir& dir, const std::string& name, unsigned jobs) {
  const auto out = write_synthetic_dataset(default_synthetic_dataset(1), dir.str(name));
  RunConfig cfg = load_run_config(out.config_path);
  cfg.jobs = jobs;
  return cfg;
}

Verdict end_to_end(const TempDir& dir) {
  const auto t0 = Clock::now();
  const RunConfig cfg = synthetic_config(dir, "e2e", 3);
  const auto failures = run_pipeline(cfg);
  const auto summary = read_json((fs::path(cfg.output_dir) / "report" / "summary.json").string());
  const auto& seq = summary.at("results")[0].at("sequences");
  double mean_f = -1.0;
  std::ostringstream os;
  for (const auto& s : seq)
    if (s.at("video") == "video3") {
      mean_f = s.at("mean_f").get<double>();
      os << "unseen video F per repetition " << s.at("f").dump() << ", mean " << mean_f;
    }
  const double t = seconds_since(t0);
  os << ", " << t << " s";
  return {failures.empty() && mean_f >= 0.90 && t < 120.0, os.str()};
}

Verdict f_measure_oracle() {
  Rng rng(707);
  bool exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = 1 + static_cast<int>(rng.below(64)), h = 1 + static_cast<int>(rng.below(64));
    const double p_fg = rng.uniform();
    BinaryMask pred{w, h, {}};
    GroundTruthMask gt{"v", 0, w, h, {}};
    std::vector<int> p, g;
    for (int i = 0; i < w * h; ++i) {
      p.push_back(rng.uniform() < p_fg);
      g.push_back(static_cast<int>(rng.below(3)));
      pred.data.push_back(static_cast<std::uint8_t>(p.back()));
      gt.data.push_back(static_cast<GtLabel>(g.back()));
    }
    const FrameScore s = f_measure(pred, gt);
    const auto want = oracle::pixel_counts(p, g);
    exact = exact && s.counts.tp == want.tp && s.counts.fp == want.fp && s.counts.fn == want.fn;
    const double prec = want.tp + want.fp ? double(want.tp) / double(want.tp + want.fp) : 0.0;
    const double rec = want.tp + want.fn ? double(want.tp) / double(want.tp + want.fn) : 0.0;
    const double f = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    exact = exact && s.precision == prec && s.recall == rec && s.f == f;
  }
  // TP=2, FP=1, FN=1 on a 5-pixel frame.
  BinaryMask pred{5, 1, {1, 1, 1, 0, 0}};
  GroundTruthMask gt{"v", 0, 5, 1, {GtLabel::kForeground, GtLabel::kForeground, GtLabel::kBackground,
                                    GtLabel::kForeground, GtLabel::kBackground}};
  const FrameScore s = f_measure(pred, gt);
  const bool example = s.counts == PixelCounts{2, 1, 1} && std::abs(s.f - 2.0 / 3.0) < 1e-15;
  std::ostringstream os;
  os << "1000 random pairs " << (exact ? "exact" : "MISMATCH") << "; TP=2,FP=1,FN=1 gives F=" << s.f;
  return {exact && example, os.str()};
}

Verdict split_invariants() {
  std::vector<NodeRecord> catalog;
  const std::vector<std::pair<std::string, int>> videos = {{"a", 2400}, {"b", 1800}, {"c", 1000}, {"d", 800}};
  for (const auto& [id, count] : videos)
    for (int k = 0; k < count; ++k) catalog.push_back({static_cast<int>(catalog.size()), id, "SYN", k, 1});
  const std::size_t n = catalog.size();
  std::vector<bool> covered(n, true);
  Rng rng(808);
  for (std::size_t i = 0; i < n; ++i) covered[i] = rng.uniform() < 0.9;
  int checked = 0;
  bool ok = true;
  for (double density : {0.001, 0.005, 0.05, 0.1})
    for (const std::vector<std::string>& unseen :
         {std::vector<std::string>{"a"}, std::vector<std::string>{"c", "d"}})
      for (int rep = 0; rep < 3; ++rep) {
        const SplitSpec s = make_split(catalog, covered, unseen, density, split_seed(1, 1, density, rep));
        const std::set<std::string> u(unseen.begin(), unseen.end());
        std::vector<int> seen(n, 0);
        for (const auto* part : {&s.train, &s.validation, &s.test})
          for (int i : *part) ok = ok && ++seen[i] == 1;
        for (const auto* part : {&s.train, &s.validation})
          for (int i : *part) ok = ok && !u.count(catalog[i].video_id) && covered[i];
        std::size_t unseen_nodes = 0;
        for (const auto& r : catalog) unseen_nodes += u.count(r.video_id);
        ok = ok && s.test.size() == unseen_nodes;
        ok = ok && s.train.size() == static_cast<std::size_t>(std::llround(density * n));
        ok = ok && s.validation.size() == static_cast<std::size_t>(std::llround(0.01 * n));
        ++checked;
      }
  std::ostringstream os;
  os << checked << " splits over N=" << n << " and densities {0.001, 0.005, 0.05, 0.1}";
  return {ok, os.str()};
}

Verdict determinism(const TempDir& dir) {
  const RunConfig a = synthetic_config(dir, "det_a", 1);
  const RunConfig b = synthetic_config(dir, "det_b", 4);
  const auto fa = run_pipeline(a);
  const auto fb = run_pipeline(b);
  int compared = 0;
  bool same = fa.empty() && fb.empty();
  auto compare = [&](const fs::path& rel) {
    const fs::path pa = fs::path(a.output_dir) / rel, pb = fs::path(b.output_dir) / rel;
    same = same && fs::exists(pa) && fs::exists(pb) && slurp(pa) == slurp(pb);
    ++compared;
  };
  for (const char* f : {"report/summary.json", "report/sequences.csv", "report/challenges.csv",
                        "features/features.bin", "graph/graph.csr"})
    compare(f);
  for (const auto& r : plan_runs(a))
    for (const char* f : {"model.bin", "report.csv", "history.csv", "predictions.csv", "split.json"})
      compare(fs::path("runs") / r.name / f);
  std::ostringstream os;
  os << compared << " artifacts compared across two runs (1 and 4 worker threads): "
     << (same ? "bitwise identical" : "DIFFERENT");
  return {same, os.str()};
}

// CDNet-style tree: <root>/<challenge>/<video>/{input,groundtruth,temporalROI.txt}
// with 16-bit label-image instances under <masks>/<challenge>/<video>.
void write_cdnet_like(const fs::path& root, const fs::path& masks) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> layout = {
      {"baseline", {"highway", "office"}}, {"shadow", {"cubicle", "bungalows"}}, {"thermal", {"park", "lakeSide"}}};
  int v = 0;
  for (const auto& [challenge, vids] : layout)
    for (const auto& vid : vids) {
      SyntheticSpec s;
      s.video_id = vid;
      s.frames = 20;
      s.width = 56;
      s.height = 40;
      s.seed = derive_seed(10, "cdnet", {static_cast<std::uint64_t>(v)});
      s.movers = {MovingObject{7, 7, 2 + v, 4, 1, 0, 0.8 - 0.04 * v, 0.1},
                  MovingObject{6, 6, 40, 2 + v % 2, 0, 1, 0.25, 0.1}};
      s.distractors = {StaticDistractor{{4, 26, 8, 8}, 0.7, 0.1}, StaticDistractor{{22, 2 + v % 3, 7, 7}, 0.3, 0.1}};
      const auto seq = synth_sequence(s);
      const fs::path dir = root / challenge / vid;
      fs::create_directories(dir / "input");
      fs::create_directories(dir / "groundtruth");
      for (const auto& f : seq.frames) {
        RawImage rgb{f.width, f.height, 3, 255, {}};
        for (double x : f.data)
          for (int ch = 0; ch < 3; ++ch) rgb.samples.push_back(static_cast<std::uint16_t>(std::lround(x * 255.0)));
        write_image((dir / "input" / format_template("in%06d.png", f.frame_index)).string(), rgb);
      }
      for (const auto& g : seq.ground_truth)
        write_image((dir / "groundtruth" / format_template("gt%06d.png", g.frame_index)).string(), gt_to_raw(g));
      std::ofstream(dir / "temporalROI.txt") << "3 " << s.frames << '\n';
      write_instance_labels((masks / challenge / vid).string(), "in%06d.png", seq.instances, s.width, s.height);
      ++v;
    }
}

Verdict dataset_mode(const TempDir& dir) {
  const char* env_root = std::getenv("MOGCN_CDNET_ROOT");
  const char* env_masks = std::getenv("MOGCN_CDNET_INSTANCES");
  const bool real = env_root && env_masks;
  fs::path root, masks;
  if (real) {
    root = env_root;
    masks = env_masks;
  } else {
    root = dir.path() / "cdnet" / "dataset";
    masks = dir.path() / "cdnet" / "instances";
    write_cdnet_like(root, masks);
  }
  const nlohmann::json cdnet{{"root", root.string()}, {"instances_root", masks.string()},
                             {"frame_pattern", real ? "in%06d.jpg" : "in%06d.png"}};
  RunConfig cfg = parse_run_config(nlohmann::json{{"cdnet", cdnet}}, dir.str());
  cfg.output_dir = dir.str("cdnet_run");
  cfg.seed = 1;
  cfg.jobs = 3;
  if (!real) cfg.k = 10;
  // One partition: the first video of every challenge is unseen.
  PartitionSpec part{1, {}};
  std::set<std::string> challenges;
  for (const auto& v : cfg.videos)
    if (challenges.insert(v.challenge).second) part.unseen.push_back(v.id);
  cfg.protocol.partitions = {part};
  cfg.protocol.densities = {0.1};
  cfg.protocol.repetitions = real ? 1 : 3;
  const auto failures = run_pipeline(cfg);

  const fs::path csv = fs::path(cfg.output_dir) / "report" / "challenges.csv";
  std::ifstream is(csv);
  std::string header, mean_row;
  std::getline(is, header);
  std::getline(is, mean_row);
  std::string expected_header = "partition,density,statistic";
  for (const auto& c : challenge_codes()) expected_header += "," + c;
  expected_header += ",overall";

  bool ok = failures.empty() && header == expected_header;
  const auto summary = read_json((fs::path(cfg.output_dir) / "report" / "summary.json").string());
  const auto& ch = summary.at("results")[0].at("challenges");
  std::ostringstream os;
  os << (real ? "user dataset" : "synthetic CDNet-layout dataset") << ", " << cfg.videos.size() << " videos; F:";
  for (const auto& c : challenges) {
    ok = ok && ch.contains(c);
    if (!ch.contains(c)) continue;
    const double f = ch.at(c).at("mean_f");
    ok = ok && f >= 0.0 && f <= 1.0;
    os << ' ' << c << '=' << f;
  }
  const double overall = summary.at("results")[0].at("overall").at("mean_f");
  ok = ok && overall >= 0.0 && overall <= 1.0;
  os << ", overall=" << overall;
  return {ok, os.str()};
}

}  // namespace

int main() {
  TempDir scratch("acceptance");
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient vs central finite differences", gradient_oracle},
      {2, "sparse forward vs dense oracle", dense_forward_oracle},
      {3, "normalized adjacency vs dense oracle", normalization_oracle},
      {4, "k-NN graph vs brute force", knn_oracle},
      {5, "two-blob learning sanity", learning_sanity},
      {6, "synthetic end-to-end unseen-video F", [&] { return end_to_end(scratch); }},
      {7, "F-measure vs naive counting", f_measure_oracle},
      {8, "split invariants", split_invariants},
      {9, "bitwise determinism of full runs", [&] { return determinism(scratch); }},
      {10, "dataset-mode report schema", [&] { return dataset_mode(scratch); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " -- " << v.detail
              << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
