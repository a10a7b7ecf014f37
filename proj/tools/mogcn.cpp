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

// Command-line driver for the moving-object GCN pipeline.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mogcn/pipeline.hpp"

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  bool dry_run = false;
  bool force = false;
};

mogcn::RunConfig load(const Globals& g) {
  if (g.config.empty()) throw mogcn::Error(mogcn::ErrorCode::kInvalidArgument, "--config is required");
  mogcn::RunConfig cfg = mogcn::load_run_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = std::max(1u, *g.jobs);
  mogcn::validate(cfg);
  return cfg;
}

int report_failures(const mogcn::RunConfig& cfg, const std::vector<mogcn::RunFailure>& failures) {
  mogcn::write_failures(cfg, failures);
  for (const auto& f : failures) std::cerr << "run " << f.run << " failed: " << f.error << '\n';
  return failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moving-object detection as semi-supervised node classification on a k-NN graph"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Override the base seed");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--dry-run", g.dry_run, "Print the plan and write nothing");
  app.add_flag("--force", g.force, "Recompute cached stages");

  std::string spec_path, out_dir;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and a matching config");
  synth->add_option("--spec", spec_path, "Synthetic dataset spec (JSON); built-in default if omitted");
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* features = app.add_subcommand("features", "Background models and node descriptors");
  bool csv = false;
  features->add_flag("--csv", csv, "Also export features.csv");
  auto* graph = app.add_subcommand("graph", "k-NN graph over the node descriptors");
  auto* train = app.add_subcommand("train", "Split, train and predict for every planned run");
  auto* evaluate = app.add_subcommand("evaluate", "Pixel-level scores of every trained run");
  auto* report = app.add_subcommand("report", "Monte Carlo aggregation of the scored runs");
  auto* run = app.add_subcommand("run", "All stages: features, graph, train, evaluate, report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      mogcn::SyntheticDatasetSpec spec = mogcn::default_synthetic_dataset(g.seed.value_or(1));
      if (!spec_path.empty()) {
        spec = mogcn::synthetic_dataset_from_json(mogcn::read_json(spec_path));
        if (g.seed)
          for (std::size_t i = 0; i < spec.videos.size(); ++i)
            spec.videos[i].seed = mogcn::derive_seed(*g.seed, "synth", {i});
      }
      for (const auto& v : spec.videos) mogcn::validate(v);
      if (g.dry_run) {
        std::cout << "synth: " << spec.videos.size() << " videos -> " << out_dir << '\n';
        return 0;
      }
      const auto out = mogcn::write_synthetic_dataset(spec, out_dir);
      std::cout << "wrote " << out.instance_count << " instances; config: " << out.config_path << '\n';
      return 0;
    }

    const mogcn::RunConfig cfg = load(g);
    if (g.dry_run) {
      std::cout << mogcn::describe_plan(cfg);
      return 0;
    }
    std::filesystem::create_directories(cfg.output_dir);
    mogcn::write_json((std::filesystem::path(cfg.output_dir) / "manifest.json").string(), mogcn::manifest_json(cfg));

    if (features->parsed()) {
      const auto r = mogcn::stage_features(cfg, g.force, &std::cerr);
      if (csv) {
        const auto dir = std::filesystem::path(cfg.output_dir) / "features";
        mogcn::export_features_csv((dir / "features.csv").string(),
                                   mogcn::load_features((dir / "features.bin").string()));
      }
      std::cout << "features: " << (r.cached ? "cached" : r.detail) << '\n';
    } else if (graph->parsed()) {
      const auto r = mogcn::stage_graph(cfg, g.force);
      std::cout << "graph: " << (r.cached ? "cached" : r.detail) << '\n';
    } else if (train->parsed()) {
      return report_failures(cfg, mogcn::stage_train(cfg, g.force, &std::cerr));
    } else if (evaluate->parsed()) {
      return report_failures(cfg, mogcn::stage_evaluate(cfg, &std::cerr));
    } else if (report->parsed()) {
      const auto summary = mogcn::stage_report(cfg);
      for (const auto& r : summary.at("results"))
        std::cout << "partition " << r.at("partition") << " density " << r.at("density")
                  << ": overall mean F " << r.at("overall").at("mean_f") << ", best F "
                  << r.at("overall").at("best_f") << '\n';
    } else if (run->parsed()) {
      const auto failures = mogcn::run_pipeline(cfg, g.force, &std::cerr);
      const auto summary = mogcn::read_json((std::filesystem::path(cfg.output_dir) / "report" / "summary.json").string());
      for (const auto& r : summary.at("results"))
        std::cout << "partition " << r.at("partition") << " density " << r.at("density")
                  << ": overall mean F " << r.at("overall").at("mean_f") << ", best F "
                  << r.at("overall").at("best_f") << '\n';
      return report_failures(cfg, failures);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
