// Copyright 2026 The rlplace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rlplace/cli.hpp"
#include "rlplace/errors.hpp"

int main(int argc, char ** argv)
{
  using namespace rlplace;

  RunConfig cfg;
  std::string method = "greedy";
  std::string scorer = "fused";
  std::string fusion = "early";

  CLI::App app{"Roadside LiDAR placement: scenes, simulation, training, optimization, evaluation"};
  app.require_subcommand(1, 1);

  const auto add_common = [&](CLI::App * sub) {
    sub->add_option("--scenario", cfg.scenario, "Scenario JSON");
    sub->add_option("--out", cfg.out, "Output root; each run gets its own directory")
    ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Seed")->capture_default_str();
    sub->add_option("--frames", cfg.frames, "Frame count (evenly spaced) or comma list")
    ->capture_default_str();
  };
  const auto add_training = [&](CLI::App * sub) {
    sub->add_option("--model", cfg.model, "Trained model JSON; trained inline when absent");
    sub->add_option("--gamma", cfg.train.gamma, "Smoothing loss factor")->capture_default_str();
    sub->add_option("--threshold", cfg.train.threshold, "Supervision mask threshold")
    ->capture_default_str();
    sub->add_option("--epochs", cfg.train.epochs, "Gradient descent epochs")->capture_default_str();
    sub->add_option("--lr", cfg.train.lr, "Initial step size")->capture_default_str();
    sub->add_option("--train-seed", cfg.train.seed, "Training sample seed")->capture_default_str();
    sub->add_option("--samples", cfg.train_samples, "Training samples")->capture_default_str();
  };
  const auto add_selection = [&](CLI::App * sub) {
    sub->add_option("--m", cfg.m, "Number of LiDARs")->capture_default_str();
    sub->add_option("--method", method, "greedy | brute | random | covdens")->capture_default_str();
    sub->add_option("--scorer", scorer, "fused | noisyor")->capture_default_str();
    sub->add_option("--budget", cfg.budget, "Brute-force evaluation budget")->capture_default_str();
  };

  CLI::App * gen = app.add_subcommand("gen-scene", "Generate a scenario");
  add_common(gen);
  gen->add_option("--mounts", cfg.scene.n_mounts, "Candidate mounts")->capture_default_str();
  gen->add_option("--vehicles", cfg.scene.n_vehicles, "Vehicles")->capture_default_str();
  gen->add_option("--n-frames", cfg.scene.n_frames, "Frames")->capture_default_str();
  gen->add_option("--occluders", cfg.scene.occluder_count, "Occluders")->capture_default_str();

  CLI::App * sim = app.add_subcommand("simulate", "Cast every mount on the selected frames");
  add_common(sim);

  CLI::App * train = app.add_subcommand("train", "Train the perception predictor");
  add_common(train);
  add_training(train);

  CLI::App * opt = app.add_subcommand("optimize", "Select a placement");
  add_common(opt);
  add_training(opt);
  add_selection(opt);

  CLI::App * ev = app.add_subcommand("eval", "Proxy AP of a placement");
  add_common(ev);
  add_training(ev);
  add_selection(ev);
  ev->add_option("--placement", cfg.placement, "Explicit mount ids")->delimiter(',');
  ev->add_option("--fusion", fusion, "early | late")->capture_default_str();

  CLI::App * audit = app.add_subcommand("audit", "Sampled submodularity audit");
  add_common(audit);
  add_training(audit);
  audit->add_option("--scorer", scorer, "fused | noisyor")->capture_default_str();
  audit->add_option("--checks", cfg.audit_samples, "Sampled triples")->capture_default_str();

  CLI::App * report = app.add_subcommand("report", "AP table for M = 1..m across methods");
  add_common(report);
  add_training(report);
  add_selection(report);
  report->add_option("--repeats", cfg.random_repeats, "Random baseline seeds")
  ->capture_default_str();
  report->add_option("--fusion", fusion, "early | late")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    std::cerr << "error kind=usage command=- message=\"" << e.what() << "\"\n";
    return 2;
  }

  cfg.command = app.get_subcommands().front()->get_name();
  try {
    cfg.method = method_from_string(method);
    cfg.scorer = scorer_mode_from_string(scorer);
    if (fusion != "early" && fusion != "late") {
      throw ParameterError("unknown fusion mode '" + fusion + "'");
    }
    cfg.fusion = fusion == "early" ? FusionMode::kEarly : FusionMode::kLate;
  } catch (const Error & e) {
    std::cerr << "error kind=" << e.kind() << " command=" << cfg.command << " message=\""
              << e.what() << "\"\n";
    return 1;
  }
  return run_pipeline(cfg);
}
