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

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "rlplace/cli.hpp"
#include "rlplace/errors.hpp"
#include "rlplace/random.hpp"

namespace rlplace
{

using nlohmann::json;

namespace
{

const std::vector<std::string> kCommands{
  "gen-scene", "simulate", "train", "optimize", "eval", "audit", "report"};

std::string read_bytes(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read '" + path.string() + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    throw IoError("cannot write '" + path.string() + "'");
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL)
{
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool needs_scenario(const std::string & command) { return command != "gen-scene"; }

std::vector<int> all_ids(const Scenario & s)
{
  std::vector<int> ids(s.mounts.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

double elapsed_ms(std::chrono::steady_clock::time_point since)
{
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

json ap_to_json(const APResult & r)
{
  json j;
  j["ap_03"] = r.ap_03;
  j["ap_05"] = r.ap_05;
  j["ap_07"] = r.ap_07;
  j["frames"] = r.frames;
  json counts = json::array();
  for (std::size_t t = 0; t < kApThresholds.size(); ++t) {
    json per = json::array();
    for (const auto & c : r.per_frame[t]) {
      per.push_back({c.tp, c.fp, c.fn});
    }
    counts.push_back({{"threshold", kApThresholds[t]},
        {"tp", r.totals[t].tp}, {"fp", r.totals[t].fp}, {"fn", r.totals[t].fn},
        {"per_frame_tp_fp_fn", per}});
  }
  j["counts"] = counts;
  return j;
}

// Shared state for the stages that need a scenario.
struct Session
{
  const RunConfig & cfg;
  std::filesystem::path dir;
  Scenario scenario;
  std::unique_ptr<CastCache> cache;
  std::vector<int> frames;
  std::vector<int> ids;

  Session(const RunConfig & c, std::filesystem::path d) : cfg(c), dir(std::move(d))
  {
    scenario = load_scenario(cfg.scenario);
    cache = std::make_unique<CastCache>(scenario, LidarSpec{});
    frames = resolve_frames(cfg.frames, static_cast<int>(scenario.frames.size()));
    ids = all_ids(scenario);
  }

  PredictorModel model()
  {
    if (!cfg.model.empty()) {
      return load_model(cfg.model);
    }
    cache->warm(frames, ids);
    const auto samples = make_training_samples(
      *cache, frames, static_cast<std::size_t>(cfg.train_samples), cfg.train.seed);
    PredictorModel m = train_predictor(samples, cfg.train).model;
    save_model(m, dir / "model.json");
    return m;
  }

  void check_brute_budget(int m) const
  {
    const std::uint64_t need = binomial(ids.size(), static_cast<std::uint64_t>(m));
    if (need > cfg.budget) {
      throw BudgetError(fmt::format(
          "brute force needs C({},{})={} evaluations, budget is {}", ids.size(), m, need,
          cfg.budget));
    }
  }

  Placement select(Method method, int m, const Scorer * scorer, std::uint64_t seed,
    GainTrace * trace = nullptr)
  {
    switch (method) {
      case Method::kRandom:
        return random_select(ids, m, seed);
      case Method::kCovDens:
        return coverage_density_select(*cache, ids, m, frames, scenario.grid);
      case Method::kBrute:
        return brute_force_select(ids, m, *scorer, cfg.budget).placement;
      case Method::kGreedy:
      default: {
        GreedyResult g = greedy_select(ids, m, *scorer);
        if (trace) {
          *trace = g.trace;
        }
        return g.placement;
      }
    }
  }
};

void write_trace(const GainTrace & trace, const std::filesystem::path & path)
{
  std::string text = "step,chosen_id,before,after,gain\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto & s = trace[i];
    text += fmt::format("{},{},{:.9f},{:.9f},{:.9f}\n", i + 1, s.chosen_id, s.before, s.after, s.gain);
  }
  write_text(path, text);
}

void write_json(const std::filesystem::path & path, const json & j) { write_text(path, j.dump(1) + "\n"); }

void stage_gen_scene(const RunConfig & cfg, const std::filesystem::path & dir)
{
  save_scenario(generate_scene(cfg.seed, cfg.scene), dir / "scenario.json");
}

void stage_simulate(Session & s)
{
  s.cache->warm(s.frames, s.ids);
  std::filesystem::create_directories(s.dir / "clouds");
  std::string summary = "frame,mount,points,vehicle_points\n";
  for (int f : s.frames) {
    for (int id : s.ids) {
      const PointCloud & c = s.cache->get(f, id);
      write_point_cloud(c, s.dir / "clouds" / fmt::format("f{:03d}_m{:03d}.rlpc", f, id));
      const auto vehicle = std::count_if(c.points.begin(), c.points.end(),
          [](const LabeledPoint & p) { return !p.is_static(); });
      summary += fmt::format("{},{},{},{}\n", f, id, c.points.size(), vehicle);
    }
  }
  write_text(s.dir / "clouds.csv", summary);
}

void stage_train(Session & s)
{
  s.cache->warm(s.frames, s.ids);
  const auto samples = make_training_samples(
    *s.cache, s.frames, static_cast<std::size_t>(s.cfg.train_samples), s.cfg.train.seed);
  const TrainResult r = train_predictor(samples, s.cfg.train);
  save_model(r.model, s.dir / "model.json");
  std::string loss = "epoch,loss\n";
  for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
    loss += fmt::format("{},{:.12f}\n", i, r.loss_history[i]);
  }
  write_text(s.dir / "loss.csv", loss);
  // First sample's map next to its supervision, for side-by-side inspection.
  const AbilityMap a = predict_ability(r.model, extract_features(samples.front().x_hat, s.scenario.grid));
  write_grid_pgm(a, s.dir / "ability.pgm");
  write_grid_csv(a, s.dir / "ability.csv");
  write_grid_pgm(samples.front().confidence, s.dir / "confidence.pgm");
}

void stage_optimize(Session & s)
{
  if (s.cfg.method == Method::kBrute) {
    s.check_brute_budget(s.cfg.m);
  }
  if (s.cfg.m < 1 || static_cast<std::size_t>(s.cfg.m) > s.ids.size()) {
    throw ParameterError(fmt::format("--m must be in [1, {}]", s.ids.size()));
  }
  const PredictorModel model = s.model();
  s.cache->warm(s.frames, s.ids);
  const PerceptionScorer scorer(*s.cache, model, s.cfg.scorer, s.frames);
  GainTrace trace;
  const Placement p = s.select(s.cfg.method, s.cfg.m, &scorer, s.cfg.seed, &trace);

  json result;
  result["method"] = to_string(s.cfg.method);
  result["scorer"] = to_string(s.cfg.scorer);
  result["m"] = s.cfg.m;
  result["placement"] = p;
  result["score"] = scorer.score(p);
  result["evaluations"] = scorer.evaluations() - 1;
  result["frames"] = s.frames;
  write_json(s.dir / "result.json", result);
  if (s.cfg.method == Method::kGreedy) {
    write_trace(trace, s.dir / "trace.csv");
  }
  const AbilityMap a = scorer.mean_ability(p);
  write_grid_pgm(a, s.dir / "ability.pgm");
  write_grid_csv(a, s.dir / "ability.csv");
}

void stage_eval(Session & s)
{
  const auto start = std::chrono::steady_clock::now();
  Placement p = s.cfg.placement;
  if (p.empty()) {
    if (s.cfg.method == Method::kBrute) {
      s.check_brute_budget(s.cfg.m);
    }
    std::unique_ptr<PerceptionScorer> scorer;
    if (s.cfg.method == Method::kGreedy || s.cfg.method == Method::kBrute) {
      const PredictorModel model = s.model();
      s.cache->warm(s.frames, s.ids);
      scorer = std::make_unique<PerceptionScorer>(*s.cache, model, s.cfg.scorer, s.frames);
    }
    p = s.select(s.cfg.method, s.cfg.m, scorer.get(), s.cfg.seed);
  }
  const APResult r = evaluate_placement(*s.cache, p, s.frames, s.cfg.fusion);

  json j = ap_to_json(r);
  j["placement"] = p;
  j["fusion"] = s.cfg.fusion == FusionMode::kEarly ? "early" : "late";
  write_json(s.dir / "eval.json", j);
  const std::string label = s.cfg.placement.empty() ? to_string(s.cfg.method) : "placement";
  const std::vector<ReportEntry> entries{{label, static_cast<int>(p.size()),
      s.cfg.seed, r, elapsed_ms(start)}};
  emit_report(entries, s.dir);
}

void stage_audit(Session & s)
{
  const PredictorModel model = s.model();
  s.cache->warm(s.frames, s.ids);
  const PerceptionScorer scorer(*s.cache, model, s.cfg.scorer, s.frames);
  const AuditResult r = submodularity_audit(scorer, s.ids, s.cfg.audit_samples, s.cfg.seed);
  json j;
  j["scorer"] = to_string(s.cfg.scorer);
  j["checks"] = r.checks;
  j["violations"] = r.violations;
  j["violation_rate"] = r.checks > 0 ? static_cast<double>(r.violations) / r.checks : 0.0;
  j["max_violation"] = r.max_violation;
  j["monotonicity_violations"] = r.monotonicity_violations;
  write_json(s.dir / "audit.json", j);
}

// Report rows for M = 1..m: Random (repeated seeds), Ours, CovDens and,
// when the budget allows, the brute-force upper bound.
void stage_report(Session & s)
{
  if (s.cfg.m < 1 || static_cast<std::size_t>(s.cfg.m) > s.ids.size()) {
    throw ParameterError(fmt::format("--m must be in [1, {}]", s.ids.size()));
  }
  const PredictorModel model = s.model();
  s.cache->warm(s.frames, s.ids);
  const PerceptionScorer scorer(*s.cache, model, s.cfg.scorer, s.frames);

  std::vector<ReportEntry> entries;
  GainTrace last_trace;
  auto run = [&](const std::string & label, Method method, int m, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    GainTrace trace;
    const Placement p = s.select(method, m, &scorer, seed, &trace);
    const APResult r = evaluate_placement(*s.cache, p, s.frames, s.cfg.fusion);
    entries.push_back({label, m, seed, r, elapsed_ms(start)});
    if (method == Method::kGreedy) {
      last_trace = trace;
    }
  };
  for (int m = 1; m <= s.cfg.m; ++m) {
    for (int k = 0; k < s.cfg.random_repeats; ++k) {
      run("Random", Method::kRandom, m, hash_combine(s.cfg.seed, static_cast<std::uint64_t>(k)));
    }
    run("CovDens", Method::kCovDens, m, s.cfg.seed);
    run("Ours", Method::kGreedy, m, s.cfg.seed);
    if (binomial(s.ids.size(), static_cast<std::uint64_t>(m)) <= s.cfg.budget) {
      run("Upper bound", Method::kBrute, m, s.cfg.seed);
    }
  }
  emit_report(entries, s.dir);
  write_trace(last_trace, s.dir / "trace.csv");
}

}  // namespace

std::string to_string(Method method)
{
  switch (method) {
    case Method::kGreedy: return "greedy";
    case Method::kBrute: return "brute";
    case Method::kRandom: return "random";
    case Method::kCovDens: return "covdens";
  }
  return "greedy";
}

Method method_from_string(const std::string & name)
{
  if (name == "greedy") return Method::kGreedy;
  if (name == "brute") return Method::kBrute;
  if (name == "random") return Method::kRandom;
  if (name == "covdens") return Method::kCovDens;
  throw ParameterError("unknown method '" + name + "'");
}

std::vector<std::string> pipeline_commands() { return kCommands; }

void RunConfig::validate() const
{
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    throw ParameterError("unknown command '" + command + "'");
  }
  if (out.empty()) {
    throw ParameterError("output directory must be non-empty");
  }
  if (needs_scenario(command) && scenario.empty()) {
    throw ParameterError("--scenario is required for " + command);
  }
  if (m < 1) {
    throw ParameterError("--m must be at least 1");
  }
  if (train_samples < 1 || audit_samples < 1 || random_repeats < 1) {
    throw ParameterError("sample and repeat counts must be positive");
  }
  train.validate();
}

std::vector<int> resolve_frames(const std::string & spec, int n_frames)
{
  const auto parse_int = [&](const std::string & token) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(token, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != token.size()) {
      throw ParameterError("bad --frames value '" + spec + "'");
    }
    return v;
  };
  if (spec.find(',') == std::string::npos) {
    const int count = parse_int(spec);
    if (count < 1 || count > n_frames) {
      throw ParameterError(fmt::format("--frames count must be in [1, {}]", n_frames));
    }
    return evenly_spaced_frames(n_frames, count);
  }
  std::vector<int> out;
  std::stringstream in(spec);
  for (std::string token; std::getline(in, token, ',');) {
    const int f = parse_int(token);
    if (f < 0 || f >= n_frames) {
      throw ParameterError(fmt::format("frame {} outside [0, {})", f, n_frames));
    }
    if (std::find(out.begin(), out.end(), f) != out.end()) {
      throw ParameterError(fmt::format("frame {} listed twice", f));
    }
    out.push_back(f);
  }
  return out;
}

std::string config_to_json(const RunConfig & cfg)
{
  json j;
  j["command"] = cfg.command;
  j["scenario"] = cfg.scenario.string();
  j["model"] = cfg.model.string();
  j["seed"] = cfg.seed;
  j["m"] = cfg.m;
  j["method"] = to_string(cfg.method);
  j["scorer"] = to_string(cfg.scorer);
  j["frames"] = cfg.frames;
  j["placement"] = cfg.placement;
  j["fusion"] = cfg.fusion == FusionMode::kEarly ? "early" : "late";
  j["train"] = {{"gamma", cfg.train.gamma}, {"threshold", cfg.train.threshold},
    {"lr", cfg.train.lr}, {"epochs", cfg.train.epochs}, {"seed", cfg.train.seed},
    {"samples", cfg.train_samples}};
  j["audit_samples"] = cfg.audit_samples;
  j["random_repeats"] = cfg.random_repeats;
  j["budget"] = cfg.budget;
  const SceneParams & p = cfg.scene;
  j["scene"] = {{"n_mounts", p.n_mounts}, {"n_vehicles", p.n_vehicles}, {"n_frames", p.n_frames},
    {"occluder_count", p.occluder_count},
    {"extent", {p.extent.x_min, p.extent.x_max, p.extent.y_min, p.extent.y_max}},
    {"mast_height", p.mast_height}, {"cell_size", p.cell_size}, {"mount_ring", p.mount_ring}};
  return j.dump(1);
}

std::string config_hash(const RunConfig & cfg)
{
  std::uint64_t h = fnv1a(config_to_json(cfg));
  if (needs_scenario(cfg.command)) {
    h = fnv1a(read_bytes(cfg.scenario), h);
  }
  if (!cfg.model.empty()) {
    h = fnv1a(read_bytes(cfg.model), h);
  }
  return fmt::format("{:016x}", h);
}

std::filesystem::path run_directory(const RunConfig & cfg)
{
  return cfg.out / (cfg.command + "-" + config_hash(cfg));
}

std::filesystem::path execute(const RunConfig & cfg)
{
  cfg.validate();
  const std::filesystem::path dir = run_directory(cfg);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  }
  write_text(dir / "config.json", config_to_json(cfg) + "\n");

  if (cfg.command == "gen-scene") {
    stage_gen_scene(cfg, dir);
    return dir;
  }
  Session s(cfg, dir);
  if (cfg.command == "simulate") {
    stage_simulate(s);
  } else if (cfg.command == "train") {
    stage_train(s);
  } else if (cfg.command == "optimize") {
    stage_optimize(s);
  } else if (cfg.command == "eval") {
    stage_eval(s);
  } else if (cfg.command == "audit") {
    stage_audit(s);
  } else {
    stage_report(s);
  }
  return dir;
}

int run_pipeline(const RunConfig & cfg)
{
  const auto diagnostic = [&](std::string_view kind, std::string message) {
    std::replace(message.begin(), message.end(), '\n', ' ');
    std::replace(message.begin(), message.end(), '"', '\'');
    std::cerr << fmt::format("error kind={} command={} message=\"{}\"\n", kind,
      cfg.command.empty() ? "-" : cfg.command, message);
    return 1;
  };
  try {
    std::cout << execute(cfg).string() << "\n";
    return 0;
  } catch (const Error & e) {
    return diagnostic(e.kind(), e.what());
  } catch (const std::filesystem::filesystem_error & e) {
    return diagnostic("io", e.what());
  } catch (const std::exception & e) {
    return diagnostic("internal", e.what());
  }
}

}  // namespace rlplace
