// Copyright 2026 The CV-MIML Authors. All Rights Reserved.
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

// Command-line front end, one subcommand per pipeline stage. Outputs depend
// only on flags and input files, and every run writes one manifest. Exit code
// 1 is a runtime failure; 2 is a usage error.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "cvmiml/core.hpp"
#include "cvmiml/dataset_io.hpp"
#include "cvmiml/eval.hpp"
#include "cvmiml/model.hpp"
#include "cvmiml/train.hpp"
#include "cvmiml/weakdata.hpp"

namespace cvmiml::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Presets

struct Preset {
  GeneratorConfig generator;
  TrainConfig train;
};

inline std::vector<std::string> PresetNames() { return {"default", "small", "medium"}; }

inline Preset GetPreset(const std::string& name) {
  Preset p;
  if (name == "default") return p;
  if (name == "small") {
    // Noisy enough that weak labels hurt the classification-only baseline.
    p.generator.num_known_classes = 40;
    p.generator.feature_dim = 64;
    p.generator.sigma_noise = 1.8;
    return p;
  }
  if (name == "medium") {
    p.generator.num_known_classes = 80;
    p.generator.num_views = 4;
    p.generator.feature_dim = 64;
    p.generator.sigma_noise = 1.8;
    return p;
  }
  throw UsageError("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Run manifests

inline std::uint64_t Fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string HashHex(std::string_view bytes) {
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << Fnv1a64(bytes);
  return out.str();
}

inline std::string HashFile(const std::string& path) { return HashHex(ReadFile(path)); }

inline std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  Json config = Json::object();
  std::map<std::string, std::string> inputs;   // path -> hash
  std::map<std::string, std::string> outputs;  // path -> hash
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string created_at;

  void AddInput(const std::string& path) { inputs[path] = HashFile(path); }
  void AddOutput(const std::string& path) { outputs[path] = HashFile(path); }

  Json ToJson() const {
    return Json{{"command", command},     {"config", config},
                {"inputs", inputs},       {"outputs", outputs},
                {"seed", seed},           {"tool_version", tool_version},
                {"created_at", created_at}};
  }

  void Write(const std::string& path) {
    if (created_at.empty()) created_at = UtcTimestamp();
    WriteFile(path, ToJson().dump(2) + "\n");
  }
};

inline std::string ManifestPathFor(const std::string& output) {
  return output + ".manifest.json";
}

// ---------------------------------------------------------------------------
// Flag helpers

// "0..4", "3" or "0,2,5".
inline std::vector<std::uint64_t> ParseSeeds(const std::string& text) {
  auto number = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw UsageError("invalid seed list '" + text + "'");
    return std::stoull(s);
  };
  std::vector<std::uint64_t> seeds;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = number(text.substr(0, dots));
    const auto hi = number(text.substr(dots + 2));
    if (hi < lo) throw UsageError("empty seed range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) seeds.push_back(number(item));
  if (seeds.empty()) throw UsageError("empty seed list");
  return seeds;
}

// Alignment terms kept on top of the classification loss: "all", "none" or a
// comma list drawn from ia, ca, e.
inline TermMask ParseTermMask(const std::string& text) {
  if (text == "all") return TermMask::All();
  if (text == "none") return TermMask::None();
  TermMask mask = TermMask::None();
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item == "ia") mask.intra_bag = true;
    else if (item == "ca") mask.cross_view = true;
    else if (item == "e") mask.entropy = true;
    else throw UsageError("unknown loss term '" + item + "' (expected ia, ca, e)");
  }
  return mask;
}

inline double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string FormatDouble(double x) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << x;
  return out.str();
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string preset = "default";
  std::uint64_t seed = 0;
  std::string out;
  std::string split = "train";
  std::optional<int> bag_min, bag_max;
  std::optional<double> p_miss;
  std::optional<int> unknowns;
  std::optional<double> unknown_rate;
  bool tag_novel = false;
  std::optional<double> junk_rate;
  std::optional<double> tau;
  std::string manifest;
};

inline GeneratorConfig ResolveGenerator(const SimulateOptions& o) {
  GeneratorConfig g = GetPreset(o.preset).generator;
  g.seed = o.seed;
  g.split = o.split;
  if (o.bag_min) g.bag_min = *o.bag_min;
  if (o.bag_max) g.bag_max = *o.bag_max;
  if (o.p_miss) g.p_miss = *o.p_miss;
  if (o.unknowns) g.unknown_identities = *o.unknowns;
  if (o.unknown_rate) g.unknown_rate = *o.unknown_rate;
  if (o.tag_novel) g.tag_novel = true;
  if (o.junk_rate) g.junk_rate = *o.junk_rate;
  if (o.tau) g.confidence_threshold = *o.tau;
  try {
    g.Validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return g;
}

inline int RunSimulate(const SimulateOptions& o, std::ostream& out) {
  const GeneratorConfig g = ResolveGenerator(o);
  const SimulationSummary summary = Simulate(g, o.out);
  RunManifest m;
  m.command = "simulate";
  m.config = {{"preset", o.preset}, {"generator", g.ToJson()}};
  m.seed = o.seed;
  m.AddOutput(o.out);
  m.AddOutput(SidecarPath(o.out));
  m.Write(o.manifest.empty() ? ManifestPathFor(o.out) : o.manifest);
  out << "wrote " << o.out << ": " << summary.probe_bags << " probe bags, "
      << summary.gallery_bags << " gallery bags, "
      << summary.probe_instances + summary.gallery_instances << " instances\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string data;
  std::string out;
  std::string preset = "default";
  std::string config_path;
  std::string reports;
  std::string resume;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<double> momentum;
  std::optional<int> bags_per_step;
  std::optional<int> save_interval;
  std::string ablate = "all";
  std::string manifest;
};

inline TrainConfig ResolveTrainConfig(const TrainOptions& o) {
  TrainConfig c = GetPreset(o.preset).train;
  try {
    if (!o.config_path.empty()) c.UpdateFromJson(Json::parse(ReadFile(o.config_path)));
  } catch (const Json::exception& e) {
    throw FormatError("config '" + o.config_path + "': " + e.what());
  }
  if (o.epochs) c.epochs = *o.epochs;
  if (o.seed) c.seed = *o.seed;
  if (o.lr) c.lr = *o.lr;
  if (o.momentum) c.momentum = *o.momentum;
  if (o.bags_per_step) c.bags_per_step = *o.bags_per_step;
  if (o.save_interval) c.save_interval = *o.save_interval;
  c.mask = ParseTermMask(o.ablate);
  try {
    c.Validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

inline std::string IntervalCheckpointPath(const std::string& out, int epoch) {
  return out + ".epoch" + std::to_string(epoch) + ".json";
}

inline int RunTrain(const TrainOptions& o, std::ostream& out) {
  const Dataset ds = LoadDataset(o.data);
  TrainConfig config;
  TrainState state;
  RunManifest m;
  m.command = "train";
  m.AddInput(o.data);
  if (!o.resume.empty()) {
    Checkpoint ck = LoadCheckpoint(o.resume);
    m.AddInput(o.resume);
    if (!(ck.meta == ds.meta))
      throw ValidationError("checkpoint metadata does not match dataset '" + o.data + "'");
    config = ck.config;
    if (o.epochs) config.epochs = *o.epochs;
    try {
      config.Validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    state = std::move(ck.state);
  } else {
    config = ResolveTrainConfig(o);
    if (!o.config_path.empty()) m.AddInput(o.config_path);
    state = InitTrainState(ds.meta, config);
  }
  m.seed = config.seed;

  const std::string reports = o.reports.empty() ? o.out + ".epochs.jsonl" : o.reports;
  std::string lines;
  std::vector<std::string> snapshots;
  Train(state, ds, config, [&](const TrainState& s, const EpochReport& r) {
    lines += r.ToJson().dump() + "\n";
    out << "epoch " << r.epoch << " delta " << FormatDouble(r.delta) << " loss "
        << FormatDouble(r.total) << "\n";
    if (config.save_interval > 0 && s.epoch % config.save_interval == 0 &&
        s.epoch < config.epochs) {
      snapshots.push_back(IntervalCheckpointPath(o.out, s.epoch));
      SaveCheckpoint(snapshots.back(), s, ds.meta, config);
    }
  });
  SaveCheckpoint(o.out, state, ds.meta, config);
  WriteFile(reports, lines);

  m.config = {{"preset", o.preset}, {"train", config.ToJson()}, {"resume", o.resume}};
  m.AddOutput(o.out);
  m.AddOutput(reports);
  for (const auto& p : snapshots) m.AddOutput(p);
  m.Write(o.manifest.empty() ? ManifestPathFor(o.out) : o.manifest);
  out << "wrote " << o.out << " (" << state.epoch << " epochs)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string per_query;
  std::vector<int> ranks = DefaultRanks();
  std::string manifest;
};

inline int RunEval(const EvalOptions& o, std::ostream& out) {
  const Checkpoint ck = LoadCheckpoint(o.checkpoint);
  const Dataset ds = LoadDataset(o.data);
  if (!(ck.meta == ds.meta))
    throw ValidationError("checkpoint metadata does not match dataset '" + o.data + "'");
  const MetricsReport report = Evaluate(ds, ck.state.params, o.ranks);
  WriteFile(o.out, report.ToJson().dump(2) + "\n");
  if (!o.per_query.empty()) WriteFile(o.per_query, report.PerQueryCsv());

  RunManifest m;
  m.command = "eval";
  m.config = {{"ranks", o.ranks}};
  m.seed = ck.config.seed;
  m.AddInput(o.checkpoint);
  m.AddInput(o.data);
  m.AddOutput(o.out);
  if (!o.per_query.empty()) m.AddOutput(o.per_query);
  m.Write(o.manifest.empty() ? ManifestPathFor(o.out) : o.manifest);

  for (const auto& [r, v] : report.cmc) out << "r=" << r << " " << FormatDouble(v) << "  ";
  out << "mAP " << FormatDouble(report.map) << "\n";
  if (!report.excluded.empty())
    out << report.excluded.size() << " queries without a relevant gallery bag excluded\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationRow {
  std::string name;
  TermMask mask;
};

inline const std::vector<AblationRow>& AblationRows() {
  static const std::vector<AblationRow> rows{
      {"CV-MIML", TermMask::All()},
      {"baseline+IA", {true, false, false}},
      {"baseline+CA", {false, true, false}},
      {"baseline+entropy", {false, false, true}},
      {"baseline", TermMask::None()},
  };
  return rows;
}

struct AblationResult {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> rank1;
  std::vector<double> map;

  double median_rank1() const { return Median(rank1); }
  double median_map() const { return Median(map); }
};

struct AblationTable {
  std::vector<AblationResult> rows;

  const AblationResult& row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw std::out_of_range("no ablation row '" + name + "'");
  }

  std::string ToCsv() const {
    std::ostringstream out;
    out.precision(17);
    out << "config";
    if (!rows.empty()) {
      for (auto s : rows.front().seeds) out << ",rank1_seed" << s;
      for (auto s : rows.front().seeds) out << ",map_seed" << s;
    }
    out << ",median_rank1,median_map\n";
    for (const auto& r : rows) {
      out << r.name;
      for (double v : r.rank1) out << "," << v;
      for (double v : r.map) out << "," << v;
      out << "," << r.median_rank1() << "," << r.median_map() << "\n";
    }
    return out.str();
  }

  std::string ToText() const {
    std::ostringstream out;
    out << std::left << std::setw(18) << "config" << std::setw(10) << "rank-1"
        << "mAP\n";
    for (const auto& r : rows)
      out << std::left << std::setw(18) << r.name << std::setw(10)
          << FormatDouble(r.median_rank1()) << FormatDouble(r.median_map()) << "\n";
    return out.str();
  }
};

// Train/test pair for one seed: either simulated from a preset or fixed.
using DataSource = std::function<std::pair<Dataset, Dataset>(std::uint64_t seed)>;

inline DataSource PresetSource(const GeneratorConfig& base) {
  return [base](std::uint64_t seed) {
    GeneratorConfig g = base;
    g.seed = seed;
    g.split = "train";
    Dataset train = SimulateDataset(g).dataset;
    g.split = "test";
    return std::make_pair(std::move(train), SimulateDataset(g).dataset);
  };
}

inline AblationTable RunAblation(const DataSource& source, const TrainConfig& base,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::vector<AblationRow>& rows = AblationRows()) {
  AblationTable table;
  for (const auto& row : rows) table.rows.push_back({row.name, seeds, {}, {}});
  for (auto seed : seeds) {
    const auto [train, test] = source(seed);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      TrainConfig c = base;
      c.seed = seed;
      c.mask = rows[k].mask;
      const TrainResult r = Train(train, c);
      const MetricsReport m = Evaluate(test, r.state.params);
      table.rows[k].rank1.push_back(m.rank1());
      table.rows[k].map.push_back(m.map);
    }
  }
  return table;
}

struct AblateOptions {
  std::string preset;
  std::string data;
  std::string test;
  std::string seeds = "0..4";
  std::optional<int> epochs;
  std::string out;
  std::string manifest;
};

inline int RunAblate(const AblateOptions& o, std::ostream& out) {
  if (o.preset.empty() == o.data.empty())
    throw UsageError("ablate needs either --preset or --data with --test");
  if (!o.data.empty() && o.test.empty()) throw UsageError("--data requires --test");
  const auto seeds = ParseSeeds(o.seeds);
  const Preset preset = GetPreset(o.preset.empty() ? "default" : o.preset);
  TrainConfig config = preset.train;
  if (o.epochs) config.epochs = *o.epochs;
  try {
    config.Validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  RunManifest m;
  m.command = "ablate";
  DataSource source;
  if (!o.preset.empty()) {
    source = PresetSource(preset.generator);
    m.config["generator"] = preset.generator.ToJson();
  } else {
    auto fixed = std::make_shared<std::pair<Dataset, Dataset>>(LoadDataset(o.data),
                                                               LoadDataset(o.test));
    if (!(fixed->first.meta == fixed->second.meta))
      throw ValidationError("train and test datasets disagree on metadata");
    source = [fixed](std::uint64_t) { return *fixed; };
    m.AddInput(o.data);
    m.AddInput(o.test);
  }
  const AblationTable table = RunAblation(source, config, seeds);
  WriteFile(o.out, table.ToCsv());

  m.config["preset"] = o.preset;
  m.config["train"] = config.ToJson();
  m.config["seeds"] = seeds;
  m.seed = seeds.front();
  m.AddOutput(o.out);
  m.Write(o.manifest.empty() ? ManifestPathFor(o.out) : o.manifest);
  out << table.ToText();
  return kOk;
}

// ---------------------------------------------------------------------------
// gradcheck

// A 4-bag fixture: two probe and two gallery bags of a tiny simulated set.
inline Dataset GradcheckFixture(std::uint64_t seed) {
  GeneratorConfig g;
  g.num_known_classes = 3;
  g.num_views = 2;
  g.feature_dim = 5;
  g.seq_len_min = 2;
  g.seq_len_max = 3;
  g.bag_min = 1;
  g.bag_max = 2;
  g.p_miss = 0.0;
  g.unknown_identities = 1;
  g.unknown_rate = 0.5;
  g.seed = seed;
  return SliceDataset(SimulateDataset(g).dataset, 2, 2);
}

struct GradcheckCliOptions {
  std::string data;
  std::uint64_t seed = 3;
  int probe_bags = 2;
  int gallery_bags = 2;
  int hidden_dim = 0;
  int feature_dim = 0;
  std::vector<std::string> terms;
  std::string corrupt;
  std::string out = "gradcheck.json";
  std::string manifest;
};

inline int RunGradcheck(const GradcheckCliOptions& o, std::ostream& out) {
  for (const auto& t : o.terms)
    if (std::find(GradcheckTerms().begin(), GradcheckTerms().end(), t) ==
        GradcheckTerms().end())
      throw UsageError("unknown term '" + t + "' (expected p, g, ia, ca, e, total)");
  RunManifest m;
  m.command = "gradcheck";
  Dataset slice;
  if (o.data.empty()) {
    slice = GradcheckFixture(o.seed);
  } else {
    slice = SliceDataset(LoadDataset(o.data), o.probe_bags, o.gallery_bags);
    m.AddInput(o.data);
  }
  TrainConfig tc;
  tc.hidden_dim = o.hidden_dim;
  tc.feature_dim = o.feature_dim;
  std::mt19937_64 rng(o.seed);
  const ModelParams params = InitParams(tc.Shape(slice.meta), rng);

  GradcheckOptions opt;
  opt.terms = o.terms;
  if (!o.corrupt.empty()) opt.corrupt_block = o.corrupt;
  const GradcheckReport report = Gradcheck(slice, params, tc.hp, opt);
  WriteFile(o.out, report.ToJson().dump(2) + "\n");

  m.config = {{"terms", o.terms},       {"corrupt", o.corrupt},
              {"hidden_dim", o.hidden_dim}, {"feature_dim", o.feature_dim},
              {"probe_bags", o.probe_bags}, {"gallery_bags", o.gallery_bags}};
  m.seed = o.seed;
  m.AddOutput(o.out);
  m.Write(o.manifest.empty() ? ManifestPathFor(o.out) : o.manifest);

  for (const auto& r : report.rows) {
    out << std::left << std::setw(6) << r.term << std::setw(22) << r.block
        << std::scientific << std::setprecision(3) << r.max_rel_error << std::defaultfloat
        << (r.pass ? "  ok" : "  FAIL") << "\n";
  }
  out << (report.pass ? "PASS" : "FAIL") << " max rel error " << std::scientific
      << std::setprecision(3) << report.max_rel_error() << std::defaultfloat << "\n";
  if (!report.pass) {
    for (const auto& b : report.failed_blocks()) out << "failed block " << b << "\n";
    return kRuntimeError;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int Main(int argc, const char* const* argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  CLI::App app{"Cross-view multi-instance multi-label learning for weakly supervised re-id"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto probability = CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(s, v)) return "not a number: " + s;
        return v >= 0.0 && v < 1.0 ? "" : "value " + s + " not in [0, 1)";
      },
      "[0,1)");

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic weakly labeled dataset");
  s->add_option("--preset", sim.preset, "default, small or medium")
      ->check(CLI::IsMember(PresetNames()));
  s->add_option("--seed", sim.seed);
  s->add_option("--out", sim.out)->required();
  s->add_option("--split", sim.split)->check(CLI::IsMember({"train", "test"}));
  s->add_option("--bag-min", sim.bag_min, "sequences per gallery bag, lower bound")
      ->check(CLI::PositiveNumber);
  s->add_option("--bag-max", sim.bag_max, "sequences per gallery bag, upper bound")
      ->check(CLI::PositiveNumber);
  s->add_option("--p-miss", sim.p_miss, "label drop probability")->check(probability);
  s->add_option("--unknowns", sim.unknowns, "number of unknown identities")
      ->check(CLI::NonNegativeNumber);
  s->add_option("--unknown-rate", sim.unknown_rate)->check(CLI::Range(0.0, 1.0));
  s->add_flag("--tag-novel", sim.tag_novel, "label unknown sequences with class 0");
  s->add_option("--junk-rate", sim.junk_rate)->check(CLI::NonNegativeNumber);
  s->add_option("--tau", sim.tau, "detection confidence threshold")
      ->check(CLI::Range(0.0, 1.0));
  s->add_option("--manifest", sim.manifest);

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset");
  t->add_option("--data", tr.data)->required();
  t->add_option("--out", tr.out, "checkpoint path")->required();
  auto* t_preset = t->add_option("--preset", tr.preset)->check(CLI::IsMember(PresetNames()));
  auto* t_config = t->add_option("--config", tr.config_path, "training config JSON");
  t->add_option("--reports", tr.reports, "epoch report JSON lines");
  t->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  auto* t_seed = t->add_option("--seed", tr.seed);
  auto* t_lr = t->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  auto* t_mom = t->add_option("--momentum", tr.momentum)->check(probability);
  auto* t_bps = t->add_option("--bags-per-step", tr.bags_per_step)->check(CLI::PositiveNumber);
  auto* t_save = t->add_option("--save-interval", tr.save_interval)
                     ->check(CLI::NonNegativeNumber);
  auto* t_abl = t->add_option("--ablate", tr.ablate,
                              "alignment terms to keep: all, none or a list of ia,ca,e");
  t->add_option("--resume", tr.resume, "continue from a checkpoint with its config")
      ->excludes(t_preset)
      ->excludes(t_config)
      ->excludes(t_seed)
      ->excludes(t_lr)
      ->excludes(t_mom)
      ->excludes(t_bps)
      ->excludes(t_save)
      ->excludes(t_abl);
  t->add_option("--manifest", tr.manifest);

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint with CMC and mAP");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--out", ev.out, "metrics JSON")->required();
  e->add_option("--per-query", ev.per_query, "per-query CSV");
  e->add_option("--ranks", ev.ranks)->delimiter(',')->check(CLI::PositiveNumber);
  e->add_option("--manifest", ev.manifest);

  AblateOptions ab;
  auto* a = app.add_subcommand("ablate", "Compare the five loss configurations");
  a->add_option("--preset", ab.preset, "simulate train/test data per seed")
      ->check(CLI::IsMember(PresetNames()));
  a->add_option("--data", ab.data, "fixed training dataset");
  a->add_option("--test", ab.test, "fixed test dataset");
  a->add_option("--seeds", ab.seeds, "e.g. 0..4 or 0,1,2");
  a->add_option("--epochs", ab.epochs)->check(CLI::PositiveNumber);
  a->add_option("--out", ab.out, "CSV table")->required();
  a->add_option("--manifest", ab.manifest);

  GradcheckCliOptions gc;
  auto* g = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  g->add_option("--data", gc.data, "dataset to slice; default is a built-in fixture");
  g->add_option("--seed", gc.seed);
  g->add_option("--probe-bags", gc.probe_bags)->check(CLI::PositiveNumber);
  g->add_option("--gallery-bags", gc.gallery_bags)->check(CLI::PositiveNumber);
  g->add_option("--hidden-dim", gc.hidden_dim)->check(CLI::NonNegativeNumber);
  g->add_option("--feature-dim", gc.feature_dim)->check(CLI::NonNegativeNumber);
  g->add_option("--term", gc.terms, "p, g, ia, ca, e or total")->delimiter(',');
  g->add_option("--corrupt", gc.corrupt, "testing hook: perturb one gradient block");
  g->add_option("--out", gc.out);
  g->add_option("--manifest", gc.manifest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kUsageError;
  }

  try {
    if (*s) return RunSimulate(sim, out);
    if (*t) return RunTrain(tr, out);
    if (*e) return RunEval(ev, out);
    if (*a) return RunAblate(ab, out);
    if (*g) return RunGradcheck(gc, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsageError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

inline int Main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"cvmiml"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return Main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cvmiml::cli
