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

// Synthetic weakly labeled re-id data. A seeded "world" fixes identity base
// vectors and per-camera shifts, and each sequence samples noisy instances of
// one identity under one camera. Gallery bags glue several same-camera
// sequences together and keep only the (possibly incomplete) union of their
// identities.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cvmiml/core.hpp"
#include "cvmiml/dataset_io.hpp"

namespace cvmiml {

struct GeneratorConfig {
  int num_known_classes = 20;
  int num_views = 3;
  int feature_dim = 16;
  int seq_len_min = 5;  // instances per identity-view sequence
  int seq_len_max = 10;
  int views_per_identity_min = 2;
  int gallery_sequences_per_view = 2;
  double sigma_id = 1.0;
  double sigma_view = 0.5;
  double sigma_noise = 0.2;
  int bag_min = 3;  // sequences per gallery bag
  int bag_max = 8;
  double p_miss = 0.1;
  int unknown_identities = 4;
  double unknown_rate = 0.5;  // chance a gallery bag receives an unknown sequence
  bool tag_novel = false;
  double junk_rate = 0.0;  // junk detections per bag, as a fraction of its size
  double confidence_threshold = 0.0;
  std::uint64_t seed = 0;
  std::string split = "train";  // "train" or "test"; both share one world

  void Validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
    if (num_known_classes < 1) fail("num_known_classes must be >= 1");
    if (num_views < 2) fail("num_views must be >= 2");
    if (feature_dim < 1) fail("feature_dim must be >= 1");
    if (seq_len_min < 1 || seq_len_max < seq_len_min)
      fail("sequence length range must satisfy 1 <= min <= max");
    if (views_per_identity_min < 2 || views_per_identity_min > num_views)
      fail("views_per_identity_min must lie in [2, num_views]");
    if (gallery_sequences_per_view < 1)
      fail("gallery_sequences_per_view must be >= 1");
    if (!(sigma_id >= 0 && sigma_view >= 0 && sigma_noise >= 0))
      fail("dispersions must be non-negative");
    if (bag_min < 1 || bag_max < bag_min)
      fail("bag size range must satisfy 1 <= lo <= hi");
    if (!(p_miss >= 0.0 && p_miss < 1.0)) fail("p_miss must lie in [0, 1)");
    if (unknown_identities < 0) fail("unknown_identities must be >= 0");
    if (!(unknown_rate >= 0.0 && unknown_rate <= 1.0))
      fail("unknown_rate must lie in [0, 1]");
    if (!(junk_rate >= 0.0)) fail("junk_rate must be >= 0");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
      fail("confidence threshold must lie in [0, 1]");
    if (split != "train" && split != "test") fail("split must be train or test");
  }

  Json ToJson() const {
    return Json{{"num_known_classes", num_known_classes},
                {"num_views", num_views},
                {"feature_dim", feature_dim},
                {"seq_len_min", seq_len_min},
                {"seq_len_max", seq_len_max},
                {"views_per_identity_min", views_per_identity_min},
                {"gallery_sequences_per_view", gallery_sequences_per_view},
                {"sigma_id", sigma_id},
                {"sigma_view", sigma_view},
                {"sigma_noise", sigma_noise},
                {"bag_min", bag_min},
                {"bag_max", bag_max},
                {"p_miss", p_miss},
                {"unknown_identities", unknown_identities},
                {"unknown_rate", unknown_rate},
                {"tag_novel", tag_novel},
                {"junk_rate", junk_rate},
                {"confidence_threshold", confidence_threshold},
                {"seed", seed},
                {"split", split}};
  }
};

struct ScoredInstance {
  Instance instance;
  double confidence = 1.0;
};

struct FilterResult {
  std::vector<ScoredInstance> kept;
  int excluded = 0;
};

// Keeps instances with confidence >= threshold, in their original order.
inline FilterResult ConfidenceFilter(const std::vector<ScoredInstance>& instances,
                                     double threshold) {
  FilterResult out;
  for (const auto& s : instances) {
    if (s.confidence >= threshold)
      out.kept.push_back(s);
    else
      ++out.excluded;
  }
  return out;
}

// Instances of one identity seen by one camera. identity 0 marks an
// unknown person.
struct Sequence {
  int identity = 0;
  int view = 1;
  std::vector<ScoredInstance> instances;
};

struct Corpus {
  DatasetMeta meta;
  std::vector<Sequence> probe;    // one per known identity
  std::vector<Sequence> gallery;  // known identities
  std::vector<Sequence> unknown;  // unknown identities
  std::map<int, std::vector<int>> identity_views;
};

namespace detail {

inline std::mt19937_64 StreamRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

inline int UniformInt(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::vector<double> GaussianVector(std::mt19937_64& rng, int d, double sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(d));
  for (auto& x : v) x = sigma * normal(rng);
  return v;
}

inline double KnownConfidence(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.1);
  return std::clamp(1.0 - std::abs(normal(rng)), 0.0, 1.0);
}

inline double JunkConfidence(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

struct World {
  std::vector<std::vector<double>> identity_base;  // [0] unused
  std::vector<std::vector<double>> unknown_base;
  std::vector<std::vector<double>> view_shift;     // [0] unused
  std::map<int, std::vector<int>> identity_views;
  std::map<int, int> probe_view;
};

// The identity and camera layout depends only on the seed, so the
// train and test splits see the same people under the same cameras.
inline World MakeWorld(const GeneratorConfig& cfg) {
  auto rng = StreamRng(cfg.seed, 0);
  World w;
  const int d = cfg.feature_dim;
  w.identity_base.resize(static_cast<std::size_t>(cfg.num_known_classes) + 1);
  for (int c = 1; c <= cfg.num_known_classes; ++c)
    w.identity_base[static_cast<std::size_t>(c)] = GaussianVector(rng, d, cfg.sigma_id);
  for (int u = 0; u < cfg.unknown_identities; ++u)
    w.unknown_base.push_back(GaussianVector(rng, d, cfg.sigma_id));
  w.view_shift.resize(static_cast<std::size_t>(cfg.num_views) + 1);
  for (int v = 1; v <= cfg.num_views; ++v)
    w.view_shift[static_cast<std::size_t>(v)] = GaussianVector(rng, d, cfg.sigma_view);
  for (int c = 1; c <= cfg.num_known_classes; ++c) {
    std::vector<int> views(static_cast<std::size_t>(cfg.num_views));
    std::iota(views.begin(), views.end(), 1);
    std::shuffle(views.begin(), views.end(), rng);
    const int k = UniformInt(rng, cfg.views_per_identity_min, cfg.num_views);
    views.resize(static_cast<std::size_t>(k));
    std::sort(views.begin(), views.end());
    w.probe_view[c] = views[static_cast<std::size_t>(UniformInt(rng, 0, k - 1))];
    w.identity_views[c] = std::move(views);
  }
  return w;
}

inline Sequence SampleSequence(const GeneratorConfig& cfg,
                               const std::vector<double>& base,
                               const std::vector<double>& shift, int identity,
                               int view, std::mt19937_64& rng) {
  Sequence s;
  s.identity = identity;
  s.view = view;
  const int n = UniformInt(rng, cfg.seq_len_min, cfg.seq_len_max);
  for (int i = 0; i < n; ++i) {
    auto noise = GaussianVector(rng, cfg.feature_dim, cfg.sigma_noise);
    ScoredInstance si;
    si.instance.features.resize(base.size());
    for (std::size_t k = 0; k < base.size(); ++k)
      si.instance.features[k] = base[k] + shift[k] + noise[k];
    si.instance.truth_class = identity;
    si.confidence = identity > 0 ? KnownConfidence(rng) : JunkConfidence(rng);
    s.instances.push_back(std::move(si));
  }
  return s;
}

}  // namespace detail

inline Corpus GenerateSynthetic(const GeneratorConfig& cfg) {
  cfg.Validate();
  const detail::World world = detail::MakeWorld(cfg);
  auto rng = detail::StreamRng(cfg.seed, cfg.split == "train" ? 1 : 2);
  Corpus corpus;
  corpus.meta = {cfg.num_known_classes, cfg.num_views, cfg.feature_dim};
  corpus.identity_views = world.identity_views;
  for (int c = 1; c <= cfg.num_known_classes; ++c) {
    const auto& base = world.identity_base[static_cast<std::size_t>(c)];
    const int pv = world.probe_view.at(c);
    corpus.probe.push_back(detail::SampleSequence(
        cfg, base, world.view_shift[static_cast<std::size_t>(pv)], c, pv, rng));
    for (int v : world.identity_views.at(c))
      for (int s = 0; s < cfg.gallery_sequences_per_view; ++s)
        corpus.gallery.push_back(detail::SampleSequence(
            cfg, base, world.view_shift[static_cast<std::size_t>(v)], c, v, rng));
  }
  for (const auto& base : world.unknown_base) {
    // One sequence per camera for every unknown person.
    for (int v = 1; v <= cfg.num_views; ++v)
      corpus.unknown.push_back(detail::SampleSequence(
          cfg, base, world.view_shift[static_cast<std::size_t>(v)], kNovelClass, v,
          rng));
  }
  return corpus;
}

// Counters describing how bagify shaped the corpus.
struct BagifyStats {
  int discarded_sequences = 0;
  int filtered_instances = 0;
  int dropped_labels = 0;
  int restored_labels = 0;
  int unknown_sequences_used = 0;
  int junk_instances = 0;
};

namespace detail {

inline std::string PaddedId(const std::string& prefix, int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width)
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

// Number of sequences per bag for a pool of `n` sequences.
inline std::vector<int> PartitionSizes(int n, int lo, int hi, std::mt19937_64& rng) {
  std::vector<int> sizes;
  int remaining = n;
  while (remaining >= lo) {
    int k = std::min(UniformInt(rng, lo, hi), remaining);
    const int rest = remaining - k;
    if (rest > 0 && rest < lo) {
      if (k + rest <= hi)
        k += rest;
      else if (remaining - lo >= lo)
        k = remaining - lo;
    }
    sizes.push_back(k);
    remaining -= k;
  }
  return sizes;
}

}  // namespace detail

// Builds the weakly labeled dataset. Throws std::invalid_argument when a
// camera does not hold enough gallery sequences for a single bag.
inline Dataset Bagify(const Corpus& corpus, const GeneratorConfig& cfg,
                      BagifyStats* stats_out = nullptr) {
  cfg.Validate();
  BagifyStats stats;
  auto rng = detail::StreamRng(cfg.seed, cfg.split == "train" ? 11 : 12);
  Dataset ds;
  ds.meta = corpus.meta;
  const int total = ds.meta.num_total_classes();

  for (const auto& seq : corpus.probe) {
    Bag bag;
    bag.id = detail::PaddedId("p", seq.identity, 4);
    bag.view = seq.view;
    bag.role = BagRole::kProbe;
    bag.labels = LabelVector::FromTags(total, {seq.identity});
    for (const auto& si : seq.instances) bag.instances.push_back(si.instance);
    ds.probe.push_back(std::move(bag));
  }

  std::map<int, std::vector<const Sequence*>> pools, unknown_pools;
  for (const auto& s : corpus.gallery) pools[s.view].push_back(&s);
  for (const auto& s : corpus.unknown) unknown_pools[s.view].push_back(&s);

  std::string shortfall;
  for (int v = 1; v <= ds.meta.num_views; ++v) {
    const int have = static_cast<int>(pools[v].size());
    if (have > 0 && have < cfg.bag_min)
      shortfall += " view " + std::to_string(v) + " has " + std::to_string(have) +
                   " sequences, needs " + std::to_string(cfg.bag_min) + ";";
  }
  if (!shortfall.empty())
    throw std::invalid_argument("insufficient gallery sequences:" + shortfall);

  // Truth membership per bag, used to restore labels for view coverage.
  std::vector<std::set<int>> truth;
  for (int v = 1; v <= ds.meta.num_views; ++v) {
    auto& pool = pools[v];
    if (pool.empty()) continue;
    std::shuffle(pool.begin(), pool.end(), rng);
    auto& unknowns = unknown_pools[v];
    std::shuffle(unknowns.begin(), unknowns.end(), rng);
    std::size_t next_unknown = 0;
    const auto sizes =
        detail::PartitionSizes(static_cast<int>(pool.size()), cfg.bag_min,
                               cfg.bag_max, rng);
    std::size_t cursor = 0;
    for (int k : sizes) {
      std::vector<const Sequence*> members(pool.begin() + static_cast<long>(cursor),
                                           pool.begin() + static_cast<long>(cursor + k));
      cursor += static_cast<std::size_t>(k);
      const bool add_unknown =
          !unknowns.empty() &&
          std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.unknown_rate;
      if (add_unknown) {
        const auto* u = unknowns[next_unknown++ % unknowns.size()];
        members.insert(members.begin() + detail::UniformInt(rng, 0, k), u);
        ++stats.unknown_sequences_used;
      }

      std::vector<ScoredInstance> scored;
      std::set<int> present;
      for (const auto* s : members) {
        present.insert(s->identity);
        scored.insert(scored.end(), s->instances.begin(), s->instances.end());
      }
      const int junk = static_cast<int>(std::lround(cfg.junk_rate * scored.size()));
      for (int j = 0; j < junk; ++j) {
        ScoredInstance si;
        si.instance.features = detail::GaussianVector(
            rng, cfg.feature_dim, std::hypot(cfg.sigma_id, cfg.sigma_view));
        si.instance.truth_class = kNovelClass;
        si.confidence = detail::JunkConfidence(rng);
        const auto pos = detail::UniformInt(rng, 0, static_cast<int>(scored.size()));
        scored.insert(scored.begin() + pos, std::move(si));
        ++stats.junk_instances;
      }
      auto filtered = ConfidenceFilter(scored, cfg.confidence_threshold);
      stats.filtered_instances += filtered.excluded;
      if (filtered.kept.empty()) continue;

      Bag bag;
      bag.id = detail::PaddedId("g" + std::to_string(v) + "_",
                                static_cast<int>(ds.gallery.size()), 4);
      bag.view = v;
      bag.role = BagRole::kGallery;
      bag.labels = LabelVector(total);
      std::set<int> kept_truth;
      for (auto& si : filtered.kept) {
        kept_truth.insert(*si.instance.truth_class);
        bag.instances.push_back(std::move(si.instance));
      }
      std::vector<int> dropped;
      for (int c : kept_truth) {
        if (c == kNovelClass) continue;
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.p_miss) {
          dropped.push_back(c);
          ++stats.dropped_labels;
        } else {
          bag.labels.set(c);
        }
      }
      const bool has_novel = kept_truth.count(kNovelClass) > 0 && present.count(kNovelClass);
      if (cfg.tag_novel && has_novel) bag.labels.set(kNovelClass);
      if (bag.labels.count() == 0 && !dropped.empty()) {
        bag.labels.set(dropped[static_cast<std::size_t>(
            detail::UniformInt(rng, 0, static_cast<int>(dropped.size()) - 1))]);
        ++stats.restored_labels;
      }
      if (bag.labels.count() == 0) continue;  // nothing but filtered junk
      truth.push_back(std::move(kept_truth));
      ds.gallery.push_back(std::move(bag));
    }
    stats.discarded_sequences += static_cast<int>(pool.size() - cursor);
  }

  // Every known identity must stay tagged under two distinct views.
  for (int c = 1; c <= ds.meta.num_known_classes; ++c) {
    std::set<int> views;
    for (const auto& b : ds.probe)
      if (b.labels.test(c)) views.insert(b.view);
    for (const auto& b : ds.gallery)
      if (b.labels.test(c)) views.insert(b.view);
    for (std::size_t b = 0; b < ds.gallery.size() && views.size() < 2; ++b) {
      auto& bag = ds.gallery[b];
      if (truth[b].count(c) && !bag.labels.test(c) && !views.count(bag.view)) {
        bag.labels.set(c);
        views.insert(bag.view);
        ++stats.restored_labels;
      }
    }
  }
  if (stats_out) *stats_out = stats;
  return ds;
}

struct SimulationSummary {
  int identities = 0;
  int probe_bags = 0;
  int gallery_bags = 0;
  std::size_t probe_instances = 0;
  std::size_t gallery_instances = 0;
  std::map<int, std::size_t> truth_histogram;  // class -> instance count
  BagifyStats stats;

  Json ToJson() const {
    Json hist = Json::object();
    for (const auto& [c, n] : truth_histogram) hist[std::to_string(c)] = n;
    return Json{{"counts",
                 {{"identities", identities},
                  {"probe_bags", probe_bags},
                  {"gallery_bags", gallery_bags},
                  {"probe_instances", probe_instances},
                  {"gallery_instances", gallery_instances},
                  {"discarded_sequences", stats.discarded_sequences},
                  {"filtered_instances", stats.filtered_instances},
                  {"dropped_labels", stats.dropped_labels},
                  {"restored_labels", stats.restored_labels},
                  {"unknown_sequences", stats.unknown_sequences_used},
                  {"junk_instances", stats.junk_instances}}},
                {"truth_histogram", hist}};
  }
};

inline SimulationSummary Summarize(const Dataset& ds, const BagifyStats& stats) {
  SimulationSummary s;
  s.identities = ds.meta.num_known_classes;
  s.probe_bags = static_cast<int>(ds.probe.size());
  s.gallery_bags = static_cast<int>(ds.gallery.size());
  s.stats = stats;
  for (const auto& b : ds.probe) {
    s.probe_instances += b.instances.size();
    for (const auto& i : b.instances) ++s.truth_histogram[i.truth_class.value_or(-1)];
  }
  for (const auto& b : ds.gallery) {
    s.gallery_instances += b.instances.size();
    for (const auto& i : b.instances) ++s.truth_histogram[i.truth_class.value_or(-1)];
  }
  return s;
}

inline std::string SidecarPath(const std::string& dataset_path) {
  return dataset_path + ".provenance.json";
}

struct Simulation {
  Dataset dataset;
  SimulationSummary summary;
};

inline Simulation SimulateDataset(const GeneratorConfig& cfg) {
  BagifyStats stats;
  Dataset ds = Bagify(GenerateSynthetic(cfg), cfg, &stats);
  auto report = ValidateDataset(ds);
  if (!report.ok()) throw ValidationError(report.ToString());
  SimulationSummary summary = Summarize(ds, stats);
  return {std::move(ds), std::move(summary)};
}

// generate -> bagify -> save, plus a provenance sidecar next to the file.
inline SimulationSummary Simulate(const GeneratorConfig& cfg,
                                  const std::string& out_path) {
  Simulation sim = SimulateDataset(cfg);
  SaveDataset(sim.dataset, out_path);
  Json sidecar = sim.summary.ToJson();
  sidecar["config"] = cfg.ToJson();
  sidecar["seed"] = cfg.seed;
  WriteFile(SidecarPath(out_path), sidecar.dump(2) + "\n");
  return sim.summary;
}

}  // namespace cvmiml
