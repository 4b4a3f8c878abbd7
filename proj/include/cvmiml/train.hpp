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

// Alternating optimisation. Each epoch first runs the whole dataset through
// the model to pick groups and refresh the class prototypes. It then takes
// SGD steps over shuffled bag batches with those selections held fixed.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cvmiml/align.hpp"
#include "cvmiml/core.hpp"
#include "cvmiml/dataset_io.hpp"
#include "cvmiml/miml.hpp"
#include "cvmiml/model.hpp"

namespace cvmiml {

struct TrainConfig {
  int epochs = 30;
  double lr = 0.05;
  double weight_decay = 1e-4;
  double momentum = 0.0;
  double clip_norm = 5.0;  // global gradient norm cap; 0 disables
  int bags_per_step = 8;
  std::uint64_t seed = 0;
  Hyperparams hp;
  TermMask mask = TermMask::All();
  int feature_dim = 0;  // extractor output width; 0 keeps the input width
  int hidden_dim = 0;   // > 0 enables affine -> tanh -> affine
  int save_interval = 0;
  bool regroup_each_step = false;

  void Validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw std::invalid_argument("momentum must lie in [0, 1)");
    if (!(clip_norm >= 0.0)) throw std::invalid_argument("clip_norm must be >= 0");
    if (bags_per_step < 1) throw std::invalid_argument("bags_per_step must be >= 1");
    if (feature_dim < 0 || hidden_dim < 0)
      throw std::invalid_argument("layer widths must be >= 0");
    hp.Validate();
  }

  ModelShape Shape(const DatasetMeta& meta) const {
    ModelShape s;
    s.input_dim = meta.feature_dim;
    s.feature_dim = feature_dim > 0 ? feature_dim : meta.feature_dim;
    s.num_total_classes = meta.num_total_classes();
    s.hidden_dim = hidden_dim;
    return s;
  }

  Json ToJson() const {
    return Json{{"epochs", epochs},
                {"lr", lr},
                {"weight_decay", weight_decay},
                {"momentum", momentum},
                {"clip_norm", clip_norm},
                {"bags_per_step", bags_per_step},
                {"seed", seed},
                {"knn", hp.knn},
                {"gamma", hp.gamma},
                {"alpha", hp.alpha},
                {"ramp_length", hp.ramp_length},
                {"delta_max", hp.delta_max},
                {"mask", {{"ia", mask.intra_bag}, {"ca", mask.cross_view}, {"e", mask.entropy}}},
                {"feature_dim", feature_dim},
                {"hidden_dim", hidden_dim},
                {"save_interval", save_interval},
                {"regroup_each_step", regroup_each_step}};
  }

  // Missing keys keep their current values.
  void UpdateFromJson(const Json& j) {
    auto get = [&](const char* key, auto& field) {
      if (auto it = j.find(key); it != j.end()) it->get_to(field);
    };
    get("epochs", epochs);
    get("lr", lr);
    get("weight_decay", weight_decay);
    get("momentum", momentum);
    get("clip_norm", clip_norm);
    get("bags_per_step", bags_per_step);
    get("seed", seed);
    get("knn", hp.knn);
    get("gamma", hp.gamma);
    get("alpha", hp.alpha);
    get("ramp_length", hp.ramp_length);
    get("delta_max", hp.delta_max);
    get("feature_dim", feature_dim);
    get("hidden_dim", hidden_dim);
    get("save_interval", save_interval);
    get("regroup_each_step", regroup_each_step);
    if (auto it = j.find("mask"); it != j.end()) {
      if (auto m = it->find("ia"); m != it->end()) m->get_to(mask.intra_bag);
      if (auto m = it->find("ca"); m != it->end()) m->get_to(mask.cross_view);
      if (auto m = it->find("e"); m != it->end()) m->get_to(mask.entropy);
    }
  }
};

// Everything needed to continue training bit-exactly.
struct TrainState {
  int epoch = 0;  // completed epochs
  ModelParams params;
  ModelParams velocity;  // only used with momentum > 0
  PrototypeBank bank;
  std::mt19937_64 rng;

  bool operator==(const TrainState& o) const {
    return epoch == o.epoch && params == o.params && velocity == o.velocity &&
           bank == o.bank && rng == o.rng;
  }
};

inline TrainState InitTrainState(const DatasetMeta& meta, const TrainConfig& config) {
  TrainState state;
  state.rng.seed(config.seed);
  state.params = InitParams(config.Shape(meta), state.rng);
  state.velocity = ZeroGradients(state.params);
  state.bank = PrototypeBank(meta.num_total_classes());
  return state;
}

// A forward pass over a set of bags with the bag -> row layout. The cache
// lives on the heap so BagDistributions stay valid when the pass is moved.
struct BatchPass {
  std::shared_ptr<const ForwardCache> cache;
  std::vector<BagDistributions> probe;
  std::vector<BagDistributions> gallery;
  std::vector<int> gallery_source;  // dataset gallery index per batch gallery bag
};

inline BatchPass RunBatch(const ModelParams& params,
                          const std::vector<const Bag*>& probe_bags,
                          const std::vector<const Bag*>& gallery_bags,
                          std::vector<int> gallery_source = {}) {
  Eigen::Index rows = 0;
  for (const auto* b : probe_bags) rows += b->size();
  for (const auto* b : gallery_bags) rows += b->size();
  const Eigen::Index d = params.shape().input_dim;
  Matrix raw(rows, d);
  Eigen::Index r = 0;
  auto fill = [&](const Bag& bag) {
    for (const auto& inst : bag.instances) {
      if (static_cast<Eigen::Index>(inst.features.size()) != d)
        throw ShapeError("bag '" + bag.id + "' feature length does not match model");
      raw.row(r++) = Eigen::Map<const RowVector>(inst.features.data(), d);
    }
  };
  for (const auto* b : probe_bags) fill(*b);
  for (const auto* b : gallery_bags) fill(*b);

  BatchPass pass;
  pass.cache = std::make_shared<const ForwardCache>(Forward(params, std::move(raw)));
  r = 0;
  for (const auto* b : probe_bags) {
    pass.probe.emplace_back(*b, pass.cache->probs, r);
    r += b->size();
  }
  for (const auto* b : gallery_bags) {
    pass.gallery.emplace_back(*b, pass.cache->probs, r);
    r += b->size();
  }
  pass.gallery_source = std::move(gallery_source);
  return pass;
}

inline BatchPass RunDataset(const ModelParams& params, const Dataset& ds) {
  std::vector<const Bag*> probe, gallery;
  std::vector<int> source;
  for (const auto& b : ds.probe) probe.push_back(&b);
  for (std::size_t g = 0; g < ds.gallery.size(); ++g) {
    gallery.push_back(&ds.gallery[g]);
    source.push_back(static_cast<int>(g));
  }
  return RunBatch(params, probe, gallery, std::move(source));
}

// Loss terms for one pass. `groups` index into pass.gallery. With
// `frozen_seeds` the gallery loss uses the given seeds instead of the
// current argmax.
inline LossTerms ComputeTerms(const BatchPass& pass, const std::vector<Group>& groups,
                              const PrototypeBank& bank, const TermMask& mask,
                              const std::vector<std::vector<int>>* frozen_seeds = nullptr) {
  LossTerms t;
  t.probe = ProbeLoss(pass.probe);
  t.gallery = frozen_seeds ? GalleryLossWithSeeds(pass.gallery, *frozen_seeds)
                           : GalleryLoss(pass.gallery);
  t.classification = ClassificationLoss(t.probe, t.gallery);
  if (mask.intra_bag) t.intra_bag = IntraBagLoss(pass.gallery, groups);
  if (mask.cross_view) {
    const auto idx = BuildAssignments(pass.probe, pass.gallery, groups,
                                      bank.num_classes());
    t.cross_view = CrossViewLoss(idx, pass.cache->probs, bank);
    t.cross_view.normalizer = static_cast<double>(idx.total_size());
  }
  if (mask.entropy) t.entropy = EntropyLoss(pass.gallery);
  return t;
}

struct EpochReport {
  int epoch = 0;
  double delta = 0.0;
  int steps = 0;
  // Means over the epoch's optimisation steps.
  double probe = 0.0, gallery = 0.0, classification = 0.0;
  double intra_bag = 0.0, cross_view = 0.0, entropy = 0.0, total = 0.0;
  std::size_t n_ia = 0;  // group members formed in step 1
  std::size_t n_ca = 0;  // assigned instances in step 1
  std::vector<int> skipped_classes;

  Json ToJson() const {
    return Json{{"epoch", epoch},
                {"delta", delta},
                {"steps", steps},
                {"loss",
                 {{"probe", probe},
                  {"gallery", gallery},
                  {"classification", classification},
                  {"intra_bag", intra_bag},
                  {"cross_view", cross_view},
                  {"entropy", entropy},
                  {"total", total}}},
                {"n_ia", n_ia},
                {"n_ca", n_ca},
                {"skipped_classes", skipped_classes}};
  }
};

// Step 1: full forward pass, groups, assignments, prototype refresh.
struct EpochSelection {
  std::vector<std::vector<Group>> groups_by_bag;  // per dataset gallery bag
  std::size_t n_ia = 0;
  std::size_t n_ca = 0;
  std::vector<int> skipped_classes;
};

inline EpochSelection PrepareEpoch(TrainState& state, const Dataset& ds,
                                   const TrainConfig& config) {
  EpochSelection sel;
  const BatchPass pass = RunDataset(state.params, ds);
  const auto groups = FormGroups(pass.gallery, pass.cache->features, config.hp);
  sel.groups_by_bag.resize(ds.gallery.size());
  for (const auto& g : groups) {
    sel.n_ia += g.members.size();
    sel.groups_by_bag[static_cast<std::size_t>(g.bag)].push_back(g);
  }
  const int classes = ds.meta.num_total_classes();
  const auto idx = BuildAssignments(pass.probe, pass.gallery, groups, classes);
  sel.n_ca = idx.total_size();
  for (int c = 0; c < classes; ++c) {
    auto proto = EpochPrototype(idx, pass.cache->probs, c);
    if (!proto) {
      // Class 0 is expected to be empty without novel-class tags.
      if (c != kNovelClass) sel.skipped_classes.push_back(c);
      continue;
    }
    UpdatePrototype(state.bank, c, *proto, config.hp.alpha);
  }
  state.bank.epoch = state.epoch;
  return sel;
}

namespace detail {

inline void CheckFinite(const LossTerms& t, const TermMask& mask, int epoch) {
  auto check = [&](const LossValue& v, const char* name) {
    if (!std::isfinite(v.value))
      throw NumericError("non-finite " + std::string(name) + " loss at epoch " +
                         std::to_string(epoch));
  };
  check(t.probe, "probe");
  check(t.gallery, "gallery");
  if (mask.intra_bag) check(t.intra_bag, "intra-bag");
  if (mask.cross_view) check(t.cross_view, "cross-view");
  if (mask.entropy) check(t.entropy, "entropy");
}

inline void ApplyUpdate(TrainState& state, Gradients grads,
                        const TrainConfig& config) {
  if (!AllFinite(grads)) throw NumericError("non-finite gradient; step rejected");
  ClipByGlobalNorm(grads, config.clip_norm);
  if (config.momentum == 0.0) {
    state.params = SgdStep(state.params, grads, config.lr, config.weight_decay);
    return;
  }
  ZipParams(state.velocity, grads, [&](auto& v, const auto& g) {
    v.array() *= config.momentum;
    v += g;
  });
  ZipParams(state.velocity, state.params, [&](auto& v, const auto& p) {
    v.array() += config.weight_decay * p.array();
  });
  ZipParams(state.params, state.velocity,
            [&](auto& p, const auto& v) { p.array() -= config.lr * v.array(); });
}

}  // namespace detail

// Runs one epoch (step 1 then step 2) and advances state.epoch.
inline EpochReport TrainEpoch(TrainState& state, const Dataset& ds,
                              const TrainConfig& config) {
  EpochReport report;
  report.epoch = state.epoch;
  report.delta = RampWeight(state.epoch, config.hp);
  const EpochSelection sel = PrepareEpoch(state, ds, config);
  report.n_ia = sel.n_ia;
  report.n_ca = sel.n_ca;
  report.skipped_classes = sel.skipped_classes;

  const int num_probe = static_cast<int>(ds.probe.size());
  std::vector<int> order(ds.probe.size() + ds.gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), state.rng);

  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(config.bags_per_step)) {
    const std::size_t end =
        std::min(order.size(), start + static_cast<std::size_t>(config.bags_per_step));
    std::vector<const Bag*> probe, gallery;
    std::vector<int> source;
    for (std::size_t k = start; k < end; ++k) {
      const int id = order[k];
      if (id < num_probe) {
        probe.push_back(&ds.probe[static_cast<std::size_t>(id)]);
      } else {
        gallery.push_back(&ds.gallery[static_cast<std::size_t>(id - num_probe)]);
        source.push_back(id - num_probe);
      }
    }
    const BatchPass pass = RunBatch(state.params, probe, gallery, source);
    std::vector<Group> groups;
    if (config.mask.intra_bag || config.mask.cross_view) {
      if (config.regroup_each_step) {
        groups = FormGroups(pass.gallery, pass.cache->features, config.hp);
      } else {
        for (std::size_t b = 0; b < source.size(); ++b) {
          for (Group g : sel.groups_by_bag[static_cast<std::size_t>(source[b])]) {
            g.bag = static_cast<int>(b);
            groups.push_back(std::move(g));
          }
        }
      }
    }
    const LossTerms terms = ComputeTerms(pass, groups, state.bank, config.mask);
    detail::CheckFinite(terms, config.mask, state.epoch);
    const LossValue total = TotalLoss(terms, report.delta, config.mask);
    if (!std::isfinite(total.value))
      throw NumericError("non-finite total loss at epoch " + std::to_string(state.epoch));

    Gradients grads = ZeroGradients(state.params);
    if (total.has_gradient()) Backward(state.params, *pass.cache, total.grad_logits, grads);
    detail::ApplyUpdate(state, std::move(grads), config);

    ++report.steps;
    report.probe += terms.probe.value;
    report.gallery += terms.gallery.value;
    report.classification += terms.classification.value;
    report.intra_bag += terms.intra_bag.value;
    report.cross_view += terms.cross_view.value;
    report.entropy += terms.entropy.value;
    report.total += total.value;
  }
  if (report.steps > 0) {
    const double n = report.steps;
    for (double* v : {&report.probe, &report.gallery, &report.classification,
                      &report.intra_bag, &report.cross_view, &report.entropy,
                      &report.total})
      *v /= n;
  }
  ++state.epoch;
  return report;
}

using EpochCallback = std::function<void(const TrainState&, const EpochReport&)>;

// Trains from `state` (fresh or resumed) until config.epochs are complete.
inline std::vector<EpochReport> Train(TrainState& state, const Dataset& ds,
                                      const TrainConfig& config,
                                      const EpochCallback& on_epoch = {}) {
  config.Validate();
  if (!(state.params.shape() == config.Shape(ds.meta)))
    throw ShapeError("model shape does not match dataset/config");
  std::vector<EpochReport> history;
  while (state.epoch < config.epochs) {
    history.push_back(TrainEpoch(state, ds, config));
    if (on_epoch) on_epoch(state, history.back());
  }
  return history;
}

struct TrainResult {
  TrainState state;
  std::vector<EpochReport> history;
};

inline TrainResult Train(const Dataset& ds, const TrainConfig& config) {
  config.Validate();
  TrainResult out{InitTrainState(ds.meta, config), {}};
  out.history = Train(out.state, ds, config);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail {

inline Json MatrixToJson(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  return rows;
}

inline Matrix MatrixFromJson(const Json& j, Eigen::Index rows, Eigen::Index cols,
                             const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw FormatError("checkpoint " + what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw FormatError("checkpoint " + what + ": expected " + std::to_string(cols) +
                        " columns");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Vector VectorFromJson(const Json& j, Eigen::Index n, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw FormatError("checkpoint " + what + ": expected length " + std::to_string(n));
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = j[static_cast<std::size_t>(k)].get<double>();
  return v;
}

inline std::vector<double> ToStd(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Json ParamsToJson(const ModelParams& p) {
  Json theta = Json::array(), theta_bias = Json::array();
  for (const auto& l : p.extractor) {
    theta.push_back(MatrixToJson(l.weight));
    theta_bias.push_back(ToStd(l.bias));
  }
  return Json{{"theta", theta},
              {"W", MatrixToJson(p.classifier.weight)},
              {"biases", {{"theta", theta_bias}, {"W", ToStd(p.classifier.bias)}}}};
}

inline ModelParams ParamsFromJson(const Json& j, const ModelShape& shape) {
  ModelParams p = ZeroParams(shape);
  const auto& theta = Field(j, "theta", "checkpoint");
  const auto& biases = Field(j, "biases", "checkpoint");
  const auto& theta_bias = Field(biases, "theta", "checkpoint.biases");
  if (!theta.is_array() || theta.size() != p.extractor.size() ||
      !theta_bias.is_array() || theta_bias.size() != p.extractor.size())
    throw FormatError("checkpoint theta: layer count does not match model shape");
  for (std::size_t l = 0; l < p.extractor.size(); ++l) {
    auto& layer = p.extractor[l];
    const std::string name = "theta[" + std::to_string(l) + "]";
    layer.weight = MatrixFromJson(theta[l], layer.weight.rows(), layer.weight.cols(), name);
    layer.bias = VectorFromJson(theta_bias[l], layer.bias.size(), name + " bias");
  }
  p.classifier.weight = MatrixFromJson(Field(j, "W", "checkpoint"),
                                       p.classifier.weight.rows(),
                                       p.classifier.weight.cols(), "W");
  p.classifier.bias = VectorFromJson(Field(biases, "W", "checkpoint.biases"),
                                     p.classifier.bias.size(), "W bias");
  return p;
}

}  // namespace detail

inline Json ShapeToJson(const ModelShape& s) {
  return Json{{"input_dim", s.input_dim},
              {"feature_dim", s.feature_dim},
              {"num_total_classes", s.num_total_classes},
              {"hidden_dim", s.hidden_dim}};
}

inline Json CheckpointToJson(const TrainState& state, const DatasetMeta& meta,
                             const TrainConfig& config) {
  Json j = detail::ParamsToJson(state.params);
  j["meta"] = MetaToJson(meta);
  j["model"] = ShapeToJson(state.params.shape());
  j["epoch"] = state.epoch;
  std::ostringstream rng;
  rng << state.rng;
  j["rng_state"] = rng.str();
  j["config"] = config.ToJson();
  Json protos = Json::array();
  for (int c = 0; c < state.bank.num_classes(); ++c)
    protos.push_back(state.bank.has(c) ? Json(state.bank.at(c)) : Json(nullptr));
  j["prototypes"] = {{"epoch", state.bank.epoch}, {"classes", protos}};
  if (config.momentum > 0.0) j["velocity"] = detail::ParamsToJson(state.velocity);
  return j;
}

struct Checkpoint {
  DatasetMeta meta;
  TrainConfig config;
  TrainState state;
};

inline Checkpoint CheckpointFromJson(const Json& j) {
  Checkpoint ck;
  ck.meta = MetaFromJson(detail::Field(j, "meta", "checkpoint"), "checkpoint.meta");
  if (auto it = j.find("config"); it != j.end()) ck.config.UpdateFromJson(*it);
  const auto& m = detail::Field(j, "model", "checkpoint");
  ModelShape shape;
  shape.input_dim = detail::AsInt(detail::Field(m, "input_dim", "model"), "model.input_dim");
  shape.feature_dim = detail::AsInt(detail::Field(m, "feature_dim", "model"), "model.feature_dim");
  shape.num_total_classes =
      detail::AsInt(detail::Field(m, "num_total_classes", "model"), "model.num_total_classes");
  shape.hidden_dim = detail::AsInt(detail::Field(m, "hidden_dim", "model"), "model.hidden_dim");
  ck.state.params = detail::ParamsFromJson(j, shape);
  ck.state.velocity = j.contains("velocity") ? detail::ParamsFromJson(j["velocity"], shape)
                                             : ZeroParams(shape);
  ck.state.epoch = detail::AsInt(detail::Field(j, "epoch", "checkpoint"), "epoch");
  std::istringstream rng(detail::Field(j, "rng_state", "checkpoint").get<std::string>());
  rng >> ck.state.rng;
  if (rng.fail()) throw FormatError("checkpoint rng_state: unreadable");
  const auto& protos = detail::Field(j, "prototypes", "checkpoint");
  const auto& classes = detail::Field(protos, "classes", "checkpoint.prototypes");
  ck.state.bank = PrototypeBank(static_cast<int>(classes.size()));
  ck.state.bank.epoch = protos.value("epoch", 0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].is_null()) continue;
    ck.state.bank.prototypes[c] = classes[c].get<std::vector<double>>();
    ck.state.bank.initialized[c] = true;
  }
  return ck;
}

inline std::string SerializeCheckpoint(const TrainState& state, const DatasetMeta& meta,
                                       const TrainConfig& config) {
  return CheckpointToJson(state, meta, config).dump() + "\n";
}

inline void SaveCheckpoint(const std::string& path, const TrainState& state,
                           const DatasetMeta& meta, const TrainConfig& config) {
  WriteFile(path, SerializeCheckpoint(state, meta, config));
}

inline Checkpoint LoadCheckpoint(const std::string& path) {
  const std::string text = ReadFile(path);
  try {
    return CheckpointFromJson(Json::parse(text));
  } catch (const Json::exception& e) {
    throw FormatError("checkpoint '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradcheckOptions {
  std::vector<std::string> terms;  // subset of p, g, ia, ca, e, total; empty = all
  double step = 1e-5;
  double tolerance = 1e-4;
  double small = 1e-8;  // below this analytic magnitude, compare absolutely
  // Test hook: perturbs the analytic gradient of one block before comparison.
  std::optional<std::string> corrupt_block;
  double corrupt_amount = 1e-2;
};

struct GradcheckRow {
  std::string term;
  std::string block;
  double max_rel_error = 0.0;
  double max_abs_error_small = 0.0;  // over entries with |analytic| < small
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  bool pass = true;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.max_rel_error);
    return m;
  }
  std::vector<std::string> failed_blocks() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
      if (!r.pass) out.push_back(r.term + ":" + r.block);
    return out;
  }
  Json ToJson() const {
    Json rs = Json::array();
    for (const auto& r : rows)
      rs.push_back({{"term", r.term},
                    {"block", r.block},
                    {"max_rel_error", r.max_rel_error},
                    {"max_abs_error_small", r.max_abs_error_small},
                    {"pass", r.pass}});
    return Json{{"pass", pass}, {"rows", rs}};
  }
};

inline const std::vector<std::string>& GradcheckTerms() {
  static const std::vector<std::string> terms{"p", "g", "ia", "ca", "e", "total"};
  return terms;
}

// Compares analytic gradients of every loss term with central differences.
// All selections and prototypes are computed once at `params` and frozen
// while parameters are perturbed.
inline GradcheckReport Gradcheck(const Dataset& slice, const ModelParams& params,
                                 const Hyperparams& hp,
                                 const GradcheckOptions& options = {}) {
  std::vector<std::string> terms = options.terms.empty() ? GradcheckTerms() : options.terms;
  for (const auto& t : terms)
    if (std::find(GradcheckTerms().begin(), GradcheckTerms().end(), t) ==
        GradcheckTerms().end())
      throw std::invalid_argument("unknown gradcheck term '" + t + "'");

  const BatchPass base = RunDataset(params, slice);
  const auto groups = FormGroups(base.gallery, base.cache->features, hp);
  std::vector<std::vector<int>> seeds;
  for (const auto& bd : base.gallery) seeds.push_back(TaggedSeeds(bd));
  PrototypeBank bank(slice.meta.num_total_classes());
  {
    const auto idx = BuildAssignments(base.probe, base.gallery, groups, bank.num_classes());
    for (int c = 0; c < bank.num_classes(); ++c)
      if (auto p = EpochPrototype(idx, base.cache->probs, c))
        UpdatePrototype(bank, c, *p, hp.alpha);
  }

  auto evaluate = [&](const ModelParams& p, const std::string& term) {
    const BatchPass pass = RunDataset(p, slice);
    const LossTerms t = ComputeTerms(pass, groups, bank, TermMask::All(), &seeds);
    LossValue v;
    if (term == "p") v = t.probe;
    else if (term == "g") v = t.gallery;
    else if (term == "ia") v = t.intra_bag;
    else if (term == "ca") v = t.cross_view;
    else if (term == "e") v = t.entropy;
    else v = TotalLoss(t, 1.0, TermMask::All());
    return std::make_pair(std::move(v), pass.cache);
  };

  GradcheckReport report;
  for (const auto& term : terms) {
    auto [value, cache] = evaluate(params, term);
    Gradients analytic = ZeroGradients(params);
    if (value.has_gradient()) Backward(params, *cache, value.grad_logits, analytic);
    auto analytic_blocks = Blocks(analytic);
    if (options.corrupt_block) {
      for (auto& b : analytic_blocks)
        if (b.name == *options.corrupt_block && b.size > 0) b.data[0] += options.corrupt_amount;
    }
    ModelParams probe = params;
    auto probe_blocks = Blocks(probe);
    for (std::size_t k = 0; k < probe_blocks.size(); ++k) {
      GradcheckRow row;
      row.term = term;
      row.block = probe_blocks[k].name;
      for (Eigen::Index e = 0; e < probe_blocks[k].size; ++e) {
        double& x = probe_blocks[k].data[e];
        const double saved = x;
        x = saved + options.step;
        const double up = evaluate(probe, term).first.value;
        x = saved - options.step;
        const double down = evaluate(probe, term).first.value;
        x = saved;
        const double numeric = (up - down) / (2.0 * options.step);
        const double a = analytic_blocks[k].data[e];
        const double diff = std::abs(a - numeric);
        if (std::abs(a) < options.small) {
          row.max_abs_error_small = std::max(row.max_abs_error_small, diff);
          if (diff >= options.small) row.pass = false;
        } else {
          const double rel = diff / std::max(std::abs(a), std::abs(numeric));
          row.max_rel_error = std::max(row.max_rel_error, rel);
          if (!(rel < options.tolerance)) row.pass = false;
        }
      }
      report.pass = report.pass && row.pass;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// The first probe_bags probe bags and gallery_bags gallery bags of ds.
inline Dataset SliceDataset(const Dataset& ds, int probe_bags, int gallery_bags) {
  Dataset out;
  out.meta = ds.meta;
  for (int i = 0; i < probe_bags && i < static_cast<int>(ds.probe.size()); ++i)
    out.probe.push_back(ds.probe[static_cast<std::size_t>(i)]);
  for (int i = 0; i < gallery_bags && i < static_cast<int>(ds.gallery.size()); ++i)
    out.gallery.push_back(ds.gallery[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace cvmiml
