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

// Alignment terms on label distributions. Members of a seed-centred group are
// pulled toward the seed, and every instance assigned to a class is pulled
// toward a view-balanced EMA class prototype. An entropy term pushes gallery
// instances toward confident predictions.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "cvmiml/miml.hpp"

namespace cvmiml {

struct Hyperparams {
  int knn = 15;               // K
  double gamma = 0.2;         // relaxation of the seed-probability threshold
  double alpha = 0.5;         // prototype EMA weight on history
  int ramp_length = 30;       // epochs until delta saturates
  double delta_max = 1.0;

  void Validate() const {
    if (knn < 1) throw std::invalid_argument("K must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("gamma must lie in (0, 1)");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("alpha must lie in [0, 1]");
    if (ramp_length < 1) throw std::invalid_argument("ramp length must be >= 1");
    if (!(delta_max >= 0.0 && delta_max <= 1.0))
      throw std::invalid_argument("delta_max must lie in [0, 1]");
  }
};

// KL(p || q) with both arguments clamped to kProbEpsilon inside the logs.
template <typename P, typename Q>
double KlDivergence(const P& p, const Q& q) {
  double sum = 0.0;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(p.size()); ++c)
    sum += p[c] * (SafeLog(p[c]) - SafeLog(q[c]));
  return sum;
}

inline double KlDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("KL arguments differ in length");
  double sum = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c)
    sum += p[c] * (SafeLog(p[c]) - SafeLog(q[c]));
  return sum;
}

namespace detail {

// Adds dKL(p||q)/dp and dKL(p||q)/dq into rows of a probability gradient.
// q_row < 0 marks q as a constant.
inline double AccumulateKl(const Matrix& probs, Eigen::Index p_row,
                           const double* q, Eigen::Index q_row, Matrix& dprobs) {
  double kl = 0.0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    const double pc = probs(p_row, c);
    const double qc = q[c];
    kl += pc * (SafeLog(pc) - SafeLog(qc));
    dprobs(p_row, c) += SafeLog(pc) - SafeLog(qc) + 1.0;
    if (q_row >= 0) dprobs(q_row, c) -= pc * SafeLogDeriv(qc);
  }
  return kl;
}

}  // namespace detail

// Seed-centred group of probable same-identity instances for one (bag, class).
struct Group {
  int bag = 0;   // index into the gallery list the group was formed over
  int cls = 0;
  int seed = 0;
  std::vector<int> members;  // increasing index order, seed excluded

  bool operator==(const Group&) const = default;
};

inline double SquaredDistance(const Matrix& features, Eigen::Index a,
                              Eigen::Index b) {
  return (features.row(a) - features.row(b)).squaredNorm();
}

// Members are the instances among the min(K, n-1) nearest neighbours of the
// seed (Euclidean in feature space, ties by index) whose class-c probability
// is at least gamma times the seed's.
inline Group FormGroup(const BagDistributions& bag, const Matrix& features,
                       int c, const Hyperparams& hp, int bag_index = 0) {
  Group g;
  g.bag = bag_index;
  g.cls = c;
  g.seed = SeedIndex(bag, c);
  const int n = bag.size();
  std::vector<std::pair<double, int>> by_distance;
  by_distance.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (i == g.seed) continue;
    by_distance.emplace_back(
        SquaredDistance(features, bag.row_of(g.seed), bag.row_of(i)), i);
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(hp.knn),
                                               by_distance.size());
  std::partial_sort(by_distance.begin(), by_distance.begin() + static_cast<long>(k),
                    by_distance.end());
  const double threshold = hp.gamma * bag.prob(g.seed, c);
  for (std::size_t j = 0; j < k; ++j) {
    const int p = by_distance[j].second;
    if (bag.prob(p, c) >= threshold) g.members.push_back(p);
  }
  std::sort(g.members.begin(), g.members.end());
  return g;
}

// One group per (gallery bag, tagged class).
inline std::vector<Group> FormGroups(std::span<const BagDistributions> gallery,
                                     const Matrix& features,
                                     const Hyperparams& hp) {
  std::vector<Group> groups;
  for (std::size_t b = 0; b < gallery.size(); ++b)
    for (int c : gallery[b].bag().labels.tags())
      groups.push_back(FormGroup(gallery[b], features, c, hp, static_cast<int>(b)));
  return groups;
}

// Mean KL(member || seed) over all group members. Gradient reaches both the
// member and the seed distribution.
inline LossValue IntraBagLoss(std::span<const BagDistributions> gallery,
                              std::span<const Group> groups) {
  const Matrix* probs = detail::SharedMatrix(gallery);
  if (!probs) return {};
  Matrix dprobs = Matrix::Zero(probs->rows(), probs->cols());
  double sum = 0.0, count = 0.0;
  std::vector<double> seed_row(static_cast<std::size_t>(probs->cols()));
  for (const auto& g : groups) {
    const auto& bd = gallery[static_cast<std::size_t>(g.bag)];
    const Eigen::Index q_row = bd.row_of(g.seed);
    for (Eigen::Index c = 0; c < probs->cols(); ++c)
      seed_row[static_cast<std::size_t>(c)] = (*probs)(q_row, c);
    for (int p : g.members) {
      sum += detail::AccumulateKl(*probs, bd.row_of(p), seed_row.data(), q_row,
                                  dprobs);
      count += 1.0;
    }
  }
  return detail::Finish(probs, sum, count, std::move(dprobs));
}

// Rows of a forward pass assigned to each (class, view).
struct AssignmentIndex {
  // by_class[c][view] -> rows
  std::vector<std::map<int, std::vector<Eigen::Index>>> by_class;

  explicit AssignmentIndex(int num_total_classes = 0)
      : by_class(static_cast<std::size_t>(num_total_classes)) {}

  int num_classes() const { return static_cast<int>(by_class.size()); }
  // Views with a nonempty set for class c.
  std::vector<int> views(int c) const {
    std::vector<int> out;
    for (const auto& [v, rows] : by_class[static_cast<std::size_t>(c)])
      if (!rows.empty()) out.push_back(v);
    return out;
  }
  std::size_t class_size(int c) const {
    std::size_t n = 0;
    for (const auto& [v, rows] : by_class[static_cast<std::size_t>(c)]) n += rows.size();
    return n;
  }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (int c = 0; c < num_classes(); ++c) n += class_size(c);
    return n;
  }
  // Classes with no assigned instance at all.
  std::vector<int> empty_classes() const {
    std::vector<int> out;
    for (int c = 0; c < num_classes(); ++c)
      if (class_size(c) == 0) out.push_back(c);
    return out;
  }
};

// Probe instances join their bag's class under the bag's view; a gallery bag
// tagged c contributes the seed and members of its group for c.
inline AssignmentIndex BuildAssignments(std::span<const BagDistributions> probe,
                                        std::span<const BagDistributions> gallery,
                                        std::span<const Group> groups,
                                        int num_total_classes) {
  AssignmentIndex idx(num_total_classes);
  for (const auto& bd : probe) {
    const int c = bd.bag().probe_class();
    auto& rows = idx.by_class[static_cast<std::size_t>(c)][bd.bag().view];
    for (int i = 0; i < bd.size(); ++i) rows.push_back(bd.row_of(i));
  }
  for (const auto& g : groups) {
    const auto& bd = gallery[static_cast<std::size_t>(g.bag)];
    auto& rows = idx.by_class[static_cast<std::size_t>(g.cls)][bd.bag().view];
    std::vector<int> picked = g.members;
    picked.push_back(g.seed);
    std::sort(picked.begin(), picked.end());
    for (int i : picked) rows.push_back(bd.row_of(i));
  }
  return idx;
}

// Unweighted mean over views of the per-view mean distribution; nullopt when
// the class has no assigned instance.
inline std::optional<std::vector<double>> EpochPrototype(
    const AssignmentIndex& idx, const Matrix& probs, int c) {
  const auto views = idx.views(c);
  if (views.empty()) return std::nullopt;
  RowVector acc = RowVector::Zero(probs.cols());
  for (int v : views) {
    const auto& rows = idx.by_class[static_cast<std::size_t>(c)].at(v);
    RowVector view_mean = RowVector::Zero(probs.cols());
    for (auto r : rows) view_mean += probs.row(r);
    acc += view_mean / static_cast<double>(rows.size());
  }
  acc /= static_cast<double>(views.size());
  return std::vector<double>(acc.data(), acc.data() + acc.size());
}

struct PrototypeBank {
  int epoch = 0;
  std::vector<std::vector<double>> prototypes;
  std::vector<bool> initialized;

  explicit PrototypeBank(int num_total_classes = 0)
      : prototypes(static_cast<std::size_t>(num_total_classes)),
        initialized(static_cast<std::size_t>(num_total_classes), false) {}

  int num_classes() const { return static_cast<int>(prototypes.size()); }
  bool has(int c) const { return initialized[static_cast<std::size_t>(c)]; }
  const std::vector<double>& at(int c) const {
    return prototypes[static_cast<std::size_t>(c)];
  }

  bool operator==(const PrototypeBank&) const = default;
};

// First sighting copies the epoch prototype; later updates blend
// alpha * history + (1 - alpha) * current.
inline void UpdatePrototype(PrototypeBank& bank, int c,
                            const std::vector<double>& current, double alpha) {
  auto& proto = bank.prototypes[static_cast<std::size_t>(c)];
  if (!bank.has(c)) {
    proto = current;
    bank.initialized[static_cast<std::size_t>(c)] = true;
    return;
  }
  if (proto.size() != current.size()) throw ShapeError("prototype length mismatch");
  for (std::size_t k = 0; k < proto.size(); ++k)
    proto[k] = alpha * proto[k] + (1.0 - alpha) * current[k];
}

// Mean KL(p_i || prototype_c) over all assigned (c, i). Prototypes are
// constants.
inline LossValue CrossViewLoss(const AssignmentIndex& idx, const Matrix& probs,
                               const PrototypeBank& bank) {
  if (idx.total_size() == 0) return {};
  Matrix dprobs = Matrix::Zero(probs.rows(), probs.cols());
  double sum = 0.0, count = 0.0;
  for (int c = 0; c < idx.num_classes(); ++c) {
    if (idx.class_size(c) == 0) continue;
    if (!bank.has(c))
      throw std::logic_error("prototype for class " + std::to_string(c) +
                             " is not initialized");
    const double* proto = bank.at(c).data();
    for (const auto& [v, rows] : idx.by_class[static_cast<std::size_t>(c)]) {
      for (auto r : rows) {
        sum += detail::AccumulateKl(probs, r, proto, -1, dprobs);
        count += 1.0;
      }
    }
  }
  return detail::Finish(&probs, sum, count, std::move(dprobs));
}

// Mean Shannon entropy of gallery instance distributions.
inline LossValue EntropyLoss(std::span<const BagDistributions> gallery) {
  const Matrix* probs = detail::SharedMatrix(gallery);
  if (!probs) return {};
  Matrix dprobs = Matrix::Zero(probs->rows(), probs->cols());
  double sum = 0.0, count = 0.0;
  for (const auto& bd : gallery) {
    for (int i = 0; i < bd.size(); ++i) {
      const Eigen::Index r = bd.row_of(i);
      for (Eigen::Index c = 0; c < probs->cols(); ++c) {
        const double p = (*probs)(r, c);
        sum += -p * SafeLog(p);
        dprobs(r, c) += -SafeLog(p) - 1.0;
      }
      count += 1.0;
    }
  }
  return detail::Finish(probs, sum, count, std::move(dprobs));
}

// Which alignment terms join the objective.
struct TermMask {
  bool intra_bag = true;
  bool cross_view = true;
  bool entropy = true;

  bool any() const { return intra_bag || cross_view || entropy; }
  bool operator==(const TermMask&) const = default;

  static TermMask None() { return {false, false, false}; }
  static TermMask All() { return {true, true, true}; }
};

struct LossTerms {
  LossValue probe;
  LossValue gallery;
  LossValue classification;
  LossValue intra_bag;
  LossValue cross_view;
  LossValue entropy;
};

// classification + delta * (intra_bag + cross_view + entropy), masked.
inline LossValue TotalLoss(const LossTerms& terms, double delta,
                           const TermMask& mask = TermMask::All()) {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("delta must lie in [0, 1]");
  LossValue out = terms.classification;
  if (!mask.any()) return out;
  LossValue align;
  if (mask.intra_bag) AddScaled(align, terms.intra_bag, 1.0);
  if (mask.cross_view) AddScaled(align, terms.cross_view, 1.0);
  if (mask.entropy) AddScaled(align, terms.entropy, 1.0);
  AddScaled(out, align, delta);
  return out;
}

// Gaussian ramp-up delta_max * exp(-5 (1 - min(t, T)/T)^2).
inline double RampWeight(int epoch, const Hyperparams& hp) {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  const double phase =
      1.0 - static_cast<double>(std::min(epoch, hp.ramp_length)) / hp.ramp_length;
  return hp.delta_max * std::exp(-5.0 * phase * phase);
}

}  // namespace cvmiml
