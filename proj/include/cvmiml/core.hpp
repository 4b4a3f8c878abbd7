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

// Domain types for weakly labeled re-identification data. A dataset holds
// probe and gallery bags whose labels are bag-level multi-label vectors.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvmiml {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Class 0 is the novel class; known identities are 1..C.
inline constexpr int kNovelClass = 0;

struct DatasetMeta {
  int num_known_classes = 0;
  int num_views = 0;
  int feature_dim = 0;

  int num_total_classes() const { return num_known_classes + 1; }

  bool operator==(const DatasetMeta&) const = default;
};

struct Instance {
  std::vector<double> features;
  // Simulation/evaluation oracle only. Training losses never read it.
  std::optional<int> truth_class;

  bool operator==(const Instance&) const = default;
};

// Binary label vector of length C+1; entry 0 is the novel class.
class LabelVector {
 public:
  LabelVector() = default;
  explicit LabelVector(int num_total_classes)
      : bits_(static_cast<std::size_t>(num_total_classes), 0) {}

  static LabelVector FromTags(int num_total_classes,
                              const std::vector<int>& tags) {
    LabelVector labels(num_total_classes);
    for (int c : tags) labels.set(c);
    return labels;
  }

  int size() const { return static_cast<int>(bits_.size()); }
  bool test(int c) const {
    return c >= 0 && c < size() && bits_[static_cast<std::size_t>(c)] != 0;
  }
  void set(int c, bool on = true) {
    if (c < 0 || c >= size())
      throw std::out_of_range("label " + std::to_string(c) +
                              " outside [0, " + std::to_string(size()) + ")");
    bits_[static_cast<std::size_t>(c)] = on ? 1 : 0;
  }
  int count() const {
    return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1));
  }
  // Tagged class ids in increasing order.
  std::vector<int> tags() const {
    std::vector<int> out;
    for (int c = 0; c < size(); ++c)
      if (test(c)) out.push_back(c);
    return out;
  }

  bool operator==(const LabelVector&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

enum class BagRole { kProbe, kGallery };

inline const char* RoleName(BagRole role) {
  return role == BagRole::kProbe ? "probe" : "gallery";
}

struct Bag {
  std::string id;
  int view = 1;  // 1-based camera view
  BagRole role = BagRole::kGallery;
  LabelVector labels;
  std::vector<Instance> instances;

  int size() const { return static_cast<int>(instances.size()); }
  // The single identity of a probe bag (first tag for gallery bags).
  int probe_class() const {
    auto tags = labels.tags();
    return tags.empty() ? -1 : tags.front();
  }
  // Identities actually present, from instance truth. Falls back to the bag
  // labels when no instance carries truth.
  std::set<int> truth_classes() const {
    std::set<int> out;
    for (const auto& inst : instances)
      if (inst.truth_class) out.insert(*inst.truth_class);
    if (out.empty())
      for (int c : labels.tags()) out.insert(c);
    return out;
  }

  bool operator==(const Bag&) const = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Bag> probe;
  std::vector<Bag> gallery;

  std::size_t num_instances() const {
    std::size_t n = 0;
    for (const auto& b : probe) n += b.instances.size();
    for (const auto& b : gallery) n += b.instances.size();
    return n;
  }

  bool operator==(const Dataset&) const = default;
};

struct Violation {
  std::string bag_id;  // empty for dataset-level rules
  std::string message;

  std::string ToString() const {
    return bag_id.empty() ? message : "bag '" + bag_id + "': " + message;
  }
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool Contains(const std::string& fragment) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) {
                         return v.message.find(fragment) != std::string::npos;
                       });
  }
  std::string ToString() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.ToString();
    }
    return out;
  }
};

namespace detail {

inline void ValidateBag(const Bag& bag, const DatasetMeta& meta,
                        ValidationReport& report) {
  auto add = [&](std::string msg) {
    report.violations.push_back({bag.id, std::move(msg)});
  };
  if (bag.instances.empty()) add("bag has no instances");
  if (bag.view < 1 || bag.view > meta.num_views)
    add("view " + std::to_string(bag.view) + " outside [1, " +
        std::to_string(meta.num_views) + "]");
  if (bag.labels.size() != meta.num_total_classes())
    add("label vector length " + std::to_string(bag.labels.size()) +
        " != " + std::to_string(meta.num_total_classes()));
  const int tagged = bag.labels.count();
  if (tagged == 0) add("bag has no tagged label");
  if (bag.role == BagRole::kProbe) {
    if (tagged > 1) add("probe bag not single-label");
    if (bag.labels.test(kNovelClass)) add("probe bag tagged with novel class 0");
  }
  for (std::size_t i = 0; i < bag.instances.size(); ++i) {
    const auto& inst = bag.instances[i];
    const std::string where = "instance " + std::to_string(i) + ": ";
    if (static_cast<int>(inst.features.size()) != meta.feature_dim)
      add(where + "feature length " + std::to_string(inst.features.size()) +
          " != " + std::to_string(meta.feature_dim));
    for (double f : inst.features) {
      if (!std::isfinite(f)) {
        add(where + "non-finite feature");
        break;
      }
    }
    if (inst.truth_class &&
        (*inst.truth_class < 0 || *inst.truth_class > meta.num_known_classes))
      add(where + "truth_class " + std::to_string(*inst.truth_class) +
          " outside [0, " + std::to_string(meta.num_known_classes) + "]");
  }
}

}  // namespace detail

// Lists every violated invariant; an empty report means the dataset is valid.
inline ValidationReport ValidateDataset(const Dataset& ds) {
  ValidationReport report;
  const auto& meta = ds.meta;
  if (meta.num_known_classes < 1)
    report.violations.push_back({"", "num_known_classes must be >= 1"});
  if (meta.num_views < 2)
    report.violations.push_back({"", "num_views must be >= 2"});
  if (meta.feature_dim < 1)
    report.violations.push_back({"", "feature_dim must be >= 1"});

  std::set<std::string> seen_ids;
  std::map<int, std::set<int>> views_by_class;
  std::set<int> probe_classes;
  auto visit = [&](const std::vector<Bag>& bags, BagRole expected) {
    for (const auto& bag : bags) {
      if (!seen_ids.insert(bag.id).second)
        report.violations.push_back({bag.id, "duplicate bag id"});
      if (bag.role != expected)
        report.violations.push_back(
            {bag.id, std::string("bag role is not ") + RoleName(expected)});
      detail::ValidateBag(bag, meta, report);
      for (int c : bag.labels.tags()) {
        views_by_class[c].insert(bag.view);
        if (expected == BagRole::kProbe) probe_classes.insert(c);
      }
    }
  };
  visit(ds.probe, BagRole::kProbe);
  visit(ds.gallery, BagRole::kGallery);

  for (int c = 1; c <= meta.num_known_classes; ++c) {
    if (!probe_classes.count(c))
      report.violations.push_back(
          {"", "class " + std::to_string(c) + " has no probe bag"});
    const auto it = views_by_class.find(c);
    const std::size_t nviews = it == views_by_class.end() ? 0 : it->second.size();
    if (nviews < 2)
      report.violations.push_back({"", "class " + std::to_string(c) +
                                           " seen under " +
                                           std::to_string(nviews) + " view"});
  }
  return report;
}

}  // namespace cvmiml
