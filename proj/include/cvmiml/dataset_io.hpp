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

// JSON dataset format:
//   { "meta": {"num_known_classes", "num_views", "feature_dim"},
//     "probe":   [ {"id", "view", "labels": [ids], "instances":
//                   [{"features": [...], "truth_class": int|null}] } ],
//     "gallery": [ same shape ] }
// Keys are written in sorted order and doubles in shortest round-trip form,
// so save is deterministic and load(save(ds)) == ds.

#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>

#include "cvmiml/core.hpp"
#include "json.hpp"

namespace cvmiml {

using Json = nlohmann::json;

namespace detail {

inline std::string LineColumnOf(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline const Json& Field(const Json& obj, const char* key,
                         const std::string& path) {
  if (!obj.is_object())
    throw FormatError("field " + path + ": expected object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw FormatError("field " + path + "." + key + ": missing");
  return *it;
}

inline int AsInt(const Json& j, const std::string& path) {
  if (!j.is_number_integer())
    throw FormatError("field " + path + ": expected integer");
  return j.get<int>();
}

inline double AsDouble(const Json& j, const std::string& path) {
  if (!j.is_number())
    throw FormatError("field " + path + ": expected number");
  return j.get<double>();
}

inline Bag ParseBag(const Json& j, const std::string& path, BagRole role,
                    int num_total_classes) {
  Bag bag;
  bag.role = role;
  const Json& id = Field(j, "id", path);
  if (!id.is_string()) throw FormatError("field " + path + ".id: expected string");
  bag.id = id.get<std::string>();
  bag.view = AsInt(Field(j, "view", path), path + ".view");

  const Json& labels = Field(j, "labels", path);
  if (!labels.is_array())
    throw FormatError("field " + path + ".labels: expected array");
  bag.labels = LabelVector(num_total_classes);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const std::string lpath = path + ".labels[" + std::to_string(k) + "]";
    const int c = AsInt(labels[k], lpath);
    if (c < 0 || c >= num_total_classes)
      throw FormatError("field " + lpath + ": class id " + std::to_string(c) +
                        " outside [0, " + std::to_string(num_total_classes - 1) +
                        "]");
    bag.labels.set(c);
  }

  const Json& instances = Field(j, "instances", path);
  if (!instances.is_array())
    throw FormatError("field " + path + ".instances: expected array");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::string ipath = path + ".instances[" + std::to_string(i) + "]";
    const Json& feats = Field(instances[i], "features", ipath);
    if (!feats.is_array())
      throw FormatError("field " + ipath + ".features: expected array");
    Instance inst;
    inst.features.reserve(feats.size());
    for (std::size_t k = 0; k < feats.size(); ++k)
      inst.features.push_back(
          AsDouble(feats[k], ipath + ".features[" + std::to_string(k) + "]"));
    auto truth = instances[i].find("truth_class");
    if (truth != instances[i].end() && !truth->is_null())
      inst.truth_class = AsInt(*truth, ipath + ".truth_class");
    bag.instances.push_back(std::move(inst));
  }
  return bag;
}

inline Json BagToJson(const Bag& bag) {
  Json instances = Json::array();
  for (const auto& inst : bag.instances) {
    Json ij;
    ij["features"] = inst.features;
    ij["truth_class"] =
        inst.truth_class ? Json(*inst.truth_class) : Json(nullptr);
    instances.push_back(std::move(ij));
  }
  Json j;
  j["id"] = bag.id;
  j["view"] = bag.view;
  j["labels"] = bag.labels.tags();
  j["instances"] = std::move(instances);
  return j;
}

}  // namespace detail

inline Json MetaToJson(const DatasetMeta& meta) {
  return Json{{"num_known_classes", meta.num_known_classes},
              {"num_views", meta.num_views},
              {"feature_dim", meta.feature_dim}};
}

inline DatasetMeta MetaFromJson(const Json& j, const std::string& path = "meta") {
  DatasetMeta meta;
  meta.num_known_classes = detail::AsInt(
      detail::Field(j, "num_known_classes", path), path + ".num_known_classes");
  meta.num_views =
      detail::AsInt(detail::Field(j, "num_views", path), path + ".num_views");
  meta.feature_dim = detail::AsInt(detail::Field(j, "feature_dim", path),
                                   path + ".feature_dim");
  return meta;
}

inline Json DatasetToJson(const Dataset& ds) {
  Json j;
  j["meta"] = MetaToJson(ds.meta);
  j["probe"] = Json::array();
  j["gallery"] = Json::array();
  for (const auto& b : ds.probe) j["probe"].push_back(detail::BagToJson(b));
  for (const auto& b : ds.gallery) j["gallery"].push_back(detail::BagToJson(b));
  return j;
}

// Parses without validating invariants. Throws FormatError.
inline Dataset DatasetFromJson(const Json& j) {
  Dataset ds;
  ds.meta = MetaFromJson(detail::Field(j, "meta", "<root>"));
  if (ds.meta.num_known_classes < 1)
    throw FormatError("field meta.num_known_classes: must be >= 1");
  const int total = ds.meta.num_total_classes();
  for (const auto* role : {"probe", "gallery"}) {
    const Json& bags = detail::Field(j, role, "<root>");
    if (!bags.is_array())
      throw FormatError(std::string("field ") + role + ": expected array");
    const bool is_probe = std::string(role) == "probe";
    auto& out = is_probe ? ds.probe : ds.gallery;
    for (std::size_t b = 0; b < bags.size(); ++b)
      out.push_back(detail::ParseBag(
          bags[b], std::string(role) + "[" + std::to_string(b) + "]",
          is_probe ? BagRole::kProbe : BagRole::kGallery, total));
  }
  return ds;
}

inline Dataset ParseDataset(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError("parse error at " + detail::LineColumnOf(text, e.byte) +
                      ": " + e.what());
  }
  Dataset ds = DatasetFromJson(j);
  auto report = ValidateDataset(ds);
  if (!report.ok()) throw ValidationError(report.ToString());
  return ds;
}

inline std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string SerializeDataset(const Dataset& ds) {
  return DatasetToJson(ds).dump() + "\n";
}

// Throws IoError, FormatError or ValidationError.
inline Dataset LoadDataset(const std::string& path) {
  return ParseDataset(ReadFile(path));
}

inline void SaveDataset(const Dataset& ds, const std::string& path) {
  WriteFile(path, SerializeDataset(ds));
}

}  // namespace cvmiml
