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

// Bag-level retrieval. A probe bag is the mean of its instance features and
// a gallery bag is as close as its nearest instance. Scored with CMC and mAP.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cvmiml/core.hpp"
#include "cvmiml/dataset_io.hpp"
#include "cvmiml/model.hpp"

namespace cvmiml {

namespace detail {

inline Matrix RawMatrix(const Bag& bag) {
  if (bag.instances.empty())
    throw std::invalid_argument("bag '" + bag.id + "' is empty");
  const auto d = static_cast<Eigen::Index>(bag.instances.front().features.size());
  Matrix raw(bag.size(), d);
  for (int i = 0; i < bag.size(); ++i) {
    const auto& f = bag.instances[static_cast<std::size_t>(i)].features;
    if (static_cast<Eigen::Index>(f.size()) != d)
      throw ShapeError("ragged instance features in bag '" + bag.id + "'");
    raw.row(i) = Eigen::Map<const RowVector>(f.data(), d);
  }
  return raw;
}

}  // namespace detail

// Mean of the extracted instance features.
inline Vector BagFeature(const Bag& bag, const ModelParams& params) {
  Matrix x = ExtractFeatures(params, detail::RawMatrix(bag));
  return x.colwise().mean().transpose();
}

// Minimum Euclidean distance from query to the rows of `features`.
inline double MinDistance(const Vector& query, const Matrix& features) {
  if (features.rows() == 0) throw std::invalid_argument("empty gallery bag");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < features.rows(); ++r)
    best = std::min(best, (features.row(r).transpose() - query).squaredNorm());
  return std::sqrt(best);
}

inline double BagDistance(const Vector& query, const Bag& gallery_bag,
                          const ModelParams& params) {
  return MinDistance(query, ExtractFeatures(params, detail::RawMatrix(gallery_bag)));
}

struct RankedResult {
  std::string query_id;
  std::vector<std::string> gallery_ids;  // ascending distance
  std::vector<double> distances;
  std::vector<bool> relevant;

  int num_relevant() const {
    return static_cast<int>(std::count(relevant.begin(), relevant.end(), true));
  }
  // 1-based rank of the first relevant bag, 0 if none.
  int first_hit() const {
    for (std::size_t k = 0; k < relevant.size(); ++k)
      if (relevant[k]) return static_cast<int>(k) + 1;
    return 0;
  }
};

// Sorts by distance, ties by gallery bag id.
inline RankedResult RankByDistance(const std::string& query_id,
                                   std::vector<std::string> ids,
                                   std::vector<double> distances,
                                   std::vector<bool> relevant) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (distances[a] != distances[b]) return distances[a] < distances[b];
    return ids[a] < ids[b];
  });
  RankedResult r;
  r.query_id = query_id;
  for (auto k : order) {
    r.gallery_ids.push_back(ids[k]);
    r.distances.push_back(distances[k]);
    r.relevant.push_back(relevant[k]);
  }
  return r;
}

// Gallery features extracted once per evaluation.
struct GalleryFeatures {
  std::vector<const Bag*> bags;
  std::vector<Matrix> features;
};

inline GalleryFeatures ExtractGallery(const std::vector<Bag>& gallery,
                                      const ModelParams& params) {
  GalleryFeatures out;
  for (const auto& bag : gallery) {
    out.bags.push_back(&bag);
    out.features.push_back(ExtractFeatures(params, detail::RawMatrix(bag)));
  }
  return out;
}

// Relevance: the query identity is among the gallery bag's true identities.
inline RankedResult RankGallery(const Bag& query, const GalleryFeatures& gallery,
                                const ModelParams& params) {
  if (gallery.bags.empty()) throw std::invalid_argument("empty gallery");
  const Vector q = BagFeature(query, params);
  const int identity = query.probe_class();
  std::vector<std::string> ids;
  std::vector<double> dist;
  std::vector<bool> rel;
  for (std::size_t b = 0; b < gallery.bags.size(); ++b) {
    ids.push_back(gallery.bags[b]->id);
    dist.push_back(MinDistance(q, gallery.features[b]));
    rel.push_back(gallery.bags[b]->truth_classes().count(identity) > 0);
  }
  return RankByDistance(query.id, std::move(ids), std::move(dist), std::move(rel));
}

inline RankedResult RankGallery(const Bag& query, const std::vector<Bag>& gallery,
                                const ModelParams& params) {
  return RankGallery(query, ExtractGallery(gallery, params), params);
}

inline double AveragePrecision(const RankedResult& r) {
  double hits = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < r.relevant.size(); ++k) {
    if (!r.relevant[k]) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(k + 1);
  }
  return hits > 0.0 ? sum / hits : 0.0;
}

struct CmcResult {
  std::map<int, double> accuracy;  // rank -> fraction
  int num_queries = 0;
  std::vector<std::string> excluded;  // queries without any relevant bag
};

inline CmcResult Cmc(const std::vector<RankedResult>& results,
                     const std::vector<int>& ranks) {
  CmcResult out;
  std::vector<int> first_hits;
  for (const auto& r : results) {
    const int hit = r.first_hit();
    if (hit == 0) {
      out.excluded.push_back(r.query_id);
      continue;
    }
    first_hits.push_back(hit);
  }
  out.num_queries = static_cast<int>(first_hits.size());
  for (int rank : ranks) {
    if (rank < 1) throw std::invalid_argument("CMC rank must be >= 1");
    const auto n = std::count_if(first_hits.begin(), first_hits.end(),
                                 [&](int h) { return h <= rank; });
    out.accuracy[rank] =
        first_hits.empty() ? 0.0 : static_cast<double>(n) / first_hits.size();
  }
  return out;
}

// Mean AP over queries that have at least one relevant bag.
inline double MeanAveragePrecision(const std::vector<RankedResult>& results) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : results) {
    if (r.first_hit() == 0) continue;
    sum += AveragePrecision(r);
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

inline const std::vector<int>& DefaultRanks() {
  static const std::vector<int> ranks{1, 5, 10, 20};
  return ranks;
}

struct QueryRow {
  std::string query_id;
  int first_hit = 0;
  double average_precision = 0.0;
};

struct MetricsReport {
  std::map<int, double> cmc;
  double map = 0.0;
  int num_queries = 0;
  std::vector<std::string> excluded;
  std::vector<QueryRow> per_query;

  double rank1() const {
    auto it = cmc.find(1);
    return it == cmc.end() ? 0.0 : it->second;
  }

  Json ToJson() const {
    Json c = Json::object();
    for (const auto& [r, v] : cmc) c[std::to_string(r)] = v;
    return Json{{"cmc", c},
                {"map", map},
                {"num_queries", num_queries},
                {"excluded", excluded}};
  }

  std::string PerQueryCsv() const {
    std::ostringstream out;
    out.precision(17);
    out << "query_id,rank_of_first_hit,AP\n";
    for (const auto& q : per_query)
      out << q.query_id << "," << q.first_hit << "," << q.average_precision << "\n";
    return out.str();
  }
};

inline std::vector<RankedResult> RankAll(const Dataset& ds,
                                         const ModelParams& params) {
  const auto gallery = ExtractGallery(ds.gallery, params);
  std::vector<RankedResult> results;
  results.reserve(ds.probe.size());
  for (const auto& q : ds.probe) results.push_back(RankGallery(q, gallery, params));
  return results;
}

inline MetricsReport Evaluate(const Dataset& ds, const ModelParams& params,
                              const std::vector<int>& ranks = DefaultRanks()) {
  const auto results = RankAll(ds, params);
  const auto cmc = Cmc(results, ranks);
  MetricsReport report;
  report.cmc = cmc.accuracy;
  report.num_queries = cmc.num_queries;
  report.excluded = cmc.excluded;
  report.map = MeanAveragePrecision(results);
  for (const auto& r : results)
    report.per_query.push_back({r.query_id, r.first_hit(), AveragePrecision(r)});
  return report;
}

}  // namespace cvmiml
