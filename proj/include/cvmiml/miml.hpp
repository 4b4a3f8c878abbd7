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

// Multi-instance multi-label classification losses. Probe bags are trimmed
// single-identity sequences and every instance is supervised directly. A
// weakly labeled gallery bag only says which identities appear somewhere in
// it, so each tagged class supervises its most confident ("seed") instance.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "cvmiml/core.hpp"
#include "cvmiml/model.hpp"

namespace cvmiml {

// Probability clamp used inside every log.
inline constexpr double kProbEpsilon = 1e-12;

inline double SafeLog(double p) { return std::log(std::max(p, kProbEpsilon)); }
// Derivative used for SafeLog. The clamp guards the value only: below the
// clamp the gradient stays 1/p so that the softmax chain rule, which scales it
// by p again, keeps pushing an underflowed probability back up.
inline double SafeLogDeriv(double p) {
  return p >= std::numeric_limits<double>::min() ? 1.0 / p : 0.0;
}

// Per-instance label distributions of one bag: a row range of a probability
// matrix produced by a forward pass.
class BagDistributions {
 public:
  BagDistributions(const Bag& bag, const Matrix& probs, Eigen::Index first_row)
      : bag_(&bag), probs_(&probs), first_row_(first_row) {
    if (first_row + bag.size() > probs.rows())
      throw ShapeError("bag '" + bag.id + "' rows exceed the probability matrix");
  }

  const Bag& bag() const { return *bag_; }
  const Matrix& matrix() const { return *probs_; }
  int size() const { return bag_->size(); }
  Eigen::Index first_row() const { return first_row_; }
  Eigen::Index row_of(int i) const { return first_row_ + i; }
  double prob(int i, int c) const { return (*probs_)(first_row_ + i, c); }
  auto row(int i) const { return probs_->row(first_row_ + i); }

 private:
  const Bag* bag_;
  const Matrix* probs_;
  Eigen::Index first_row_;
};

// A loss value with its gradient w.r.t. the logits of every row of the
// forward pass. An empty gradient matrix stands for all zeros.
struct LossValue {
  double value = 0.0;
  double normalizer = 0.0;  // number of log/KL terms averaged
  Matrix grad_logits;

  bool has_gradient() const { return grad_logits.size() > 0; }
};

inline void AddScaled(LossValue& dst, const LossValue& src, double scale) {
  dst.value += scale * src.value;
  if (!src.has_gradient()) return;
  if (!dst.has_gradient()) {
    dst.grad_logits = scale * src.grad_logits;
    return;
  }
  if (dst.grad_logits.rows() != src.grad_logits.rows() ||
      dst.grad_logits.cols() != src.grad_logits.cols())
    throw ShapeError("cannot combine gradients of different forward passes");
  dst.grad_logits += scale * src.grad_logits;
}

namespace detail {

inline const Matrix* SharedMatrix(std::span<const BagDistributions> bags) {
  if (bags.empty()) return nullptr;
  const Matrix* m = &bags.front().matrix();
  for (const auto& b : bags)
    if (&b.matrix() != m)
      throw std::invalid_argument("bags must come from one forward pass");
  return m;
}

// Chain rule through softmax: dL/dz_j = p_j * (g_j - <p, g>).
inline void ProbGradToLogitGrad(const Matrix& probs, Matrix& grad) {
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    const double dot = probs.row(r).dot(grad.row(r));
    if (dot == 0.0 && grad.row(r).isZero(0.0)) continue;
    for (Eigen::Index c = 0; c < grad.cols(); ++c)
      grad(r, c) = probs(r, c) * (grad(r, c) - dot);
  }
}

// Turns a sum of terms plus its probability gradient into a mean.
inline LossValue Finish(const Matrix* probs, double sum, double count,
                        Matrix dprobs) {
  LossValue out;
  out.normalizer = count;
  if (count <= 0.0 || probs == nullptr) return out;
  out.value = sum / count;
  dprobs /= count;
  ProbGradToLogitGrad(*probs, dprobs);
  out.grad_logits = std::move(dprobs);
  return out;
}

}  // namespace detail

// Mean cross-entropy of every probe instance against its bag's single label.
inline LossValue ProbeLoss(std::span<const BagDistributions> probe_bags) {
  const Matrix* probs = detail::SharedMatrix(probe_bags);
  if (!probs) return {};
  Matrix dprobs = Matrix::Zero(probs->rows(), probs->cols());
  double sum = 0.0, count = 0.0;
  for (const auto& bd : probe_bags) {
    if (bd.bag().labels.count() != 1)
      throw std::invalid_argument("probe bag '" + bd.bag().id +
                                  "' is not single-label");
    const int c = bd.bag().probe_class();
    for (int i = 0; i < bd.size(); ++i) {
      const double p = bd.prob(i, c);
      sum += -SafeLog(p);
      dprobs(bd.row_of(i), c) -= SafeLogDeriv(p);
      count += 1.0;
    }
  }
  return detail::Finish(probs, sum, count, std::move(dprobs));
}

// argmax_i p_i^c, first index on ties.
inline int SeedIndex(const BagDistributions& bag, int c) {
  if (bag.size() < 1) throw std::invalid_argument("empty bag");
  int best = 0;
  for (int i = 1; i < bag.size(); ++i)
    if (bag.prob(i, c) > bag.prob(best, c)) best = i;
  return best;
}

// Seeds for every tagged class of a bag, in increasing class order.
inline std::vector<int> TaggedSeeds(const BagDistributions& bag) {
  std::vector<int> seeds;
  for (int c : bag.bag().labels.tags()) seeds.push_back(SeedIndex(bag, c));
  return seeds;
}

// Gallery loss with the seed selection held fixed: seeds[b][k] is the seed
// instance of the k-th tagged class of bag b.
inline LossValue GalleryLossWithSeeds(
    std::span<const BagDistributions> gallery_bags,
    const std::vector<std::vector<int>>& seeds) {
  const Matrix* probs = detail::SharedMatrix(gallery_bags);
  if (!probs) return {};
  if (seeds.size() != gallery_bags.size())
    throw std::invalid_argument("one seed list per gallery bag required");
  Matrix dprobs = Matrix::Zero(probs->rows(), probs->cols());
  double sum = 0.0, count = 0.0;
  for (std::size_t b = 0; b < gallery_bags.size(); ++b) {
    const auto& bd = gallery_bags[b];
    const auto tags = bd.bag().labels.tags();
    if (tags.empty())
      throw std::invalid_argument("gallery bag '" + bd.bag().id +
                                  "' has no tagged label");
    if (seeds[b].size() != tags.size())
      throw std::invalid_argument("seed list does not match bag tags");
    for (std::size_t k = 0; k < tags.size(); ++k) {
      const int c = tags[k];
      const int q = seeds[b][k];
      const double p = bd.prob(q, c);
      sum += -SafeLog(p);
      dprobs(bd.row_of(q), c) -= SafeLogDeriv(p);
      count += 1.0;
    }
  }
  return detail::Finish(probs, sum, count, std::move(dprobs));
}

// Mean over (bag, tagged class) pairs of -log max_i p_i^c.
inline LossValue GalleryLoss(std::span<const BagDistributions> gallery_bags) {
  std::vector<std::vector<int>> seeds;
  seeds.reserve(gallery_bags.size());
  for (const auto& bd : gallery_bags) seeds.push_back(TaggedSeeds(bd));
  return GalleryLossWithSeeds(gallery_bags, seeds);
}

inline LossValue ClassificationLoss(const LossValue& probe_part,
                                    const LossValue& gallery_part) {
  LossValue out;
  AddScaled(out, probe_part, 1.0);
  AddScaled(out, gallery_part, 1.0);
  out.normalizer = probe_part.normalizer + gallery_part.normalizer;
  return out;
}

}  // namespace cvmiml
