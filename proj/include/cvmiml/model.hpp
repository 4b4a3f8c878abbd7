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

// Learnable feature extractor (affine, or affine -> tanh -> affine) followed
// by a softmax classifier over C+1 classes, with hand-written backward.

#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvmiml/core.hpp"

namespace cvmiml {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Maps rows of `input` to rows of `weight * x + bias`.
struct AffineLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }

  bool operator==(const AffineLayer& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           bias.size() == o.bias.size() && weight == o.weight && bias == o.bias;
  }
};

struct ModelShape {
  int input_dim = 0;
  int feature_dim = 0;
  int num_total_classes = 0;
  int hidden_dim = 0;  // 0 selects the single affine extractor

  bool two_layer() const { return hidden_dim > 0; }
  bool operator==(const ModelShape&) const = default;
};

struct ModelParams {
  std::vector<AffineLayer> extractor;  // 1 or 2 layers, tanh in between
  AffineLayer classifier;

  ModelShape shape() const {
    ModelShape s;
    s.input_dim = extractor.front().in_dim();
    s.feature_dim = extractor.back().out_dim();
    s.num_total_classes = classifier.out_dim();
    s.hidden_dim = extractor.size() > 1 ? extractor.front().out_dim() : 0;
    return s;
  }

  bool operator==(const ModelParams&) const = default;
};

// Same layout as ModelParams; used as an additive accumulator.
using Gradients = ModelParams;

// Named view of one contiguous parameter block.
struct ParamBlock {
  std::string name;
  double* data;
  Eigen::Index size;
};

inline std::vector<ParamBlock> Blocks(ModelParams& p) {
  std::vector<ParamBlock> out;
  for (std::size_t l = 0; l < p.extractor.size(); ++l) {
    auto& layer = p.extractor[l];
    const std::string prefix = "extractor." + std::to_string(l);
    out.push_back({prefix + ".weight", layer.weight.data(), layer.weight.size()});
    out.push_back({prefix + ".bias", layer.bias.data(), layer.bias.size()});
  }
  out.push_back({"classifier.weight", p.classifier.weight.data(),
                 p.classifier.weight.size()});
  out.push_back({"classifier.bias", p.classifier.bias.data(),
                 p.classifier.bias.size()});
  return out;
}

namespace detail {

inline AffineLayer InitLayer(int in, int out, std::mt19937_64& rng) {
  AffineLayer layer;
  layer.weight.resize(out, in);
  layer.bias = Vector::Zero(out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index k = 0; k < layer.weight.size(); ++k)
    layer.weight.data()[k] = dist(rng);
  return layer;
}

inline AffineLayer ZeroLayer(int in, int out) {
  return {Matrix::Zero(out, in), Vector::Zero(out)};
}

}  // namespace detail

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
inline ModelParams InitParams(const ModelShape& shape, std::mt19937_64& rng) {
  if (shape.input_dim < 1 || shape.feature_dim < 1 || shape.num_total_classes < 2)
    throw ShapeError("invalid model shape");
  ModelParams p;
  if (shape.two_layer()) {
    p.extractor.push_back(detail::InitLayer(shape.input_dim, shape.hidden_dim, rng));
    p.extractor.push_back(detail::InitLayer(shape.hidden_dim, shape.feature_dim, rng));
  } else {
    p.extractor.push_back(detail::InitLayer(shape.input_dim, shape.feature_dim, rng));
  }
  p.classifier = detail::InitLayer(shape.feature_dim, shape.num_total_classes, rng);
  return p;
}

inline ModelParams ZeroParams(const ModelShape& shape) {
  ModelParams p;
  if (shape.two_layer()) {
    p.extractor.push_back(detail::ZeroLayer(shape.input_dim, shape.hidden_dim));
    p.extractor.push_back(detail::ZeroLayer(shape.hidden_dim, shape.feature_dim));
  } else {
    p.extractor.push_back(detail::ZeroLayer(shape.input_dim, shape.feature_dim));
  }
  p.classifier = detail::ZeroLayer(shape.feature_dim, shape.num_total_classes);
  return p;
}

inline Gradients ZeroGradients(const ModelParams& like) {
  return ZeroParams(like.shape());
}

// Activations kept for backward. Rows are instances.
struct ForwardCache {
  Matrix input;
  Matrix hidden;  // tanh output; empty for the single-layer extractor
  Matrix features;
  Matrix logits;
  Matrix probs;
};

namespace detail {

inline Matrix ApplyAffine(const AffineLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim())
    throw ShapeError("affine input width " + std::to_string(x.cols()) +
                     " != " + std::to_string(layer.in_dim()));
  Matrix out = x * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  return out;
}

}  // namespace detail

// Row-wise softmax with max subtraction.
inline Matrix Softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      out(r, c) = std::exp(logits(r, c) - m);
      sum += out(r, c);
    }
    out.row(r) /= sum;
  }
  return out;
}

inline Matrix ExtractFeatures(const ModelParams& params, const Matrix& raw,
                              Matrix* hidden = nullptr) {
  if (params.extractor.size() == 1)
    return detail::ApplyAffine(params.extractor[0], raw);
  Matrix h = detail::ApplyAffine(params.extractor[0], raw).array().tanh().matrix();
  Matrix x = detail::ApplyAffine(params.extractor[1], h);
  if (hidden) *hidden = std::move(h);
  return x;
}

inline ForwardCache Forward(const ModelParams& params, Matrix raw) {
  ForwardCache cache;
  cache.input = std::move(raw);
  cache.features = ExtractFeatures(params, cache.input, &cache.hidden);
  cache.logits = detail::ApplyAffine(params.classifier, cache.features);
  cache.probs = Softmax(cache.logits);
  return cache;
}

inline Vector ForwardFeatures(const ModelParams& params,
                              std::span<const double> raw) {
  Matrix row = Eigen::Map<const RowVector>(raw.data(),
                                           static_cast<Eigen::Index>(raw.size()));
  return ExtractFeatures(params, row).row(0).transpose();
}

inline Vector Classify(const ModelParams& params, const Vector& features) {
  Matrix row = features.transpose();
  return Softmax(detail::ApplyAffine(params.classifier, row)).row(0).transpose();
}

// Accumulates the exact gradient of sum_r <dlogits_r, logits_r> into grads.
inline void Backward(const ModelParams& params, const ForwardCache& cache,
                     const Matrix& dlogits, Gradients& grads) {
  if (dlogits.rows() != cache.logits.rows() || dlogits.cols() != cache.logits.cols())
    throw ShapeError("dlogits shape does not match the forward pass");
  grads.classifier.weight.noalias() += dlogits.transpose() * cache.features;
  grads.classifier.bias += dlogits.colwise().sum().transpose();
  Matrix dfeat = dlogits * params.classifier.weight;
  if (params.extractor.size() == 1) {
    grads.extractor[0].weight.noalias() += dfeat.transpose() * cache.input;
    grads.extractor[0].bias += dfeat.colwise().sum().transpose();
    return;
  }
  grads.extractor[1].weight.noalias() += dfeat.transpose() * cache.hidden;
  grads.extractor[1].bias += dfeat.colwise().sum().transpose();
  Matrix dhidden = dfeat * params.extractor[1].weight;
  Matrix dpre =
      (dhidden.array() * (1.0 - cache.hidden.array().square())).matrix();
  grads.extractor[0].weight.noalias() += dpre.transpose() * cache.input;
  grads.extractor[0].bias += dpre.colwise().sum().transpose();
}

inline Gradients Backward(const ModelParams& params, const Matrix& raw,
                          const Matrix& dlogits) {
  Gradients grads = ZeroGradients(params);
  Backward(params, Forward(params, raw), dlogits, grads);
  return grads;
}

inline bool AllFinite(const ModelParams& p) {
  auto finite = [](const auto& m) { return m.allFinite(); };
  for (const auto& l : p.extractor)
    if (!finite(l.weight) || !finite(l.bias)) return false;
  return finite(p.classifier.weight) && finite(p.classifier.bias);
}

// Elementwise `out = f(out, other)` over all parameter blocks.
template <typename Fn>
void ZipParams(ModelParams& out, const ModelParams& other, Fn&& fn) {
  for (std::size_t l = 0; l < out.extractor.size(); ++l) {
    fn(out.extractor[l].weight, other.extractor[l].weight);
    fn(out.extractor[l].bias, other.extractor[l].bias);
  }
  fn(out.classifier.weight, other.classifier.weight);
  fn(out.classifier.bias, other.classifier.bias);
}

inline double GlobalNorm(const ModelParams& p) {
  double sq = 0.0;
  for (const auto& l : p.extractor) sq += l.weight.squaredNorm() + l.bias.squaredNorm();
  sq += p.classifier.weight.squaredNorm() + p.classifier.bias.squaredNorm();
  return std::sqrt(sq);
}

// Rescales grads so that their global L2 norm is at most max_norm. Returns the
// norm before clipping.
inline double ClipByGlobalNorm(Gradients& grads, double max_norm) {
  const double norm = GlobalNorm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    ZipParams(grads, grads, [&](auto& g, const auto&) { g *= scale; });
  }
  return norm;
}

// params <- params - lr * (grads + weight_decay * params)
inline ModelParams SgdStep(const ModelParams& params, const Gradients& grads,
                           double lr, double weight_decay) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(weight_decay >= 0.0))
    throw std::invalid_argument("weight decay must be >= 0");
  if (!(params.shape() == grads.shape()))
    throw ShapeError("gradient shape does not match parameters");
  if (!AllFinite(grads)) throw NumericError("non-finite gradient; step rejected");
  ModelParams out = params;
  ZipParams(out, grads, [&](auto& p, const auto& g) {
    p.array() -= lr * (g.array() + weight_decay * p.array());
  });
  return out;
}

}  // namespace cvmiml
