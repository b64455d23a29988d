// Copyright 2026 The margincon Authors
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

#include "margincon/encoder.hpp"

#include <cmath>
#include <string>

#include "margincon/error.hpp"
#include "margincon/hash.hpp"
#include "margincon/rng.hpp"

namespace margincon {

namespace {
constexpr double kNormFloor = 1e-8;
}

std::vector<std::size_t> EncoderParams::dims() const {
  std::vector<std::size_t> d;
  d.push_back(input_dim());
  for (const auto& layer : layers) d.push_back(layer.weight.rows());
  return d;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += layer.weight.rows() * layer.weight.cols() + layer.bias.size();
  }
  return n;
}

void EncoderParams::validate() const {
  if (layers.empty()) throw ConfigError("encoder: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ConfigError("encoder: layer " + std::to_string(l) + " bias size " +
                        std::to_string(layer.bias.size()) +
                        " != output dim " + std::to_string(layer.weight.rows()));
    }
    if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows()) {
      throw ConfigError("encoder: layer " + std::to_string(l) + " input dim " +
                        std::to_string(layer.weight.cols()) +
                        " != previous output dim " +
                        std::to_string(layers[l - 1].weight.rows()));
    }
  }
}

EncoderParams init_encoder(const std::vector<std::size_t>& dims,
                           std::uint64_t seed) {
  if (dims.size() < 2) {
    throw ConfigError("encoder: need at least input and output dims");
  }
  Rng rng(seed);
  EncoderParams params;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    EncoderLayer layer;
    const std::size_t fan_in = dims[l];
    const std::size_t fan_out = dims[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    layer.weight = Matrix(fan_out, fan_in);
    for (double& w : layer.weight.data()) w = rng.uniform(-a, a);
    layer.bias.assign(fan_out, 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::uint64_t encoder_fingerprint(const EncoderParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& layer : params.layers) {
    h = fnv1a64(layer.weight.data(), h);
    h = fnv1a64(layer.bias, h);
  }
  return h;
}

Matrix encode(const EncoderParams& params, const Matrix& features,
              EncodeCache* cache) {
  params.validate();
  if (features.cols() != params.input_dim()) {
    throw DataError("encode: features have dim " +
                    std::to_string(features.cols()) + " but encoder expects " +
                    std::to_string(params.input_dim()));
  }
  const std::size_t batch = features.rows();
  const std::size_t n_layers = params.layers.size();

  if (cache) {
    cache->input = features;
    cache->pre_act.assign(n_layers, Matrix());
    cache->post_act.assign(n_layers, Matrix());
    cache->prenorm.assign(batch, 0.0);
    cache->params_fingerprint = encoder_fingerprint(params);
  }

  Matrix h = features;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = params.layers[l];
    const std::size_t out = layer.weight.rows();
    Matrix a(batch, out);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < out; ++o) {
        a.at(b, o) = layer.bias[o] + dot(h.row(b), layer.weight.row(o));
      }
    }
    if (cache) cache->pre_act[l] = a;
    if (l + 1 < n_layers) {
      for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
    }
    if (cache) cache->post_act[l] = a;
    h = std::move(a);
  }

  Matrix z = h;  // last layer output u, normalized in place
  for (std::size_t b = 0; b < batch; ++b) {
    const double n = norm2(z.row(b));
    if (n < kNormFloor) {
      throw NumericError("encode: row " + std::to_string(b) +
                         " has pre-normalization norm " + std::to_string(n) +
                         " below floor 1e-8");
    }
    scale(z.row(b), 1.0 / n);
    if (cache) cache->prenorm[b] = n;
  }
  if (cache) cache->embeddings = z;
  return z;
}

EncoderGradients encoder_backprop(const EncoderParams& params,
                                  const EncodeCache& cache,
                                  const Matrix& grad_embeddings) {
  params.validate();
  if (cache.params_fingerprint != encoder_fingerprint(params) ||
      cache.pre_act.size() != params.layers.size()) {
    throw NumericError(
        "encoder_backprop: stale cache (params changed since encode)");
  }
  const std::size_t batch = cache.input.rows();
  const std::size_t n_layers = params.layers.size();
  if (!grad_embeddings.same_shape(cache.embeddings)) {
    throw DataError("encoder_backprop: upstream gradient shape mismatch");
  }

  EncoderGradients grads;
  grads.grad_weight.resize(n_layers);
  grads.grad_bias.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    grads.grad_weight[l] = Matrix(params.layers[l].weight.rows(),
                                  params.layers[l].weight.cols());
    grads.grad_bias[l].assign(params.layers[l].bias.size(), 0.0);
  }

  // Through z = u / |u|: du = (g - (g.z) z) / |u|.
  Matrix delta(batch, cache.embeddings.cols());
  for (std::size_t b = 0; b < batch; ++b) {
    const auto g = grad_embeddings.row(b);
    const auto z = cache.embeddings.row(b);
    const double radial = dot(g, z);
    auto du = delta.row(b);
    for (std::size_t k = 0; k < du.size(); ++k) {
      du[k] = (g[k] - radial * z[k]) / cache.prenorm[b];
    }
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    const Matrix& below = l == 0 ? cache.input : cache.post_act[l - 1];
    const std::size_t out = layer.weight.rows();
    const std::size_t in = layer.weight.cols();

    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta.at(b, o);
        if (d == 0.0) continue;
        grads.grad_bias[l][o] += d;
        axpy(d, below.row(b), grads.grad_weight[l].row(o));
      }
    }

    Matrix next(batch, in);
    for (std::size_t b = 0; b < batch; ++b) {
      auto dst = next.row(b);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta.at(b, o);
        if (d != 0.0) axpy(d, layer.weight.row(o), dst);
      }
    }
    if (l > 0) {
      // relu': pass where the pre-activation was positive
      const Matrix& pre = cache.pre_act[l - 1];
      for (std::size_t k = 0; k < next.data().size(); ++k) {
        if (pre.data()[k] <= 0.0) next.data()[k] = 0.0;
      }
    }
    delta = std::move(next);
  }
  grads.grad_input = std::move(delta);
  return grads;
}

}  // namespace margincon
