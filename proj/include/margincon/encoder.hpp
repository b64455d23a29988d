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

#pragma once

#include <cstdint>
#include <vector>

#include "margincon/matrix.hpp"

namespace margincon {

enum class Activation : std::uint8_t { kRelu = 0 };

struct EncoderLayer {
  Matrix weight;             // out x in
  std::vector<double> bias;  // out
};

/// Feed-forward encoder: hidden layers with max(0, x), a linear output
/// layer, then row-wise L2 normalization. Small by design so that full
/// finite-difference checks over every weight run in seconds.
struct EncoderParams {
  std::vector<EncoderLayer> layers;
  Activation activation = Activation::kRelu;

  std::size_t input_dim() const { return layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.back().weight.rows(); }
  std::vector<std::size_t> dims() const;
  std::size_t parameter_count() const;

  void validate() const;  // consecutive layer dims agree, nonempty
};

/// Glorot-uniform init, bias zero: weights ~ U(-a, a),
/// a = sqrt(6 / (fan_in + fan_out)). Deterministic per seed.
EncoderParams init_encoder(const std::vector<std::size_t>& dims,
                           std::uint64_t seed);

/// Everything encoder_backprop needs, including the pre-normalization
/// activations for the (I - z z^T)/|u| Jacobian. Tied to the exact params it
/// was produced with via a fingerprint.
struct EncodeCache {
  Matrix input;
  std::vector<Matrix> pre_act;   // per layer, before the nonlinearity
  std::vector<Matrix> post_act;  // per layer, after it (last layer: pre-norm u)
  Matrix embeddings;             // unit rows
  std::vector<double> prenorm;   // |u_i| per row
  std::uint64_t params_fingerprint = 0;
};

/// Maps features (B x d_in) to unit-norm embeddings (B x d). Throws
/// DataError on dimension mismatch, NumericError if some row's
/// pre-normalization output has norm below 1e-8.
Matrix encode(const EncoderParams& params, const Matrix& features,
              EncodeCache* cache = nullptr);

struct EncoderGradients {
  std::vector<Matrix> grad_weight;
  std::vector<std::vector<double>> grad_bias;
  Matrix grad_input;
};

/// Exact chain rule from d loss / d embeddings back to every weight, bias
/// and the input, through the normalization Jacobian and the nonlinearity.
/// Throws NumericError if the cache does not match params (stale cache).
EncoderGradients encoder_backprop(const EncoderParams& params,
                                  const EncodeCache& cache,
                                  const Matrix& grad_embeddings);

/// Fingerprint of all weights and biases (cache staleness detection).
std::uint64_t encoder_fingerprint(const EncoderParams& params);

}  // namespace margincon
