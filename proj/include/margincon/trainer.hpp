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
#include <span>
#include <string>
#include <vector>

#include "margincon/encoder.hpp"
#include "margincon/losses.hpp"
#include "margincon/synth.hpp"

namespace margincon {

enum class LossKind {
  kCrossEntropy,
  kAmSoftmax,
  kAamSoftmax,
  kSupCon,
  kSupMarginCon,
  kCaaMarginCon,
};

enum class OptimizerKind { kSgd, kAdam };
enum class LambdaMode { kFixed, kMgda };

struct TrainConfig {
  LossKind loss = LossKind::kCaaMarginCon;
  MarginConfig margin;
  Denominator denominator = Denominator::kNegativesOnly;
  bool use_caa = true;
  bool contrastive_margin = true;

  std::size_t batch_size = 32;  // embeddings per step incl. views; even, >= 4
  std::size_t epochs = 10;

  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 1e-3;
  double momentum = 0.9;  // sgd
  double beta1 = 0.9;     // adam
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  LambdaMode lambda_mode = LambdaMode::kMgda;
  double lambda1 = 0.5;  // fixed mode
  double lambda2 = 0.5;

  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden_dims = {64, 64};
  std::size_t embed_dim = 16;
  double aug_noise_sigma = 0.1;
  double aug_dropout = 0.1;

  bool record_steps = false;  // keep per-step metrics in the fit history

  void validate() const;
};

/// All trainable state: encoder, the unit-norm classifier weight rows and
/// the unconstrained class vectors (one row per global training speaker in
/// both tables; the attention softmax itself only sees the batch speakers).
struct ModelParams {
  EncoderParams encoder;
  ClassifierWeights classifier;
  ClassVectorTable class_vectors;
};

ModelParams init_model(std::size_t input_dim, std::size_t n_speakers,
                       const TrainConfig& cfg);

/// Task-weighting state from the min-norm balancer.
struct MgdaState {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double g1_norm = 0.0;
  double g2_norm = 0.0;
  double combined_norm = 0.0;
};

/// Closed-form two-task min-norm weights:
///   lambda1 = clip((g2 - g1) . g2 / |g1 - g2|^2, [0, 1]),  lambda2 = 1 - lambda1,
/// the exact minimizer of |l g1 + (1-l) g2| over l in [0,1]. Identical
/// nonzero gradients return (0.5, 0.5); both zero throws NumericError
/// ("vanished gradients"). The combined norm never exceeds min(|g1|, |g2|).
MgdaState mgda_two_task(std::span<const double> g1, std::span<const double> g2);

/// One labeled training batch in the canonical layout: rows [0, N) original
/// feature vectors, rows [N, 2N) their augmented views, labels per original.
struct TrainBatch {
  Matrix features;  // 2N x d_in
  std::vector<std::int64_t> labels;  // length N
};

struct StepMetrics {
  double loss = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double g1_norm = 0.0;        // classification-task gradient norm
  double g2_norm = 0.0;        // contrastive-task gradient norm
  double combined_norm = 0.0;  // applied update direction norm
};

/// Flat optimizer state over the documented parameter order (encoder layers
/// in sequence — weight row-major then bias — then classifier weights, then
/// class vectors).
struct OptimizerState {
  std::vector<double> m;  // sgd momentum / adam first moment
  std::vector<double> v;  // adam second moment
  std::uint64_t t = 0;
};

/// One full optimization step: encode both views, evaluate the selected
/// loss, backpropagate, balance tasks when configured, apply the update and
/// re-normalize the classifier rows. Throws NumericError with a diagnostic
/// dump if the loss is not finite.
StepMetrics train_step(ModelParams& params, OptimizerState& opt,
                       const TrainBatch& batch, const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_lambda1 = 0.0;
  double mean_lambda2 = 0.0;
  double mean_grad_norm = 0.0;
};

struct FitResult {
  ModelParams params;
  std::vector<EpochStats> history;
  std::vector<StepMetrics> steps;  // populated when cfg.record_steps
};

/// Seeded epoch loop over the dataset with on-the-fly augmentation and
/// deterministic shuffling/batching. epochs = 0 returns the initialized
/// model and an empty history.
FitResult fit(const Dataset& dataset, const TrainConfig& cfg);

const char* loss_kind_name(LossKind kind);

}  // namespace margincon
