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
#include <optional>
#include <span>
#include <vector>

#include "margincon/batch.hpp"
#include "margincon/matrix.hpp"

namespace margincon {

/// Hyperparameters shared by the margin losses.
struct MarginConfig {
  double m = 0.2;     // additive angular margin, radians, in [0, pi/2)
  double tau = 0.07;  // contrastive temperature, > 0
  double s = 30.0;    // classification logit scale, > 0

  void validate() const;
};

/// Which samples form the contrastive denominator A(i). kNegativesOnly is
/// the default (different-speaker rows only); kAllOthers additionally keeps
/// the positives in the denominator, the usual SupCon convention.
enum class Denominator { kNegativesOnly, kAllOthers };

/// Trainable per-speaker vectors c_k feeding the class-aware attention
/// score. Rows are unconstrained (the attention uses raw dot products).
struct ClassVectorTable {
  Matrix vectors;                         // C x d
  std::vector<std::int64_t> speaker_ids;  // row k represents speaker_ids[k]

  /// Row index for a speaker id; throws DataError if absent.
  std::size_t row_of(std::int64_t speaker) const;
};

/// Unit-norm per-speaker weight rows w_k of the margin-softmax classifier.
/// Batch labels index rows directly, so they must lie in [0, rows).
struct ClassifierWeights {
  Matrix weights;  // S x d

  std::size_t num_classes() const { return weights.rows(); }
  void validate() const;  // every row unit-norm within 1e-6
};

/// Scalar loss plus analytic gradients. Gradients of unit-norm parameters
/// (embeddings, classifier weights) are tangent to the unit sphere at each
/// row; class-vector gradients are unconstrained. Absent gradients mean the
/// loss does not touch that parameter group.
struct LossReport {
  double value = 0.0;
  Matrix grad_embeddings;                          // 2N x d
  std::optional<Matrix> grad_class_vectors;        // C x d
  std::optional<Matrix> grad_classifier_weights;   // S x d
};

/// Cosine of the angle between a and b: a.b / (|a||b|). Returns the raw
/// value; callers clamp via clamp_cosine before any arccos/arcsin. Throws
/// NumericError naming the zero-norm input if one has norm < 1e-12.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Clamps a cosine into [-1 + 1e-7, 1 - 1e-7] so sin(theta) derived from it
/// stays away from 0 at collinear pairs.
double clamp_cosine(double c);

/// cos(theta + m) as a function of cos(theta):
///   cos(theta)cos(m) - sqrt(1 - cos^2(theta)) sin(m),
/// with the monotonic fallback cos(theta) - m sin(m) once theta + m >= pi
/// (where the exact expression stops being decreasing in theta).
double cos_plus_margin(double cos_theta, double m);

/// d cos_plus_margin / d cos_theta on the matching branch.
double cos_plus_margin_grad(double cos_theta, double m);

/// Supervised contrastive loss over all 2N anchors:
///   sum_i -1/|P(i)| sum_{p in P(i)} log [ exp(cos_ip / tau)
///                                         / sum_{a in A(i)} exp(cos_ia / tau) ].
/// Throws DataError if some anchor has empty P(i) or A(i), naming the
/// speaker id.
LossReport supcon_loss(const EmbeddingBatch& batch, double tau,
                       Denominator denom = Denominator::kNegativesOnly);

/// SupMarginCon: as supcon_loss but every numerator angle is shifted by the
/// margin, cos(theta_ip + m); denominator cosines stay unshifted.
LossReport sup_margin_con_loss(const EmbeddingBatch& batch,
                               const MarginConfig& cfg,
                               Denominator denom = Denominator::kNegativesOnly);

/// Class-aware attention scores, one row per anchor:
///   alpha[i][j] = exp(z_i . c_{y_j}) / sum_{k in batch classes} exp(z_i . c_k).
/// The softmax normalizes over the classes present in the batch only, even
/// when the table holds more speakers. Computed with max-subtraction.
Matrix caa_scores(const EmbeddingBatch& batch, const ClassVectorTable& table);

/// How the margin enters the classification logit of the true class.
enum class MarginKind {
  kNone,            // plain cosine logits (cross-entropy baseline)
  kAdditiveCosine,  // cos(theta) - m
  kAdditiveAngle,   // cos(theta + m)
};

/// Margin softmax classification loss, mean over the 2N anchors:
///   -log [ exp(s phi(cos theta_{y_i}))
///          / (exp(s phi(cos theta_{y_i})) + sum_{j != y_i} exp(s cos theta_j)) ].
/// Gradients cover embeddings and classifier weights.
LossReport margin_softmax_loss(const EmbeddingBatch& batch,
                               const ClassifierWeights& weights,
                               const MarginConfig& cfg, MarginKind kind);

/// AAMSoftmax: margin_softmax_loss with the additive angular margin.
LossReport aam_softmax_loss(const EmbeddingBatch& batch,
                            const ClassifierWeights& weights,
                            const MarginConfig& cfg);

/// Ablation switches for the combined loss (Table-4 style wiring).
struct CaaOptions {
  bool use_caa = true;             // false: force every alpha to 1
  bool contrastive_margin = true;  // false: m = 0 in the contrastive term only
  Denominator denominator = Denominator::kNegativesOnly;
};

/// The two unweighted terms of the combined loss, exposed separately so the
/// trainer can feed per-task gradients to the multi-objective balancer.
struct CaaMarginConTerms {
  LossReport classification;  // AAMSoftmax term
  LossReport contrastive;     // CAA-weighted margin contrastive term
};

CaaMarginConTerms caa_margin_con_terms(const EmbeddingBatch& batch,
                                       const ClassifierWeights& weights,
                                       const ClassVectorTable& table,
                                       const MarginConfig& cfg,
                                       const CaaOptions& opts = {});

/// lambda1 * AAMSoftmax + lambda2 * CAA-weighted margin contrastive term.
/// The contrastive exponents are cos(theta_ip + m) alpha_ip / tau in the
/// numerator and cos(theta_ia) alpha_ia / tau in the denominator. The report
/// carries gradients for embeddings, classifier weights and class vectors.
/// When a lambda is exactly 0 the corresponding term is not evaluated, so
/// e.g. lambda2 = 0 reproduces lambda1 * aam_softmax_loss bit for bit.
LossReport caa_margin_con_loss(const EmbeddingBatch& batch,
                               const ClassifierWeights& weights,
                               const ClassVectorTable& table,
                               const MarginConfig& cfg, double lambda1,
                               double lambda2, const CaaOptions& opts = {});

}  // namespace margincon
