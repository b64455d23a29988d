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

#include "margincon/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "margincon/error.hpp"

namespace margincon {

namespace {

constexpr double kCosineEps = 1e-7;
constexpr double kPi = 3.14159265358979323846;

void check_unit_rows(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm2(m.row(i));
    if (std::abs(n - 1.0) > 1e-6) {
      throw DataError(std::string(what) + ": row " + std::to_string(i) +
                      " has norm " + std::to_string(n) + ", expected 1 +- 1e-6");
    }
  }
}

double logsumexp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

/// Batch-class bookkeeping for the attention score: the softmax runs over
/// the C classes present in the batch, not over the whole table.
struct AttentionContext {
  std::vector<std::int64_t> classes;      // sorted distinct batch labels
  std::vector<std::size_t> table_rows;    // table row per batch class
  std::vector<std::size_t> class_of_row;  // batch row -> class index
  Matrix sigma;                           // 2N x C, softmax of z_i . c_k
};

AttentionContext make_attention_context(const EmbeddingBatch& batch,
                                        const ClassVectorTable& table) {
  AttentionContext ctx;
  ctx.classes = distinct_speakers(batch.labels);
  const std::size_t c = ctx.classes.size();
  ctx.table_rows.reserve(c);
  for (std::int64_t id : ctx.classes) ctx.table_rows.push_back(table.row_of(id));
  if (table.vectors.cols() != batch.dim()) {
    throw DataError("class vectors have dim " +
                    std::to_string(table.vectors.cols()) +
                    " but embeddings have dim " + std::to_string(batch.dim()));
  }

  ctx.class_of_row.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto it = std::lower_bound(ctx.classes.begin(), ctx.classes.end(),
                                     batch.labels[i]);
    ctx.class_of_row[i] = static_cast<std::size_t>(it - ctx.classes.begin());
  }

  ctx.sigma = Matrix(batch.size(), c);
  std::vector<double> u(c);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c; ++k) {
      u[k] = dot(batch.data.row(i), table.vectors.row(ctx.table_rows[k]));
      mx = std::max(mx, u[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(u[k] - mx);
    for (std::size_t k = 0; k < c; ++k) {
      ctx.sigma.at(i, k) = std::exp(u[k] - mx) / z;
    }
  }
  return ctx;
}

/// Shared core of supcon / sup_margin_con / the CAA-weighted contrastive
/// term. `table == nullptr` means every attention weight is 1.
///
/// Per anchor i:
///   L_i = -1/|P(i)| sum_p [ phi(c_ip) a_ip / tau - lse_{a in A(i)}(c_ia a_ia / tau) ]
/// with phi = cos(.+m) through cos_plus_margin. Gradients flow through the
/// pairwise cosines (both sides of each pair) and, when attention is on,
/// through the class softmax into embeddings and class vectors.
LossReport contrastive_term(const EmbeddingBatch& batch, double m, double tau,
                            Denominator denom, const ClassVectorTable* table) {
  if (tau <= 0.0) {
    throw ConfigError("tau must be > 0, got " + std::to_string(tau));
  }
  check_unit_rows(batch.data, "embeddings");
  const std::size_t b = batch.size();
  const std::size_t d = batch.dim();

  Matrix sim(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      const double s = dot(batch.data.row(i), batch.data.row(j));
      sim.at(i, j) = s;
      sim.at(j, i) = s;
    }
  }

  std::optional<AttentionContext> att;
  if (table != nullptr) att = make_attention_context(batch, *table);
  const auto alpha = [&](std::size_t i, std::size_t j) {
    return att ? att->sigma.at(i, att->class_of_row[j]) : 1.0;
  };

  Matrix coef(b, b);  // dL/d sim(i,j), anchor-major; symmetrized later
  Matrix beta;        // dL/d alpha, aggregated per (anchor, class)
  if (att) beta = Matrix(b, att->classes.size());

  double value = 0.0;
  std::vector<std::size_t> den_idx;
  std::vector<double> den_exp;
  den_idx.reserve(b);
  den_exp.reserve(b);

  for (std::size_t i = 0; i < b; ++i) {
    std::size_t npos = 0;
    den_idx.clear();
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      const bool positive = batch.labels[j] == batch.labels[i];
      if (positive) ++npos;
      if (!positive || denom == Denominator::kAllOthers) den_idx.push_back(j);
    }
    if (npos == 0) {
      throw DataError("anchor row " + std::to_string(i) + " (speaker " +
                      std::to_string(batch.labels[i]) +
                      "): no positive samples P(i) in batch");
    }
    if (den_idx.empty()) {
      throw DataError("anchor row " + std::to_string(i) + " (speaker " +
                      std::to_string(batch.labels[i]) +
                      "): no negative samples A(i) in batch");
    }

    den_exp.clear();
    for (std::size_t a : den_idx) den_exp.push_back(sim.at(i, a) * alpha(i, a) / tau);
    const double lse = logsumexp(den_exp);

    for (std::size_t k = 0; k < den_idx.size(); ++k) {
      const std::size_t a = den_idx[k];
      const double q = std::exp(den_exp[k] - lse);
      coef.at(i, a) += q * alpha(i, a) / tau;
      if (att) beta.at(i, att->class_of_row[a]) += q * sim.at(i, a) / tau;
    }

    const double inv_p = 1.0 / static_cast<double>(npos);
    for (std::size_t p = 0; p < b; ++p) {
      if (p == i || batch.labels[p] != batch.labels[i]) continue;
      const double raw = sim.at(i, p);
      const double c = clamp_cosine(raw);
      const double phi = cos_plus_margin(c, m);
      const double dphi = (c == raw) ? cos_plus_margin_grad(c, m) : 0.0;
      const double a_ip = alpha(i, p);
      value += inv_p * (-phi * a_ip / tau + lse);
      coef.at(i, p) += -inv_p * dphi * a_ip / tau;
      if (att) beta.at(i, att->class_of_row[p]) += -inv_p * phi / tau;
    }
  }

  LossReport report;
  report.value = value;
  report.grad_embeddings = Matrix(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    auto gi = report.grad_embeddings.row(i);
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      const double w = coef.at(i, j) + coef.at(j, i);
      if (w != 0.0) axpy(w, batch.data.row(j), gi);
    }
  }

  if (att) {
    const std::size_t c = att->classes.size();
    Matrix grad_c(table->vectors.rows(), table->vectors.cols());
    for (std::size_t i = 0; i < b; ++i) {
      double inner = 0.0;
      for (std::size_t k = 0; k < c; ++k) inner += beta.at(i, k) * att->sigma.at(i, k);
      auto gi = report.grad_embeddings.row(i);
      for (std::size_t k = 0; k < c; ++k) {
        const double gamma = att->sigma.at(i, k) * (beta.at(i, k) - inner);
        if (gamma == 0.0) continue;
        axpy(gamma, table->vectors.row(att->table_rows[k]), gi);
        axpy(gamma, batch.data.row(i), grad_c.row(att->table_rows[k]));
      }
    }
    report.grad_class_vectors = std::move(grad_c);
  }

  for (std::size_t i = 0; i < b; ++i) {
    project_tangent(report.grad_embeddings.row(i), batch.data.row(i));
  }

  if (!std::isfinite(report.value)) {
    throw NumericError("contrastive loss is not finite: " +
                       std::to_string(report.value));
  }
  return report;
}

}  // namespace

void MarginConfig::validate() const {
  if (!(m >= 0.0 && m < kPi / 2)) {
    throw ConfigError("margin m must lie in [0, pi/2), got " + std::to_string(m));
  }
  if (!(tau > 0.0)) {
    throw ConfigError("temperature tau must be > 0, got " + std::to_string(tau));
  }
  if (!(s > 0.0)) {
    throw ConfigError("scale s must be > 0, got " + std::to_string(s));
  }
}

std::size_t ClassVectorTable::row_of(std::int64_t speaker) const {
  for (std::size_t k = 0; k < speaker_ids.size(); ++k) {
    if (speaker_ids[k] == speaker) return k;
  }
  throw DataError("speaker " + std::to_string(speaker) +
                  " has no class vector in the table");
}

void ClassifierWeights::validate() const {
  check_unit_rows(weights, "classifier weights");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("cosine_similarity: dims " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na < 1e-12) throw NumericError("cosine_similarity: left input has zero norm");
  if (nb < 1e-12) throw NumericError("cosine_similarity: right input has zero norm");
  return dot(a, b) / (na * nb);
}

double clamp_cosine(double c) {
  return std::clamp(c, -1.0 + kCosineEps, 1.0 - kCosineEps);
}

double cos_plus_margin(double cos_theta, double m) {
  const double cm = std::cos(m);
  const double sm = std::sin(m);
  if (m > 0.0 && cos_theta <= -cm) {
    // theta + m >= pi: cos(theta + m) turns increasing; keep it monotone.
    return cos_theta - m * sm;
  }
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  return cos_theta * cm - sin_theta * sm;
}

double cos_plus_margin_grad(double cos_theta, double m) {
  const double cm = std::cos(m);
  const double sm = std::sin(m);
  if (m > 0.0 && cos_theta <= -cm) return 1.0;
  const double sin_theta =
      std::sqrt(std::max(1.0 - cos_theta * cos_theta, 1e-14));
  return cm + cos_theta * sm / sin_theta;
}

LossReport supcon_loss(const EmbeddingBatch& batch, double tau,
                       Denominator denom) {
  return contrastive_term(batch, 0.0, tau, denom, nullptr);
}

LossReport sup_margin_con_loss(const EmbeddingBatch& batch,
                               const MarginConfig& cfg, Denominator denom) {
  cfg.validate();
  return contrastive_term(batch, cfg.m, cfg.tau, denom, nullptr);
}

Matrix caa_scores(const EmbeddingBatch& batch, const ClassVectorTable& table) {
  const AttentionContext ctx = make_attention_context(batch, table);
  const std::size_t b = batch.size();
  Matrix alpha(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      alpha.at(i, j) = ctx.sigma.at(i, ctx.class_of_row[j]);
    }
  }
  return alpha;
}

LossReport margin_softmax_loss(const EmbeddingBatch& batch,
                               const ClassifierWeights& weights,
                               const MarginConfig& cfg, MarginKind kind) {
  cfg.validate();
  weights.validate();
  check_unit_rows(batch.data, "embeddings");
  const std::size_t b = batch.size();
  const std::size_t d = batch.dim();
  const std::size_t n_cls = weights.num_classes();
  if (weights.weights.cols() != d) {
    throw DataError("classifier weights have dim " +
                    std::to_string(weights.weights.cols()) +
                    " but embeddings have dim " + std::to_string(d));
  }
  for (std::size_t i = 0; i < b; ++i) {
    if (batch.labels[i] < 0 ||
        batch.labels[i] >= static_cast<std::int64_t>(n_cls)) {
      throw DataError("row " + std::to_string(i) + ": label " +
                      std::to_string(batch.labels[i]) +
                      " outside classifier range [0, " +
                      std::to_string(n_cls) + ")");
    }
  }

  LossReport report;
  report.grad_embeddings = Matrix(b, d);
  Matrix grad_w(n_cls, d);

  std::vector<double> logits(n_cls);
  double value = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const auto zi = batch.data.row(i);
    const auto y = static_cast<std::size_t>(batch.labels[i]);

    double dphi = 1.0;
    for (std::size_t j = 0; j < n_cls; ++j) {
      const double t = dot(zi, weights.weights.row(j));
      if (j == y) {
        switch (kind) {
          case MarginKind::kNone:
            logits[j] = cfg.s * t;
            break;
          case MarginKind::kAdditiveCosine:
            logits[j] = cfg.s * (t - cfg.m);
            break;
          case MarginKind::kAdditiveAngle: {
            const double c = clamp_cosine(t);
            logits[j] = cfg.s * cos_plus_margin(c, cfg.m);
            dphi = (c == t) ? cos_plus_margin_grad(c, cfg.m) : 0.0;
            break;
          }
        }
      } else {
        logits[j] = cfg.s * t;
      }
    }

    const double lse = logsumexp(logits);
    value += lse - logits[y];

    auto gi = report.grad_embeddings.row(i);
    for (std::size_t j = 0; j < n_cls; ++j) {
      const double p = std::exp(logits[j] - lse);
      double coeff = cfg.s * (p - (j == y ? 1.0 : 0.0));
      if (j == y) coeff *= dphi;
      coeff /= static_cast<double>(b);
      if (coeff == 0.0) continue;
      axpy(coeff, weights.weights.row(j), gi);
      axpy(coeff, zi, grad_w.row(j));
    }
  }
  report.value = value / static_cast<double>(b);

  for (std::size_t i = 0; i < b; ++i) {
    project_tangent(report.grad_embeddings.row(i), batch.data.row(i));
  }
  for (std::size_t j = 0; j < n_cls; ++j) {
    project_tangent(grad_w.row(j), weights.weights.row(j));
  }
  report.grad_classifier_weights = std::move(grad_w);

  if (!std::isfinite(report.value)) {
    throw NumericError("margin softmax loss is not finite: " +
                       std::to_string(report.value));
  }
  return report;
}

LossReport aam_softmax_loss(const EmbeddingBatch& batch,
                            const ClassifierWeights& weights,
                            const MarginConfig& cfg) {
  return margin_softmax_loss(batch, weights, cfg, MarginKind::kAdditiveAngle);
}

CaaMarginConTerms caa_margin_con_terms(const EmbeddingBatch& batch,
                                       const ClassifierWeights& weights,
                                       const ClassVectorTable& table,
                                       const MarginConfig& cfg,
                                       const CaaOptions& opts) {
  CaaMarginConTerms terms;
  terms.classification =
      margin_softmax_loss(batch, weights, cfg, MarginKind::kAdditiveAngle);
  terms.contrastive = contrastive_term(
      batch, opts.contrastive_margin ? cfg.m : 0.0, cfg.tau, opts.denominator,
      opts.use_caa ? &table : nullptr);
  return terms;
}

LossReport caa_margin_con_loss(const EmbeddingBatch& batch,
                               const ClassifierWeights& weights,
                               const ClassVectorTable& table,
                               const MarginConfig& cfg, double lambda1,
                               double lambda2, const CaaOptions& opts) {
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ConfigError("lambda1/lambda2 must be >= 0, got " +
                      std::to_string(lambda1) + ", " + std::to_string(lambda2));
  }
  // Structural check up front so a broken table is reported even when the
  // contrastive term is switched off.
  if (opts.use_caa) {
    for (std::int64_t id : distinct_speakers(batch.labels)) table.row_of(id);
  }

  LossReport out;
  out.grad_embeddings = Matrix(batch.size(), batch.dim());
  out.grad_classifier_weights =
      Matrix(weights.num_classes(), weights.weights.cols());
  out.grad_class_vectors = Matrix(table.vectors.rows(), table.vectors.cols());

  const auto accumulate = [](Matrix& dst, const Matrix& src, double w) {
    for (std::size_t k = 0; k < dst.data().size(); ++k) {
      dst.data()[k] += w * src.data()[k];
    }
  };

  if (lambda1 != 0.0) {
    const LossReport t1 =
        margin_softmax_loss(batch, weights, cfg, MarginKind::kAdditiveAngle);
    out.value += lambda1 * t1.value;
    accumulate(out.grad_embeddings, t1.grad_embeddings, lambda1);
    accumulate(*out.grad_classifier_weights, *t1.grad_classifier_weights,
               lambda1);
  }
  if (lambda2 != 0.0) {
    const LossReport t2 = contrastive_term(
        batch, opts.contrastive_margin ? cfg.m : 0.0, cfg.tau,
        opts.denominator, opts.use_caa ? &table : nullptr);
    out.value += lambda2 * t2.value;
    accumulate(out.grad_embeddings, t2.grad_embeddings, lambda2);
    if (t2.grad_class_vectors) {
      accumulate(*out.grad_class_vectors, *t2.grad_class_vectors, lambda2);
    }
  }
  return out;
}

}  // namespace margincon
