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

#include "margincon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "margincon/error.hpp"
#include "margincon/rng.hpp"

namespace margincon {

namespace {

std::size_t flat_size(const ModelParams& p) {
  return p.encoder.parameter_count() + p.classifier.weights.data().size() +
         p.class_vectors.vectors.data().size();
}

void flatten_params(const ModelParams& p, std::vector<double>& out) {
  out.clear();
  out.reserve(flat_size(p));
  for (const auto& layer : p.encoder.layers) {
    out.insert(out.end(), layer.weight.data().begin(), layer.weight.data().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  const auto& w = p.classifier.weights.data();
  out.insert(out.end(), w.begin(), w.end());
  const auto& c = p.class_vectors.vectors.data();
  out.insert(out.end(), c.begin(), c.end());
}

void scatter_params(ModelParams& p, const std::vector<double>& flat) {
  std::size_t pos = 0;
  for (auto& layer : p.encoder.layers) {
    auto& wd = layer.weight.data();
    std::copy_n(flat.begin() + pos, wd.size(), wd.begin());
    pos += wd.size();
    std::copy_n(flat.begin() + pos, layer.bias.size(), layer.bias.begin());
    pos += layer.bias.size();
  }
  auto& wd = p.classifier.weights.data();
  std::copy_n(flat.begin() + pos, wd.size(), wd.begin());
  pos += wd.size();
  auto& cd = p.class_vectors.vectors.data();
  std::copy_n(flat.begin() + pos, cd.size(), cd.begin());
}

/// Flattens one task's gradient over the full parameter set in the
/// documented order; absent groups contribute zeros.
std::vector<double> flatten_task_grad(const ModelParams& p,
                                      const EncoderGradients& enc,
                                      const Matrix* grad_w,
                                      const Matrix* grad_c) {
  std::vector<double> out;
  out.reserve(flat_size(p));
  for (std::size_t l = 0; l < enc.grad_weight.size(); ++l) {
    const auto& wd = enc.grad_weight[l].data();
    out.insert(out.end(), wd.begin(), wd.end());
    out.insert(out.end(), enc.grad_bias[l].begin(), enc.grad_bias[l].end());
  }
  if (grad_w != nullptr) {
    out.insert(out.end(), grad_w->data().begin(), grad_w->data().end());
  } else {
    out.insert(out.end(), p.classifier.weights.data().size(), 0.0);
  }
  if (grad_c != nullptr) {
    out.insert(out.end(), grad_c->data().begin(), grad_c->data().end());
  } else {
    out.insert(out.end(), p.class_vectors.vectors.data().size(), 0.0);
  }
  return out;
}

double vec_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

EmbeddingBatch assemble_embedding_batch(const Matrix& z,
                                        const std::vector<std::int64_t>& labels) {
  const std::size_t n = labels.size();
  EmbeddingBatch eb;
  eb.data = z;
  eb.labels.resize(2 * n);
  eb.view.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    eb.labels[i] = labels[i];
    eb.labels[i + n] = labels[i];
    eb.view[i] = View::kOriginal;
    eb.view[i + n] = View::kAugmented;
  }
  return eb;
}

void renormalize_classifier(ModelParams& params) {
  for (std::size_t r = 0; r < params.classifier.weights.rows(); ++r) {
    auto row = params.classifier.weights.row(r);
    const double n = norm2(row);
    // Skip the division when the row is already unit to the last bit, so a
    // zero-learning-rate step leaves parameters bit-identical.
    if (std::abs(n - 1.0) > 1e-12) {
      if (n < 1e-12) {
        throw NumericError("classifier row " + std::to_string(r) +
                           " collapsed to zero norm");
      }
      scale(row, 1.0 / n);
    }
  }
}

void apply_update(ModelParams& params, OptimizerState& opt,
                  const std::vector<double>& grad, const TrainConfig& cfg) {
  const std::size_t n = grad.size();
  if (opt.m.size() != n) {
    opt.m.assign(n, 0.0);
    opt.v.assign(n, 0.0);
    opt.t = 0;
  }
  std::vector<double> flat;
  flatten_params(params, flat);

  if (cfg.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < n; ++i) {
      opt.m[i] = cfg.momentum * opt.m[i] + grad[i];
      flat[i] -= cfg.lr * opt.m[i];
    }
  } else {
    opt.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
    for (std::size_t i = 0; i < n; ++i) {
      opt.m[i] = cfg.beta1 * opt.m[i] + (1.0 - cfg.beta1) * grad[i];
      opt.v[i] = cfg.beta2 * opt.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      const double mhat = opt.m[i] / bc1;
      const double vhat = opt.v[i] / bc2;
      flat[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
  scatter_params(params, flat);
  renormalize_classifier(params);
}

}  // namespace

void TrainConfig::validate() const {
  margin.validate();
  if (batch_size < 4 || batch_size % 2 != 0) {
    throw ConfigError("batch_size must be even and >= 4, got " +
                      std::to_string(batch_size));
  }
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0,1)");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (lambda_mode == LambdaMode::kFixed && (lambda1 < 0.0 || lambda2 < 0.0)) {
    throw ConfigError("fixed lambda1/lambda2 must be >= 0");
  }
  if (embed_dim < 2) throw ConfigError("embed_dim must be >= 2");
  if (aug_noise_sigma < 0.0) throw ConfigError("aug_noise_sigma must be >= 0");
  if (aug_dropout < 0.0 || aug_dropout >= 1.0) {
    throw ConfigError("aug_dropout must lie in [0,1)");
  }
}

ModelParams init_model(std::size_t input_dim, std::size_t n_speakers,
                       const TrainConfig& cfg) {
  cfg.validate();
  ModelParams p;
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embed_dim);
  p.encoder = init_encoder(dims, derive_seed(cfg.seed, 11));

  Rng rng(derive_seed(cfg.seed, 12));
  p.classifier.weights = Matrix(n_speakers, cfg.embed_dim);
  const double a =
      std::sqrt(6.0 / static_cast<double>(n_speakers + cfg.embed_dim));
  for (std::size_t r = 0; r < n_speakers; ++r) {
    auto row = p.classifier.weights.row(r);
    for (double& w : row) w = rng.uniform(-a, a);
    normalize_row(row, "classifier row " + std::to_string(r));
  }

  // Class vectors start at zero: attention is uniform until learned.
  p.class_vectors.vectors = Matrix(n_speakers, cfg.embed_dim);
  p.class_vectors.speaker_ids.resize(n_speakers);
  std::iota(p.class_vectors.speaker_ids.begin(),
            p.class_vectors.speaker_ids.end(), 0);
  return p;
}

MgdaState mgda_two_task(std::span<const double> g1, std::span<const double> g2) {
  if (g1.size() != g2.size()) {
    throw DataError("mgda_two_task: gradients have sizes " +
                    std::to_string(g1.size()) + " vs " +
                    std::to_string(g2.size()) +
                    "; they must cover the identical parameter set");
  }
  double n1 = 0.0;
  double n2 = 0.0;
  double diff2 = 0.0;
  double dg2 = 0.0;
  bool equal = true;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    const double a = g1[i];
    const double b = g2[i];
    n1 += a * a;
    n2 += b * b;
    const double d = b - a;
    diff2 += d * d;
    dg2 += d * b;
    if (a != b) equal = false;
  }
  if (n1 == 0.0 && n2 == 0.0) {
    throw NumericError("vanished gradients: both task gradients are zero");
  }

  MgdaState st;
  st.lambda1 = equal ? 0.5 : std::clamp(dg2 / diff2, 0.0, 1.0);
  st.lambda2 = 1.0 - st.lambda1;
  st.g1_norm = std::sqrt(n1);
  st.g2_norm = std::sqrt(n2);
  double comb = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    const double c = st.lambda1 * g1[i] + st.lambda2 * g2[i];
    comb += c * c;
  }
  st.combined_norm = std::sqrt(comb);
  return st;
}

StepMetrics train_step(ModelParams& params, OptimizerState& opt,
                       const TrainBatch& batch, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = batch.labels.size();
  if (batch.features.rows() != 2 * n) {
    throw DataError("train_step: " + std::to_string(batch.features.rows()) +
                    " feature rows for " + std::to_string(n) +
                    " labels; expected 2N rows (originals then views)");
  }

  EncodeCache cache;
  const Matrix z = encode(params.encoder, batch.features, &cache);
  const EmbeddingBatch eb = assemble_embedding_batch(z, batch.labels);

  StepMetrics metrics;
  std::vector<double> update;

  const auto single_task = [&](const LossReport& rep, const Matrix* gw,
                               const Matrix* gc) {
    const EncoderGradients eg =
        encoder_backprop(params.encoder, cache, rep.grad_embeddings);
    metrics.loss = rep.value;
    update = flatten_task_grad(params, eg, gw, gc);
    metrics.combined_norm = vec_norm(update);
  };

  switch (cfg.loss) {
    case LossKind::kCrossEntropy: {
      const LossReport rep = margin_softmax_loss(eb, params.classifier,
                                                 cfg.margin, MarginKind::kNone);
      single_task(rep, &*rep.grad_classifier_weights, nullptr);
      break;
    }
    case LossKind::kAmSoftmax: {
      const LossReport rep = margin_softmax_loss(
          eb, params.classifier, cfg.margin, MarginKind::kAdditiveCosine);
      single_task(rep, &*rep.grad_classifier_weights, nullptr);
      break;
    }
    case LossKind::kAamSoftmax: {
      const LossReport rep = aam_softmax_loss(eb, params.classifier, cfg.margin);
      single_task(rep, &*rep.grad_classifier_weights, nullptr);
      break;
    }
    case LossKind::kSupCon: {
      const LossReport rep = supcon_loss(eb, cfg.margin.tau, cfg.denominator);
      single_task(rep, nullptr, nullptr);
      break;
    }
    case LossKind::kSupMarginCon: {
      const LossReport rep = sup_margin_con_loss(eb, cfg.margin, cfg.denominator);
      single_task(rep, nullptr, nullptr);
      break;
    }
    case LossKind::kCaaMarginCon: {
      const CaaOptions opts{cfg.use_caa, cfg.contrastive_margin,
                            cfg.denominator};
      if (cfg.lambda_mode == LambdaMode::kFixed) {
        const LossReport rep =
            caa_margin_con_loss(eb, params.classifier, params.class_vectors,
                                cfg.margin, cfg.lambda1, cfg.lambda2, opts);
        single_task(rep, &*rep.grad_classifier_weights,
                    &*rep.grad_class_vectors);
        metrics.lambda1 = cfg.lambda1;
        metrics.lambda2 = cfg.lambda2;
      } else {
        const CaaMarginConTerms terms = caa_margin_con_terms(
            eb, params.classifier, params.class_vectors, cfg.margin, opts);
        const EncoderGradients eg1 = encoder_backprop(
            params.encoder, cache, terms.classification.grad_embeddings);
        const EncoderGradients eg2 = encoder_backprop(
            params.encoder, cache, terms.contrastive.grad_embeddings);
        const std::vector<double> g1 = flatten_task_grad(
            params, eg1, &*terms.classification.grad_classifier_weights,
            nullptr);
        const std::vector<double> g2 = flatten_task_grad(
            params, eg2, nullptr,
            terms.contrastive.grad_class_vectors
                ? &*terms.contrastive.grad_class_vectors
                : nullptr);
        const MgdaState st = mgda_two_task(g1, g2);
        metrics.lambda1 = st.lambda1;
        metrics.lambda2 = st.lambda2;
        metrics.g1_norm = st.g1_norm;
        metrics.g2_norm = st.g2_norm;
        metrics.combined_norm = st.combined_norm;
        metrics.loss = st.lambda1 * terms.classification.value +
                       st.lambda2 * terms.contrastive.value;
        update.resize(g1.size());
        for (std::size_t i = 0; i < g1.size(); ++i) {
          update[i] = st.lambda1 * g1[i] + st.lambda2 * g2[i];
        }
      }
      break;
    }
  }

  if (!std::isfinite(metrics.loss)) {
    throw NumericError(
        "train_step: non-finite loss " + std::to_string(metrics.loss) +
        " (loss=" + loss_kind_name(cfg.loss) +
        ", lambda1=" + std::to_string(metrics.lambda1) +
        ", lambda2=" + std::to_string(metrics.lambda2) +
        ", |g1|=" + std::to_string(metrics.g1_norm) +
        ", |g2|=" + std::to_string(metrics.g2_norm) +
        ", batch=" + std::to_string(batch.features.rows()) + "x" +
        std::to_string(batch.features.cols()) + ")");
  }

  apply_update(params, opt, update, cfg);
  return metrics;
}

FitResult fit(const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.size() == 0) throw DataError("fit: empty dataset");
  std::int64_t max_label = 0;
  for (std::int64_t l : dataset.labels) {
    if (l < 0) throw DataError("fit: negative speaker label " + std::to_string(l));
    max_label = std::max(max_label, l);
  }
  const std::size_t n_speakers = static_cast<std::size_t>(max_label) + 1;
  if (distinct_speakers(dataset.labels).size() < 2) {
    throw DataError("fit: dataset has fewer than 2 distinct speakers");
  }

  FitResult result;
  result.params = init_model(dataset.input_dim(), n_speakers, cfg);

  const std::size_t n_orig = cfg.batch_size / 2;
  if (dataset.size() < n_orig) {
    throw DataError("fit: dataset of " + std::to_string(dataset.size()) +
                    " utterances is smaller than one batch of " +
                    std::to_string(n_orig) + " originals");
  }
  const std::size_t n_batches = dataset.size() / n_orig;

  OptimizerState opt;
  std::vector<std::size_t> order(dataset.size());
  const std::size_t d_in = dataset.input_dim();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, 101, epoch));
    shuffle_rng.shuffle(order);

    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t start = b * n_orig;
      // A batch must contain at least two speakers; if the shuffle dealt a
      // single-speaker slice, swap in the nearest differing utterance.
      const std::int64_t first_label = dataset.labels[order[start]];
      bool mixed = false;
      for (std::size_t k = 1; k < n_orig; ++k) {
        if (dataset.labels[order[start + k]] != first_label) {
          mixed = true;
          break;
        }
      }
      if (!mixed) {
        bool fixed = false;
        for (std::size_t k = start + n_orig; k < order.size() && !fixed; ++k) {
          if (dataset.labels[order[k]] != first_label) {
            std::swap(order[start], order[k]);
            fixed = true;
          }
        }
        for (std::size_t k = 0; k < start && !fixed; ++k) {
          if (dataset.labels[order[k]] != first_label) {
            std::swap(order[start], order[k]);
            fixed = true;
          }
        }
        if (!fixed) {
          throw DataError("fit: could not build a batch with 2 speakers");
        }
      }

      TrainBatch batch;
      batch.labels.resize(n_orig);
      Matrix originals(n_orig, d_in);
      for (std::size_t k = 0; k < n_orig; ++k) {
        const std::size_t row = order[start + k];
        std::copy_n(dataset.features.row(row).data(), d_in,
                    originals.row(k).data());
        batch.labels[k] = dataset.labels[row];
      }
      const Matrix views =
          augment(originals, cfg.aug_noise_sigma, cfg.aug_dropout,
                  derive_seed(cfg.seed, 211 + epoch, b));
      batch.features = Matrix(2 * n_orig, d_in);
      for (std::size_t k = 0; k < n_orig; ++k) {
        std::copy_n(originals.row(k).data(), d_in,
                    batch.features.row(k).data());
        std::copy_n(views.row(k).data(), d_in,
                    batch.features.row(k + n_orig).data());
      }

      const StepMetrics sm = train_step(result.params, opt, batch, cfg);
      stats.mean_loss += sm.loss;
      stats.mean_lambda1 += sm.lambda1;
      stats.mean_lambda2 += sm.lambda2;
      stats.mean_grad_norm += sm.combined_norm;
      if (cfg.record_steps) result.steps.push_back(sm);
    }
    const double inv = 1.0 / static_cast<double>(n_batches);
    stats.mean_loss *= inv;
    stats.mean_lambda1 *= inv;
    stats.mean_lambda2 *= inv;
    stats.mean_grad_norm *= inv;
    result.history.push_back(stats);
  }
  return result;
}

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kAmSoftmax: return "am_softmax";
    case LossKind::kAamSoftmax: return "aam_softmax";
    case LossKind::kSupCon: return "supcon";
    case LossKind::kSupMarginCon: return "sup_margin_con";
    case LossKind::kCaaMarginCon: return "caa_margin_con";
  }
  return "unknown";
}

}  // namespace margincon
