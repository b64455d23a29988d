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

#include "margincon/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "margincon/encoder.hpp"
#include "margincon/losses.hpp"
#include "margincon/rng.hpp"

namespace margincon {

namespace {

std::vector<double> central_diff(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x0, double h) {
  std::vector<double> grad(x0.size());
  std::vector<double> x = x0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double up = f(x);
    x[k] = saved - h;
    const double down = f(x);
    x[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// max_j |a_j - fd_j| relative to the largest finite-difference component.
double rel_err(const std::vector<double>& analytic,
               const std::vector<double>& fd) {
  double scale = 0.0;
  for (double v : fd) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, 1e-12);
  double worst = 0.0;
  for (std::size_t k = 0; k < fd.size(); ++k) {
    worst = std::max(worst, std::abs(analytic[k] - fd[k]) / scale);
  }
  return worst;
}

Matrix normalized_rows(const std::vector<double>& flat, std::size_t rows,
                       std::size_t cols) {
  Matrix m(rows, cols);
  m.data() = flat;
  for (std::size_t r = 0; r < rows; ++r) {
    normalize_row(m.row(r), "row " + std::to_string(r));
  }
  return m;
}

struct Instance {
  EmbeddingBatch batch;
  ClassifierWeights weights;
  ClassVectorTable table;
  MarginConfig cfg;
  Denominator denom;
};

Instance make_instance(std::uint64_t seed, std::size_t index) {
  static constexpr std::size_t kDims[] = {4, 8, 16};
  static constexpr std::size_t kHalf[] = {4, 8};
  const std::size_t d = kDims[index % 3];
  const std::size_t n = kHalf[index % 2];
  const std::size_t k = 2 + index % 3;  // speakers, <= 4 <= n

  Rng rng(derive_seed(seed, 401, index));
  Instance inst;
  inst.batch.data = Matrix(2 * n, d);
  inst.batch.labels.resize(2 * n);
  inst.batch.view.resize(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    auto row = inst.batch.data.row(i);
    for (double& v : row) v = rng.gaussian();
    normalize_row(row, "embedding");
    const std::size_t orig = i < n ? i : i - n;
    inst.batch.labels[i] = static_cast<std::int64_t>(orig % k);
    inst.batch.view[i] = i < n ? View::kOriginal : View::kAugmented;
  }

  inst.weights.weights = Matrix(k, d);
  for (std::size_t r = 0; r < k; ++r) {
    auto row = inst.weights.weights.row(r);
    for (double& v : row) v = rng.gaussian();
    normalize_row(row, "weight");
  }

  inst.table.vectors = Matrix(k, d);
  for (double& v : inst.table.vectors.data()) v = rng.gaussian();
  inst.table.speaker_ids.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    inst.table.speaker_ids[r] = static_cast<std::int64_t>(r);
  }

  inst.cfg = MarginConfig{};  // m = 0.2, tau = 0.07, s = 30
  inst.denom = index % 2 == 0 ? Denominator::kNegativesOnly
                              : Denominator::kAllOthers;
  return inst;
}

/// FD over the embedding rows, differentiating through row renormalization
/// so the result is comparable with tangent-projected analytic gradients.
double check_embedding_grad(
    const Instance& inst, const Matrix& analytic,
    const std::function<double(const EmbeddingBatch&)>& loss_of, double h) {
  EmbeddingBatch probe = inst.batch;
  const auto f = [&](const std::vector<double>& flat) {
    probe.data =
        normalized_rows(flat, inst.batch.size(), inst.batch.dim());
    return loss_of(probe);
  };
  const auto fd = central_diff(f, inst.batch.data.data(), h);
  return rel_err(analytic.data(), fd);
}

double check_weight_grad(
    const Instance& inst, const Matrix& analytic,
    const std::function<double(const ClassifierWeights&)>& loss_of, double h) {
  ClassifierWeights probe;
  const auto f = [&](const std::vector<double>& flat) {
    probe.weights = normalized_rows(flat, inst.weights.weights.rows(),
                                    inst.weights.weights.cols());
    return loss_of(probe);
  };
  const auto fd = central_diff(f, inst.weights.weights.data(), h);
  return rel_err(analytic.data(), fd);
}

double check_class_vector_grad(
    const Instance& inst, const Matrix& analytic,
    const std::function<double(const ClassVectorTable&)>& loss_of, double h) {
  ClassVectorTable probe = inst.table;
  const auto f = [&](const std::vector<double>& flat) {
    probe.vectors.data() = flat;
    return loss_of(probe);
  };
  const auto fd = central_diff(f, inst.table.vectors.data(), h);
  return rel_err(analytic.data(), fd);
}

/// True when the forward pass stays away from relu kinks and the norm
/// floor, so central differences with step h cannot cross a nonsmooth
/// point. Degenerate draws are rejected and redrawn.
bool smooth_at(const EncoderParams& params, const Matrix& features, double h) {
  EncodeCache cache;
  try {
    encode(params, features, &cache);
  } catch (const NumericError&) {
    return false;
  }
  for (double n : cache.prenorm) {
    if (n < 1e-2) return false;
  }
  const double kink_guard = 20.0 * h;
  for (std::size_t l = 0; l + 1 < cache.pre_act.size(); ++l) {
    for (double a : cache.pre_act[l].data()) {
      if (std::abs(a) < kink_guard) return false;
    }
  }
  return true;
}

double check_encoder(std::uint64_t seed, std::size_t index, double h) {
  const std::size_t d_in = 5 + index % 3;
  const std::vector<std::size_t> dims = {d_in, 8, 6, 4};
  const std::size_t rows = 6;

  EncoderParams params;
  Matrix features(rows, d_in);
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt > 100) {
      throw NumericError("gradcheck: no smooth encoder instance found");
    }
    Rng rng(derive_seed(seed, 402, index * 128 + attempt));
    params = init_encoder(dims, derive_seed(seed, 403, index * 128 + attempt));
    for (double& v : features.data()) v = rng.gaussian();
    if (smooth_at(params, features, h)) break;
  }
  Rng rng(derive_seed(seed, 404, index));
  Matrix upstream(rows, dims.back());
  for (double& v : upstream.data()) v = rng.gaussian();

  // Linear probe sum(encode(params, X) * G) isolates the encoder chain rule
  // (normalization Jacobian included) from any loss-kernel code.
  const auto objective = [&](const EncoderParams& p) {
    const Matrix z = encode(p, features);
    double acc = 0.0;
    for (std::size_t i = 0; i < z.data().size(); ++i) {
      acc += z.data()[i] * upstream.data()[i];
    }
    return acc;
  };

  EncodeCache cache;
  encode(params, features, &cache);
  const EncoderGradients grads = encoder_backprop(params, cache, upstream);

  std::vector<double> analytic;
  std::vector<double> flat0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    analytic.insert(analytic.end(), grads.grad_weight[l].data().begin(),
                    grads.grad_weight[l].data().end());
    analytic.insert(analytic.end(), grads.grad_bias[l].begin(),
                    grads.grad_bias[l].end());
    flat0.insert(flat0.end(), params.layers[l].weight.data().begin(),
                 params.layers[l].weight.data().end());
    flat0.insert(flat0.end(), params.layers[l].bias.begin(),
                 params.layers[l].bias.end());
  }

  EncoderParams probe = params;
  const auto f = [&](const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (auto& layer : probe.layers) {
      std::copy_n(flat.begin() + pos, layer.weight.data().size(),
                  layer.weight.data().begin());
      pos += layer.weight.data().size();
      std::copy_n(flat.begin() + pos, layer.bias.size(), layer.bias.begin());
      pos += layer.bias.size();
    }
    return objective(probe);
  };
  const auto fd = central_diff(f, flat0, h);
  return rel_err(analytic, fd);
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts) {
  std::vector<GradcheckResult> results;

  const auto finish = [&](GradcheckResult r) {
    if (opts.corrupt == r.op) r.max_rel_err += 1e-2;
    r.pass = r.max_rel_err < opts.tolerance;
    results.push_back(std::move(r));
  };

  {
    GradcheckResult r{"supcon_loss", opts.instances, 0.0, false};
    for (std::size_t i = 0; i < opts.instances; ++i) {
      const Instance inst = make_instance(opts.seed, i);
      const LossReport rep =
          supcon_loss(inst.batch, inst.cfg.tau, inst.denom);
      r.max_rel_err = std::max(
          r.max_rel_err,
          check_embedding_grad(inst, rep.grad_embeddings,
                               [&](const EmbeddingBatch& b) {
                                 return supcon_loss(b, inst.cfg.tau, inst.denom)
                                     .value;
                               },
                               opts.h));
    }
    finish(r);
  }

  {
    GradcheckResult r{"sup_margin_con_loss", opts.instances, 0.0, false};
    for (std::size_t i = 0; i < opts.instances; ++i) {
      const Instance inst = make_instance(opts.seed, i + 1000);
      const LossReport rep =
          sup_margin_con_loss(inst.batch, inst.cfg, inst.denom);
      r.max_rel_err = std::max(
          r.max_rel_err,
          check_embedding_grad(
              inst, rep.grad_embeddings,
              [&](const EmbeddingBatch& b) {
                return sup_margin_con_loss(b, inst.cfg, inst.denom).value;
              },
              opts.h));
    }
    finish(r);
  }

  {
    GradcheckResult r{"aam_softmax_loss", opts.instances, 0.0, false};
    for (std::size_t i = 0; i < opts.instances; ++i) {
      const Instance inst = make_instance(opts.seed, i + 2000);
      const LossReport rep =
          aam_softmax_loss(inst.batch, inst.weights, inst.cfg);
      r.max_rel_err = std::max(
          r.max_rel_err,
          check_embedding_grad(inst, rep.grad_embeddings,
                               [&](const EmbeddingBatch& b) {
                                 return aam_softmax_loss(b, inst.weights,
                                                         inst.cfg)
                                     .value;
                               },
                               opts.h));
      r.max_rel_err = std::max(
          r.max_rel_err,
          check_weight_grad(inst, *rep.grad_classifier_weights,
                            [&](const ClassifierWeights& w) {
                              return aam_softmax_loss(inst.batch, w, inst.cfg)
                                  .value;
                            },
                            opts.h));
    }
    finish(r);
  }

  {
    GradcheckResult r{"caa_margin_con_loss", opts.instances, 0.0, false};
    const double l1 = 0.6;
    const double l2 = 0.7;
    for (std::size_t i = 0; i < opts.instances; ++i) {
      const Instance inst = make_instance(opts.seed, i + 3000);
      const CaaOptions copts{true, true, inst.denom};
      const LossReport rep =
          caa_margin_con_loss(inst.batch, inst.weights, inst.table, inst.cfg,
                              l1, l2, copts);
      r.max_rel_err = std::max(
          r.max_rel_err,
          check_embedding_grad(
              inst, rep.grad_embeddings,
              [&](const EmbeddingBatch& b) {
                return caa_margin_con_loss(b, inst.weights, inst.table,
                                           inst.cfg, l1, l2, copts)
                    .value;
              },
              opts.h));
      r.max_rel_err = std::max(
          r.max_rel_err,
          check_weight_grad(
              inst, *rep.grad_classifier_weights,
              [&](const ClassifierWeights& w) {
                return caa_margin_con_loss(inst.batch, w, inst.table, inst.cfg,
                                           l1, l2, copts)
                    .value;
              },
              opts.h));
      r.max_rel_err = std::max(
          r.max_rel_err,
          check_class_vector_grad(
              inst, *rep.grad_class_vectors,
              [&](const ClassVectorTable& t) {
                return caa_margin_con_loss(inst.batch, inst.weights, t,
                                           inst.cfg, l1, l2, copts)
                    .value;
              },
              opts.h));
    }
    finish(r);
  }

  {
    GradcheckResult r{"encoder_backprop", opts.instances, 0.0, false};
    for (std::size_t i = 0; i < opts.instances; ++i) {
      r.max_rel_err =
          std::max(r.max_rel_err, check_encoder(opts.seed, i, opts.h));
    }
    finish(r);
  }

  return results;
}

}  // namespace margincon
