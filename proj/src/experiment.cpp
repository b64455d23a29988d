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

#include "margincon/experiment.hpp"

#include <map>
#include <ostream>

#include "margincon/error.hpp"
#include "margincon/hash.hpp"
#include "margincon/rng.hpp"

namespace margincon {

const char* version_tag() { return "margincon 0.1.0"; }

void Manifest::add_input(const std::string& name, const std::string& path) {
  inputs.emplace_back(name, path + " (fnv1a " + hex64(file_fingerprint(path)) + ")");
}

void Manifest::add_output(const std::string& name, const std::string& path) {
  outputs.emplace_back(name, path);
}

void write_manifest(std::ostream& os, const Manifest& m) {
  os << "[manifest]\n";
  os << "version = " << version_tag() << "\n";
  os << "command = " << m.command << "\n";
  os << "seed = " << m.seed << "\n";
  for (const auto& [k, v] : m.config) os << "config." << k << " = " << v << "\n";
  for (const auto& [k, v] : m.inputs) os << "input." << k << " = " << v << "\n";
  for (const auto& [k, v] : m.outputs) os << "output." << k << " = " << v << "\n";
}

namespace {

/// Builds the geometry batch: deterministic same-speaker utterance pairs
/// (first with second, third with fourth, ... per speaker) over the already
/// encoded embeddings, capped to keep the O(B^2) uniformity sum small.
EmbeddingBatch geometry_batch(const Matrix& embeddings,
                              const std::vector<std::int64_t>& labels) {
  std::map<std::int64_t, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_speaker[labels[i]].push_back(i);
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [speaker, rows] : by_speaker) {
    for (std::size_t k = 0; k + 1 < rows.size(); k += 2) {
      pairs.emplace_back(rows[k], rows[k + 1]);
      if (pairs.size() >= kGeometryPairCap) break;
    }
    if (pairs.size() >= kGeometryPairCap) break;
  }
  if (pairs.size() < 2) {
    throw DataError("evaluate_model: need at least two same-speaker "
                    "utterance pairs for the geometry diagnostics");
  }

  const std::size_t n = pairs.size();
  const std::size_t d = embeddings.cols();
  EmbeddingBatch batch;
  batch.data = Matrix(2 * n, d);
  batch.labels.resize(2 * n);
  batch.view.resize(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    std::copy_n(embeddings.row(pairs[k].first).data(), d,
                batch.data.row(k).data());
    std::copy_n(embeddings.row(pairs[k].second).data(), d,
                batch.data.row(k + n).data());
    batch.labels[k] = labels[pairs[k].first];
    batch.labels[k + n] = labels[pairs[k].first];
    batch.view[k] = View::kOriginal;
    batch.view[k + n] = View::kAugmented;
  }
  return batch;
}

}  // namespace

EvalResult evaluate_model(const ModelParams& params, const Dataset& dataset,
                          const TrialList& trials, const DcfParams& dcf) {
  const Matrix embeddings = encode(params.encoder, dataset.features);
  const ScoredTrials scored = score_trials(embeddings, trials);

  EvalResult res;
  res.eer = eer(scored);
  res.dcf = min_dcf(scored, dcf);
  res.geometry = alignment_uniformity(geometry_batch(embeddings, dataset.labels));
  res.n_target = trials.n_target();
  res.n_nontarget = trials.n_nontarget();
  return res;
}

double AblationCell::mean_eer() const {
  double s = 0.0;
  for (double v : eers) s += v;
  return eers.empty() ? 0.0 : s / static_cast<double>(eers.size());
}

double AblationCell::mean_min_dcf() const {
  double s = 0.0;
  for (double v : min_dcfs) s += v;
  return min_dcfs.empty() ? 0.0 : s / static_cast<double>(min_dcfs.size());
}

bool AblationCell::all_losses_decreased() const {
  for (std::size_t k = 0; k < first_loss.size(); ++k) {
    if (!(final_loss[k] < first_loss[k])) return false;
  }
  return !first_loss.empty();
}

AblationReport run_ablation(const AblationConfig& cfg) {
  AblationReport report;
  report.config = cfg;

  for (std::size_t cond = 0; cond < kAblationConditions.size(); ++cond) {
    SpeakerModel model;
    model.spread = cfg.spread;
    model.outlier_rate = cond == 0 ? 0.0 : cfg.outlier_rate;
    model.outlier_shift = cfg.outlier_shift;
    model.radius = cfg.radius;

    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
      const std::uint64_t data_seed = derive_seed(cfg.base_seed, 501 + cond, s);
      const Dataset data = generate_dataset(
          cfg.n_speakers, cfg.utts_per_speaker, cfg.input_dim, model, data_seed);
      const TrialList trials =
          make_trials(data.labels, cfg.n_target, cfg.n_nontarget,
                      derive_seed(cfg.base_seed, 601 + cond, s));

      for (std::size_t v = 0; v < kAblationVariants.size(); ++v) {
        TrainConfig train = cfg.train;
        train.loss = LossKind::kCaaMarginCon;
        train.use_caa = (v == 0 || v == 1);
        train.contrastive_margin = (v == 0 || v == 2);
        train.seed = derive_seed(cfg.base_seed, 701, s);

        const FitResult fit_result = fit(data, train);
        const EvalResult eval =
            evaluate_model(fit_result.params, data, trials, DcfParams{});

        AblationCell& cell = report.cells[v][cond];
        cell.eers.push_back(eval.eer.eer);
        cell.min_dcfs.push_back(eval.dcf.min_dcf);
        if (!fit_result.history.empty()) {
          cell.first_loss.push_back(fit_result.history.front().mean_loss);
          cell.final_loss.push_back(fit_result.history.back().mean_loss);
        }
      }
    }
  }
  return report;
}

}  // namespace margincon
