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

#include "margincon/synth.hpp"

#include <string>

#include "margincon/error.hpp"
#include "margincon/rng.hpp"

namespace margincon {

void SpeakerModel::validate() const {
  if (!(spread >= 0.0)) {
    throw ConfigError("spread must be >= 0, got " + std::to_string(spread));
  }
  if (outlier_rate < 0.0 || outlier_rate > 1.0) {
    throw ConfigError("outlier_rate must lie in [0,1], got " +
                      std::to_string(outlier_rate));
  }
  if (outlier_shift < 0.0 || outlier_shift > 1.0) {
    throw ConfigError("outlier_shift must lie in [0,1], got " +
                      std::to_string(outlier_shift));
  }
  if (!(radius > 0.0)) {
    throw ConfigError("radius must be > 0, got " + std::to_string(radius));
  }
}

Dataset generate_dataset(std::size_t n_speakers, std::size_t utts_per_speaker,
                         std::size_t input_dim, const SpeakerModel& model,
                         std::uint64_t seed) {
  model.validate();
  if (n_speakers < 2) {
    throw DataError("generate_dataset: need >= 2 speakers, got " +
                    std::to_string(n_speakers));
  }
  if (utts_per_speaker < 2) {
    throw DataError("generate_dataset: need >= 2 utterances per speaker, got " +
                    std::to_string(utts_per_speaker));
  }
  if (input_dim < 2) {
    throw DataError("generate_dataset: input_dim must be >= 2, got " +
                    std::to_string(input_dim));
  }

  Rng rng(seed);
  Matrix centroids(n_speakers, input_dim);
  for (std::size_t s = 0; s < n_speakers; ++s) {
    auto row = centroids.row(s);
    double n = 0.0;
    do {
      for (double& v : row) v = rng.gaussian();
      n = norm2(row);
    } while (n < 1e-12);
    scale(row, model.radius / n);
  }

  Dataset ds;
  ds.n_speakers = n_speakers;
  ds.utts_per_speaker = utts_per_speaker;
  ds.model = model;
  ds.seed = seed;
  ds.features = Matrix(n_speakers * utts_per_speaker, input_dim);
  ds.labels.resize(n_speakers * utts_per_speaker);

  std::size_t row_idx = 0;
  for (std::size_t s = 0; s < n_speakers; ++s) {
    for (std::size_t u = 0; u < utts_per_speaker; ++u, ++row_idx) {
      auto x = ds.features.row(row_idx);
      const auto c = centroids.row(s);
      for (std::size_t k = 0; k < input_dim; ++k) {
        x[k] = c[k] + model.spread * rng.gaussian();
      }
      if (rng.uniform() < model.outlier_rate) {
        std::size_t other = static_cast<std::size_t>(rng.below(n_speakers - 1));
        if (other >= s) ++other;
        const auto co = centroids.row(other);
        for (std::size_t k = 0; k < input_dim; ++k) {
          x[k] += model.outlier_shift * (co[k] - x[k]);
        }
      }
      ds.labels[row_idx] = static_cast<std::int64_t>(s);
    }
  }
  return ds;
}

Matrix augment(const Matrix& features, double noise_sigma, double dropout_prob,
               std::uint64_t seed) {
  if (noise_sigma < 0.0) {
    throw ConfigError("noise_sigma must be >= 0, got " +
                      std::to_string(noise_sigma));
  }
  if (dropout_prob < 0.0 || dropout_prob >= 1.0) {
    throw ConfigError("dropout_prob must lie in [0,1), got " +
                      std::to_string(dropout_prob));
  }
  Rng rng(seed);
  Matrix out = features;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (double& v : row) v += noise_sigma * rng.gaussian();
    for (double& v : row) {
      if (rng.uniform() < dropout_prob) v = 0.0;
    }
  }
  return out;
}

std::size_t TrialList::n_target() const {
  std::size_t n = 0;
  for (const Trial& t : trials) n += t.target ? 1 : 0;
  return n;
}

std::size_t TrialList::n_nontarget() const { return trials.size() - n_target(); }

TrialList make_trials(const std::vector<std::int64_t>& labels,
                      std::size_t n_target, std::size_t n_nontarget,
                      std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> same;
  std::vector<std::pair<std::size_t, std::size_t>> diff;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      (labels[i] == labels[j] ? same : diff).emplace_back(i, j);
    }
  }
  if (n_target > same.size() || n_nontarget > diff.size()) {
    throw DataError("make_trials: requested " + std::to_string(n_target) +
                    " target / " + std::to_string(n_nontarget) +
                    " nontarget trials, but only " +
                    std::to_string(same.size()) + " same-speaker and " +
                    std::to_string(diff.size()) +
                    " different-speaker pairs exist");
  }

  Rng rng(seed);
  const auto sample = [&rng](auto& pool, std::size_t count) {
    // Partial Fisher-Yates: the first `count` entries are a uniform
    // without-replacement sample.
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
      std::swap(pool[k], pool[j]);
    }
  };
  sample(same, n_target);
  sample(diff, n_nontarget);

  TrialList list;
  list.trials.reserve(n_target + n_nontarget);
  for (std::size_t k = 0; k < n_target; ++k) {
    list.trials.push_back({same[k].first, same[k].second, true});
  }
  for (std::size_t k = 0; k < n_nontarget; ++k) {
    list.trials.push_back({diff[k].first, diff[k].second, false});
  }
  return list;
}

}  // namespace margincon
