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

/// Generative model for one synthetic "speaker": utterances are the
/// centroid plus isotropic noise; with probability outlier_rate an
/// utterance is displaced toward another speaker's centroid by the fraction
/// outlier_shift (1 puts it exactly there).
struct SpeakerModel {
  double spread = 0.6;
  double outlier_rate = 0.0;
  double outlier_shift = 0.8;
  double radius = 3.0;  // centroids lie on a sphere of this radius

  void validate() const;
};

struct Dataset {
  Matrix features;                   // M x d_in
  std::vector<std::int64_t> labels;  // M, speaker ids 0..n_speakers-1

  // generation metadata, carried into the dataset dump header
  std::size_t n_speakers = 0;
  std::size_t utts_per_speaker = 0;
  SpeakerModel model;
  std::uint64_t seed = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t input_dim() const { return features.cols(); }
};

/// Deterministic per seed, bit for bit. Speaker centroids are drawn
/// uniformly on the sphere of radius model.radius; utterance order is
/// speaker-major. Throws DataError for n_speakers < 2 or utts < 2.
Dataset generate_dataset(std::size_t n_speakers, std::size_t utts_per_speaker,
                         std::size_t input_dim, const SpeakerModel& model,
                         std::uint64_t seed);

/// Feature-space augmentation: adds N(0, noise_sigma^2) to every entry,
/// then zeroes each coordinate independently with probability dropout_prob.
/// Rows stay paired 1:1 with the input. sigma = 0, prob = 0 is the identity.
Matrix augment(const Matrix& features, double noise_sigma, double dropout_prob,
               std::uint64_t seed);

struct Trial {
  std::size_t enroll = 0;
  std::size_t test = 0;
  bool target = false;
};

struct TrialList {
  std::vector<Trial> trials;

  std::size_t n_target() const;
  std::size_t n_nontarget() const;
};

/// Samples exactly n_target same-speaker and n_nontarget different-speaker
/// utterance pairs without replacement (i < j, never pairing an utterance
/// with itself). Throws DataError with the achievable maxima when the
/// dataset cannot supply the requested counts.
TrialList make_trials(const std::vector<std::int64_t>& labels,
                      std::size_t n_target, std::size_t n_nontarget,
                      std::uint64_t seed);

}  // namespace margincon
