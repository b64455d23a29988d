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

#include "margincon/batch.hpp"
#include "margincon/matrix.hpp"
#include "margincon/synth.hpp"

namespace margincon {

/// Parallel lists of trial scores and target flags; enroll/test ids are
/// kept so score files can be written and re-read losslessly.
struct ScoredTrials {
  std::vector<std::size_t> enroll;
  std::vector<std::size_t> test;
  std::vector<double> scores;
  std::vector<std::uint8_t> targets;

  std::size_t size() const { return scores.size(); }
};

/// minDCF operating point. The paper-style evaluation convention:
/// prior 0.01, unit costs.
struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;

  void validate() const;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

/// Cosine-scores every trial against the embedding rows. Throws DataError
/// for an unresolvable utterance id.
ScoredTrials score_trials(const Matrix& embeddings, const TrialList& trials);

/// Equal error rate with threshold, via a sort-based sweep over all distinct
/// score thresholds (ties grouped). The miss/false-alarm crossing is taken
/// on the lower convex envelope of the empirical ROC with linear
/// interpolation between the two straddling operating points; this keeps
/// EER in [0, 0.5] for every input and matches the raw polyline crossing
/// whenever the empirical ROC is proper near the diagonal. Throws DataError
/// unless both classes are present.
EerResult eer(const ScoredTrials& scored);

/// Minimum normalized detection cost:
///   min_t [c_miss p_t P_miss(t) + c_fa (1-p_t) P_fa(t)]
///     / min(c_miss p_t, c_fa (1-p_t)),
/// minimized over all achievable operating points (ties broken toward the
/// lowest threshold).
DcfResult min_dcf(const ScoredTrials& scored, const DcfParams& params);

struct AlignmentUniformity {
  double alignment = 0.0;
  double uniformity = 0.0;
};

/// Embedding-geometry diagnostics; lower is better for both.
///   alignment  = mean over the N (original, augmented view) pairs of
///                |z_i - z_p|^alpha_exp
///   uniformity = log mean over all distinct pairs of exp(-t |z_i - z_j|^2)
AlignmentUniformity alignment_uniformity(const EmbeddingBatch& batch,
                                         double alpha_exp = 2.0,
                                         double t = 2.0);

}  // namespace margincon
