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

enum class View : std::uint8_t { kOriginal = 0, kAugmented = 1 };

/// A batch of 2N unit-norm embeddings: rows [0, N) are originals, rows
/// [N, 2N) their augmented views, with labels[i] == labels[i + N]. Losses
/// index positives P(i) (same speaker, excluding i) and negatives A(i)
/// (different speaker) off the label vector.
struct EmbeddingBatch {
  Matrix data;                       // 2N x d
  std::vector<std::int64_t> labels;  // speaker id per row
  std::vector<View> view;            // original / augmented per row

  std::size_t size() const { return data.rows(); }
  std::size_t dim() const { return data.cols(); }

  /// Checks all type invariants (row norms within 1e-6 of 1, the
  /// original/augmented pairing, d >= 2, N >= 2, >= 2 distinct speakers).
  /// Throws DataError naming the first violation.
  void validate() const;
};

/// Convenience constructor for the canonical layout. `originals` and
/// `augmented` must have the same shape; labels apply to both halves.
EmbeddingBatch make_batch(const Matrix& originals, const Matrix& augmented,
                          const std::vector<std::int64_t>& labels);

/// Distinct speaker ids of a batch in ascending order.
std::vector<std::int64_t> distinct_speakers(
    const std::vector<std::int64_t>& labels);

}  // namespace margincon
