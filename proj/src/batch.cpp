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

#include "margincon/batch.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "margincon/error.hpp"

namespace margincon {

void EmbeddingBatch::validate() const {
  const std::size_t rows = data.rows();
  if (labels.size() != rows || view.size() != rows) {
    throw DataError("batch: labels/view length " + std::to_string(labels.size()) +
                    "/" + std::to_string(view.size()) +
                    " does not match row count " + std::to_string(rows));
  }
  if (data.cols() < 2) {
    throw DataError("batch: embedding dim " + std::to_string(data.cols()) +
                    " < 2");
  }
  if (rows % 2 != 0 || rows < 4) {
    throw DataError("batch: needs 2N rows with N >= 2, got " +
                    std::to_string(rows));
  }
  const std::size_t n = rows / 2;
  for (std::size_t i = 0; i < rows; ++i) {
    const double nrm = norm2(data.row(i));
    if (std::abs(nrm - 1.0) > 1e-6) {
      throw DataError("batch: row " + std::to_string(i) + " has norm " +
                      std::to_string(nrm) + ", expected 1 +- 1e-6");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (view[i] != View::kOriginal) {
      throw DataError("batch: row " + std::to_string(i) +
                      " in the first half is not flagged original");
    }
    if (view[i + n] != View::kAugmented) {
      throw DataError("batch: row " + std::to_string(i + n) +
                      " in the second half is not flagged augmented");
    }
    if (labels[i] != labels[i + n]) {
      throw DataError("batch: original row " + std::to_string(i) +
                      " (speaker " + std::to_string(labels[i]) +
                      ") and its augmented counterpart row " +
                      std::to_string(i + n) + " (speaker " +
                      std::to_string(labels[i + n]) + ") disagree");
    }
  }
  if (distinct_speakers(labels).size() < 2) {
    throw DataError("batch: fewer than 2 distinct speaker ids");
  }
}

EmbeddingBatch make_batch(const Matrix& originals, const Matrix& augmented,
                          const std::vector<std::int64_t>& labels) {
  if (!originals.same_shape(augmented)) {
    throw DataError("make_batch: original and augmented shapes differ");
  }
  if (labels.size() != originals.rows()) {
    throw DataError("make_batch: " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(originals.rows()) +
                    " originals");
  }
  const std::size_t n = originals.rows();
  const std::size_t d = originals.cols();
  EmbeddingBatch b;
  b.data = Matrix(2 * n, d);
  b.labels.resize(2 * n);
  b.view.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(originals.row(i).data(), d, b.data.row(i).data());
    std::copy_n(augmented.row(i).data(), d, b.data.row(i + n).data());
    b.labels[i] = labels[i];
    b.labels[i + n] = labels[i];
    b.view[i] = View::kOriginal;
    b.view[i + n] = View::kAugmented;
  }
  return b;
}

std::vector<std::int64_t> distinct_speakers(
    const std::vector<std::int64_t>& labels) {
  std::set<std::int64_t> ids(labels.begin(), labels.end());
  return {ids.begin(), ids.end()};
}

}  // namespace margincon
