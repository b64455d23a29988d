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

#include "margincon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "margincon/error.hpp"
#include "margincon/losses.hpp"

namespace margincon {

namespace {

struct OperatingPoint {
  double threshold;  // accept iff score >= threshold
  double fa;
  double miss;
};

/// All achievable operating points, sweeping the threshold upward through
/// the distinct score values plus an accept-nothing sentinel. fa decreases
/// from 1 to 0 while miss increases from 0 to 1.
std::vector<OperatingPoint> operating_points(const ScoredTrials& scored) {
  std::vector<double> tar;
  std::vector<double> non;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    (scored.targets[i] ? tar : non).push_back(scored.scores[i]);
  }
  if (tar.empty() || non.empty()) {
    throw DataError("metrics: need at least one target and one nontarget "
                    "trial, got " + std::to_string(tar.size()) + " targets / " +
                    std::to_string(non.size()) + " nontargets");
  }
  std::sort(tar.begin(), tar.end());
  std::sort(non.begin(), non.end());

  std::vector<double> thresholds;
  thresholds.reserve(scored.size() + 1);
  thresholds.insert(thresholds.end(), tar.begin(), tar.end());
  thresholds.insert(thresholds.end(), non.begin(), non.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<OperatingPoint> ops;
  ops.reserve(thresholds.size() + 1);
  for (double t : thresholds) {
    const auto miss_count =
        std::lower_bound(tar.begin(), tar.end(), t) - tar.begin();
    const auto below_count =
        std::lower_bound(non.begin(), non.end(), t) - non.begin();
    ops.push_back({t,
                   static_cast<double>(non.size() - below_count) /
                       static_cast<double>(non.size()),
                   static_cast<double>(miss_count) /
                       static_cast<double>(tar.size())});
  }
  ops.push_back({thresholds.back() + 1.0, 0.0, 1.0});  // accept nothing
  return ops;
}

/// Lower convex envelope of the ROC polyline in the (fa, miss) plane,
/// visited in sweep order (fa nonincreasing, miss nondecreasing).
/// Monotone-chain in x = -fa, y = miss; collinear points are dropped.
std::vector<OperatingPoint> roc_hull(const std::vector<OperatingPoint>& ops) {
  std::vector<OperatingPoint> hull;
  for (const OperatingPoint& p : ops) {
    while (hull.size() >= 2) {
      const OperatingPoint& a = hull[hull.size() - 2];
      const OperatingPoint& b = hull[hull.size() - 1];
      const double cross = (a.fa - b.fa) * (p.miss - a.miss) +
                           (b.miss - a.miss) * (p.fa - a.fa);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  return hull;
}

}  // namespace

void DcfParams::validate() const {
  if (!(p_target > 0.0 && p_target < 1.0)) {
    throw ConfigError("p_target must lie in (0,1), got " +
                      std::to_string(p_target));
  }
  if (!(c_miss > 0.0) || !(c_fa > 0.0)) {
    throw ConfigError("c_miss and c_fa must be > 0");
  }
}

ScoredTrials score_trials(const Matrix& embeddings, const TrialList& trials) {
  ScoredTrials out;
  out.enroll.reserve(trials.trials.size());
  out.test.reserve(trials.trials.size());
  out.scores.reserve(trials.trials.size());
  out.targets.reserve(trials.trials.size());
  for (const Trial& t : trials.trials) {
    if (t.enroll >= embeddings.rows() || t.test >= embeddings.rows()) {
      throw DataError("score_trials: trial (" + std::to_string(t.enroll) +
                      ", " + std::to_string(t.test) +
                      ") references an unknown utterance id; only " +
                      std::to_string(embeddings.rows()) + " embeddings");
    }
    out.enroll.push_back(t.enroll);
    out.test.push_back(t.test);
    out.scores.push_back(
        cosine_similarity(embeddings.row(t.enroll), embeddings.row(t.test)));
    out.targets.push_back(t.target ? 1 : 0);
  }
  return out;
}

EerResult eer(const ScoredTrials& scored) {
  const auto hull = roc_hull(operating_points(scored));
  // miss - fa rises monotonically along the hull from -1 to +1; find the
  // first vertex past the diagonal and interpolate on the straddling edge.
  for (std::size_t k = 0; k < hull.size(); ++k) {
    const double diff = hull[k].miss - hull[k].fa;
    if (diff < 0.0) continue;
    if (k == 0 || diff == 0.0) return {hull[k].miss, hull[k].threshold};
    const OperatingPoint& a = hull[k - 1];
    const OperatingPoint& b = hull[k];
    const double denom = (b.miss - a.miss) - (b.fa - a.fa);
    if (denom == 0.0) return {0.5 * (a.miss + a.fa), a.threshold};
    const double u = (a.fa - a.miss) / denom;
    return {a.miss + u * (b.miss - a.miss),
            a.threshold + u * (b.threshold - a.threshold)};
  }
  // Unreachable: the sweep always ends at (fa 0, miss 1).
  return {hull.back().miss, hull.back().threshold};
}

DcfResult min_dcf(const ScoredTrials& scored, const DcfParams& params) {
  params.validate();
  const auto ops = operating_points(scored);
  const double norm = std::min(params.c_miss * params.p_target,
                               params.c_fa * (1.0 - params.p_target));
  double best_cost = std::numeric_limits<double>::infinity();
  double best_threshold = 0.0;
  for (const OperatingPoint& op : ops) {
    const double cost = params.c_miss * params.p_target * op.miss +
                        params.c_fa * (1.0 - params.p_target) * op.fa;
    if (cost < best_cost) {
      best_cost = cost;
      best_threshold = op.threshold;
    }
  }
  return {best_cost / norm, best_threshold};
}

AlignmentUniformity alignment_uniformity(const EmbeddingBatch& batch,
                                         double alpha_exp, double t) {
  batch.validate();
  const std::size_t b = batch.size();
  const std::size_t n = b / 2;

  AlignmentUniformity out;
  double align = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    const auto zi = batch.data.row(i);
    const auto zp = batch.data.row(i + n);
    for (std::size_t k = 0; k < zi.size(); ++k) {
      const double diff = zi[k] - zp[k];
      d2 += diff * diff;
    }
    align += std::pow(d2, alpha_exp / 2.0);
  }
  out.alignment = align / static_cast<double>(n);

  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      double d2 = 0.0;
      const auto zi = batch.data.row(i);
      const auto zj = batch.data.row(j);
      for (std::size_t k = 0; k < zi.size(); ++k) {
        const double diff = zi[k] - zj[k];
        d2 += diff * diff;
      }
      acc += std::exp(-t * d2);
      ++pairs;
    }
  }
  out.uniformity = std::log(acc / static_cast<double>(pairs));
  return out;
}

}  // namespace margincon
