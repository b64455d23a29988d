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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "margincon/metrics.hpp"
#include "margincon/serialize.hpp"
#include "margincon/trainer.hpp"

namespace margincon {

const char* version_tag();

/// Everything needed to rerun a command exactly: config snapshot, seed,
/// input fingerprints, output paths. Every report starts with this block;
/// identical manifests produce bit-identical reports.
struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, std::string>> inputs;  // name -> "path (fnv1a <hex>)"
  std::vector<std::pair<std::string, std::string>> outputs;

  void add_input(const std::string& name, const std::string& path);
  void add_output(const std::string& name, const std::string& path);
};

void write_manifest(std::ostream& os, const Manifest& m);

struct EvalResult {
  EerResult eer;
  DcfResult dcf;
  AlignmentUniformity geometry;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
};

/// Scores the trial list over encoder embeddings of the whole dataset and
/// computes EER / minDCF plus alignment & uniformity over a deterministic
/// batch of same-speaker utterance pairs (capped at kGeometryPairCap pairs).
EvalResult evaluate_model(const ModelParams& params, const Dataset& dataset,
                          const TrialList& trials, const DcfParams& dcf);

inline constexpr std::size_t kGeometryPairCap = 256;

/// Table-4-style ablation grid: {full, w/o Margin, w/o CAA, w/o both} x
/// {clean, outlier-injected}, every variant trained on identical data per
/// seed.
struct AblationConfig {
  std::size_t n_speakers = 20;
  std::size_t utts_per_speaker = 50;
  std::size_t input_dim = 40;
  double spread = 0.6;
  double outlier_rate = 0.15;
  double outlier_shift = 0.8;
  double radius = 3.0;
  std::size_t n_seeds = 5;
  std::uint64_t base_seed = 1;
  std::size_t n_target = 500;
  std::size_t n_nontarget = 500;
  TrainConfig train;  // loss selector is forced to caa_margin_con
};

inline constexpr std::array<const char*, 4> kAblationVariants = {
    "full", "wo_margin", "wo_caa", "wo_caa_and_margin"};
inline constexpr std::array<const char*, 2> kAblationConditions = {"clean",
                                                                   "outliers"};

struct AblationCell {
  std::vector<double> eers;         // per seed
  std::vector<double> min_dcfs;     // per seed
  std::vector<double> first_loss;   // first-epoch mean loss per seed
  std::vector<double> final_loss;   // last-epoch mean loss per seed

  double mean_eer() const;
  double mean_min_dcf() const;
  bool all_losses_decreased() const;
};

struct AblationReport {
  AblationConfig config;
  // cells[variant][condition]
  std::array<std::array<AblationCell, 2>, 4> cells;
};

AblationReport run_ablation(const AblationConfig& cfg);

}  // namespace margincon
