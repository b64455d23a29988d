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
#include <iosfwd>
#include <string>

#include "margincon/metrics.hpp"
#include "margincon/synth.hpp"
#include "margincon/trainer.hpp"

namespace margincon {

/// Shortest round-trip decimal representation of a double (17 significant
/// digits); reading it back recovers the exact bits.
std::string fmt_double(double v);

// Checkpoint: structured text, version-tagged, dims plus row-major
// matrices. Holds the encoder and, when present, the classifier weights and
// class-vector table. Round-trips are bit-exact.
void save_checkpoint(std::ostream& os, const ModelParams& params);
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(std::istream& is, const std::string& name);
ModelParams load_checkpoint(const std::string& path);

// Dataset dump: generation header + row-major feature matrix + labels, in
// the same structured-text serialization as checkpoints.
void save_dataset(std::ostream& os, const Dataset& ds);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(std::istream& is, const std::string& name);
Dataset load_dataset(const std::string& path);

// Trial list: text lines "enroll_id test_id {target|nontarget}".
void save_trials(std::ostream& os, const TrialList& trials);
void save_trials(const std::string& path, const TrialList& trials);
TrialList load_trials(std::istream& is, const std::string& name);
TrialList load_trials(const std::string& path);

// Score file: text lines "enroll_id test_id score {target|nontarget}".
void save_scores(std::ostream& os, const ScoredTrials& scored);
void save_scores(const std::string& path, const ScoredTrials& scored);
ScoredTrials load_scores(std::istream& is, const std::string& name);
ScoredTrials load_scores(const std::string& path);

/// FNV-1a fingerprint of a file's bytes; DataError if unreadable.
std::uint64_t file_fingerprint(const std::string& path);

}  // namespace margincon
