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

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "margincon/trainer.hpp"

namespace margincon {

/// Parses flat "key = value" text ('#' starts a comment). Unknown keys and
/// malformed values raise ConfigError with "<name>:<line>: ...".
TrainConfig parse_train_config(std::istream& is, const std::string& name);
TrainConfig load_train_config(const std::string& path);

/// Applies one key=value override (same keys as the config file).
void apply_config_key(TrainConfig& cfg, const std::string& key,
                      const std::string& value);

/// Canonical key=value snapshot, sorted by key; feeding every pair back
/// through apply_config_key reproduces the config exactly.
std::vector<std::pair<std::string, std::string>> config_items(
    const TrainConfig& cfg);

}  // namespace margincon
