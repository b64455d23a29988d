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

#include "margincon/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "margincon/error.hpp"
#include "margincon/serialize.hpp"

namespace margincon {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  if (used != value.size()) {
    throw ConfigError(key + ": trailing junk in number '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + value +
                      "'");
  }
  if (used != value.size()) {
    throw ConfigError(key + ": trailing junk in integer '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

LossKind parse_loss(const std::string& value) {
  if (value == "cross_entropy") return LossKind::kCrossEntropy;
  if (value == "am_softmax") return LossKind::kAmSoftmax;
  if (value == "aam_softmax") return LossKind::kAamSoftmax;
  if (value == "supcon") return LossKind::kSupCon;
  if (value == "sup_margin_con") return LossKind::kSupMarginCon;
  if (value == "caa_margin_con") return LossKind::kCaaMarginCon;
  throw ConfigError("loss: unknown selector '" + value +
                    "' (expected cross_entropy|am_softmax|aam_softmax|supcon|"
                    "sup_margin_con|caa_margin_con)");
}

}  // namespace

void apply_config_key(TrainConfig& cfg, const std::string& key,
                      const std::string& value) {
  if (key == "loss") {
    cfg.loss = parse_loss(value);
  } else if (key == "margin") {
    cfg.margin.m = parse_double(key, value);
  } else if (key == "tau") {
    cfg.margin.tau = parse_double(key, value);
  } else if (key == "scale") {
    cfg.margin.s = parse_double(key, value);
  } else if (key == "denominator") {
    if (value == "negatives_only") {
      cfg.denominator = Denominator::kNegativesOnly;
    } else if (value == "all_others") {
      cfg.denominator = Denominator::kAllOthers;
    } else {
      throw ConfigError("denominator: expected negatives_only|all_others, got '" +
                        value + "'");
    }
  } else if (key == "use_caa") {
    cfg.use_caa = parse_bool(key, value);
  } else if (key == "contrastive_margin") {
    cfg.contrastive_margin = parse_bool(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "epochs") {
    cfg.epochs = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "optimizer") {
    if (value == "sgd") {
      cfg.optimizer = OptimizerKind::kSgd;
    } else if (value == "adam") {
      cfg.optimizer = OptimizerKind::kAdam;
    } else {
      throw ConfigError("optimizer: expected sgd|adam, got '" + value + "'");
    }
  } else if (key == "lr") {
    cfg.lr = parse_double(key, value);
  } else if (key == "momentum") {
    cfg.momentum = parse_double(key, value);
  } else if (key == "beta1") {
    cfg.beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    cfg.beta2 = parse_double(key, value);
  } else if (key == "adam_eps") {
    cfg.adam_eps = parse_double(key, value);
  } else if (key == "lambda_mode") {
    if (value == "fixed") {
      cfg.lambda_mode = LambdaMode::kFixed;
    } else if (value == "mgda") {
      cfg.lambda_mode = LambdaMode::kMgda;
    } else {
      throw ConfigError("lambda_mode: expected fixed|mgda, got '" + value + "'");
    }
  } else if (key == "lambda1") {
    cfg.lambda1 = parse_double(key, value);
  } else if (key == "lambda2") {
    cfg.lambda2 = parse_double(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "hidden_dims") {
    std::vector<std::size_t> dims;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
      part = trim(part);
      if (part.empty()) continue;
      dims.push_back(static_cast<std::size_t>(parse_u64(key, part)));
    }
    cfg.hidden_dims = std::move(dims);
  } else if (key == "embed_dim") {
    cfg.embed_dim = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "aug_noise_sigma") {
    cfg.aug_noise_sigma = parse_double(key, value);
  } else if (key == "aug_dropout") {
    cfg.aug_dropout = parse_double(key, value);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

TrainConfig parse_train_config(std::istream& is, const std::string& name) {
  TrainConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse_train_config(is, path);
}

std::vector<std::pair<std::string, std::string>> config_items(
    const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> items;
  items.emplace_back("loss", loss_kind_name(cfg.loss));
  items.emplace_back("margin", fmt_double(cfg.margin.m));
  items.emplace_back("tau", fmt_double(cfg.margin.tau));
  items.emplace_back("scale", fmt_double(cfg.margin.s));
  items.emplace_back("denominator",
                     cfg.denominator == Denominator::kNegativesOnly
                         ? "negatives_only"
                         : "all_others");
  items.emplace_back("use_caa", cfg.use_caa ? "true" : "false");
  items.emplace_back("contrastive_margin",
                     cfg.contrastive_margin ? "true" : "false");
  items.emplace_back("batch_size", std::to_string(cfg.batch_size));
  items.emplace_back("epochs", std::to_string(cfg.epochs));
  items.emplace_back("optimizer",
                     cfg.optimizer == OptimizerKind::kSgd ? "sgd" : "adam");
  items.emplace_back("lr", fmt_double(cfg.lr));
  items.emplace_back("momentum", fmt_double(cfg.momentum));
  items.emplace_back("beta1", fmt_double(cfg.beta1));
  items.emplace_back("beta2", fmt_double(cfg.beta2));
  items.emplace_back("adam_eps", fmt_double(cfg.adam_eps));
  items.emplace_back("lambda_mode",
                     cfg.lambda_mode == LambdaMode::kFixed ? "fixed" : "mgda");
  items.emplace_back("lambda1", fmt_double(cfg.lambda1));
  items.emplace_back("lambda2", fmt_double(cfg.lambda2));
  items.emplace_back("seed", std::to_string(cfg.seed));
  std::string dims;
  for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
    dims += (i == 0 ? "" : ",") + std::to_string(cfg.hidden_dims[i]);
  }
  items.emplace_back("hidden_dims", dims);
  items.emplace_back("embed_dim", std::to_string(cfg.embed_dim));
  items.emplace_back("aug_noise_sigma", fmt_double(cfg.aug_noise_sigma));
  items.emplace_back("aug_dropout", fmt_double(cfg.aug_dropout));
  std::sort(items.begin(), items.end());
  return items;
}

}  // namespace margincon
