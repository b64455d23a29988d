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

#include "margincon/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "margincon/error.hpp"
#include "margincon/hash.hpp"

namespace margincon {

namespace {

constexpr const char* kCheckpointMagic = "margincon-checkpoint";
constexpr const char* kDatasetMagic = "margincon-dataset";
constexpr int kFormatVersion = 1;

void expect_token(std::istream& is, const std::string& name,
                  const std::string& want) {
  std::string got;
  if (!(is >> got) || got != want) {
    throw DataError(name + ": expected token '" + want + "', got '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& is, const std::string& name, const char* what) {
  T v;
  if (!(is >> v)) {
    throw DataError(name + ": failed to read " + std::string(what));
  }
  return v;
}

void write_matrix(std::ostream& os, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      os << (c == 0 ? "" : " ") << fmt_double(row[c]);
    }
    os << "\n";
  }
}

Matrix read_matrix(std::istream& is, const std::string& name, std::size_t rows,
                   std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) {
    if (!(is >> v)) throw DataError(name + ": truncated matrix data");
  }
  return m;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void save_checkpoint(std::ostream& os, const ModelParams& params) {
  os << kCheckpointMagic << " " << kFormatVersion << "\n";
  os << "activation relu\n";
  os << "layers " << params.encoder.layers.size() << "\n";
  os << "dims";
  for (std::size_t d : params.encoder.dims()) os << " " << d;
  os << "\n";
  for (std::size_t l = 0; l < params.encoder.layers.size(); ++l) {
    const auto& layer = params.encoder.layers[l];
    os << "layer " << l << " weight " << layer.weight.rows() << " "
       << layer.weight.cols() << "\n";
    write_matrix(os, layer.weight);
    os << "layer " << l << " bias " << layer.bias.size() << "\n";
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      os << (i == 0 ? "" : " ") << fmt_double(layer.bias[i]);
    }
    os << "\n";
  }
  if (!params.classifier.weights.empty()) {
    os << "classifier " << params.classifier.weights.rows() << " "
       << params.classifier.weights.cols() << "\n";
    write_matrix(os, params.classifier.weights);
  }
  if (!params.class_vectors.vectors.empty()) {
    os << "class_vectors " << params.class_vectors.vectors.rows() << " "
       << params.class_vectors.vectors.cols() << "\n";
    write_matrix(os, params.class_vectors.vectors);
    os << "speaker_ids";
    for (std::int64_t id : params.class_vectors.speaker_ids) os << " " << id;
    os << "\n";
  }
  os << "end\n";
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  auto os = open_out(path);
  save_checkpoint(os, params);
}

ModelParams load_checkpoint(std::istream& is, const std::string& name) {
  expect_token(is, name, kCheckpointMagic);
  const int version = read_value<int>(is, name, "format version");
  if (version != kFormatVersion) {
    throw DataError(name + ": unsupported checkpoint version " +
                    std::to_string(version));
  }
  expect_token(is, name, "activation");
  expect_token(is, name, "relu");
  expect_token(is, name, "layers");
  const auto n_layers = read_value<std::size_t>(is, name, "layer count");
  expect_token(is, name, "dims");
  std::vector<std::size_t> dims(n_layers + 1);
  for (auto& d : dims) d = read_value<std::size_t>(is, name, "dim");

  ModelParams params;
  for (std::size_t l = 0; l < n_layers; ++l) {
    expect_token(is, name, "layer");
    const auto idx = read_value<std::size_t>(is, name, "layer index");
    if (idx != l) throw DataError(name + ": layer sections out of order");
    expect_token(is, name, "weight");
    const auto rows = read_value<std::size_t>(is, name, "weight rows");
    const auto cols = read_value<std::size_t>(is, name, "weight cols");
    if (rows != dims[l + 1] || cols != dims[l]) {
      throw DataError(name + ": layer " + std::to_string(l) +
                      " weight shape disagrees with dims header");
    }
    EncoderLayer layer;
    layer.weight = read_matrix(is, name, rows, cols);
    expect_token(is, name, "layer");
    read_value<std::size_t>(is, name, "layer index");
    expect_token(is, name, "bias");
    const auto blen = read_value<std::size_t>(is, name, "bias length");
    if (blen != rows) throw DataError(name + ": bias length mismatch");
    layer.bias.resize(blen);
    for (auto& b : layer.bias) b = read_value<double>(is, name, "bias value");
    params.encoder.layers.push_back(std::move(layer));
  }

  std::string tok;
  while (is >> tok && tok != "end") {
    if (tok == "classifier") {
      const auto rows = read_value<std::size_t>(is, name, "classifier rows");
      const auto cols = read_value<std::size_t>(is, name, "classifier cols");
      params.classifier.weights = read_matrix(is, name, rows, cols);
    } else if (tok == "class_vectors") {
      const auto rows = read_value<std::size_t>(is, name, "class vector rows");
      const auto cols = read_value<std::size_t>(is, name, "class vector cols");
      params.class_vectors.vectors = read_matrix(is, name, rows, cols);
      expect_token(is, name, "speaker_ids");
      params.class_vectors.speaker_ids.resize(rows);
      for (auto& id : params.class_vectors.speaker_ids) {
        id = read_value<std::int64_t>(is, name, "speaker id");
      }
    } else {
      throw DataError(name + ": unexpected section '" + tok + "'");
    }
  }
  if (tok != "end") throw DataError(name + ": missing 'end' marker");
  params.encoder.validate();
  return params;
}

ModelParams load_checkpoint(const std::string& path) {
  auto is = open_in(path);
  return load_checkpoint(is, path);
}

void save_dataset(std::ostream& os, const Dataset& ds) {
  os << kDatasetMagic << " " << kFormatVersion << "\n";
  os << "n " << ds.size() << "\n";
  os << "dim " << ds.input_dim() << "\n";
  os << "seed " << ds.seed << "\n";
  os << "n_speakers " << ds.n_speakers << "\n";
  os << "utts_per_speaker " << ds.utts_per_speaker << "\n";
  os << "spread " << fmt_double(ds.model.spread) << "\n";
  os << "outlier_rate " << fmt_double(ds.model.outlier_rate) << "\n";
  os << "outlier_shift " << fmt_double(ds.model.outlier_shift) << "\n";
  os << "radius " << fmt_double(ds.model.radius) << "\n";
  os << "features " << ds.size() << " " << ds.input_dim() << "\n";
  write_matrix(os, ds.features);
  os << "labels " << ds.labels.size() << "\n";
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    os << (i == 0 ? "" : " ") << ds.labels[i];
  }
  os << "\nend\n";
}

void save_dataset(const std::string& path, const Dataset& ds) {
  auto os = open_out(path);
  save_dataset(os, ds);
}

Dataset load_dataset(std::istream& is, const std::string& name) {
  expect_token(is, name, kDatasetMagic);
  const int version = read_value<int>(is, name, "format version");
  if (version != kFormatVersion) {
    throw DataError(name + ": unsupported dataset version " +
                    std::to_string(version));
  }
  Dataset ds;
  expect_token(is, name, "n");
  const auto n = read_value<std::size_t>(is, name, "utterance count");
  expect_token(is, name, "dim");
  const auto dim = read_value<std::size_t>(is, name, "feature dim");
  expect_token(is, name, "seed");
  ds.seed = read_value<std::uint64_t>(is, name, "seed");
  expect_token(is, name, "n_speakers");
  ds.n_speakers = read_value<std::size_t>(is, name, "n_speakers");
  expect_token(is, name, "utts_per_speaker");
  ds.utts_per_speaker = read_value<std::size_t>(is, name, "utts_per_speaker");
  expect_token(is, name, "spread");
  ds.model.spread = read_value<double>(is, name, "spread");
  expect_token(is, name, "outlier_rate");
  ds.model.outlier_rate = read_value<double>(is, name, "outlier_rate");
  expect_token(is, name, "outlier_shift");
  ds.model.outlier_shift = read_value<double>(is, name, "outlier_shift");
  expect_token(is, name, "radius");
  ds.model.radius = read_value<double>(is, name, "radius");
  expect_token(is, name, "features");
  const auto rows = read_value<std::size_t>(is, name, "feature rows");
  const auto cols = read_value<std::size_t>(is, name, "feature cols");
  if (rows != n || cols != dim) {
    throw DataError(name + ": feature matrix shape disagrees with header");
  }
  ds.features = read_matrix(is, name, rows, cols);
  expect_token(is, name, "labels");
  const auto nl = read_value<std::size_t>(is, name, "label count");
  if (nl != n) throw DataError(name + ": label count disagrees with header");
  ds.labels.resize(nl);
  for (auto& l : ds.labels) l = read_value<std::int64_t>(is, name, "label");
  expect_token(is, name, "end");
  return ds;
}

Dataset load_dataset(const std::string& path) {
  auto is = open_in(path);
  return load_dataset(is, path);
}

void save_trials(std::ostream& os, const TrialList& trials) {
  for (const Trial& t : trials.trials) {
    os << t.enroll << " " << t.test << " "
       << (t.target ? "target" : "nontarget") << "\n";
  }
}

void save_trials(const std::string& path, const TrialList& trials) {
  auto os = open_out(path);
  save_trials(os, trials);
}

TrialList load_trials(std::istream& is, const std::string& name) {
  TrialList list;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Trial t;
    std::string flag;
    if (!(ls >> t.enroll >> t.test >> flag) ||
        (flag != "target" && flag != "nontarget")) {
      throw DataError(name + ":" + std::to_string(line_no) +
                      ": malformed trial line '" + line + "'");
    }
    t.target = flag == "target";
    list.trials.push_back(t);
  }
  return list;
}

TrialList load_trials(const std::string& path) {
  auto is = open_in(path);
  return load_trials(is, path);
}

void save_scores(std::ostream& os, const ScoredTrials& scored) {
  for (std::size_t i = 0; i < scored.size(); ++i) {
    os << scored.enroll[i] << " " << scored.test[i] << " "
       << fmt_double(scored.scores[i]) << " "
       << (scored.targets[i] ? "target" : "nontarget") << "\n";
  }
}

void save_scores(const std::string& path, const ScoredTrials& scored) {
  auto os = open_out(path);
  save_scores(os, scored);
}

ScoredTrials load_scores(std::istream& is, const std::string& name) {
  ScoredTrials scored;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t enroll = 0;
    std::size_t test = 0;
    double score = 0.0;
    std::string flag;
    if (!(ls >> enroll >> test >> score >> flag) ||
        (flag != "target" && flag != "nontarget")) {
      throw DataError(name + ":" + std::to_string(line_no) +
                      ": malformed score line '" + line + "'");
    }
    scored.enroll.push_back(enroll);
    scored.test.push_back(test);
    scored.scores.push_back(score);
    scored.targets.push_back(flag == "target" ? 1 : 0);
  }
  return scored;
}

ScoredTrials load_scores(const std::string& path) {
  auto is = open_in(path);
  return load_scores(is, path);
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "' for fingerprinting");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace margincon
