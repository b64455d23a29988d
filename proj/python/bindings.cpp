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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "margincon/encoder.hpp"
#include "margincon/experiment.hpp"
#include "margincon/gradcheck.hpp"
#include "margincon/losses.hpp"
#include "margincon/metrics.hpp"
#include "margincon/synth.hpp"
#include "margincon/trainer.hpp"

namespace py = pybind11;
using namespace margincon;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DataError("expected a 2-d array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy_n(a.data(), m.data().size(), m.data().begin());
  return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
  py::array_t<double> a({m.rows(), m.cols()});
  std::copy_n(m.data().data(), m.data().size(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw DataError("expected a 1-d array");
  return {a.data(), a.data() + a.shape(0)};
}

/// Rows [0, N) are originals, rows [N, 2N) their views; labels has length 2N.
EmbeddingBatch make_embedding_batch(const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
                                    const std::vector<std::int64_t>& labels) {
  EmbeddingBatch b;
  b.data = to_matrix(embeddings);
  if (labels.size() != b.data.rows()) {
    throw DataError("labels length does not match embedding rows");
  }
  if (b.data.rows() % 2 != 0) {
    throw DataError("embedding batch must have an even number of rows");
  }
  b.labels = labels;
  b.view.resize(labels.size());
  const std::size_t n = labels.size() / 2;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    b.view[i] = i < n ? View::kOriginal : View::kAugmented;
  }
  return b;
}

Denominator parse_denominator(const std::string& name) {
  if (name == "negatives_only") return Denominator::kNegativesOnly;
  if (name == "all_others") return Denominator::kAllOthers;
  throw ConfigError("denominator must be negatives_only or all_others");
}

py::dict report_to_dict(const LossReport& rep) {
  py::dict d;
  d["value"] = rep.value;
  d["grad_embeddings"] = from_matrix(rep.grad_embeddings);
  if (rep.grad_class_vectors) {
    d["grad_class_vectors"] = from_matrix(*rep.grad_class_vectors);
  }
  if (rep.grad_classifier_weights) {
    d["grad_classifier_weights"] = from_matrix(*rep.grad_classifier_weights);
  }
  return d;
}

ClassVectorTable make_table(const py::array_t<double, py::array::c_style | py::array::forcecast>& vectors,
                            const std::vector<std::int64_t>& speaker_ids) {
  ClassVectorTable t;
  t.vectors = to_matrix(vectors);
  t.speaker_ids = speaker_ids;
  if (t.speaker_ids.size() != t.vectors.rows()) {
    throw DataError("speaker_ids length does not match class vector rows");
  }
  return t;
}

ScoredTrials make_scored(const std::vector<double>& scores,
                         const std::vector<bool>& targets) {
  if (scores.size() != targets.size()) {
    throw DataError("scores and targets must have equal length");
  }
  ScoredTrials s;
  s.scores = scores;
  s.enroll.assign(scores.size(), 0);
  s.test.assign(scores.size(), 0);
  for (bool t : targets) s.targets.push_back(t ? 1 : 0);
  return s;
}

}  // namespace

PYBIND11_MODULE(_margincon, m) {
  m.doc() = "margin- and attention-based supervised contrastive losses";
  m.attr("__version__") = "0.1.0";

  m.def("cosine_similarity",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
          const auto va = to_vector(a);
          const auto vb = to_vector(b);
          return cosine_similarity(va, vb);
        },
        py::arg("a"), py::arg("b"));

  m.def("cos_plus_margin", &cos_plus_margin, py::arg("cos_theta"), py::arg("m"));

  m.def("supcon_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
           const std::vector<std::int64_t>& labels, double tau,
           const std::string& denominator) {
          return report_to_dict(supcon_loss(make_embedding_batch(embeddings, labels),
                                            tau, parse_denominator(denominator)));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("tau") = 0.07,
        py::arg("denominator") = "negatives_only");

  m.def("sup_margin_con_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
           const std::vector<std::int64_t>& labels, double margin, double tau,
           const std::string& denominator) {
          MarginConfig cfg;
          cfg.m = margin;
          cfg.tau = tau;
          return report_to_dict(
              sup_margin_con_loss(make_embedding_batch(embeddings, labels), cfg,
                                  parse_denominator(denominator)));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("margin") = 0.2,
        py::arg("tau") = 0.07, py::arg("denominator") = "negatives_only");

  m.def("caa_scores",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
           const std::vector<std::int64_t>& labels,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& class_vectors,
           const std::vector<std::int64_t>& speaker_ids) {
          return from_matrix(caa_scores(make_embedding_batch(embeddings, labels),
                                        make_table(class_vectors, speaker_ids)));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("class_vectors"),
        py::arg("speaker_ids"));

  m.def("aam_softmax_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
           const std::vector<std::int64_t>& labels,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& weights,
           double margin, double scale) {
          MarginConfig cfg;
          cfg.m = margin;
          cfg.s = scale;
          ClassifierWeights w{to_matrix(weights)};
          return report_to_dict(
              aam_softmax_loss(make_embedding_batch(embeddings, labels), w, cfg));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("weights"),
        py::arg("margin") = 0.2, py::arg("scale") = 30.0);

  m.def("caa_margin_con_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
           const std::vector<std::int64_t>& labels,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& weights,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& class_vectors,
           const std::vector<std::int64_t>& speaker_ids, double margin,
           double tau, double scale, double lambda1, double lambda2,
           bool use_caa, bool contrastive_margin, const std::string& denominator) {
          MarginConfig cfg;
          cfg.m = margin;
          cfg.tau = tau;
          cfg.s = scale;
          ClassifierWeights w{to_matrix(weights)};
          CaaOptions opts;
          opts.use_caa = use_caa;
          opts.contrastive_margin = contrastive_margin;
          opts.denominator = parse_denominator(denominator);
          return report_to_dict(caa_margin_con_loss(
              make_embedding_batch(embeddings, labels), w,
              make_table(class_vectors, speaker_ids), cfg, lambda1, lambda2,
              opts));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("weights"),
        py::arg("class_vectors"), py::arg("speaker_ids"),
        py::arg("margin") = 0.2, py::arg("tau") = 0.07, py::arg("scale") = 30.0,
        py::arg("lambda1") = 0.5, py::arg("lambda2") = 0.5,
        py::arg("use_caa") = true, py::arg("contrastive_margin") = true,
        py::arg("denominator") = "negatives_only");

  m.def("mgda_two_task",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& g1,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& g2) {
          const auto v1 = to_vector(g1);
          const auto v2 = to_vector(g2);
          const MgdaState st = mgda_two_task(v1, v2);
          return py::make_tuple(st.lambda1, st.lambda2);
        },
        py::arg("g1"), py::arg("g2"));

  m.def("eer",
        [](const std::vector<double>& scores, const std::vector<bool>& targets) {
          const EerResult r = eer(make_scored(scores, targets));
          return py::make_tuple(r.eer, r.threshold);
        },
        py::arg("scores"), py::arg("targets"));

  m.def("min_dcf",
        [](const std::vector<double>& scores, const std::vector<bool>& targets,
           double p_target, double c_miss, double c_fa) {
          DcfParams p{p_target, c_miss, c_fa};
          const DcfResult r = min_dcf(make_scored(scores, targets), p);
          return py::make_tuple(r.min_dcf, r.threshold);
        },
        py::arg("scores"), py::arg("targets"), py::arg("p_target") = 0.01,
        py::arg("c_miss") = 1.0, py::arg("c_fa") = 1.0);

  m.def("alignment_uniformity",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
           const std::vector<std::int64_t>& labels, double alpha_exp, double t) {
          const auto r = alignment_uniformity(
              make_embedding_batch(embeddings, labels), alpha_exp, t);
          return py::make_tuple(r.alignment, r.uniformity);
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("alpha_exp") = 2.0,
        py::arg("t") = 2.0);

  m.def("generate_dataset",
        [](std::size_t n_speakers, std::size_t utts_per_speaker,
           std::size_t input_dim, double spread, double outlier_rate,
           double outlier_shift, double radius, std::uint64_t seed) {
          SpeakerModel model;
          model.spread = spread;
          model.outlier_rate = outlier_rate;
          model.outlier_shift = outlier_shift;
          model.radius = radius;
          const Dataset ds = generate_dataset(n_speakers, utts_per_speaker,
                                              input_dim, model, seed);
          return py::make_tuple(from_matrix(ds.features), ds.labels);
        },
        py::arg("n_speakers"), py::arg("utts_per_speaker"),
        py::arg("input_dim"), py::arg("spread") = 0.6,
        py::arg("outlier_rate") = 0.0, py::arg("outlier_shift") = 0.8,
        py::arg("radius") = 3.0, py::arg("seed") = 1);

  m.def("augment",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& features,
           double noise_sigma, double dropout_prob, std::uint64_t seed) {
          return from_matrix(
              augment(to_matrix(features), noise_sigma, dropout_prob, seed));
        },
        py::arg("features"), py::arg("noise_sigma") = 0.1,
        py::arg("dropout_prob") = 0.1, py::arg("seed") = 1);

  m.def("make_trials",
        [](const std::vector<std::int64_t>& labels, std::size_t n_target,
           std::size_t n_nontarget, std::uint64_t seed) {
          const TrialList list = make_trials(labels, n_target, n_nontarget, seed);
          py::list out;
          for (const Trial& t : list.trials) {
            out.append(py::make_tuple(t.enroll, t.test, t.target));
          }
          return out;
        },
        py::arg("labels"), py::arg("n_target"), py::arg("n_nontarget"),
        py::arg("seed") = 1);

  py::class_<EncoderParams>(m, "Encoder")
      .def_static("init",
                  [](const std::vector<std::size_t>& dims, std::uint64_t seed) {
                    return init_encoder(dims, seed);
                  },
                  py::arg("dims"), py::arg("seed") = 1)
      .def_property_readonly("dims", &EncoderParams::dims)
      .def("encode",
           [](const EncoderParams& p,
              const py::array_t<double, py::array::c_style | py::array::forcecast>& features) {
             return from_matrix(encode(p, to_matrix(features)));
           },
           py::arg("features"));

  m.def("run_gradcheck",
        [](std::uint64_t seed, std::size_t instances) {
          GradcheckOptions opts;
          opts.seed = seed;
          opts.instances = instances;
          py::list out;
          for (const auto& r : run_gradcheck(opts)) {
            py::dict d;
            d["op"] = r.op;
            d["instances"] = r.instances;
            d["max_rel_err"] = r.max_rel_err;
            d["pass"] = r.pass;
            out.append(d);
          }
          return out;
        },
        py::arg("seed") = 7, py::arg("instances") = 10);
}
