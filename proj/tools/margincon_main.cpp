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

// Experiment CLI: data generation, gradient checking, training, evaluation
// and the four-way loss ablation. Every command writes a line-oriented text
// report that embeds its manifest; rerunning a command with an identical
// manifest produces a byte-identical report.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "margincon/config.hpp"
#include "margincon/error.hpp"
#include "margincon/experiment.hpp"
#include "margincon/gradcheck.hpp"
#include "margincon/hash.hpp"
#include "margincon/serialize.hpp"

namespace {

using namespace margincon;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Output paths are resolved against $MARGINCON_OUTPUT_ROOT when relative.
std::string resolve_output(const std::string& path) {
  if (path.empty()) return path;
  const char* root = std::getenv("MARGINCON_OUTPUT_ROOT");
  std::filesystem::path p(path);
  if (root != nullptr && *root != '\0' && p.is_relative()) {
    p = std::filesystem::path(root) / p;
  }
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  return p.string();
}

std::ofstream open_report(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open report file '" + path + "'");
  return os;
}

/// Mirrors every TrainConfig key as a --dashed-flag string option; values
/// are applied over (defaults < config file) after parsing, so precedence
/// is CLI > config file > defaults.
class ConfigFlags {
 public:
  void attach(CLI::App* cmd) {
    static const char* keys[] = {
        "loss",       "margin",     "tau",        "scale",
        "denominator", "use_caa",   "contrastive_margin", "batch_size",
        "epochs",     "optimizer",  "lr",         "momentum",
        "beta1",      "beta2",      "adam_eps",   "lambda_mode",
        "lambda1",    "lambda2",    "seed",       "hidden_dims",
        "embed_dim",  "aug_noise_sigma", "aug_dropout"};
    values_.resize(std::size(keys));
    std::size_t i = 0;
    for (const char* key : keys) {
      std::string flag = "--" + std::string(key);
      for (char& c : flag) {
        if (c == '_') c = '-';
      }
      options_.push_back(
          cmd->add_option(flag, values_[i], "config key " + std::string(key)));
      keys_.emplace_back(key);
      ++i;
    }
  }

  void apply(TrainConfig& cfg) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (options_[i]->count() > 0) apply_config_key(cfg, keys_[i], values_[i]);
    }
  }

 private:
  std::vector<std::string> keys_;
  std::vector<std::string> values_;
  std::vector<CLI::Option*> options_;
};

struct GenDataArgs {
  std::size_t n_speakers = 20;
  std::size_t utts_per_speaker = 50;
  std::size_t d_in = 40;
  SpeakerModel model;
  std::uint64_t seed = 1;
  std::string out;
  std::string report;
  std::string trials_out;
  std::size_t n_target = 500;
  std::size_t n_nontarget = 500;
  std::uint64_t trial_seed = 1;
};

int cmd_gen_data(const GenDataArgs& args) {
  const Dataset ds = generate_dataset(args.n_speakers, args.utts_per_speaker,
                                      args.d_in, args.model, args.seed);
  const std::string out = resolve_output(args.out);
  save_dataset(out, ds);

  std::string trials_path;
  TrialList trials;
  if (!args.trials_out.empty()) {
    trials = make_trials(ds.labels, args.n_target, args.n_nontarget,
                         args.trial_seed);
    trials_path = resolve_output(args.trials_out);
    save_trials(trials_path, trials);
  }

  Manifest m;
  m.command = "gen-data";
  m.seed = args.seed;
  m.config = {{"d_in", std::to_string(args.d_in)},
              {"n_nontarget", std::to_string(args.n_nontarget)},
              {"n_speakers", std::to_string(args.n_speakers)},
              {"n_target", std::to_string(args.n_target)},
              {"outlier_rate", fmt_double(args.model.outlier_rate)},
              {"outlier_shift", fmt_double(args.model.outlier_shift)},
              {"radius", fmt_double(args.model.radius)},
              {"spread", fmt_double(args.model.spread)},
              {"trial_seed", std::to_string(args.trial_seed)},
              {"utts_per_speaker", std::to_string(args.utts_per_speaker)}};
  m.add_output("dataset", out);
  if (!trials_path.empty()) m.add_output("trials", trials_path);

  auto os = open_report(resolve_output(args.report));
  write_manifest(os, m);
  os << "[dataset]\n";
  os << "n = " << ds.size() << "\n";
  os << "dim = " << ds.input_dim() << "\n";
  os << "fingerprint = " << hex64(file_fingerprint(out)) << "\n";
  if (!trials_path.empty()) {
    os << "[trials]\n";
    os << "n_target = " << trials.n_target() << "\n";
    os << "n_nontarget = " << trials.n_nontarget() << "\n";
    os << "fingerprint = " << hex64(file_fingerprint(trials_path)) << "\n";
  }
  return kExitOk;
}

struct GradcheckArgs {
  GradcheckOptions opts;
  std::string report;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  const auto results = run_gradcheck(args.opts);

  Manifest m;
  m.command = "gradcheck";
  m.seed = args.opts.seed;
  m.config = {{"corrupt", args.opts.corrupt.empty() ? "none" : args.opts.corrupt},
              {"h", fmt_double(args.opts.h)},
              {"instances", std::to_string(args.opts.instances)},
              {"tolerance", fmt_double(args.opts.tolerance)}};

  std::ostringstream body;
  body << "[gradcheck]\n";
  body << "# rel_err = max |analytic - fd| / max(|fd|_inf, 1e-12) per group\n";
  bool all_pass = true;
  std::string first_failure;
  for (const auto& r : results) {
    body << std::left << std::setw(24) << r.op << " instances="
         << r.instances << " max_rel_err=" << fmt_g(r.max_rel_err) << " "
         << (r.pass ? "pass" : "FAIL") << "\n";
    if (!r.pass && first_failure.empty()) first_failure = r.op;
    all_pass = all_pass && r.pass;
  }
  body << "[result]\n";
  body << "status = " << (all_pass ? "pass" : "fail") << "\n";
  if (!first_failure.empty()) body << "first_failure = " << first_failure << "\n";

  if (!args.report.empty()) {
    auto os = open_report(resolve_output(args.report));
    write_manifest(os, m);
    os << body.str();
  }
  std::cout << body.str();
  if (!all_pass) {
    std::cerr << "gradcheck: gradient check failed for " << first_failure
              << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

struct TrainArgs {
  std::string config_path;
  std::string data;
  std::string checkpoint;
  std::string report;
};

int cmd_train(const TrainArgs& args, TrainConfig cfg) {
  const Dataset ds = load_dataset(args.data);
  const FitResult result = fit(ds, cfg);
  const std::string ck = resolve_output(args.checkpoint);
  save_checkpoint(ck, result.params);

  Manifest m;
  m.command = "train";
  m.seed = cfg.seed;
  m.config = config_items(cfg);
  m.add_input("dataset", args.data);
  if (!args.config_path.empty()) m.add_input("config", args.config_path);
  m.add_output("checkpoint", ck);

  auto os = open_report(resolve_output(args.report));
  write_manifest(os, m);
  os << "[history]\n";
  os << "epoch mean_loss mean_lambda1 mean_lambda2 mean_grad_norm\n";
  for (const auto& e : result.history) {
    os << e.epoch << " " << fmt_g(e.mean_loss) << " " << fmt_g(e.mean_lambda1)
       << " " << fmt_g(e.mean_lambda2) << " " << fmt_g(e.mean_grad_norm)
       << "\n";
  }
  os << "[result]\n";
  os << "epochs_run = " << result.history.size() << "\n";
  if (!result.history.empty()) {
    os << "first_loss = " << fmt_g(result.history.front().mean_loss) << "\n";
    os << "final_loss = " << fmt_g(result.history.back().mean_loss) << "\n";
  }
  os << "checkpoint_fingerprint = " << hex64(file_fingerprint(ck)) << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string trials;
  std::string report;
  std::string scores_out;
  DcfParams dcf;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& args) {
  const ModelParams params = load_checkpoint(args.checkpoint);
  const Dataset ds = load_dataset(args.data);
  const TrialList trials = load_trials(args.trials);
  const EvalResult res = evaluate_model(params, ds, trials, args.dcf);

  std::string scores_path;
  if (!args.scores_out.empty()) {
    const Matrix embeddings = encode(params.encoder, ds.features);
    scores_path = resolve_output(args.scores_out);
    save_scores(scores_path, score_trials(embeddings, trials));
  }

  Manifest m;
  m.command = "eval";
  m.seed = args.seed;
  m.config = {{"c_fa", fmt_double(args.dcf.c_fa)},
              {"c_miss", fmt_double(args.dcf.c_miss)},
              {"p_target", fmt_double(args.dcf.p_target)}};
  m.add_input("checkpoint", args.checkpoint);
  m.add_input("dataset", args.data);
  m.add_input("trials", args.trials);
  if (!scores_path.empty()) m.add_output("scores", scores_path);

  auto os = open_report(resolve_output(args.report));
  write_manifest(os, m);
  os << "[metrics]\n";
  os << "n_target = " << res.n_target << "\n";
  os << "n_nontarget = " << res.n_nontarget << "\n";
  os << "eer = " << fmt_g(res.eer.eer) << "\n";
  os << "eer_threshold = " << fmt_g(res.eer.threshold) << "\n";
  os << "min_dcf = " << fmt_g(res.dcf.min_dcf) << "\n";
  os << "min_dcf_threshold = " << fmt_g(res.dcf.threshold) << "\n";
  os << "alignment = " << fmt_g(res.geometry.alignment) << "\n";
  os << "uniformity = " << fmt_g(res.geometry.uniformity) << "\n";
  return kExitOk;
}

struct AblationArgs {
  AblationConfig cfg;
  std::string report;
};

int cmd_ablation(const AblationArgs& args) {
  const AblationReport report = run_ablation(args.cfg);

  Manifest m;
  m.command = "ablation";
  m.seed = args.cfg.base_seed;
  m.config = config_items(args.cfg.train);
  m.config.emplace_back("ablation.input_dim", std::to_string(args.cfg.input_dim));
  m.config.emplace_back("ablation.n_nontarget", std::to_string(args.cfg.n_nontarget));
  m.config.emplace_back("ablation.n_seeds", std::to_string(args.cfg.n_seeds));
  m.config.emplace_back("ablation.n_speakers", std::to_string(args.cfg.n_speakers));
  m.config.emplace_back("ablation.n_target", std::to_string(args.cfg.n_target));
  m.config.emplace_back("ablation.outlier_rate", fmt_double(args.cfg.outlier_rate));
  m.config.emplace_back("ablation.outlier_shift", fmt_double(args.cfg.outlier_shift));
  m.config.emplace_back("ablation.radius", fmt_double(args.cfg.radius));
  m.config.emplace_back("ablation.spread", fmt_double(args.cfg.spread));
  m.config.emplace_back("ablation.utts_per_speaker",
                        std::to_string(args.cfg.utts_per_speaker));

  auto os = open_report(resolve_output(args.report));
  write_manifest(os, m);
  os << "[ablation]\n";
  os << std::left << std::setw(18) << "variant" << std::setw(10) << "condition"
     << std::setw(14) << "mean_eer" << std::setw(14) << "mean_min_dcf"
     << "loss_decreased\n";
  for (std::size_t v = 0; v < kAblationVariants.size(); ++v) {
    for (std::size_t c = 0; c < kAblationConditions.size(); ++c) {
      const AblationCell& cell = report.cells[v][c];
      os << std::left << std::setw(18) << kAblationVariants[v] << std::setw(10)
         << kAblationConditions[c] << std::setw(14) << fmt_g(cell.mean_eer())
         << std::setw(14) << fmt_g(cell.mean_min_dcf())
         << (cell.all_losses_decreased() ? "yes" : "NO") << "\n";
    }
  }
  os << "[ablation.detail]\n";
  os << "variant condition seed eer min_dcf first_loss final_loss\n";
  for (std::size_t v = 0; v < kAblationVariants.size(); ++v) {
    for (std::size_t c = 0; c < kAblationConditions.size(); ++c) {
      const AblationCell& cell = report.cells[v][c];
      for (std::size_t s = 0; s < cell.eers.size(); ++s) {
        os << kAblationVariants[v] << " " << kAblationConditions[c] << " " << s
           << " " << fmt_g(cell.eers[s]) << " " << fmt_g(cell.min_dcfs[s])
           << " " << fmt_g(cell.first_loss[s]) << " "
           << fmt_g(cell.final_loss[s]) << "\n";
      }
    }
  }
  os << "[result]\n";
  const double full = report.cells[0][1].mean_eer();
  const double bare = report.cells[3][1].mean_eer();
  os << "full_mean_eer_outliers = " << fmt_g(full) << "\n";
  os << "wo_caa_and_margin_mean_eer_outliers = " << fmt_g(bare) << "\n";
  os << "full_leq_bare = " << (full <= bare ? "yes" : "no") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"margin- and attention-based contrastive speaker embedding "
               "experiments"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data",
                                     "generate a synthetic speaker dataset");
  gen_cmd->add_option("--n-speakers", gen.n_speakers);
  gen_cmd->add_option("--utts-per-speaker", gen.utts_per_speaker);
  gen_cmd->add_option("--d-in", gen.d_in);
  gen_cmd->add_option("--spread", gen.model.spread);
  gen_cmd->add_option("--outlier-rate", gen.model.outlier_rate);
  gen_cmd->add_option("--outlier-shift", gen.model.outlier_shift);
  gen_cmd->add_option("--radius", gen.model.radius);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out)->required();
  gen_cmd->add_option("--report", gen.report)->required();
  gen_cmd->add_option("--trials", gen.trials_out);
  gen_cmd->add_option("--n-target", gen.n_target);
  gen_cmd->add_option("--n-nontarget", gen.n_nontarget);
  gen_cmd->add_option("--trial-seed", gen.trial_seed);

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck",
                                    "finite-difference check of every "
                                    "analytic gradient");
  gc_cmd->add_option("--seed", gc.opts.seed);
  gc_cmd->add_option("--instances", gc.opts.instances);
  gc_cmd->add_option("--tolerance", gc.opts.tolerance);
  gc_cmd->add_option("--report", gc.report);
  gc_cmd->add_option("--corrupt", gc.opts.corrupt,
                     "test hook: perturb the named kernel's gradient");

  TrainArgs tr;
  ConfigFlags tr_flags;
  auto* tr_cmd = app.add_subcommand("train", "train an encoder per config");
  tr_cmd->add_option("--config", tr.config_path, "key=value config file");
  tr_cmd->add_option("--data", tr.data)->required();
  tr_cmd->add_option("--checkpoint", tr.checkpoint)->required();
  tr_cmd->add_option("--report", tr.report)->required();
  tr_flags.attach(tr_cmd);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval",
                                    "score trials and report EER/minDCF/"
                                    "alignment/uniformity");
  ev_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  ev_cmd->add_option("--data", ev.data)->required();
  ev_cmd->add_option("--trials", ev.trials)->required();
  ev_cmd->add_option("--report", ev.report)->required();
  ev_cmd->add_option("--scores", ev.scores_out);
  ev_cmd->add_option("--p-target", ev.dcf.p_target);
  ev_cmd->add_option("--c-miss", ev.dcf.c_miss);
  ev_cmd->add_option("--c-fa", ev.dcf.c_fa);

  AblationArgs ab;
  ConfigFlags ab_flags;
  auto* ab_cmd = app.add_subcommand("ablation",
                                    "run {full, w/o margin, w/o CAA, w/o "
                                    "both} on clean and outlier conditions");
  ab_cmd->add_option("--n-speakers", ab.cfg.n_speakers);
  ab_cmd->add_option("--utts-per-speaker", ab.cfg.utts_per_speaker);
  ab_cmd->add_option("--d-in", ab.cfg.input_dim);
  ab_cmd->add_option("--spread", ab.cfg.spread);
  ab_cmd->add_option("--outlier-rate", ab.cfg.outlier_rate);
  ab_cmd->add_option("--outlier-shift", ab.cfg.outlier_shift);
  ab_cmd->add_option("--radius", ab.cfg.radius);
  ab_cmd->add_option("--n-seeds", ab.cfg.n_seeds);
  ab_cmd->add_option("--base-seed", ab.cfg.base_seed);
  ab_cmd->add_option("--n-target", ab.cfg.n_target);
  ab_cmd->add_option("--n-nontarget", ab.cfg.n_nontarget);
  ab_cmd->add_option("--report", ab.report)->required();
  std::string ab_config_path;
  ab_cmd->add_option("--config", ab_config_path, "key=value config file");
  ab_flags.attach(ab_cmd);

  try {
    app.parse(argc, argv);

    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc);
    if (tr_cmd->parsed()) {
      TrainConfig cfg;
      if (!tr.config_path.empty()) cfg = load_train_config(tr.config_path);
      tr_flags.apply(cfg);
      cfg.validate();
      return cmd_train(tr, cfg);
    }
    if (ev_cmd->parsed()) return cmd_eval(ev);
    if (ab_cmd->parsed()) {
      TrainConfig cfg;
      if (!ab_config_path.empty()) cfg = load_train_config(ab_config_path);
      ab_flags.apply(cfg);
      cfg.validate();
      ab.cfg.train = cfg;
      return cmd_ablation(ab);
    }
    return kExitOther;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
