// SPDX-License-Identifier: Apache-2.0
//
// topicdistill: prepare corpora, train the LDA teacher, distill students,
// evaluate, benchmark and probe.
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "topicdistill/config.hpp"
#include "topicdistill/error.hpp"
#include "topicdistill/mixture_io.hpp"
#include "topicdistill/pipeline.hpp"

namespace td = topicdistill;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumericFailure = 3 };

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  unsigned threads = 1;
  bool force = false;
  bool quiet = false;
};

void log_line(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cerr << line << '\n';
}

std::vector<std::size_t> parse_topics(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    long long k = 0;
    try {
      k = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || k < 2) throw CLI::ValidationError("--topics", "bad topic count '" + item + "'");
    out.push_back(static_cast<std::size_t>(k));
  }
  if (out.empty()) throw CLI::ValidationError("--topics", "no topic counts given");
  return out;
}

td::lda::BetaInit parse_init(const std::string& s) {
  return s == "uniform" ? td::lda::BetaInit::kUniform : td::lda::BetaInit::kRandom;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LDA topic-model distillation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t s) { g.seed = s, g.seed_given = true; }, "Random seed for every stage")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for LDA training (timing stages always use 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--force", g.force, "Re-run stages whose outputs already exist");
  app.add_flag("--quiet", g.quiet, "Only print errors");
  std::function<int()> action;

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Tokenize a JSONL corpus and write a dataset bundle");
  fs::path input, out, data, model, theta, vocab, lda_path, dnn_path, config_path;
  std::size_t min_doc_len = 0;
  std::int64_t min_word_freq = 1;
  prepare->add_option("--input", input, "Corpus in JSON Lines format")->required()->check(CLI::ExistingFile);
  prepare->add_option("--min-doc-len", min_doc_len, "Minimum document length in tokens")->capture_default_str();
  prepare->add_option("--min-word-freq", min_word_freq, "Minimum corpus frequency of a word")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  prepare->add_option("--out", out, "Output directory")->required();
  prepare->callback([&] {
    action = [&] {
      const auto ds = td::cli::stage_prepare(input, {min_doc_len, min_word_freq}, out);
      log_line(g, fmt::format("V={} train={} test={} classes={}", ds.vocabulary.size(), ds.train.size(),
                              ds.test.size(), ds.labels.size()));
      return kOk;
    };
  });

  // train-lda
  auto* train_lda = app.add_subcommand("train-lda", "Fit LDA by variational EM");
  std::size_t topics = 10;
  double alpha = 0.0;
  std::string init = "random";
  td::lda::EmOptions em;
  train_lda->add_option("--data", data, "Dataset bundle directory")->required()->check(CLI::ExistingDirectory);
  train_lda->add_option("--topics", topics, "Number of topics K")->required()->check(CLI::Range(2, 100000));
  train_lda->add_option("--alpha", alpha, "Symmetric Dirichlet prior (default 50/K)");
  train_lda->add_option("--init", init, "Topic initialization")
      ->check(CLI::IsMember({"uniform", "random"}))
      ->capture_default_str();
  train_lda->add_option("--e-tol", em.e_step.tol, "E-step tolerance on mean |delta gamma|")->capture_default_str();
  train_lda->add_option("--e-max-iter", em.e_step.max_iter, "E-step iteration cap")->capture_default_str();
  train_lda->add_option("--em-tol", em.em_tol, "Relative bound improvement to stop EM")->capture_default_str();
  train_lda->add_option("--em-max-iter", em.em_max_iter, "EM iteration cap")->capture_default_str();
  train_lda->add_option("--out", out, "Model file (JSON)")->required();
  train_lda->callback([&] {
    action = [&] {
      em.num_topics = topics;
      em.alpha = alpha;
      em.init = parse_init(init);
      em.seed = g.seed;
      em.threads = g.threads;
      td::cli::stage_train_lda(data, em, out, [&](const std::string& l) { log_line(g, l); });
      return kOk;
    };
  });

  // infer-lda
  auto* infer_lda = app.add_subcommand("infer-lda", "Infer LDA topic mixtures for a split");
  std::string split = "test";
  td::lda::InferOptions infer_opts;
  infer_lda->add_option("--model", model, "LDA model file")->required()->check(CLI::ExistingFile);
  infer_lda->add_option("--data", data, "Dataset bundle directory")->required()->check(CLI::ExistingDirectory);
  infer_lda->add_option("--split", split, "train or test")->capture_default_str();
  infer_lda->add_option("--e-tol", infer_opts.tol, "Tolerance on mean |delta gamma|")->capture_default_str();
  infer_lda->add_option("--e-max-iter", infer_opts.max_iter, "Iteration cap")->capture_default_str();
  infer_lda->add_option("--out", out, "Output theta.tsv")->required();
  infer_lda->callback([&] {
    action = [&] {
      td::cli::stage_infer_lda(model, data, split, infer_opts, out);
      return kOk;
    };
  });

  // distill
  auto* distill_cmd = app.add_subcommand("distill", "Train a student network on LDA topic mixtures");
  std::string variant = "3l", input_norm = "none";
  td::distill::TrainConfig train_cfg;
  std::optional<fs::path> validation_theta, history;
  distill_cmd->add_option("--data", data, "Dataset bundle directory")->required()->check(CLI::ExistingDirectory);
  distill_cmd->add_option("--theta", theta, "Teacher mixtures for the training split")
      ->required()
      ->check(CLI::ExistingFile);
  distill_cmd->add_option("--variant", variant, "2l or 3l")->check(CLI::IsMember({"2l", "3l"}))->capture_default_str();
  distill_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate")->capture_default_str();
  distill_cmd->add_option("--lr-decay", train_cfg.lr_decay, "Per-epoch learning-rate factor")->capture_default_str();
  distill_cmd->add_option("--epochs", train_cfg.epochs, "Epochs")->capture_default_str();
  distill_cmd->add_option("--batch", train_cfg.batch_size, "Minibatch size")->capture_default_str();
  distill_cmd->add_option("--momentum", train_cfg.momentum, "Momentum (0 = plain SGD)")->capture_default_str();
  distill_cmd->add_option("--weight-decay", train_cfg.weight_decay, "L2 weight decay")->capture_default_str();
  distill_cmd->add_option("--input-norm", input_norm, "none or l1")
      ->check(CLI::IsMember({"none", "l1"}))
      ->capture_default_str();
  distill_cmd->add_option("--validation-theta", validation_theta, "Teacher mixtures for the test split");
  distill_cmd->add_option("--history", history, "Write per-epoch losses to this TSV");
  distill_cmd->add_option("--out", out, "Model file (JSON)")->required();
  distill_cmd->callback([&] {
    action = [&] {
      train_cfg.seed = g.seed;
      td::cli::stage_distill(data, theta, td::distill::parse_variant(variant), train_cfg,
                             td::distill::parse_input_norm(input_norm), out, validation_theta, history);
      return kOk;
    };
  });

  // infer-dnn
  auto* infer_dnn = app.add_subcommand("infer-dnn", "Predict topic mixtures with a student network");
  infer_dnn->add_option("--model", model, "Student model file")->required()->check(CLI::ExistingFile);
  infer_dnn->add_option("--data", data, "Dataset bundle directory")->required()->check(CLI::ExistingDirectory);
  infer_dnn->add_option("--split", split, "train or test")->capture_default_str();
  infer_dnn->add_option("--out", out, "Output theta_dnn.tsv")->required();
  infer_dnn->callback([&] {
    action = [&] {
      td::cli::stage_infer_dnn(model, data, split, out);
      return kOk;
    };
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Sweep topic counts: accuracy, KL and speed");
  std::string topics_text = "10,20,30,40,50,60,70";
  td::eval::SweepConfig sweep;
  evaluate->add_option("--data", data, "Dataset bundle directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--topics", topics_text, "Comma-separated topic counts")->capture_default_str();
  evaluate->add_option("--reps", sweep.repetitions, "Timing repetitions")->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--out", out, "Report directory")->required();
  evaluate->callback([&] {
    action = [&] {
      const auto ks = parse_topics(topics_text);
      sweep.lda.seed = sweep.distill_2l.seed = sweep.distill_3l.seed = sweep.classifier.seed = g.seed;
      sweep.threads = g.threads;
      const auto ds = td::corpus::read_dataset(data);
      const auto report = td::eval::run_sweep(ds, ks, sweep, [&](const std::string& l) { log_line(g, l); });
      td::eval::write_report(report, out);
      return kOk;
    };
  });

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Time LDA inference against a student forward pass");
  int reps = 10;
  bench->add_option("--lda", lda_path, "LDA model file")->required()->check(CLI::ExistingFile);
  bench->add_option("--dnn", dnn_path, "Student model file")->required()->check(CLI::ExistingFile);
  bench->add_option("--data", data, "Dataset bundle directory")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--split", split, "train or test")->capture_default_str();
  bench->add_option("--reps", reps, "Repetitions")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--e-tol", infer_opts.tol, "LDA tolerance on mean |delta gamma|")->capture_default_str();
  bench->add_option("--e-max-iter", infer_opts.max_iter, "LDA iteration cap")->capture_default_str();
  bench->callback([&] {
    action = [&] {
      const auto r = td::cli::stage_benchmark(lda_path, dnn_path, data, split, reps, infer_opts);
      std::cout << fmt::format("lda_seconds\t{:.6g}\ndnn_seconds\t{:.6g}\nratio_mean\t{:.4g}\nratio_sd\t{:.4g}\n"
                               "repetitions\t{}\nthreads\t{}\nreference_band\t10-200x (published, hardware-dependent)\n",
                               r.mean_lda_seconds, r.mean_dnn_seconds, r.mean_ratio, r.sd_ratio, r.repetitions,
                               r.threads);
      return kOk;
    };
  });

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "Top words per hidden neuron of a student");
  td::probe::ProbeOptions probe_opts;
  bool absolute = false;
  std::optional<fs::path> edges;
  probe_cmd->add_option("--model", model, "Student model file")->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--vocab", vocab, "vocab.txt of the dataset bundle")->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--top", probe_opts.top, "Words per neuron")->check(CLI::PositiveNumber)->capture_default_str();
  probe_cmd->add_option("--scale", probe_opts.scale, "One-hot magnitude")->capture_default_str();
  probe_cmd->add_flag("--abs", absolute, "Rank by absolute activation");
  probe_cmd->add_option("--edges", edges, "Inter-layer edge table (default: edges.tsv next to --out)");
  probe_cmd->add_option("--out", out, "Output probe.tsv")->required();
  probe_cmd->callback([&] {
    action = [&] {
      probe_opts.ranking = absolute ? td::probe::Ranking::kAbsolute : td::probe::Ranking::kSigned;
      td::cli::stage_probe(model, vocab, probe_opts, out, edges);
      return kOk;
    };
  });

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
  run->add_option("--config", config_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  run->callback([&] {
    action = [&] {
      auto cfg = td::cli::load_config(config_path);
      if (g.seed_given) td::cli::override_seed(cfg, g.seed);
      td::cli::RunOptions opts;
      opts.force = g.force;
      opts.threads = g.threads;
      opts.log = [&](const std::string& l) { log_line(g, l); };
      const auto summary = td::cli::run_pipeline(cfg, opts);
      log_line(g, fmt::format("{} stages run, {} skipped; manifest {}", summary.executed.size(),
                              summary.skipped.size(), summary.manifest.string()));
      return kOk;
    };
  });

  // validate-config
  auto* validate = app.add_subcommand("validate-config", "Check an experiment config");
  validate->add_option("config", config_path, "Experiment config (YAML)")->required();
  validate->callback([&] {
    action = [&] {
      const auto diags = td::cli::validate_config(config_path);
      for (const auto& d : diags) std::cout << d.field << ": " << d.message << '\n';
      if (diags.empty()) log_line(g, "ok");
      return diags.empty() ? kOk : kDataError;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    return action();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const td::cli::StageError& e) {
    std::cerr << "error in stage " << e.what() << '\n';
    return e.category() == td::Error::Category::kNumeric ? kNumericFailure : kDataError;
  } catch (const td::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.category() == td::Error::Category::kNumeric ? kNumericFailure : kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
}
