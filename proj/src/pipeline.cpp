// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "topicdistill/mixture_io.hpp"

namespace topicdistill::cli {

using json = nlohmann::json;

namespace {

std::vector<corpus::TfVector> tf_vectors(const std::vector<corpus::LabeledDoc>& docs) {
  std::vector<corpus::TfVector> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.tf);
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("IoError", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("IoError", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json speed_json(const eval::SpeedResult& s) {
  return {{"mean_ratio", s.mean_ratio},         {"sd_ratio", s.sd_ratio},
          {"mean_lda_seconds", s.mean_lda_seconds}, {"mean_dnn_seconds", s.mean_dnn_seconds},
          {"ratios", s.ratios},                 {"repetitions", s.repetitions},
          {"threads", s.threads}};
}

eval::SpeedResult speed_from_json(const json& j) {
  eval::SpeedResult s;
  s.mean_ratio = j.at("mean_ratio").get<double>();
  s.sd_ratio = j.at("sd_ratio").get<double>();
  s.mean_lda_seconds = j.at("mean_lda_seconds").get<double>();
  s.mean_dnn_seconds = j.at("mean_dnn_seconds").get<double>();
  s.ratios = j.at("ratios").get<std::vector<double>>();
  s.repetitions = j.at("repetitions").get<int>();
  s.threads = j.at("threads").get<int>();
  return s;
}

json train_config_json(const distill::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"epochs", t.epochs},       {"batch_size", t.batch_size},
          {"seed", t.seed},                   {"lr_decay", t.lr_decay},   {"shuffle", t.shuffle},
          {"momentum", t.momentum},           {"weight_decay", t.weight_decay}};
}

json config_json(const ExperimentConfig& c) {
  const auto& em = c.sweep.lda;
  return {
      {"corpus", c.corpus.filename().string()},
      {"seed", c.seed},
      {"thresholds", {{"min_doc_len", c.thresholds.min_doc_len}, {"min_word_freq", c.thresholds.min_word_freq}}},
      {"topic_counts", c.topic_counts},
      {"lda",
       {{"alpha", em.alpha},
        {"init", em.init == lda::BetaInit::kRandom ? "random" : "uniform"},
        {"seed", em.seed},
        {"e_tol", em.e_step.tol},
        {"e_max_iter", em.e_step.max_iter},
        {"em_tol", em.em_tol},
        {"em_max_iter", em.em_max_iter},
        {"smoothing", em.smoothing}}},
      {"distill",
       {{"input_norm", distill::input_norm_name(c.sweep.input_norm)},
        {"2l", train_config_json(c.sweep.distill_2l)},
        {"3l", train_config_json(c.sweep.distill_3l)}}},
      {"eval",
       {{"repetitions", c.sweep.repetitions},
        {"classifier",
         {{"lambda", c.sweep.classifier.lambda},
          {"epochs", c.sweep.classifier.epochs},
          {"seed", c.sweep.classifier.seed}}}}},
      {"probe",
       {{"top", c.probe.top},
        {"scale", c.probe.scale},
        {"ranking", c.probe.ranking == probe::Ranking::kSigned ? "signed" : "absolute"}}},
  };
}

class StageRunner {
 public:
  StageRunner(const RunOptions& options, RunSummary& summary) : options_(options), summary_(summary) {}

  template <typename Fn>
  void run(const std::string& name, const std::vector<fs::path>& outputs, bool& dirty, Fn&& fn) {
    bool present = true;
    for (const auto& p : outputs) present = present && fs::exists(p);
    if (present && !dirty && !options_.force) {
      summary_.skipped.push_back(name);
      return;
    }
    if (options_.log) options_.log("stage " + name);
    try {
      fn();
    } catch (const Error& e) {
      throw StageError(name, e);
    }
    summary_.executed.push_back(name);
    dirty = true;
  }

 private:
  const RunOptions& options_;
  RunSummary& summary_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("IoError", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

corpus::Dataset stage_prepare(const fs::path& corpus_path, const corpus::PrepareOptions& options,
                              const fs::path& out) {
  auto ds = corpus::load_dataset(corpus_path, "jsonl", options);
  corpus::save_dataset(ds, out);
  return ds;
}

lda::LdaModel stage_train_lda(const fs::path& data_dir, const lda::EmOptions& options, const fs::path& out,
                              const Logger& log) {
  const auto ds = corpus::read_dataset(data_dir);
  const auto docs = tf_vectors(ds.train);
  auto result = lda::train_em(docs, ds.vocabulary.size(), options, [&](int iter, const lda::EmIteration& it) {
    if (log) log(fmt::format("  EM iteration {}: bound {:.6f} (relative change {:.3g})", iter + 1, it.elbo,
                             it.relative_change));
  });
  lda::save_model(result.model, out);
  return std::move(result.model);
}

void stage_infer_lda(const fs::path& model_path, const fs::path& data_dir, const std::string& split,
                     const lda::InferOptions& options, const fs::path& out) {
  const auto model = lda::load_model(model_path);
  const auto ds = corpus::read_dataset(data_dir);
  std::vector<MixtureRow> rows;
  for (const auto& d : ds.split(split)) rows.push_back({d.id, lda::infer_theta(model, d.tf, options)});
  write_theta_tsv(out, rows);
}

distill::MlpModel stage_distill(const fs::path& data_dir, const fs::path& theta_path, distill::Variant variant,
                                const distill::TrainConfig& config, distill::InputNorm input_norm,
                                const fs::path& out, const std::optional<fs::path>& validation_theta,
                                const std::optional<fs::path>& history_out) {
  const auto ds = corpus::read_dataset(data_dir);
  const auto thetas = join_by_id(ds.train, read_theta_tsv(theta_path));
  if (!thetas.empty() && thetas.front().size() < 2) throw dimension_mismatch("topic mixtures need K >= 2");
  const std::size_t K = thetas.empty() ? 0 : thetas.front().size();
  const auto train_pairs = eval::make_pairs(ds.train, thetas);
  std::vector<distill::TrainingPair> validation;
  if (validation_theta) validation = eval::make_pairs(ds.test, join_by_id(ds.test, read_theta_tsv(*validation_theta)));

  const distill::MlpArchitecture arch{variant, ds.vocabulary.size(), K};
  auto result = distill::train_sgd(distill::init_mlp(arch, config.seed, input_norm), train_pairs, config, validation);
  distill::save_model(result.model, out);
  if (history_out) {
    std::ofstream h(*history_out);
    h << "epoch\ttrain_loss\tvalidation_loss\n";
    for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
      h << fmt::format("{}\t{:.17g}\t{}\n", e + 1, result.train_loss[e],
                       e < result.validation_loss.size() ? fmt::format("{:.17g}", result.validation_loss[e]) : "");
    }
  }
  return std::move(result.model);
}

void stage_infer_dnn(const fs::path& model_path, const fs::path& data_dir, const std::string& split,
                     const fs::path& out) {
  const auto model = distill::load_model(model_path);
  const auto ds = corpus::read_dataset(data_dir);
  std::vector<MixtureRow> rows;
  for (const auto& d : ds.split(split)) rows.push_back({d.id, distill::forward(model, d.tf)});
  write_theta_tsv(out, rows);
}

eval::SpeedResult stage_benchmark(const fs::path& lda_path, const fs::path& dnn_path, const fs::path& data_dir,
                                  const std::string& split, int repetitions, const lda::InferOptions& options) {
  const auto lda_model = lda::load_model(lda_path);
  const auto dnn = distill::load_model(dnn_path);
  const auto ds = corpus::read_dataset(data_dir);
  return eval::benchmark_speed(lda_model, dnn, tf_vectors(ds.split(split)), repetitions, options);
}

probe::ProbeReport stage_probe(const fs::path& model_path, const fs::path& vocab_path,
                               const probe::ProbeOptions& options, const fs::path& out,
                               const std::optional<fs::path>& edges_out) {
  const auto model = distill::load_model(model_path);
  std::ifstream in(vocab_path);
  if (!in) throw DataError("IoError", "cannot open " + vocab_path.string());
  std::vector<std::string> words;
  for (std::string w; std::getline(in, w);) words.push_back(w);
  const auto vocab = corpus::Vocabulary::from_words(std::move(words), 1);
  auto report = probe::probe_report(model, vocab, options);
  probe::write_probe_report(report, out, edges_out.value_or(out.parent_path() / "edges.tsv"));
  return report;
}

RunSummary run_pipeline(const ExperimentConfig& config, const RunOptions& options) {
  RunSummary summary;
  StageRunner runner(options, summary);
  const fs::path root = config.output;
  const fs::path data = root / "data";
  fs::create_directories(root);

  bool prepared_dirty = false;
  runner.run("prepare",
             {data / "vocab.txt", data / "train.tf", data / "test.tf", data / "train.ids", data / "test.ids",
              data / "meta.json"},
             prepared_dirty, [&] { stage_prepare(config.corpus, config.thresholds, data); });

  bool any_dirty = prepared_dirty;
  eval::EvalReport report;
  json timing = json::object();
  std::vector<fs::path> deterministic_files = {data / "vocab.txt", data / "train.tf", data / "test.tf",
                                               data / "train.ids", data / "test.ids", data / "meta.json"};
  std::optional<corpus::Dataset> dataset;
  auto load_dataset = [&]() -> const corpus::Dataset& {
    if (!dataset) dataset = corpus::read_dataset(data);
    return *dataset;
  };

  for (std::size_t K : config.topic_counts) {
    const fs::path dir = root / fmt::format("k{}", K);
    fs::create_directories(dir);
    const auto tag = [&](const char* stage) { return fmt::format("{}[K={}]", stage, K); };
    bool dirty = prepared_dirty;

    auto em = config.sweep.lda;
    em.num_topics = K;
    em.threads = options.threads;
    runner.run(tag("train-lda"), {dir / "lda.json"}, dirty,
               [&] { stage_train_lda(data, em, dir / "lda.json", options.log); });
    runner.run(tag("infer-lda"), {dir / "theta_train.tsv", dir / "theta_test.tsv"}, dirty, [&] {
      stage_infer_lda(dir / "lda.json", data, "train", em.e_step, dir / "theta_train.tsv");
      stage_infer_lda(dir / "lda.json", data, "test", em.e_step, dir / "theta_test.tsv");
    });
    runner.run(tag("distill"),
               {dir / "dnn_2l.json", dir / "dnn_3l.json", dir / "history_2l.tsv", dir / "history_3l.tsv"}, dirty,
               [&] {
                 stage_distill(data, dir / "theta_train.tsv", distill::Variant::kTwoLayer, config.sweep.distill_2l,
                               config.sweep.input_norm, dir / "dnn_2l.json", dir / "theta_test.tsv",
                               dir / "history_2l.tsv");
                 stage_distill(data, dir / "theta_train.tsv", distill::Variant::kThreeLayer, config.sweep.distill_3l,
                               config.sweep.input_norm, dir / "dnn_3l.json", dir / "theta_test.tsv",
                               dir / "history_3l.tsv");
               });
    runner.run(tag("infer-dnn"), {dir / "theta_dnn_2l.tsv", dir / "theta_dnn_3l.tsv"}, dirty, [&] {
      stage_infer_dnn(dir / "dnn_2l.json", data, "test", dir / "theta_dnn_2l.tsv");
      stage_infer_dnn(dir / "dnn_3l.json", data, "test", dir / "theta_dnn_3l.tsv");
    });

    std::optional<eval::TopicArtifacts> artifacts;
    auto load_artifacts = [&]() -> const eval::TopicArtifacts& {
      if (!artifacts) {
        const auto& ds = load_dataset();
        artifacts.emplace();
        artifacts->lda = lda::load_model(dir / "lda.json");
        artifacts->theta_train = join_by_id(ds.train, read_theta_tsv(dir / "theta_train.tsv"));
        artifacts->theta_test = join_by_id(ds.test, read_theta_tsv(dir / "theta_test.tsv"));
        artifacts->dnn2l = distill::load_model(dir / "dnn_2l.json");
        artifacts->dnn3l = distill::load_model(dir / "dnn_3l.json");
      }
      return *artifacts;
    };

    runner.run(tag("evaluate"), {dir / "eval.json"}, dirty, [&] {
      const auto row = eval::evaluate_topic_count(load_dataset(), load_artifacts(), config.sweep);
      write_json(dir / "eval.json", {{"K", row.K},
                                     {"acc_pca", row.acc_pca},
                                     {"acc_lda", row.acc_lda},
                                     {"acc_dnn2l", row.acc_dnn2l},
                                     {"acc_dnn3l", row.acc_dnn3l},
                                     {"kl_2l", row.kl_2l},
                                     {"kl_3l", row.kl_3l}});
    });
    runner.run(tag("benchmark"), {dir / "benchmark.json"}, dirty, [&] {
      eval::EvalRow row;
      eval::benchmark_topic_count(load_dataset(), load_artifacts(), config.sweep, row);
      write_json(dir / "benchmark.json", {{"2l", speed_json(row.speed_2l)}, {"3l", speed_json(row.speed_3l)}});
    });
    runner.run(tag("probe"), {dir / "probe_2l.tsv", dir / "probe_3l.tsv", dir / "edges_3l.tsv"}, dirty, [&] {
      stage_probe(dir / "dnn_2l.json", data / "vocab.txt", config.probe, dir / "probe_2l.tsv", dir / "edges_2l.tsv");
      stage_probe(dir / "dnn_3l.json", data / "vocab.txt", config.probe, dir / "probe_3l.tsv", dir / "edges_3l.tsv");
    });

    const auto ej = read_json(dir / "eval.json");
    const auto bj = read_json(dir / "benchmark.json");
    eval::EvalRow row;
    row.K = K;
    row.acc_pca = ej.at("acc_pca").get<double>();
    row.acc_lda = ej.at("acc_lda").get<double>();
    row.acc_dnn2l = ej.at("acc_dnn2l").get<double>();
    row.acc_dnn3l = ej.at("acc_dnn3l").get<double>();
    row.kl_2l = ej.at("kl_2l").get<double>();
    row.kl_3l = ej.at("kl_3l").get<double>();
    row.speed_2l = speed_from_json(bj.at("2l"));
    row.speed_3l = speed_from_json(bj.at("3l"));
    report.rows.push_back(row);
    timing[fmt::format("k{}", K)] = bj;

    for (const char* f : {"lda.json", "theta_train.tsv", "theta_test.tsv", "dnn_2l.json", "dnn_3l.json",
                          "history_2l.tsv", "history_3l.tsv", "theta_dnn_2l.tsv", "theta_dnn_3l.tsv", "eval.json",
                          "probe_2l.tsv", "probe_3l.tsv", "edges_3l.tsv"}) {
      deterministic_files.push_back(dir / f);
    }
    any_dirty = any_dirty || dirty;
  }

  const fs::path report_dir = root / "report";
  const fs::path manifest_path = root / "manifest.json";
  runner.run("report", {report_dir / "report.csv", report_dir / "accuracy.tsv", report_dir / "kl.tsv",
                        report_dir / "speed.tsv", manifest_path},
             any_dirty, [&] {
               eval::write_report(report, report_dir);
               deterministic_files.push_back(report_dir / "accuracy.tsv");
               deterministic_files.push_back(report_dir / "kl.tsv");
               json files = json::object();
               for (const auto& f : deterministic_files) files[fs::relative(f, root).generic_string()] = sha256_file(f);
               json manifest = {
                   {"version", 1},
                   {"config", config_json(config)},
                   {"corpus_sha256", sha256_file(config.corpus)},
                   {"files", files},
                   {"report_deterministic_sha256", sha256_hex(eval::deterministic_columns(report))},
                   {"timing", timing},
               };
               write_json(manifest_path, manifest);
             });
  summary.manifest = manifest_path;
  return summary;
}

}  // namespace topicdistill::cli
