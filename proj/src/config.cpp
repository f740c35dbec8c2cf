// SPDX-License-Identifier: Apache-2.0
#include "topicdistill/config.hpp"

#include <optional>
#include <set>

#include <yaml-cpp/yaml.h>

#include "topicdistill/error.hpp"

namespace topicdistill::cli {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& diags) : diags_(diags) {}

  void error(const std::string& field, const std::string& message) { diags_.push_back({field, message}); }

  // Flags keys of `node` outside `known`. Returns false when node is not a map.
  bool expect_map(const YAML::Node& node, const std::string& field, std::initializer_list<const char*> known) {
    if (!node.IsMap()) {
      error(field.empty() ? "<root>" : field, "expected a mapping");
      return false;
    }
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) error(join(field, key), "unknown field");
    }
    return true;
  }

  template <typename T>
  std::optional<T> scalar(const YAML::Node& parent, const std::string& parent_field, const char* key) {
    const auto node = parent[key];
    if (!node) return std::nullopt;
    const auto field = join(parent_field, key);
    if (!node.IsScalar()) {
      error(field, "expected a scalar");
      return std::nullopt;
    }
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      error(field, "cannot read '" + node.Scalar() + "' as the expected type");
      return std::nullopt;
    }
  }

  template <typename T, typename Check>
  void read(const YAML::Node& parent, const std::string& parent_field, const char* key, T& target, Check check,
            const char* requirement) {
    if (auto v = scalar<T>(parent, parent_field, key)) {
      if (check(*v)) {
        target = *v;
      } else {
        error(join(parent_field, key), requirement);
      }
    }
  }

  static std::string join(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
  }

 private:
  std::vector<Diagnostic>& diags_;
};

auto positive = [](double v) { return v > 0.0; };
auto non_negative = [](double v) { return v >= 0.0; };
auto at_least_one = [](long long v) { return v >= 1; };

void read_train_config(Reader& r, const YAML::Node& node, const std::string& field, distill::TrainConfig& tc,
                       bool& seed_given) {
  if (!r.expect_map(node, field, {"learning_rate", "epochs", "batch_size", "seed", "lr_decay", "shuffle", "momentum",
                                  "weight_decay"})) {
    return;
  }
  r.read(node, field, "learning_rate", tc.learning_rate, positive, "must be > 0");
  long long epochs = tc.epochs, batch = static_cast<long long>(tc.batch_size);
  r.read(node, field, "epochs", epochs, at_least_one, "must be >= 1");
  r.read(node, field, "batch_size", batch, at_least_one, "must be >= 1");
  tc.epochs = static_cast<int>(epochs);
  tc.batch_size = static_cast<std::size_t>(batch);
  r.read(node, field, "lr_decay", tc.lr_decay, positive, "must be > 0");
  r.read(node, field, "shuffle", tc.shuffle, [](bool) { return true; }, "");
  r.read(node, field, "momentum", tc.momentum, [](double v) { return v >= 0.0 && v < 1.0; }, "must be in [0, 1)");
  r.read(node, field, "weight_decay", tc.weight_decay, non_negative, "must be >= 0");
  if (auto seed = r.scalar<std::uint64_t>(node, field, "seed")) {
    tc.seed = *seed;
    seed_given = true;
  }
}

ExperimentConfig parse(const fs::path& path, std::vector<Diagnostic>& diags) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::ParserException& e) {
    throw ParseError(path.string(), static_cast<std::size_t>(e.mark.line + 1), e.msg);
  } catch (const YAML::BadFile&) {
    throw DataError("IoError", "cannot open " + path.string());
  }

  Reader r(diags);
  ExperimentConfig cfg;
  if (!r.expect_map(root, "", {"corpus", "output", "seed", "thresholds", "topic_counts", "lda", "distill", "eval",
                               "probe"})) {
    return cfg;
  }
  const fs::path base = path.parent_path();

  if (auto corpus = r.scalar<std::string>(root, "", "corpus")) {
    cfg.corpus = fs::path(*corpus).is_absolute() ? fs::path(*corpus) : base / *corpus;
    if (!fs::exists(cfg.corpus)) r.error("corpus", "file not found: " + cfg.corpus.string());
  } else if (!root["corpus"]) {
    r.error("corpus", "required");
  }
  if (auto output = r.scalar<std::string>(root, "", "output")) {
    cfg.output = fs::path(*output).is_absolute() ? fs::path(*output) : base / *output;
  } else if (!root["output"]) {
    r.error("output", "required");
  }
  if (auto seed = r.scalar<std::uint64_t>(root, "", "seed")) cfg.seed = *seed;

  if (auto t = root["thresholds"]) {
    if (r.expect_map(t, "thresholds", {"min_doc_len", "min_word_freq"})) {
      long long min_len = 0, min_freq = 1;
      r.read(t, "thresholds", "min_doc_len", min_len, [](long long v) { return v >= 0; }, "must be >= 0");
      r.read(t, "thresholds", "min_word_freq", min_freq, at_least_one, "must be >= 1");
      cfg.thresholds.min_doc_len = static_cast<std::size_t>(min_len);
      cfg.thresholds.min_word_freq = min_freq;
    }
  }

  if (auto tc = root["topic_counts"]) {
    if (!tc.IsSequence() || tc.size() == 0) {
      r.error("topic_counts", "expected a non-empty list");
    } else {
      for (std::size_t i = 0; i < tc.size(); ++i) {
        const auto field = "topic_counts[" + std::to_string(i) + "]";
        long long k = 0;
        try {
          k = tc[i].as<long long>();
        } catch (const YAML::Exception&) {
          r.error(field, "expected an integer");
          continue;
        }
        if (k < 2) {
          r.error(field, "must be >= 2");
        } else if (!cfg.topic_counts.empty() && static_cast<std::size_t>(k) <= cfg.topic_counts.back()) {
          r.error(field, "topic counts must be strictly ascending");
        } else {
          cfg.topic_counts.push_back(static_cast<std::size_t>(k));
        }
      }
    }
  } else {
    r.error("topic_counts", "required");
  }

  bool lda_seed = false, seed_2l = false, seed_3l = false, clf_seed = false;
  auto& em = cfg.sweep.lda;
  if (auto l = root["lda"]) {
    if (r.expect_map(l, "lda",
                     {"alpha", "init", "seed", "e_tol", "e_max_iter", "em_tol", "em_max_iter", "smoothing"})) {
      r.read(l, "lda", "alpha", em.alpha, non_negative, "must be >= 0 (0 selects 50/K)");
      if (auto init = r.scalar<std::string>(l, "lda", "init")) {
        if (*init == "uniform") {
          em.init = lda::BetaInit::kUniform;
        } else if (*init == "random") {
          em.init = lda::BetaInit::kRandom;
        } else {
          r.error("lda.init", "expected uniform or random");
        }
      }
      if (auto seed = r.scalar<std::uint64_t>(l, "lda", "seed")) {
        em.seed = *seed;
        lda_seed = true;
      }
      long long e_iter = em.e_step.max_iter, em_iter = em.em_max_iter;
      r.read(l, "lda", "e_tol", em.e_step.tol, positive, "must be > 0");
      r.read(l, "lda", "e_max_iter", e_iter, at_least_one, "must be >= 1");
      r.read(l, "lda", "em_tol", em.em_tol, positive, "must be > 0");
      r.read(l, "lda", "em_max_iter", em_iter, at_least_one, "must be >= 1");
      r.read(l, "lda", "smoothing", em.smoothing, positive, "must be > 0");
      em.e_step.max_iter = static_cast<int>(e_iter);
      em.em_max_iter = static_cast<int>(em_iter);
    }
  }

  if (auto d = root["distill"]) {
    if (r.expect_map(d, "distill", {"input_norm", "2l", "3l"})) {
      if (auto norm = r.scalar<std::string>(d, "distill", "input_norm")) {
        if (*norm == "none" || *norm == "l1") {
          cfg.sweep.input_norm = distill::parse_input_norm(*norm);
        } else {
          r.error("distill.input_norm", "expected none or l1");
        }
      }
      if (auto n = d["2l"]) read_train_config(r, n, "distill.2l", cfg.sweep.distill_2l, seed_2l);
      if (auto n = d["3l"]) read_train_config(r, n, "distill.3l", cfg.sweep.distill_3l, seed_3l);
    }
  }

  if (auto e = root["eval"]) {
    if (r.expect_map(e, "eval", {"repetitions", "classifier"})) {
      long long reps = cfg.sweep.repetitions;
      r.read(e, "eval", "repetitions", reps, at_least_one, "must be >= 1");
      cfg.sweep.repetitions = static_cast<int>(reps);
      if (auto c = e["classifier"]) {
        if (r.expect_map(c, "eval.classifier", {"lambda", "epochs", "seed"})) {
          auto& cc = cfg.sweep.classifier;
          long long epochs = cc.epochs;
          r.read(c, "eval.classifier", "lambda", cc.lambda, positive, "must be > 0");
          r.read(c, "eval.classifier", "epochs", epochs, at_least_one, "must be >= 1");
          cc.epochs = static_cast<int>(epochs);
          if (auto seed = r.scalar<std::uint64_t>(c, "eval.classifier", "seed")) {
            cc.seed = *seed;
            clf_seed = true;
          }
        }
      }
    }
  }

  if (auto p = root["probe"]) {
    if (r.expect_map(p, "probe", {"top", "scale", "ranking"})) {
      long long top = static_cast<long long>(cfg.probe.top);
      r.read(p, "probe", "top", top, at_least_one, "must be >= 1");
      cfg.probe.top = static_cast<std::size_t>(top);
      r.read(p, "probe", "scale", cfg.probe.scale, positive, "must be > 0");
      if (auto ranking = r.scalar<std::string>(p, "probe", "ranking")) {
        if (*ranking == "signed") {
          cfg.probe.ranking = probe::Ranking::kSigned;
        } else if (*ranking == "absolute") {
          cfg.probe.ranking = probe::Ranking::kAbsolute;
        } else {
          r.error("probe.ranking", "expected signed or absolute");
        }
      }
    }
  }

  if (!lda_seed) em.seed = cfg.seed;
  if (!seed_2l) cfg.sweep.distill_2l.seed = cfg.seed;
  if (!seed_3l) cfg.sweep.distill_3l.seed = cfg.seed;
  if (!clf_seed) cfg.sweep.classifier.seed = cfg.seed;
  return cfg;
}

}  // namespace

std::vector<Diagnostic> validate_config(const fs::path& path) {
  std::vector<Diagnostic> diags;
  parse(path, diags);
  return diags;
}

ExperimentConfig load_config(const fs::path& path) {
  std::vector<Diagnostic> diags;
  auto cfg = parse(path, diags);
  if (!diags.empty()) {
    std::string message = path.string() + " is invalid:";
    for (const auto& d : diags) message += "\n  " + d.field + ": " + d.message;
    throw DataError("InvalidConfig", message);
  }
  return cfg;
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.sweep.lda.seed = seed;
  config.sweep.distill_2l.seed = seed;
  config.sweep.distill_3l.seed = seed;
  config.sweep.classifier.seed = seed;
}

}  // namespace topicdistill::cli
