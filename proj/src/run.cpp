#include "fgkf/run.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fgkf/common.hpp"
#include "fgkf/metrics.hpp"

namespace fgkf {
namespace {

namespace fs = std::filesystem;

void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("missing required path '") + key + "'");
}

Corpus load_reported(const std::string& path, const TagScheme& scheme, Domain domain,
                     Split split) {
  LoadReport report = load_column_corpus(path, scheme, domain, split);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(report.corpus);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

std::string artifact(const RunConfig& config, const std::string& name) {
  return (fs::path(config.out_dir) / name).string();
}

void run_synth(const RunConfig& config) {
  SynthOutput out = synth_generate(config.synth);
  write_column_corpus(out.source_train, out.scheme, artifact(config, "source_train.txt"));
  write_column_corpus(out.target_train, out.scheme, artifact(config, "target_train.txt"));
  write_column_corpus(out.target_dev, out.scheme, artifact(config, "target_dev.txt"));
  write_column_corpus(out.target_test, out.scheme, artifact(config, "target_test.txt"));
  write_regime_file(out.train_regime, artifact(config, "target_train.regime"));
  write_regime_file(out.dev_regime, artifact(config, "target_dev.regime"));
  write_regime_file(out.test_regime, artifact(config, "target_test.regime"));
  std::cout << "synth: " << out.source_train.size() << " source, " << out.target_train.size()
            << "/" << out.target_dev.size() << "/" << out.target_test.size()
            << " target train/dev/test sentences in " << config.out_dir << '\n';
}

void run_train(const RunConfig& config) {
  TagScheme scheme = scheme_from_config(config);
  require_path(config.target_train, "target_train");
  require_path(config.target_dev, "target_dev");

  const bool needs_source = config.train.teach_steps > 0 || config.train.warmup;
  Corpus source;
  if (needs_source || !config.source_train.empty()) {
    require_path(config.source_train, "source_train");
    source = load_reported(config.source_train, scheme, Domain::source, Split::train);
  }
  Corpus target_train =
      load_reported(config.target_train, scheme, Domain::target, Split::train);
  Corpus target_dev = load_reported(config.target_dev, scheme, Domain::target, Split::dev);

  std::vector<const Corpus*> train_corpora;
  if (!source.sentences.empty()) train_corpora.push_back(&source);
  train_corpora.push_back(&target_train);
  Vocabulary vocab = Vocabulary::build(train_corpora);

  Trainer trainer(config.train, scheme, vocab, std::move(source), std::move(target_train),
                  std::move(target_dev));

  std::vector<EpisodeRow> history;
  if (config.method == "source-only") {
    trainer.warmup_phase();
    EpisodeRow row;
    row.episode = 0;
    row.dev_metric = trainer.evaluate_dev();
    history.push_back(row);
    std::cout << "train: source-only dev metric " << row.dev_metric << '\n';
  } else {
    Trainer::Result result = trainer.train();
    history = std::move(result.history);
    std::cout << "train: best dev metric " << result.best_dev << " at episode "
              << result.best_episode << " (" << result.episodes_run << " episodes)\n";
  }
  write_history_csv(history, artifact(config, "metrics.csv"));
  save_checkpoint(artifact(config, "checkpoint.txt"), trainer.params(), trainer.vocab(),
                  trainer.scheme());
}

std::string checkpoint_path(const RunConfig& config) {
  if (!config.checkpoint.empty()) return config.checkpoint;
  return artifact(config, "checkpoint.txt");
}

void run_evaluate(const RunConfig& config) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path(config));
  require_path(config.target_test, "target_test");
  Corpus test = load_reported(config.target_test, loaded.scheme, Domain::target, Split::test);

  std::vector<std::vector<int>> pred =
      predict_corpus(loaded.params, loaded.vocab, test, "tgt");
  std::vector<std::vector<int>> gold;
  gold.reserve(test.size());
  for (const auto& s : test.sentences) gold.push_back(s.tags);

  std::vector<MetricRow> rows;
  rows.push_back({"token_accuracy", token_accuracy(gold, pred), ""});
  if (loaded.scheme.has_spans()) {
    SpanF1Result f = span_f1(gold, pred, loaded.scheme);
    rows.push_back({"span_precision", f.precision, ""});
    rows.push_back({"span_recall", f.recall, ""});
    rows.push_back({"span_f1", f.f1, ""});
    for (const auto& [type, prf] : f.per_type) rows.push_back({"span_f1", prf[2], type});

    if (!config.source_train.empty() && !config.target_train.empty()) {
      Corpus src = load_reported(config.source_train, loaded.scheme, Domain::source,
                                 Split::train);
      Corpus tgt = load_reported(config.target_train, loaded.scheme, Domain::target,
                                 Split::train);
      const Corpus* both[] = {&src, &tgt};
      std::set<std::string> oov = oov_lexicon(both, test, loaded.scheme);
      rows.push_back({"oov_recall", oov_recall(test, pred, loaded.scheme, oov), ""});
    }
  }

  if (!config.target_train.empty()) {
    Corpus tgt_train = load_reported(config.target_train, loaded.scheme, Domain::target,
                                     Split::train);
    RelevanceRows train_rel =
        relevance_rows(loaded.params, loaded.vocab, config.train.relevance,
                       config.train.alpha, tgt_train, "tgt");
    RelevanceRows test_rel =
        relevance_rows(loaded.params, loaded.vocab, config.train.relevance,
                       config.train.alpha, test, "tgt");
    RelevancePartition part = partition_strong_weak(train_rel.w_elem, test_rel.w_elem, gold,
                                                    pred, loaded.scheme);
    rows.push_back({"relevance_threshold", part.threshold, ""});
    rows.push_back({"tokens", static_cast<double>(part.strong_class.tokens), "strong"});
    rows.push_back({"tokens", static_cast<double>(part.weak_class.tokens), "weak"});
    rows.push_back({"token_accuracy", part.strong_class.accuracy, "strong"});
    rows.push_back({"token_accuracy", part.weak_class.accuracy, "weak"});
    if (loaded.scheme.kind() == SchemeKind::bio) {
      rows.push_back({"tag_f1", part.strong_class.tag_f1, "strong"});
      rows.push_back({"tag_f1", part.weak_class.tag_f1, "weak"});
    }
  }

  write_metrics_csv(rows, artifact(config, "eval_metrics.csv"));
  for (const auto& r : rows)
    if (r.cls.empty()) std::cout << "evaluate: " << r.metric << " = " << r.value << '\n';
}

void run_relevance_dump(const RunConfig& config) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path(config));
  std::string corpus_path =
      config.dump_corpus.empty() ? config.target_test : config.dump_corpus;
  require_path(corpus_path, "dump_corpus");
  Corpus corpus = load_reported(corpus_path, loaded.scheme, Domain::target, Split::test);
  RelevanceRows rel = relevance_rows(loaded.params, loaded.vocab, config.train.relevance,
                                     config.train.alpha, corpus, "tgt");
  emit_relevance_tsv(corpus, rel, artifact(config, "relevance.tsv"));
  std::cout << "relevance-dump: " << corpus.size() << " sentences -> "
            << artifact(config, "relevance.tsv") << '\n';
}

}  // namespace

void run(const RunConfig& config) {
  if (config.command != "train" && config.command != "evaluate" && config.command != "synth" &&
      config.command != "relevance-dump")
    throw ConfigError("unknown command '" + config.command + "'");

  fs::create_directories(config.out_dir);
  write_text(artifact(config, "config.resolved"), serialize_config(config));

  if (config.command == "synth") {
    run_synth(config);
  } else if (config.command == "train") {
    run_train(config);
  } else if (config.command == "evaluate") {
    run_evaluate(config);
  } else {
    run_relevance_dump(config);
  }
}

int run_cli(int argc, char** argv) {
  try {
    if (argc < 2) {
      std::cerr << "usage: fgkf <train|evaluate|synth|relevance-dump> "
                   "[--config FILE] [--key value ...]\n";
      return 2;
    }
    std::string command = argv[1];
    KeyValues file_pairs, flag_pairs;
    for (int i = 2; i < argc; ++i) {
      std::string arg = argv[i];
      if (arg.rfind("--", 0) != 0)
        throw ConfigError("unexpected argument '" + arg + "'");
      std::string name = arg.substr(2);
      std::string value;
      size_t eq = name.find('=');
      if (eq != std::string::npos) {
        value = name.substr(eq + 1);
        name.resize(eq);
      } else {
        if (i + 1 >= argc) throw ConfigError("flag '--" + name + "' needs a value");
        value = argv[++i];
      }
      if (name == "config") {
        KeyValues from_file = read_config_file(value);
        file_pairs.insert(file_pairs.end(), from_file.begin(), from_file.end());
      } else {
        flag_pairs.emplace_back(std::move(name), std::move(value));
      }
    }
    run(resolve_config(command, file_pairs, flag_pairs));
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fgkf
