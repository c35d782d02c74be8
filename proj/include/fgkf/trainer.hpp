#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgkf/analysis.hpp"
#include "fgkf/corpus.hpp"
#include "fgkf/crf.hpp"
#include "fgkf/fusion.hpp"
#include "fgkf/params.hpp"
#include "fgkf/relevance.hpp"
#include "fgkf/rng.hpp"
#include "fgkf/seq_model.hpp"

namespace fgkf {

struct TrainConfig {
  int batch = 64;
  double lr = 0.01;
  double dropout = 0.2;
  double l2 = 0.1;
  double clip = 5.0;
  int teach_steps = 100;  // source SGD steps per episode
  bool warmup = false;
  int warmup_epochs = 3;
  bool share_embedding = true;
  int patience = 5;
  int max_episodes = 100;
  uint64_t seed = 1;
  std::string distill = "marginals";  // marginals | emissions
  double soft_temp = 1.0;
  int emb_dim = 100;
  int hidden = 100;
  AlphaConfig alpha;
  RelevanceConfig relevance;

  void validate() const;
};

// Teacher distributions for every target training sentence, refreshed once
// per episode right after the source phase.
struct SoftTargetCache {
  std::vector<std::vector<double>> probs;  // per sentence, length*K row-major
  int tags = 0;
  int episode = -1;
};

class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  bool offer(double metric);  // true on strict improvement
  bool should_stop() const { return counter_ > patience_; }
  double best() const { return best_; }
  int since_best() const { return counter_; }

 private:
  int patience_;
  int counter_ = 0;
  double best_ = 0.0;
  bool any_ = false;
};

struct EpisodeRow {
  int episode = 0;
  double loss_source = 0.0;
  double loss_target = 0.0;
  double loss_seq = 0.0;
  double loss_kd = 0.0;
  double dev_metric = 0.0;
  double mean_alpha = 0.0;
};

void write_history_csv(const std::vector<EpisodeRow>& rows, const std::string& path);

// Decoding and relevance scoring over an existing parameter set; used both
// by the trainer and by checkpoint-driven evaluation.
std::vector<std::vector<int>> predict_corpus(ParamSet& ps, const Vocabulary& vocab,
                                             const Corpus& corpus, const std::string& prefix);
RelevanceRows relevance_rows(ParamSet& ps, const Vocabulary& vocab,
                             const RelevanceConfig& rel, const AlphaConfig& alpha,
                             const Corpus& corpus, const std::string& prefix);

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const Vocabulary& vocab, const TagScheme& scheme);
struct LoadedCheckpoint {
  ParamSet params;
  Vocabulary vocab;
  TagScheme scheme;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

class Trainer {
 public:
  Trainer(TrainConfig config, TagScheme scheme, Vocabulary vocab, Corpus source_train,
          Corpus target_train, Corpus target_dev);

  // Algorithm phases, public so contracts are testable in isolation.
  void warmup_phase();
  void source_phase();
  void refresh_soft_targets();
  void target_phase();
  double evaluate_dev();

  struct Result {
    std::vector<EpisodeRow> history;
    double best_dev = 0.0;
    int best_episode = 0;
    int episodes_run = 0;
  };
  Result train();

  std::vector<std::vector<int>> predict(const Corpus& corpus, const std::string& prefix);
  // Raw/normalized relevance and the alpha each position would receive,
  // computed with dropout off.
  RelevanceRows relevance_scores(const Corpus& corpus, const std::string& prefix);

  ParamSet& params() { return ps_; }
  const SoftTargetCache& cache() const { return cache_; }
  const TagScheme& scheme() const { return scheme_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TrainConfig& config() const { return config_; }

  // Counters backing the caching/counting contracts.
  long source_forwards() const { return source_forwards_; }
  long source_updates() const { return source_updates_; }

 private:
  struct SentenceForward;
  Value sentence_nll(const std::string& prefix, const TaggedSentence& s, bool train_mode);
  std::vector<Value> batch_nlls(const std::string& prefix, const Corpus& corpus,
                                std::span<const int> indices, bool train_mode);
  void classification_step(const std::string& prefix, const Corpus& corpus,
                           std::span<const int> indices, Domain label,
                           const std::vector<std::string>& update_names);

  TrainConfig config_;
  TagScheme scheme_;
  Vocabulary vocab_;
  Corpus source_train_;
  Corpus target_train_;
  Corpus target_dev_;
  ParamSet ps_;
  Rng rng_;
  SoftTargetCache cache_;
  int episode_ = 0;

  std::vector<std::string> source_names_;
  std::vector<std::string> source_cls_names_;
  std::vector<std::string> target_names_;
  std::vector<std::string> target_cls_names_;

  long source_forwards_ = 0;
  long source_updates_ = 0;

  // Per-episode diagnostics gathered by the phases for history rows.
  double ep_loss_source_ = 0.0;
  int ep_source_steps_ = 0;
  double ep_loss_target_ = 0.0, ep_loss_seq_ = 0.0, ep_loss_kd_ = 0.0, ep_alpha_ = 0.0;
  int ep_target_batches_ = 0;
};

}  // namespace fgkf
