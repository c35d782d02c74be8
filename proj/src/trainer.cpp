#include "fgkf/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fgkf/common.hpp"
#include "fgkf/metrics.hpp"

namespace fgkf {

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("batch size must be positive");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
  if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
  if (clip <= 0.0) throw ConfigError("clip must be positive");
  if (teach_steps < 0) throw ConfigError("teach steps must be non-negative");
  if (warmup_epochs < 0) throw ConfigError("warm-up epochs must be non-negative");
  if (patience < 0) throw ConfigError("patience must be non-negative");
  if (max_episodes < 1) throw ConfigError("max episodes must be positive");
  if (distill != "marginals" && distill != "emissions")
    throw ConfigError("distill must be marginals or emissions");
  if (soft_temp <= 0.0) throw ConfigError("soft-target temperature must be positive");
  if (emb_dim < 1 || hidden < 1) throw ConfigError("model dimensions must be positive");
  alpha.validate();
}

bool EarlyStopper::offer(double metric) {
  if (!any_ || metric > best_) {
    any_ = true;
    best_ = metric;
    counter_ = 0;
    return true;
  }
  ++counter_;
  return false;
}

Trainer::Trainer(TrainConfig config, TagScheme scheme, Vocabulary vocab, Corpus source_train,
                 Corpus target_train, Corpus target_dev)
    : config_(std::move(config)),
      scheme_(std::move(scheme)),
      vocab_(std::move(vocab)),
      source_train_(std::move(source_train)),
      target_train_(std::move(target_train)),
      target_dev_(std::move(target_dev)),
      rng_(config_.seed) {
  config_.validate();
  if (target_train_.size() == 0) throw DataError("target training corpus is empty");
  if (target_dev_.size() == 0) throw DataError("target dev corpus is empty");
  if (source_train_.size() == 0 && (config_.teach_steps > 0 || config_.warmup))
    throw DataError("source corpus is empty but source training is requested");

  ModelDims dims{vocab_.size(), config_.emb_dim, config_.hidden, scheme_.size()};
  if (config_.share_embedding) {
    init_shared_embedding(ps_, dims.vocab, dims.emb, rng_);
  } else {
    double radius = std::sqrt(3.0 / dims.emb);
    ps_.create_uniform("src.emb.table", dims.vocab, dims.emb, rng_, radius);
    ps_.create_uniform("tgt.emb.table", dims.vocab, dims.emb, rng_, radius);
  }
  init_tagger(ps_, "src", dims, rng_);
  init_tagger(ps_, "tgt", dims, rng_);
  init_relevance(ps_, config_.relevance, 2 * dims.hidden, rng_);
  init_alpha(ps_, config_.alpha);

  using sv = std::string_view;
  const sv src_set[] = {"src.", "emb."};
  const sv src_cls_set[] = {"src.", "emb.", "rel."};
  const sv tgt_set[] = {"tgt.", "emb.", "rel.", "alpha."};
  const sv tgt_cls_set[] = {"tgt.", "emb.", "rel."};
  source_names_ = ps_.names(src_set);
  source_cls_names_ = ps_.names(src_cls_set);
  target_names_ = ps_.names(tgt_set);
  target_cls_names_ = ps_.names(tgt_cls_set);
}

Value Trainer::sentence_nll(const std::string& prefix, const TaggedSentence& s,
                            bool train_mode) {
  EncoderParams enc = encoder_params(ps_, prefix);
  CrfParams crf = crf_params(ps_, prefix);
  std::vector<int> ids(s.tokens.size());
  for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab_.encode(s.tokens[t]);
  EncodeOptions opt;
  if (train_mode && config_.dropout > 0.0) {
    opt.dropout = config_.dropout;
    opt.rng = &rng_;
  }
  if (prefix == "src") ++source_forwards_;
  Value hidden = bilstm_encode_sentence(enc, ids, opt);
  Value em = emission_scores(crf, hidden);
  return crf_nll(em, crf, s.tags);
}

std::vector<Value> Trainer::batch_nlls(const std::string& prefix, const Corpus& corpus,
                                       std::span<const int> indices, bool train_mode) {
  std::vector<Value> nlls;
  nlls.reserve(indices.size());
  for (int i : indices) nlls.push_back(sentence_nll(prefix, corpus.sentences[i], train_mode));
  return nlls;
}

void Trainer::classification_step(const std::string& prefix, const Corpus& corpus,
                                  std::span<const int> indices, Domain label,
                                  const std::vector<std::string>& update_names) {
  EncoderParams enc = encoder_params(ps_, prefix);
  RelevanceParams rel = relevance_params(ps_, config_.relevance);
  std::vector<RelevanceOutput> outputs;
  std::vector<Domain> labels;
  for (int i : indices) {
    const TaggedSentence& s = corpus.sentences[i];
    std::vector<int> ids(s.tokens.size());
    for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab_.encode(s.tokens[t]);
    EncodeOptions opt;
    RelevanceOptions ropt;
    if (config_.dropout > 0.0) {
      opt.dropout = config_.dropout;
      opt.rng = &rng_;
      ropt.dropout = config_.dropout;
      ropt.rng = &rng_;
    }
    if (prefix == "src") ++source_forwards_;
    Value hidden = bilstm_encode_sentence(enc, ids, opt);
    outputs.push_back(relevance_forward(rel, hidden, ropt));
    labels.push_back(label);
  }
  Value loss = domain_classification_loss(outputs, labels);
  backward(loss);
  sgd_update_map(ps_, ps_.current_gradients(update_names), config_.lr, config_.l2,
                 config_.clip);
  if (prefix == "src") ++source_updates_;
}

void Trainer::warmup_phase() {
  if (!config_.warmup) return;
  std::vector<int> order(source_train_.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config_.warmup_epochs; ++epoch) {
    rng_.shuffle(order);
    for (size_t at = 0; at < order.size(); at += config_.batch) {
      size_t end = std::min(order.size(), at + config_.batch);
      std::span<const int> idx(order.data() + at, end - at);
      Value loss = mean_loss(batch_nlls("src", source_train_, idx, true));
      backward(loss);
      sgd_update_map(ps_, ps_.current_gradients(source_names_), config_.lr, config_.l2,
                     config_.clip);
    }
  }
  ps_.copy_prefix("src.", "tgt.");
}

void Trainer::source_phase() {
  ep_loss_source_ = 0.0;
  ep_source_steps_ = 0;
  if (config_.teach_steps > 0 && source_train_.size() == 0)
    throw DataError("source phase requested with no source data");
  int m = static_cast<int>(source_train_.size());
  for (int step = 0; step < config_.teach_steps; ++step) {
    std::vector<int> idx(std::min(config_.batch, m));
    for (auto& i : idx) i = rng_.uniform_int(m);

    Value loss = mean_loss(batch_nlls("src", source_train_, idx, true));
    backward(loss);
    sgd_update_map(ps_, ps_.current_gradients(source_names_), config_.lr, config_.l2,
                   config_.clip);
    ++source_updates_;
    ep_loss_source_ += loss.item();
    ++ep_source_steps_;

    classification_step("src", source_train_, idx, Domain::source, source_cls_names_);
  }
}

void Trainer::refresh_soft_targets() {
  EncoderParams enc = encoder_params(ps_, "src");
  CrfParams crf = crf_params(ps_, "src");
  cache_.probs.assign(target_train_.size(), {});
  cache_.tags = scheme_.size();
  cache_.episode = episode_;
  for (size_t i = 0; i < target_train_.size(); ++i) {
    const TaggedSentence& s = target_train_.sentences[i];
    std::vector<int> ids(s.tokens.size());
    for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab_.encode(s.tokens[t]);
    ++source_forwards_;
    Value hidden = bilstm_encode_sentence(enc, ids, {});
    Value em = emission_scores(crf, hidden);
    Value probs = config_.distill == "marginals" ? crf_marginals(em, crf) : softmax(em, 1);
    std::span<const double> d = probs.data();
    std::vector<double> row(d.begin(), d.end());
    if (config_.soft_temp != 1.0) {
      int k = cache_.tags;
      for (size_t r = 0; r < row.size() / k; ++r) {
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
          row[r * k + c] = std::pow(row[r * k + c], 1.0 / config_.soft_temp);
          sum += row[r * k + c];
        }
        for (int c = 0; c < k; ++c) row[r * k + c] /= sum;
      }
    }
    cache_.probs[i] = std::move(row);
  }
}

void Trainer::target_phase() {
  ep_loss_target_ = ep_loss_seq_ = ep_loss_kd_ = ep_alpha_ = 0.0;
  ep_target_batches_ = 0;
  if (cache_.probs.size() != target_train_.size())
    throw DataError("soft-target cache does not cover the target training set");

  EncoderParams enc = encoder_params(ps_, "tgt");
  CrfParams crf = crf_params(ps_, "tgt");
  RelevanceParams rel = relevance_params(ps_, config_.relevance);
  AlphaParams ap = alpha_params(ps_);
  const AlphaConfig& mode = config_.alpha;
  const bool need_probs = mode.mode != "fixed" || mode.fixed_alpha > 0.0;
  const bool need_nll = mode.mode == "fixed" || mode.mode == "sample";
  const bool need_rel = mode.needs_sample() || mode.needs_element();
  const int k = scheme_.size();

  std::vector<int> order(target_train_.size());
  std::iota(order.begin(), order.end(), 0);
  rng_.shuffle(order);

  for (size_t at = 0; at < order.size(); at += config_.batch) {
    size_t end = std::min(order.size(), at + config_.batch);
    std::span<const int> idx(order.data() + at, end - at);

    std::vector<SentenceLossInput> inputs;
    inputs.reserve(idx.size());
    for (int i : idx) {
      const TaggedSentence& s = target_train_.sentences[i];
      std::vector<int> ids(s.tokens.size());
      for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab_.encode(s.tokens[t]);
      EncodeOptions opt;
      RelevanceOptions ropt;
      if (config_.dropout > 0.0) {
        opt.dropout = config_.dropout;
        opt.rng = &rng_;
        ropt.dropout = config_.dropout;
        ropt.rng = &rng_;
      }
      Value hidden = bilstm_encode_sentence(enc, ids, opt);
      Value em = emission_scores(crf, hidden);

      SentenceLossInput in;
      in.gold = s.tags;
      if (need_nll) in.nll = crf_nll(em, crf, s.tags);
      if (need_probs) {
        in.log_probs = config_.distill == "marginals" ? crf_log_marginals(em, crf)
                                                      : log_softmax(em, 1);
        in.teacher = Value::constant(static_cast<int>(s.tokens.size()), k, cache_.probs[i]);
      }
      if (need_rel) {
        RelevanceOutput r = relevance_forward(rel, hidden, ropt);
        if (mode.needs_sample()) in.alpha_samp = alpha_sample(r.w_samp, ap);
        if (mode.needs_element()) in.alpha_elem = alpha_elem(r.w_elem, ap);
      }
      inputs.push_back(std::move(in));
    }

    LossParts parts = target_loss(mode, inputs);
    backward(parts.total);
    sgd_update_map(ps_, ps_.current_gradients(target_names_), config_.lr, config_.l2,
                   config_.clip);
    ep_loss_target_ += parts.total.item();
    ep_loss_seq_ += parts.seq.item();
    ep_loss_kd_ += parts.kd.item();
    ep_alpha_ += parts.mean_alpha;
    ++ep_target_batches_;

    classification_step("tgt", target_train_, idx, Domain::target, target_cls_names_);
  }
}

double Trainer::evaluate_dev() {
  std::vector<std::vector<int>> pred = predict(target_dev_, "tgt");
  std::vector<std::vector<int>> gold;
  gold.reserve(target_dev_.size());
  for (const auto& s : target_dev_.sentences) gold.push_back(s.tags);
  if (scheme_.has_spans()) return span_f1(gold, pred, scheme_).f1;
  return token_accuracy(gold, pred);
}

Trainer::Result Trainer::train() {
  warmup_phase();
  EarlyStopper stopper(config_.patience);
  Result result;
  ParamSnapshot best = ps_.snapshot();
  for (episode_ = 1; episode_ <= config_.max_episodes; ++episode_) {
    try {
      source_phase();
      refresh_soft_targets();
      target_phase();
    } catch (const NumericError& e) {
      throw NumericError("episode " + std::to_string(episode_) + ": " + e.what());
    }
    EpisodeRow row;
    row.episode = episode_;
    row.loss_source = ep_source_steps_ ? ep_loss_source_ / ep_source_steps_ : 0.0;
    row.loss_target = ep_target_batches_ ? ep_loss_target_ / ep_target_batches_ : 0.0;
    row.loss_seq = ep_target_batches_ ? ep_loss_seq_ / ep_target_batches_ : 0.0;
    row.loss_kd = ep_target_batches_ ? ep_loss_kd_ / ep_target_batches_ : 0.0;
    row.mean_alpha = ep_target_batches_ ? ep_alpha_ / ep_target_batches_ : 0.0;
    row.dev_metric = evaluate_dev();
    result.history.push_back(row);
    result.episodes_run = episode_;
    if (stopper.offer(row.dev_metric)) {
      best = ps_.snapshot();
      result.best_episode = episode_;
      result.best_dev = stopper.best();
    }
    if (stopper.should_stop()) break;
  }
  ps_.restore(best);
  return result;
}

std::vector<std::vector<int>> predict_corpus(ParamSet& ps, const Vocabulary& vocab,
                                             const Corpus& corpus, const std::string& prefix) {
  EncoderParams enc = encoder_params(ps, prefix);
  CrfParams crf = crf_params(ps, prefix);
  std::vector<std::vector<int>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    std::vector<int> ids(s.tokens.size());
    for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab.encode(s.tokens[t]);
    Value hidden = bilstm_encode_sentence(enc, ids, {});
    Value em = emission_scores(crf, hidden);
    out.push_back(crf_viterbi(em, crf));
  }
  return out;
}

RelevanceRows relevance_rows(ParamSet& ps, const Vocabulary& vocab,
                             const RelevanceConfig& rel_config, const AlphaConfig& alpha,
                             const Corpus& corpus, const std::string& prefix) {
  EncoderParams enc = encoder_params(ps, prefix);
  RelevanceParams rel = relevance_params(ps, rel_config);
  AlphaParams ap = alpha_params(ps);
  RelevanceRows rows;
  for (const auto& s : corpus.sentences) {
    std::vector<int> ids(s.tokens.size());
    for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab.encode(s.tokens[t]);
    Value hidden = bilstm_encode_sentence(enc, ids, {});
    RelevanceOutput r = relevance_forward(rel, hidden, {});
    std::span<const double> w = r.w_elem.data();
    std::span<const double> wh = r.w_hat.data();
    rows.w_elem.emplace_back(w.begin(), w.end());
    rows.w_hat.emplace_back(wh.begin(), wh.end());

    std::vector<double> alpha_row(ids.size(), alpha.fixed_alpha);
    if (alpha.mode != "fixed") {
      Value a_samp, a_elem;
      if (alpha.needs_sample()) a_samp = alpha_sample(r.w_samp, ap);
      if (alpha.needs_element()) a_elem = alpha_elem(r.w_elem, ap);
      if (alpha.mode == "sample") {
        alpha_row.assign(ids.size(), a_samp.item());
      } else {
        Value a = alpha.mode == "multi" ? alpha_multi(a_samp, a_elem) : a_elem;
        std::span<const double> ad = a.data();
        alpha_row.assign(ad.begin(), ad.end());
      }
    }
    rows.alpha.push_back(std::move(alpha_row));
  }
  return rows;
}

std::vector<std::vector<int>> Trainer::predict(const Corpus& corpus, const std::string& prefix) {
  if (prefix == "src") source_forwards_ += static_cast<long>(corpus.size());
  return predict_corpus(ps_, vocab_, corpus, prefix);
}

RelevanceRows Trainer::relevance_scores(const Corpus& corpus, const std::string& prefix) {
  if (prefix == "src") source_forwards_ += static_cast<long>(corpus.size());
  return relevance_rows(ps_, vocab_, config_.relevance, config_.alpha, corpus, prefix);
}

void write_history_csv(const std::vector<EpisodeRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write history file: " + path);
  out << "episode,loss_source,loss_target,loss_seq,loss_kd,dev_f1,mean_alpha\n";
  char buf[40];
  for (const auto& r : rows) {
    out << r.episode;
    for (double v : {r.loss_source, r.loss_target, r.loss_seq, r.loss_kd, r.dev_metric,
                     r.mean_alpha}) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const Vocabulary& vocab, const TagScheme& scheme) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << "fgkf-checkpoint 1\n";
  out << "scheme " << scheme_kind_name(scheme.kind()) << ' ' << scheme.size() << '\n';
  for (const auto& label : scheme.labels()) out << label << '\n';
  out << "vocab " << vocab.size() << '\n';
  for (const auto& token : vocab.tokens()) out << token << '\n';
  params.save(out);
  if (!out) throw DataError("write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "fgkf-checkpoint" || version != 1)
    throw DataError("not a recognized checkpoint: " + path);

  std::string word, kind;
  int n = 0;
  in >> word >> kind >> n;
  if (word != "scheme" || n < 1) throw DataError("corrupt checkpoint scheme block");
  std::vector<std::string> labels(n);
  for (auto& l : labels) in >> l;

  TagScheme scheme = [&] {
    if (kind == "bmes") return TagScheme::bmes();
    if (kind == "plain") return TagScheme::plain(labels);
    if (kind == "bio") {
      std::vector<std::string> types;
      for (size_t i = 1; i < labels.size(); i += 2) types.push_back(labels[i].substr(2));
      return TagScheme::bio(types);
    }
    throw DataError("unknown scheme kind in checkpoint: " + kind);
  }();
  if (scheme.labels() != labels) throw DataError("checkpoint label inventory is inconsistent");

  in >> word >> n;
  if (word != "vocab" || n < 2) throw DataError("corrupt checkpoint vocabulary block");
  std::vector<std::string> tokens(n);
  for (auto& t : tokens) in >> t;

  LoadedCheckpoint loaded{ParamSet{}, Vocabulary::from_tokens(std::move(tokens)),
                          std::move(scheme)};
  loaded.params.load(in);
  if (!in) throw DataError("corrupt checkpoint parameter block");
  return loaded;
}

}  // namespace fgkf
