// Release gate: one self-contained check per shipping requirement. Each
// criterion prints exactly one [PASS]/[FAIL] line on stdout; diagnostics go
// to stderr; the exit code is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fgkf/analysis.hpp"
#include "fgkf/common.hpp"
#include "fgkf/config.hpp"
#include "fgkf/corpus.hpp"
#include "fgkf/crf.hpp"
#include "fgkf/fusion.hpp"
#include "fgkf/metrics.hpp"
#include "fgkf/relevance.hpp"
#include "fgkf/rng.hpp"
#include "fgkf/run.hpp"
#include "fgkf/seq_model.hpp"
#include "fgkf/synth.hpp"
#include "fgkf/trainer.hpp"
#include "fgkf/value.hpp"
#include "testutil.hpp"

using namespace fgkf;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& why) {
    if (!cond && ok) {
      ok = false;
      detail = why;
    }
  }
};

// ---------------------------------------------------------------- fixtures

SynthOutput small_synth(uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.shared_vocab = 12;
  cfg.source_vocab = 4;
  cfg.target_vocab = 4;
  cfg.tags = 3;
  cfg.source_sentences = 20;
  cfg.target_sentences = 8;
  cfg.dev_sentences = 6;
  cfg.test_sentences = 6;
  cfg.len_min = 3;
  cfg.len_max = 6;
  return synth_generate(cfg);
}

Vocabulary vocab_of(const SynthOutput& data) {
  const Corpus* corpora[] = {&data.source_train, &data.target_train};
  return Vocabulary::build(corpora);
}

TrainConfig small_train_config() {
  TrainConfig tc;
  tc.batch = 4;
  tc.lr = 0.05;
  tc.dropout = 0.0;
  tc.l2 = 0.001;
  tc.teach_steps = 2;
  tc.max_episodes = 2;
  tc.seed = 11;
  tc.emb_dim = 8;
  tc.hidden = 6;
  tc.relevance.caps_n = 4;
  tc.relevance.caps_dim = 4;
  tc.relevance.routing = 2;
  tc.relevance.clf_hidden = 6;
  return tc;
}

// ------------------------------------------- criterion 1: gradient checks

bool criterion1(std::string& note) {
  const auto t0 = Clock::now();
  const char* modes[] = {"fixed", "sample", "element", "multi"};
  double worst = 0.0;
  std::string worst_at;

  for (int trial = 0; trial < 25; ++trial) {
    SynthConfig sc;
    sc.seed = 1000 + trial;
    sc.shared_vocab = 6;
    sc.source_vocab = 2;
    sc.target_vocab = 2;
    sc.tags = 2 + trial % 2;
    sc.source_sentences = 3;
    sc.target_sentences = 3;
    sc.dev_sentences = 2;
    sc.test_sentences = 2;
    sc.len_min = 2;
    sc.len_max = 4;
    SynthOutput data = synth_generate(sc);
    Vocabulary vocab = vocab_of(data);

    TrainConfig tc;
    tc.seed = 77 + trial;
    tc.emb_dim = 3;
    tc.hidden = 2;
    tc.relevance.caps_n = 2;
    tc.relevance.caps_dim = 2;
    tc.relevance.routing = 1 + trial % 2;
    tc.relevance.clf_hidden = 3;
    tc.relevance.mode = trial % 3 == 0 ? "domain-q" : "sample-q";
    tc.alpha.mode = modes[trial % 4];
    tc.alpha.fixed_alpha = 0.5;
    Trainer trainer(tc, data.scheme, vocab, data.source_train, data.target_train,
                    data.target_dev);
    ParamSet& ps = trainer.params();

    const int k = data.scheme.size();
    Rng teach_rng(500 + trial);
    std::vector<std::vector<double>> teachers;
    for (const auto& s : data.target_train.sentences) {
      std::vector<double> rows(s.tokens.size() * k);
      for (size_t r = 0; r < s.tokens.size(); ++r) {
        double z = 0.0;
        for (int c = 0; c < k; ++c) {
          rows[r * k + c] = 0.1 + teach_rng.uniform();
          z += rows[r * k + c];
        }
        for (int c = 0; c < k; ++c) rows[r * k + c] /= z;
      }
      teachers.push_back(std::move(rows));
    }

    auto loss_fn = [&]() -> Value {
      EncoderParams enc = encoder_params(ps, "tgt");
      CrfParams crf = crf_params(ps, "tgt");
      RelevanceParams rel = relevance_params(ps, tc.relevance);
      AlphaParams ap = alpha_params(ps);
      std::vector<SentenceLossInput> batch;
      std::vector<RelevanceOutput> outs;
      std::vector<Domain> labels;
      for (size_t i = 0; i < data.target_train.size(); ++i) {
        const TaggedSentence& s = data.target_train.sentences[i];
        std::vector<int> ids(s.tokens.size());
        for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab.encode(s.tokens[t]);
        Value hidden = bilstm_encode_sentence(enc, ids);
        Value em = emission_scores(crf, hidden);
        SentenceLossInput in;
        in.gold = s.tags;
        in.nll = crf_nll(em, crf, s.tags);
        in.log_probs = trial % 2 ? crf_log_marginals(em, crf) : log_softmax(em, 1);
        in.teacher =
            Value::constant(static_cast<int>(s.tokens.size()), k, teachers[i]);
        RelevanceOutput r = relevance_forward(rel, hidden);
        if (tc.alpha.needs_sample()) in.alpha_samp = alpha_sample(r.w_samp, ap);
        if (tc.alpha.needs_element()) in.alpha_elem = alpha_elem(r.w_elem, ap);
        outs.push_back(r);
        labels.push_back(i % 2 ? Domain::target : Domain::source);
        batch.push_back(std::move(in));
      }
      LossParts parts = target_loss(tc.alpha, batch);
      return add(parts.total, domain_classification_loss(outs, labels));
    };

    std::vector<std::string> names;
    for (const auto& n : ps.names())
      if (n.rfind("src.", 0) != 0) names.push_back(n);

    testutil::FdReport rep = testutil::fd_check(ps, names, loss_fn);
    if (rep.max_err > worst) {
      worst = rep.max_err;
      worst_at = "trial " + std::to_string(trial) + " " + rep.worst;
    }
    if (rep.max_err >= 1e-4) {
      note = "trial " + std::to_string(trial) + " (" + tc.alpha.mode + "): rel err " +
             std::to_string(rep.max_err) + " at " + rep.worst;
      return false;
    }
  }

  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "25 configurations, max rel err " << worst << " (" << worst_at << "), "
     << static_cast<int>(secs) << " s";
  note = os.str();
  if (secs >= 120.0) {
    note += " -- exceeded the 2 minute budget";
    return false;
  }
  return true;
}

// ------------------------------------- criterion 2: brute-force CRF oracle

struct RawCrf {
  std::vector<double> em, trans, start, stop;
  int L = 0, K = 0;
};

RawCrf random_crf(Rng& rng, int L, int K) {
  RawCrf c;
  c.L = L;
  c.K = K;
  auto fill = [&](std::vector<double>& v, size_t n) {
    v.resize(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
  };
  fill(c.em, static_cast<size_t>(L) * K);
  fill(c.trans, static_cast<size_t>(K) * K);
  fill(c.start, K);
  fill(c.stop, K);
  return c;
}

double raw_path_score(const RawCrf& c, const std::vector<int>& path) {
  double s = c.start[path[0]] + c.em[path[0]];
  for (int t = 1; t < c.L; ++t)
    s += c.trans[path[t - 1] * c.K + path[t]] + c.em[t * c.K + path[t]];
  return s + c.stop[path.back()];
}

struct Enumerated {
  double log_z = 0.0;
  std::vector<int> best;
  double best_score = 0.0;
  std::vector<double> marginals;  // L*K
};

Enumerated enumerate_paths(const RawCrf& c) {
  Enumerated out;
  std::vector<int> path(c.L, 0);
  std::vector<std::pair<double, std::vector<int>>> all;
  for (;;) {
    double s = raw_path_score(c, path);
    all.emplace_back(s, path);
    int t = c.L - 1;
    while (t >= 0 && ++path[t] == c.K) path[t--] = 0;
    if (t < 0) break;
  }
  double m = all[0].first;
  for (const auto& [s, p] : all) m = std::max(m, s);
  double z = 0.0;
  for (const auto& [s, p] : all) z += std::exp(s - m);
  out.log_z = m + std::log(z);

  out.best = all[0].second;
  out.best_score = all[0].first;
  for (const auto& [s, p] : all)
    if (s > out.best_score) {
      out.best_score = s;
      out.best = p;
    }

  out.marginals.assign(static_cast<size_t>(c.L) * c.K, 0.0);
  for (const auto& [s, p] : all) {
    double prob = std::exp(s - out.log_z);
    for (int t = 0; t < c.L; ++t) out.marginals[t * c.K + p[t]] += prob;
  }
  return out;
}

CrfParams raw_params(const RawCrf& c) {
  CrfParams p;
  p.trans = Value::constant(c.K, c.K, c.trans);
  p.start = Value::constant(1, c.K, c.start);
  p.stop = Value::constant(1, c.K, c.stop);
  p.tags = c.K;
  return p;
}

bool criterion2(std::string& note) {
  const auto t0 = Clock::now();
  Rng rng(2025);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int L = 1 + rng.uniform_int(5);
    const int K = 1 + rng.uniform_int(4);
    RawCrf c = random_crf(rng, L, K);
    Enumerated oracle = enumerate_paths(c);
    CrfParams p = raw_params(c);
    Value em = Value::constant(L, K, c.em);

    const double log_z = crf_log_partition(em, p).item();
    worst = std::max(worst, std::abs(log_z - oracle.log_z));

    Value marg_v = crf_marginals(em, p);
    std::span<const double> marg = marg_v.data();
    for (size_t j = 0; j < oracle.marginals.size(); ++j)
      worst = std::max(worst, std::abs(marg[j] - oracle.marginals[j]));

    std::vector<int> best = crf_viterbi(em, p);
    if (best != oracle.best) {
      note = "instance " + std::to_string(i) + ": decoded path differs from the oracle";
      return false;
    }
    worst = std::max(worst, std::abs(raw_path_score(c, best) - oracle.best_score));

    std::vector<int> gold(L);
    for (int t = 0; t < L; ++t) gold[t] = rng.uniform_int(K);
    const double nll = crf_nll(em, p, gold).item();
    worst = std::max(worst, std::abs(nll - (oracle.log_z - raw_path_score(c, gold))));

    if (worst >= 1e-8) {
      note = "instance " + std::to_string(i) + ": deviation " + std::to_string(worst);
      return false;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "50 instances, max deviation " << worst << ", " << secs << " s";
  note = os.str();
  return secs < 10.0;
}

// --------------------------------------- criterion 3: loss-algebra identities

std::vector<SentenceLossInput> identity_batch(int k, const Value& alpha_samp,
                                              const std::vector<Value>& alpha_elems) {
  Rng rng(33);
  std::vector<SentenceLossInput> batch;
  int lens[] = {2, 3, 4};
  for (int i = 0; i < 3; ++i) {
    const int L = lens[i];
    std::vector<double> raw(static_cast<size_t>(L) * k);
    for (double& x : raw) x = rng.uniform(-1.5, 1.5);
    std::vector<double> teach(static_cast<size_t>(L) * k);
    for (int r = 0; r < L; ++r) {
      double z = 0.0;
      for (int c = 0; c < k; ++c) {
        teach[r * k + c] = 0.05 + rng.uniform();
        z += teach[r * k + c];
      }
      for (int c = 0; c < k; ++c) teach[r * k + c] /= z;
    }
    SentenceLossInput in;
    in.log_probs = log_softmax(Value::constant(L, k, raw), 1);
    in.teacher = Value::constant(L, k, teach);
    in.nll = Value::constant(1, 1, {0.5 + rng.uniform(0.0, 2.0)});
    in.gold.resize(L);
    for (int& g : in.gold) g = rng.uniform_int(k);
    in.alpha_samp = alpha_samp;
    if (!alpha_elems.empty()) in.alpha_elem = alpha_elems[i];
    batch.push_back(std::move(in));
  }
  return batch;
}

bool criterion3(std::string& note) {
  Criterion c;
  const int k = 3;
  Rng rng(71);

  // (a) a fixed half-and-half gate equals the mean of the two pure losses
  {
    auto batch = identity_batch(k, Value(), {});
    AlphaConfig mid, pure_seq, pure_kd;
    mid.mode = pure_seq.mode = pure_kd.mode = "fixed";
    mid.fixed_alpha = 0.5;
    pure_seq.fixed_alpha = 0.0;
    pure_kd.fixed_alpha = 1.0;
    const double both = target_loss(mid, batch).total.item();
    const double seq = target_loss(pure_seq, batch).total.item();
    const double kd = target_loss(pure_kd, batch).total.item();
    c.require(std::abs(both - 0.5 * (seq + kd)) < 1e-12,
              "half gate is not the mean of the pure losses");

    // the pure sequence loss is exactly the mean sentence nll
    double hand = 0.0;
    for (const auto& in : batch) hand += in.nll.item();
    hand /= static_cast<double>(batch.size());
    c.require(std::abs(seq - hand) < 1e-12, "zero gate deviates from the plain nll");
  }

  // (b) the combined gate is the product, bounded by each factor
  {
    std::vector<double> elems = {0.9, 0.2, 0.7, 0.4, 1.0, 0.05};
    Value a_s = Value::constant(1, 1, {0.37});
    Value a_e = Value::constant(1, static_cast<int>(elems.size()), elems);
    Value prod_v = alpha_multi(a_s, a_e);
    std::span<const double> prod = prod_v.data();
    for (size_t j = 0; j < elems.size(); ++j) {
      c.require(std::abs(prod[j] - 0.37 * elems[j]) < 1e-12, "gate product mismatch");
      c.require(prod[j] <= std::min(0.37, elems[j]) + 1e-12, "product exceeds a factor");
    }
  }

  // (c) a saturated sample gate reduces the combined mode to the element mode
  {
    std::vector<Value> elems;
    int lens[] = {2, 3, 4};
    for (int L : lens) {
      std::vector<double> e(L);
      for (double& x : e) x = rng.uniform();
      elems.push_back(Value::constant(1, L, e));
    }
    auto batch = identity_batch(k, Value::constant(1, 1, {1.0}), elems);
    AlphaConfig multi, element;
    multi.mode = "multi";
    element.mode = "element";
    const double a = target_loss(multi, batch).total.item();
    const double b = target_loss(element, batch).total.item();
    c.require(std::abs(a - b) < 1e-12, "saturated sample gate changed the element loss");
  }

  // (d) an all-zero gate is pure target supervision
  {
    std::vector<Value> zeros;
    int lens[] = {2, 3, 4};
    for (int L : lens) zeros.push_back(Value::constant(1, L, std::vector<double>(L, 0.0)));
    auto batch = identity_batch(k, Value(), zeros);
    AlphaConfig element;
    element.mode = "element";
    LossParts parts = target_loss(element, batch);

    double hand = 0.0;
    for (const auto& in : batch) {
      std::span<const double> lp = in.log_probs.data();
      for (size_t t = 0; t < in.gold.size(); ++t) hand -= lp[t * k + in.gold[t]];
    }
    hand /= static_cast<double>(batch.size());
    c.require(std::abs(parts.total.item() - hand) < 1e-12,
              "zero gate deviates from gold-only supervision");
    c.require(parts.kd.item() == 0.0, "zero gate left a distillation term");
    c.require(parts.mean_alpha == 0.0, "zero gate reported a nonzero mean");
  }

  note = c.ok ? "4 identities at 1e-12" : c.detail;
  return c.ok;
}

// ------------------------------------ criterion 4: training-loop contracts

bool criterion4(std::string& note) {
  Criterion c;
  SynthOutput data = small_synth(404);
  Vocabulary vocab = vocab_of(data);

  for (const char* mode : {"fixed", "sample", "element", "multi"}) {
    TrainConfig tc = small_train_config();
    tc.alpha.mode = mode;
    Trainer tr(tc, data.scheme, vocab, data.source_train, data.target_train,
               data.target_dev);
    tr.refresh_soft_targets();
    const uint64_t src = tr.params().hash_prefix("src.");
    const long forwards = tr.source_forwards();
    const auto frozen = tr.cache().probs;
    tr.target_phase();
    c.require(tr.params().hash_prefix("src.") == src,
              std::string("source weights moved during a ") + mode + " target phase");
    c.require(tr.source_forwards() == forwards,
              "the teacher was re-run instead of read from the cache");
    c.require(tr.cache().probs == frozen, "the cache changed inside an episode");
  }

  {  // the cache refreshes between episodes once the teacher has moved
    TrainConfig tc = small_train_config();
    Trainer tr(tc, data.scheme, vocab, data.source_train, data.target_train,
               data.target_dev);
    tr.refresh_soft_targets();
    const auto before = tr.cache().probs;
    tr.source_phase();
    tr.refresh_soft_targets();
    c.require(tr.cache().probs != before, "a new episode kept stale soft targets");
  }

  {  // zero teach steps leave the source parameters at their initial values
    TrainConfig tc = small_train_config();
    tc.teach_steps = 0;
    Trainer tr(tc, data.scheme, vocab, data.source_train, data.target_train,
               data.target_dev);
    const uint64_t src = tr.params().hash_prefix("src.");
    tr.train();
    c.require(tr.params().hash_prefix("src.") == src,
              "source weights moved although no teach steps were configured");
    c.require(tr.source_updates() == 0, "source update counter moved");
  }

  note = c.ok ? "isolation, cache, and zero-step contracts hold" : c.detail;
  return c.ok;
}

// ------------------------------------- criterion 5: synthetic benchmark

struct BenchScores {
  double overall = 0.0;
  double weak = 0.0;
  double strong = 0.0;
};

BenchScores bench_one(const std::string& method, uint64_t seed, const SynthOutput& data,
                      const Vocabulary& vocab) {
  TrainConfig tc;
  tc.batch = 32;
  tc.lr = 0.12;
  tc.dropout = 0.1;
  tc.l2 = 1e-4;
  tc.teach_steps = 30;
  tc.max_episodes = 14;
  tc.patience = 14;
  tc.seed = seed;
  tc.emb_dim = 24;
  tc.hidden = 24;
  tc.relevance.caps_n = 8;
  tc.relevance.caps_dim = 12;
  tc.relevance.routing = 3;
  tc.relevance.clf_hidden = 24;
  if (method == "target-only") {
    tc.teach_steps = 0;
    tc.alpha.mode = "fixed";
    tc.alpha.fixed_alpha = 0.0;
  } else if (method == "basickd") {
    tc.alpha.mode = "fixed";
    tc.alpha.fixed_alpha = 0.5;
  } else {
    tc.warmup = true;
    tc.warmup_epochs = 3;
    tc.alpha.mode = "multi";
    tc.alpha.tau_init = 4.0;   // sharp gate: discriminate regimes from the start
    tc.alpha.gamma_init = -2.0;
    tc.relevance.mode = "sample-q";
  }

  Trainer trainer(tc, data.scheme, vocab, data.source_train, data.target_train,
                  data.target_dev);
  trainer.train();
  std::vector<std::vector<int>> pred = trainer.predict(data.target_test, "tgt");

  long ok = 0, n = 0, weak_ok = 0, weak_n = 0, strong_ok = 0, strong_n = 0;
  for (size_t i = 0; i < data.target_test.size(); ++i) {
    const auto& gold = data.target_test.sentences[i].tags;
    for (size_t t = 0; t < gold.size(); ++t) {
      const bool hit = pred[i][t] == gold[t];
      ++n;
      ok += hit;
      if (data.test_regime[i][t]) {
        ++strong_n;
        strong_ok += hit;
      } else {
        ++weak_n;
        weak_ok += hit;
      }
    }
  }
  BenchScores s;
  s.overall = static_cast<double>(ok) / n;
  s.weak = static_cast<double>(weak_ok) / weak_n;
  s.strong = static_cast<double>(strong_ok) / strong_n;
  return s;
}

bool criterion5(std::string& note) {
  const auto t0 = Clock::now();
  const uint64_t seeds[] = {1, 2, 3};
  std::map<std::string, std::vector<BenchScores>> results;

  for (uint64_t seed : seeds) {
    SynthConfig sc;  // benchmark defaults: 5000/200 sentences, rho 0.6, rho_s 0.5, 4 tags
    sc.seed = 900 + seed;
    SynthOutput data = synth_generate(sc);
    Vocabulary vocab = vocab_of(data);
    for (const char* method : {"target-only", "basickd", "fgkf"}) {
      const auto m0 = Clock::now();
      BenchScores s = bench_one(method, seed, data, vocab);
      results[method].push_back(s);
      std::fprintf(stderr, "  bench seed %llu %-11s overall %.4f weak %.4f strong %.4f (%.0f s)\n",
                   static_cast<unsigned long long>(seed), method, s.overall, s.weak,
                   s.strong, seconds_since(m0));
    }
  }

  const int n_seeds = static_cast<int>(results["target-only"].size());
  auto mean = [&](const std::string& m) {
    double v = 0.0;
    for (const auto& s : results[m]) v += s.overall;
    return v / n_seeds;
  };
  const double t_only = mean("target-only"), kd = mean("basickd"), fg = mean("fgkf");

  int kd_weak_drops = 0, fg_weak_holds = 0;
  for (int i = 0; i < n_seeds; ++i) {
    kd_weak_drops += results["basickd"][i].weak < results["target-only"][i].weak;
    fg_weak_holds += results["fgkf"][i].weak >= results["target-only"][i].weak;
  }

  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "mean accuracy target-only " << t_only << ", basic distillation " << kd
     << ", fine-grained " << fg << "; weak-token drops " << kd_weak_drops
     << "/3, holds " << fg_weak_holds << "/3; " << static_cast<int>(secs) << " s";
  note = os.str();

  Criterion c;
  c.require(kd > t_only, "basic distillation did not beat target-only overall");
  c.require(fg >= kd, "fine-grained fusion fell below basic distillation");
  c.require(kd_weak_drops >= 2,
            "basic distillation did not hurt weakly-relevant tokens in 2 of 3 seeds");
  c.require(fg_weak_holds >= 2,
            "fine-grained fusion did not protect weakly-relevant tokens in 2 of 3 seeds");
  c.require(secs < 1800.0, "benchmark exceeded the 30 minute budget");
  if (!c.ok) note += " -- " + c.detail;
  return c.ok;
}

// --------------------------------------- criterion 6: relevance properties

bool criterion6(std::string& note) {
  Criterion c;
  SynthOutput data = small_synth(505);
  Vocabulary vocab = vocab_of(data);
  TrainConfig tc = small_train_config();
  Trainer trainer(tc, data.scheme, vocab, data.source_train, data.target_train,
                  data.target_dev);
  ParamSet& ps = trainer.params();
  EncoderParams enc = encoder_params(ps, "tgt");
  RelevanceParams rel = relevance_params(ps, tc.relevance);

  for (const auto& s : data.target_train.sentences) {
    std::vector<int> ids(s.tokens.size());
    for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab.encode(s.tokens[t]);
    Value hidden = bilstm_encode_sentence(enc, ids);

    RelevanceOutput out = relevance_forward(rel, hidden);
    double sum = 0.0;
    for (double w : out.w_hat.data()) sum += w;
    c.require(std::abs(sum - 1.0) < 1e-12, "normalized weights do not sum to one");
  }

  {  // the squashing nonlinearity keeps every row inside the unit ball
    Rng rng(606);
    for (double scale_by : {1e-6, 1.0, 1e3, 1e6}) {
      const int rows = 1 + static_cast<int>(rng.uniform_int(5));
      const int cols = 1 + static_cast<int>(rng.uniform_int(8));
      std::vector<double> raw(static_cast<size_t>(rows) * cols);
      for (double& x : raw) x = rng.normal() * scale_by;
      if (rows > 1) std::fill_n(raw.begin(), cols, 0.0);  // include an all-zero row
      Value squashed = squash_rows(Value::constant(rows, cols, raw));
      for (int r = 0; r < rows; ++r) {
        double n2 = 0.0;
        for (int j = 0; j < cols; ++j) n2 += squashed.at(r, j) * squashed.at(r, j);
        c.require(std::sqrt(n2) < 1.0, "squashed row escaped the unit ball");
      }
    }
  }

  {  // an untrained (all-zero) classifier is exactly undecided
    for (const char* name : {"rel.clf.w1", "rel.clf.b1", "rel.clf.w2", "rel.clf.b2"}) {
      auto d = ps.get(name).leaf_data();
      std::fill(d.begin(), d.end(), 0.0);
    }
    const TaggedSentence& s = data.target_train.sentences[0];
    std::vector<int> ids(s.tokens.size());
    for (size_t t = 0; t < s.tokens.size(); ++t) ids[t] = vocab.encode(s.tokens[t]);
    Value hidden = bilstm_encode_sentence(enc, ids);
    RelevanceOutput out = relevance_forward(rel, hidden);
    c.require(std::abs(out.w_samp.item() - 0.5) < 1e-12,
              "zero classifier is not exactly undecided");
  }

  {  // the sample gate is strictly increasing in the relevance score
    AlphaParams ap = alpha_params(ps);  // positive initial temperature
    c.require(ap.tau.item() > 0.0, "initial gate temperature is not positive");
    double prev = -1.0;
    for (double w : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double a = alpha_sample(Value::constant(1, 1, {w}), ap).item();
      c.require(a > prev, "sample gate is not strictly increasing");
      prev = a;
    }
  }

  note = c.ok ? "normalization, boundedness, neutrality, monotonicity hold" : c.detail;
  return c.ok;
}

// ------------------------------------------ criterion 7: reproducibility

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool criterion7(std::string& note) {
  Criterion c;
  const fs::path base = "acceptance_repro";
  fs::remove_all(base);
  fs::create_directories(base);

  // The commands log progress to stdout; keep the gate output one line per
  // criterion by swallowing it for the duration of this check.
  std::ostringstream sink;
  std::streambuf* saved = std::cout.rdbuf(sink.rdbuf());
  struct Restore {
    std::streambuf* buf;
    ~Restore() { std::cout.rdbuf(buf); }
  } restore{saved};

  KeyValues synth_kv = {{"seed", "21"},          {"shared_vocab", "12"},
                        {"source_vocab", "4"},   {"target_vocab", "4"},
                        {"tags", "3"},           {"source_sentences", "20"},
                        {"target_sentences", "8"}, {"dev_sentences", "6"},
                        {"test_sentences", "6"}, {"len_min", "3"},
                        {"len_max", "6"},        {"out_dir", (base / "data").string()}};
  run(resolve_config("synth", {}, synth_kv));

  auto train_into = [&](const std::string& dir) {
    KeyValues kv = {{"method", "fgkf"},
                    {"scheme", "plain"},
                    {"labels", "y0,y1,y2"},
                    {"source_train", (base / "data" / "source_train.txt").string()},
                    {"target_train", (base / "data" / "target_train.txt").string()},
                    {"target_dev", (base / "data" / "target_dev.txt").string()},
                    {"seed", "5"},
                    {"batch", "4"},
                    {"lr", "0.05"},
                    {"dropout", "0.1"},
                    {"teach_steps", "2"},
                    {"max_episodes", "2"},
                    {"emb_dim", "8"},
                    {"hidden", "6"},
                    {"caps_n", "4"},
                    {"caps_dim", "4"},
                    {"routing", "2"},
                    {"clf_hidden", "6"},
                    {"out_dir", dir}};
    run(resolve_config("train", {}, kv));
  };
  train_into((base / "a").string());
  train_into((base / "b").string());

  const std::string metrics_a = read_file(base / "a" / "metrics.csv");
  c.require(!metrics_a.empty(), "first run produced no metrics");
  c.require(metrics_a == read_file(base / "b" / "metrics.csv"),
            "metric histories differ between identical runs");
  c.require(read_file(base / "a" / "checkpoint.txt") ==
                read_file(base / "b" / "checkpoint.txt"),
            "checkpoints differ between identical runs");

  fs::remove_all(base);
  note = c.ok ? "identical seeds give byte-identical metrics and checkpoints" : c.detail;
  return c.ok;
}

// --------------------------------------------- criterion 8: metric oracles

bool criterion8(std::string& note) {
  Criterion c;
  TagScheme bio = TagScheme::bio({"PER", "LOC"});
  const int O = 0, BP = 1, IP = 2, BL = 3, IL = 4;

  using Rows = std::vector<std::vector<int>>;

  {  // 1: perfect prediction
    Rows gold = {{BP, IP, O}, {O, BL}};
    SpanF1Result r = span_f1(gold, gold, bio);
    c.require(r.precision == 1.0 && r.recall == 1.0 && r.f1 == 1.0, "oracle 1");
  }
  {  // 2: predicting no spans scores zero, not undefined
    Rows gold = {{BP, IP, O}};
    Rows pred = {{O, O, O}};
    SpanF1Result r = span_f1(gold, pred, bio);
    c.require(r.precision == 0.0 && r.recall == 0.0 && r.f1 == 0.0, "oracle 2");
  }
  {  // 3: one of two spans, plus one spurious
    Rows gold = {{BP, IP, O, BL}};
    Rows pred = {{BP, IP, O, O}, {}};
    Rows pred2 = {{BP, IP, BL, O}};
    SpanF1Result r = span_f1(gold, pred2, bio);
    c.require(r.match_count == 1 && r.precision == 0.5 && r.recall == 0.5 && r.f1 == 0.5,
              "oracle 3");
    (void)pred;
  }
  {  // 4: right type, wrong boundary
    Rows gold = {{BP, IP, O}};
    Rows pred = {{BP, O, O}};
    SpanF1Result r = span_f1(gold, pred, bio);
    c.require(r.match_count == 0 && r.f1 == 0.0, "oracle 4");
  }
  {  // 5: right boundary, wrong type
    Rows gold = {{BP, IP}};
    Rows pred = {{BL, IL}};
    SpanF1Result r = span_f1(gold, pred, bio);
    c.require(r.match_count == 0 && r.f1 == 0.0, "oracle 5");
  }
  {  // 6: per-type split
    Rows gold = {{BP, IP, O, BL}};
    Rows pred = {{BP, IP, O, O}};
    SpanF1Result r = span_f1(gold, pred, bio);
    c.require(r.per_type.at("PER")[2] == 1.0 && r.per_type.at("LOC")[2] == 0.0,
              "oracle 6");
  }
  {  // 7: segmentation scheme, partial credit
    TagScheme bmes = TagScheme::bmes();
    const int B = 0, M = 1, E = 2, S = 3;
    Rows gold = {{B, M, E, S}};
    Rows pred = {{S, B, E, S}};
    SpanF1Result r = span_f1(gold, pred, bmes);
    const double p = 1.0 / 3.0, rr = 1.0 / 2.0;
    c.require(r.precision == p && r.recall == rr && r.f1 == 2.0 * p * rr / (p + rr),
              "oracle 7");
  }

  auto sent = [](std::vector<std::string> toks, std::vector<int> tags, Domain d) {
    TaggedSentence s;
    s.tokens = std::move(toks);
    s.tags = std::move(tags);
    s.domain = d;
    return s;
  };
  Corpus train_corpus;
  train_corpus.sentences = {sent({"Alice", "runs"}, {BP, O}, Domain::target)};
  const Corpus* train_ptr[] = {&train_corpus};

  {  // 8: only unseen segments count, fully recovered
    Corpus test;
    test.sentences = {sent({"Alice", "met", "Bob"}, {BP, O, BP}, Domain::target)};
    std::set<std::string> oov = oov_lexicon(train_ptr, test, bio);
    c.require(oov == std::set<std::string>{"Bob"}, "oracle 8 lexicon");
    Rows pred = {{O, O, BP}};  // misses the known name, finds the new one
    c.require(oov_recall(test, pred, bio, oov) == 1.0, "oracle 8");
  }
  {  // 9: unseen segment missed entirely
    Corpus test;
    test.sentences = {sent({"Bob", "left"}, {BP, O}, Domain::target)};
    std::set<std::string> oov = oov_lexicon(train_ptr, test, bio);
    Rows pred = {{O, O}};
    c.require(oov_recall(test, pred, bio, oov) == 0.0, "oracle 9");
  }
  {  // 10: two of three unseen segments recovered
    Corpus test;
    test.sentences = {sent({"Bob", "saw", "Carol"}, {BP, O, BP}, Domain::target),
                      sent({"Paris"}, {BL}, Domain::target)};
    std::set<std::string> oov = oov_lexicon(train_ptr, test, bio);
    c.require(oov.size() == 3, "oracle 10 lexicon");
    Rows pred = {{BP, O, O}, {BL}};
    c.require(oov_recall(test, pred, bio, oov) == 2.0 / 3.0, "oracle 10");
  }

  {  // strong/weak micro-average identity
    Rng rng(88);
    Rows gold, pred;
    std::vector<std::vector<double>> train_scores, test_scores;
    for (int i = 0; i < 10; ++i) {
      const int L = 1 + rng.uniform_int(6);
      std::vector<double> sc(L);
      for (double& x : sc) x = rng.uniform(-1.0, 1.0);
      train_scores.push_back(sc);
    }
    for (int i = 0; i < 30; ++i) {
      const int L = 1 + rng.uniform_int(6);
      std::vector<double> sc(L);
      std::vector<int> g(L), p(L);
      for (int t = 0; t < L; ++t) {
        sc[t] = rng.uniform(-1.0, 1.0);
        g[t] = rng.uniform_int(5);
        p[t] = rng.uniform_int(5);
      }
      test_scores.push_back(sc);
      gold.push_back(g);
      pred.push_back(p);
    }
    RelevancePartition part = partition_strong_weak(train_scores, test_scores, gold,
                                                    pred, bio);
    const auto& s = part.strong_class;
    const auto& w = part.weak_class;
    c.require(s.tokens + w.tokens == part.overall.tokens, "partition lost tokens");
    const double micro =
        (s.accuracy * s.tokens + w.accuracy * w.tokens) / (s.tokens + w.tokens);
    c.require(std::abs(micro - part.overall.accuracy) < 1e-12,
              "class accuracies do not micro-average to the overall accuracy");
    c.require(std::abs(part.overall.accuracy - token_accuracy(gold, pred)) < 1e-12,
              "partition accuracy disagrees with the direct computation");
  }

  note = c.ok ? "10 hand oracles exact, micro-average identity at 1e-12" : c.detail;
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int number;
    const char* title;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Entry> entries = {
      {1, "end-to-end gradients match finite differences", criterion1},
      {2, "chain scoring matches brute-force enumeration", criterion2},
      {3, "loss-algebra identities hold", criterion3},
      {4, "training-loop contracts hold", criterion4},
      {5, "synthetic benchmark ordering holds", criterion5},
      {6, "relevance model properties hold", criterion6},
      {7, "repeated runs are byte-identical", criterion7},
      {8, "metric implementations match hand oracles", criterion8},
  };

  // Optional arguments select a subset of criteria by number.
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& e : entries) {
    if (!selected.empty() && !selected.count(e.number)) continue;
    std::string note;
    bool ok = false;
    try {
      ok = e.fn(note);
    } catch (const std::exception& ex) {
      note = std::string("exception: ") + ex.what();
    }
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", e.number, e.title,
                note.c_str());
    std::fflush(stdout);
    failures += !ok;
  }
  return failures;
}
