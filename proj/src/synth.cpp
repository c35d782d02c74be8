#include "fgkf/synth.hpp"

#include <cmath>
#include <fstream>

#include "fgkf/common.hpp"
#include "fgkf/rng.hpp"

namespace fgkf {
namespace {

int sample_categorical(Rng& rng, const std::vector<double>& probs) {
  double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Dirichlet draw over `support` scattered into a length-`size` row.
std::vector<double> masked_row(Rng& rng, int size, const std::vector<int>& support,
                               double conc) {
  std::vector<double> draw = rng.dirichlet(support.size(), conc);
  std::vector<double> row(size, 0.0);
  for (size_t i = 0; i < support.size(); ++i) row[support[i]] = draw[i];
  return row;
}

void check_stochastic(const HmmTables& hmm, const std::string& who) {
  auto check = [&](const std::vector<double>& row, const std::string& what) {
    double s = 0.0;
    for (double p : row) s += p;
    if (std::abs(s - 1.0) > 1e-12)
      throw DataError(who + " " + what + " row is not stochastic");
  };
  check(hmm.start, "start");
  for (const auto& r : hmm.trans) check(r, "transition");
  for (const auto& r : hmm.emit) check(r, "emission");
}

std::vector<int> iota_range(int lo, int hi) {
  std::vector<int> v;
  for (int i = lo; i < hi; ++i) v.push_back(i);
  return v;
}

}  // namespace

void SynthConfig::validate() const {
  if (shared_vocab < 1 || source_vocab < 0 || target_vocab < 0)
    throw ConfigError("synth vocabulary sizes must be positive");
  if (tags < 2) throw ConfigError("synth needs at least 2 tags");
  if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0,1]");
  if (rho_s < 0.0 || rho_s > 1.0) throw ConfigError("rho_s must lie in [0,1]");
  if (len_min < 1 || len_max < len_min) throw ConfigError("bad sentence length range");
  if (source_sentences < 1 || target_sentences < 1 || dev_sentences < 1 ||
      test_sentences < 1)
    throw ConfigError("synth corpus sizes must be positive");
  if (scheme != "plain" && scheme != "bmes")
    throw ConfigError("synth scheme must be plain or bmes");
  if (scheme == "bmes" && tags != 4) throw ConfigError("bmes needs tags=4");
}

SynthOutput synth_generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);

  const int K = config.tags;
  const int V = config.shared_vocab + config.source_vocab + config.target_vocab;
  const bool bmes = config.scheme == "bmes";

  TagScheme scheme = [&] {
    if (bmes) return TagScheme::bmes();
    std::vector<std::string> labels;
    for (int k = 0; k < K; ++k) labels.push_back("y" + std::to_string(k));
    return TagScheme::plain(labels);
  }();

  auto surface = [&](int id) {
    if (id < config.shared_vocab) return "w" + std::to_string(id);
    if (id < config.shared_vocab + config.source_vocab)
      return "s" + std::to_string(id - config.shared_vocab);
    return "t" + std::to_string(id - config.shared_vocab - config.source_vocab);
  };

  auto draw_hmm = [&](const std::vector<int>& emit_support) {
    HmmTables hmm;
    if (bmes) {
      std::vector<int> starts;
      for (int k = 0; k < K; ++k)
        if (scheme.legal_start(k)) starts.push_back(k);
      hmm.start = masked_row(rng, K, starts, config.start_conc);
      for (int k = 0; k < K; ++k) {
        std::vector<int> nexts;
        for (int j = 0; j < K; ++j)
          if (scheme.legal_transition(k, j)) nexts.push_back(j);
        hmm.trans.push_back(masked_row(rng, K, nexts, config.trans_conc));
      }
    } else {
      hmm.start = masked_row(rng, K, iota_range(0, K), config.start_conc);
      for (int k = 0; k < K; ++k)
        hmm.trans.push_back(masked_row(rng, K, iota_range(0, K), config.trans_conc));
    }
    for (int k = 0; k < K; ++k)
      hmm.emit.push_back(masked_row(rng, V, emit_support, config.emit_conc));
    return hmm;
  };

  std::vector<int> source_support = iota_range(0, config.shared_vocab + config.source_vocab);
  std::vector<int> target_support = iota_range(0, config.shared_vocab);
  for (int id : iota_range(config.shared_vocab + config.source_vocab, V))
    target_support.push_back(id);

  HmmTables source_hmm = draw_hmm(source_support);
  HmmTables base_hmm = draw_hmm(target_support);

  HmmTables target_hmm;
  auto mix = [&](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i)
      out[i] = config.rho * a[i] + (1.0 - config.rho) * b[i];
    return out;
  };
  target_hmm.start = mix(source_hmm.start, base_hmm.start);
  for (int k = 0; k < K; ++k) {
    target_hmm.trans.push_back(mix(source_hmm.trans[k], base_hmm.trans[k]));
    target_hmm.emit.push_back(mix(source_hmm.emit[k], base_hmm.emit[k]));
  }
  check_stochastic(source_hmm, "source");
  check_stochastic(target_hmm, "target");

  auto sample_sentence = [&](const HmmTables& hmm, Domain domain) {
    TaggedSentence s;
    s.domain = domain;
    int len = config.len_min + rng.uniform_int(config.len_max - config.len_min + 1);
    int state = sample_categorical(rng, hmm.start);
    for (int t = 0; t < len; ++t) {
      if (t > 0) state = sample_categorical(rng, hmm.trans[state]);
      s.tags.push_back(state);
      s.tokens.push_back(surface(sample_categorical(rng, hmm.emit[state])));
    }
    if (bmes) {
      // A random walk can stop mid-word; close it so the gold is legal.
      if (s.tags.back() == 0) s.tags.back() = 3;
      if (s.tags.back() == 1) s.tags.back() = 2;
    }
    return s;
  };

  SynthOutput out{scheme, {}, {}, {}, {}, {}, {}, {}, std::move(source_hmm),
                  std::move(target_hmm)};
  out.source_train.domain = Domain::source;
  out.source_train.split = Split::train;
  for (int i = 0; i < config.source_sentences; ++i)
    out.source_train.sentences.push_back(sample_sentence(out.source_hmm, Domain::source));

  auto fill_target = [&](Corpus& corpus, RegimeFlags& flags, Split split, int count) {
    corpus.domain = Domain::target;
    corpus.split = split;
    for (int i = 0; i < count; ++i) {
      bool strong = rng.uniform() < config.rho_s;
      TaggedSentence s =
          sample_sentence(strong ? out.source_hmm : out.target_hmm, Domain::target);
      flags.emplace_back(s.tokens.size(), strong ? 1 : 0);
      corpus.sentences.push_back(std::move(s));
    }
  };
  fill_target(out.target_train, out.train_regime, Split::train, config.target_sentences);
  fill_target(out.target_dev, out.dev_regime, Split::dev, config.dev_sentences);
  fill_target(out.target_test, out.test_regime, Split::test, config.test_sentences);
  return out;
}

void write_regime_file(const RegimeFlags& flags, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write regime file: " + path);
  for (const auto& sentence : flags) {
    for (int f : sentence) out << f << '\n';
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

RegimeFlags load_regime_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open regime file: " + path);
  RegimeFlags flags;
  std::vector<int> cur;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!cur.empty()) flags.push_back(std::move(cur));
      cur = {};
      continue;
    }
    if (line != "0" && line != "1")
      throw DataError(path + ":" + std::to_string(lineno) + ": regime flag must be 0 or 1");
    cur.push_back(line == "1" ? 1 : 0);
  }
  if (!cur.empty()) flags.push_back(std::move(cur));
  return flags;
}

}  // namespace fgkf
