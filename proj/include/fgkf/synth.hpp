#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgkf/corpus.hpp"

namespace fgkf {

// Two-domain corpus generator. A source HMM and a base target HMM share a
// vocabulary core; the effective target tables are an interpolation pulled
// toward the source tables by `rho`. Each target sentence is drawn from the
// source regime with probability `rho_s` (its tokens are flagged 1 in the
// side-channel regime file) or from the target regime (flagged 0).
struct SynthConfig {
  uint64_t seed = 1;
  int shared_vocab = 60;
  int source_vocab = 20;  // emitted only by the source regime
  int target_vocab = 20;  // emitted only by the target regime
  int tags = 4;
  double rho = 0.6;
  double rho_s = 0.5;
  int source_sentences = 5000;
  int target_sentences = 200;
  int dev_sentences = 200;
  int test_sentences = 400;
  int len_min = 4;
  int len_max = 12;
  double start_conc = 1.0;
  double trans_conc = 0.5;
  double emit_conc = 0.1;
  std::string scheme = "plain";  // plain | bmes

  void validate() const;
};

struct HmmTables {
  std::vector<double> start;               // K
  std::vector<std::vector<double>> trans;  // K x K
  std::vector<std::vector<double>> emit;   // K x V over the full vocabulary
};

// Per-sentence, per-token {0,1} regime flags. Kept outside Corpus on
// purpose: training code never sees them.
using RegimeFlags = std::vector<std::vector<int>>;

struct SynthOutput {
  TagScheme scheme;
  Corpus source_train;
  Corpus target_train;
  Corpus target_dev;
  Corpus target_test;
  RegimeFlags train_regime;
  RegimeFlags dev_regime;
  RegimeFlags test_regime;
  HmmTables source_hmm;
  HmmTables target_hmm;  // interpolated tables actually sampled from
};

SynthOutput synth_generate(const SynthConfig& config);

// Mirrors the column corpus layout: one flag per token line, blank line
// between sentences.
void write_regime_file(const RegimeFlags& flags, const std::string& path);
RegimeFlags load_regime_file(const std::string& path);

}  // namespace fgkf
